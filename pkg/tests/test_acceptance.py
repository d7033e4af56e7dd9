"""Acceptance suite: every primary criterion at its stated tolerance.

Each test prints one PASS line on success (run with ``pytest -s`` to see
them); failures surface as ordinary assertion errors.  Published per-image
fixtures live in fixtures_jnd.py; two of their columns carry print-rounding
artifacts that are handled explicitly and reported, never silently widened:

* The published distance column is reproduced by the unit-step integer-QF
  evaluation (``bhattacharyya_qf_grid``).  Row 26 of the first-JND table
  (shape -1.38) is hypersensitive to the printed parameter rounding: the
  support edge sits at QF 48.012, so the unrounded shape (anywhere in
  [-1.385, -1.3820)) drops the grid point at QF 48here the printed
  parameters keep it.  The test asserts the printed value lies inside the
  distance range reachable within the +-0.005 print-rounding box.
* A handful of published delta-PSNR entries differ from the difference of
  their own printed operands by exactly one final-digit ulp (0.01 dB);
  those rows are checked against the operand difference and counted.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from surkit import (GevParams, MlpConfig, PsnrCurve, ad_pvalue_bootstrap,
                    bhattacharyya, delta_psnr, fit_mle, fit_sur_lsq,
                    gev_sample, kfold_split, p_jnd, predict_jnd_baseline,
                    run_evaluation, sur_from_params, sur_lsq_residual,
                    save_jnd_csv, save_psnr_csv, write_features)
from surkit.distributions import fit_mle_batch
from surkit.metrics import bhattacharyya_qf_grid
from surkit.mlp import init_model, l1_loss, train, _l1_grads, assemble_input

from conftest import (make_gt_params, make_jnd_table, make_planted_features,
                      make_psnr_curves)
from fixtures_jnd import (ALL_TABLES, MCLJCI_FIRST, MCLJCI_FIRST_AVG,
                          MCLJCI_SECOND, MCLJCI_SECOND_AVG, MCLJCI_THIRD,
                          MCLJCI_THIRD_AVG, gt_params, pred_params)

MCLJCI_TABLES = {
    "first": (MCLJCI_FIRST, MCLJCI_FIRST_AVG),
    "second": (MCLJCI_SECOND, MCLJCI_SECOND_AVG),
    "third": (MCLJCI_THIRD, MCLJCI_THIRD_AVG),
}


def _report(criterion: str, detail: str) -> None:
    print(f"PASS {criterion}: {detail}")


# ---------------------------------------------------------------------------
# C1: distance column fixtures


def test_c01_bhattacharyya_fixtures():
    t0 = time.time()

    # anchor rows by continuous quadrature at their stated tolerances
    r35, r12 = MCLJCI_FIRST[34], MCLJCI_FIRST[11]
    assert bhattacharyya(gt_params(r35), pred_params(r35)) == pytest.approx(0.0073, abs=0.002)
    assert bhattacharyya(gt_params(r12), pred_params(r12)) == pytest.approx(0.4884, abs=0.005)

    artifacts = []
    for name, (rows, _) in MCLJCI_TABLES.items():
        for r in rows:
            printed = r[11]
            tol = max(0.002, 0.02 * printed)
            d = bhattacharyya_qf_grid(gt_params(r), pred_params(r))
            if abs(d - printed) <= tol:
                continue
            # must be explainable by print rounding of the parameters:
            # the printed value has to be reachable inside the +-half-ulp box
            lo, hi = d, d
            for signs in itertools.product((-0.005, 0.005), repeat=6):
                g = GevParams(xi=r[3] + signs[0], mu=r[1] + signs[1], sigma=r[2] + signs[2])
                p = GevParams(xi=r[8] + signs[3], mu=r[6] + signs[4], sigma=r[7] + signs[5])
                v = bhattacharyya_qf_grid(g, p)
                lo, hi = min(lo, v), max(hi, v)
            assert lo - 1e-4 <= printed <= hi + 1e-4, \
                f"{name} row {r[0]}: {d:.4f} vs printed {printed}, outside rounding box"
            artifacts.append((name, r[0]))

    elapsed = time.time() - t0
    assert elapsed < 5.0
    assert len(artifacts) <= 1  # first-JND row 26 is the only known case
    _report("C1 distance fixtures",
            f"150 rows across 3 tables in {elapsed:.2f}s; "
            f"print-rounding artifacts: {artifacts or 'none'}")


# ---------------------------------------------------------------------------
# C2: 50% JND level fixtures


def test_c02_fifty_percent_jnd_fixtures():
    t0 = time.time()
    for name, (rows, _) in MCLJCI_TABLES.items():
        for r in rows:
            gt_level = p_jnd(sur_from_params(gt_params(r)), 50)
            pred_level = p_jnd(sur_from_params(pred_params(r)), 50)
            assert abs(gt_level - r[4]) <= 1, f"{name} row {r[0]} ground truth"
            assert abs(pred_level - r[9]) <= 1, f"{name} row {r[0]} prediction"
            assert r[12] == abs(r[9] - r[4]), f"{name} row {r[0]} level delta"
    elapsed = time.time() - t0
    assert elapsed < 1.0
    _report("C2 50% JND fixtures",
            f"300 levels within +-1 and exact level deltas in {elapsed:.2f}s")


# ---------------------------------------------------------------------------
# C3: delta-PSNR fixtures


def test_c03_delta_psnr_fixtures():
    ulp_rows = []
    for name, (rows, _) in MCLJCI_TABLES.items():
        for r in rows:
            gt_level, gt_psnr = r[4], r[5]
            pred_level, pred_psnr = r[9], r[10]
            if gt_level == pred_level:
                curve = np.full(100, gt_psnr)
            else:
                xs, ys = zip(*sorted([(gt_level, gt_psnr), (pred_level, pred_psnr)]))
                curve = np.interp(np.arange(1, 101), xs, ys)
            got = delta_psnr(curve, gt_level, pred_level)
            assert got == pytest.approx(abs(pred_psnr - gt_psnr), abs=1e-9)
            if abs(got - r[13]) > 0.005:
                # printed column disagrees with its own printed operands by
                # one final-digit ulp; the operation itself is exact
                assert abs(got - r[13]) <= 0.0100001, f"{name} row {r[0]}"
                ulp_rows.append((name, r[0]))
    row1 = MCLJCI_FIRST[0]
    curve = np.interp(np.arange(1, 101), [77, 80], [31.94, 31.42])
    assert delta_psnr(curve, 77, 80) == pytest.approx(0.52, abs=1e-9)
    _report("C3 delta-PSNR fixtures",
            f"150 rows exact vs printed operands; "
            f"{len(ulp_rows)} one-ulp print artifacts tolerated at 0.01 dB")


# ---------------------------------------------------------------------------
# C4: table averages as the desk-scale substitute for headline numbers


def test_c04_table_average_substitution():
    tolerances = (0.005, 0.01, 0.01)
    for name, (rows, avg) in MCLJCI_TABLES.items():
        recomputed_b = float(np.mean([bhattacharyya_qf_grid(gt_params(r), pred_params(r))
                                      for r in rows]))
        col_means = (recomputed_b,
                     float(np.mean([r[12] for r in rows])),
                     float(np.mean([r[13] for r in rows])))
        for got, want, tol in zip(col_means, avg, tolerances):
            assert got == pytest.approx(want, abs=tol), f"{name}: {got} vs {want}"
    _report("C4 table averages",
            "recomputed distance / level / PSNR means match all three "
            "published Avg rows within rounding")


# ---------------------------------------------------------------------------
# C5: MLE recovery


def test_c05_mle_recovery():
    t0 = time.time()
    truth = np.array([0.1, 20.0, 7.0])
    fits = []
    first_sample = None
    for trial in range(20):
        x = gev_sample(GevParams(*truth), 10_000,
                       np.random.default_rng(np.random.SeedSequence(500, spawn_key=(trial,))))
        if first_sample is None:
            first_sample = x
        fits.append(np.asarray(fit_mle(x, "gev", seed=1).params))

    # bootstrap standard errors of the estimator at this sample size
    idx = np.random.default_rng(5).integers(0, 10_000, size=(40, 10_000))
    thetas, _, ok = fit_mle_batch(first_sample[idx], "gev",
                                  theta0=np.tile(fits[0], (40, 1)))
    se = thetas[ok].std(axis=0, ddof=1)

    inside = sum(bool(np.all(np.abs(f - truth) <= 3 * se)) for f in fits)
    elapsed = time.time() - t0
    assert inside >= 19, f"only {inside}/20 trials within 3 SE ({se})"
    assert elapsed < 30.0
    _report("C5 MLE recovery", f"{inside}/20 trials within 3 bootstrap SEs "
                               f"(se={np.round(se, 4)}) in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# C6: A-D calibration under the null


def test_c06_ad_calibration():
    t0 = time.time()
    truth = GevParams(xi=0.1, mu=20.0, sigma=7.0)
    trials = 1000
    rejections = 0
    for i in range(trials):
        x = gev_sample(truth, 30,
                       np.random.default_rng(np.random.SeedSequence(777, spawn_key=(i,))))
        fit = fit_mle(x, "gev", seed=0)
        res = ad_pvalue_bootstrap(x, "gev", fit, b=199, seed=1000 + i)
        rejections += res.reject
    rate = rejections / trials
    elapsed = time.time() - t0
    assert 0.03 <= rate <= 0.07, f"rejection rate {rate}"
    assert elapsed < 300.0
    _report("C6 A-D calibration",
            f"null rejection rate {rate:.3f} over {trials} trials in {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# C7: least-squares recovery


def test_c07_lsq_exact_recovery():
    t0 = time.time()
    rng = np.random.default_rng(7)
    worst_param, worst_res = 0.0, 0.0
    for _ in range(100):
        p = GevParams(xi=float(rng.uniform(-0.5, 0.6)), mu=float(rng.uniform(8, 45)),
                      sigma=float(rng.uniform(2, 15)))
        samples = sur_from_params(p).values
        rec = fit_sur_lsq(samples, seed=3)
        err = max(abs(rec.xi - p.xi), abs(rec.mu - p.mu), abs(rec.sigma - p.sigma))
        res = sur_lsq_residual(rec, samples)
        worst_param = max(worst_param, err)
        worst_res = max(worst_res, res)
        assert err < 1e-6 and res < 1e-10
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _report("C7 LSQ recovery",
            f"100 parameter sets, worst error {worst_param:.2e}, "
            f"worst residual {worst_res:.2e}, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# C8: baseline equivalence


def test_c08_baseline_equivalence():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(5, 120))
        curve = PsnrCurve(image_id=0,
                          psnr=np.sort(rng.uniform(20, 45, size=n))[::-1].copy())
        t = rng.uniform(18, 47)
        want = next((d for d in range(1, n + 1) if curve.psnr[d - 1] <= t), n)
        assert predict_jnd_baseline(curve, t).level == want

    gt = make_gt_params(10, np.random.default_rng(31))
    features = make_planted_features(gt, dim=4, rng=np.random.default_rng(31))
    psnr = make_psnr_curves(gt, rng=np.random.default_rng(31), psnr_at_jnd=33.0)
    from surkit import EvalDataset
    ds = EvalDataset(name="const", jnd_order=1, features=features,
                     psnr=psnr, gt_params=gt)
    cfg = MlpConfig(input_dim=12, hidden=(8, 4), dropout=0.0, lr=3e-3,
                    epochs=2, batch=16, seed=0, patch_count=1)
    report = run_evaluation(ds, kfold_split(ds.image_ids(), 5, seed=1), cfg, p=50)
    assert all(r.delta_jnd == 0 for r in report.baseline_rows)
    _report("C8 baseline equivalence",
            "1000 curves match the exhaustive scan; constant-PSNR folds exact")


# ---------------------------------------------------------------------------
# C9: regressor properties


def test_c09_regressor_properties():
    t0 = time.time()

    # gradient correctness on the tiny network
    cfg = MlpConfig(input_dim=6, hidden=(4, 3, 2), dropout=0.0, lr=1e-3,
                    epochs=1, batch=4, seed=0, patch_count=1)
    m = init_model(cfg)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(5, 6))
    y = rng.uniform(0.1, 0.9, size=5)
    _, gw, gb = _l1_grads(m, x, y, rng=None)
    eps, worst = 1e-6, 0.0
    for li in range(len(m.weights)):
        for arr, grad in ((m.weights[li], gw[li]), (m.biases[li], gb[li])):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + eps
                up = l1_loss(m, x, y)
                arr[idx] = orig - eps
                dn = l1_loss(m, x, y)
                arr[idx] = orig
                fd = (up - dn) / (2 * eps)
                worst = max(worst, abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-8))
    assert worst < 1e-4

    # eight-record memorization
    from test_mlp import _linear_synthetic
    records = _linear_synthetic(8, 4, np.random.default_rng(16))
    mem_cfg = MlpConfig(input_dim=12, hidden=(32, 16), dropout=0.0, lr=5e-3,
                        epochs=30, batch=1, seed=2, patch_count=1)
    model = train(records, records, mem_cfg)
    xs = np.stack([assemble_input(r.ref_features, r.dist_features) for r in records])
    ys = np.array([r.target for r in records])
    mem_l1 = l1_loss(model, xs, ys)
    assert mem_l1 < 0.01

    # planted linear signal end to end
    from surkit import EvalDataset
    rng = np.random.default_rng(42)
    gt = make_gt_params(12, rng)
    ds = EvalDataset(name="planted", jnd_order=1,
                     features=make_planted_features(gt, dim=6, patches=1, rng=rng),
                     psnr=make_psnr_curves(gt, rng=rng), gt_params=gt)
    cfg = MlpConfig(input_dim=18, hidden=(16, 8), dropout=0.0, lr=3e-3,
                    epochs=25, batch=16, seed=0, patch_count=1)
    report = run_evaluation(ds, kfold_split(ds.image_ids(), 4, seed=11), cfg, p=50)
    planted_b = report.averages()["bhattacharyya"]
    assert planted_b < 0.02

    # bit-reproducibility
    val = _linear_synthetic(12, 4, np.random.default_rng(18))
    rep_cfg = MlpConfig(input_dim=12, hidden=(8, 4), dropout=0.25, lr=1e-3,
                        epochs=6, batch=8, seed=9, patch_count=1)
    m1 = train(records, val, rep_cfg)
    m2 = train(records, val, rep_cfg)
    assert all(np.array_equal(a, b) for a, b in zip(m1.weights, m2.weights))
    assert m1.best_validation_loss == m2.best_validation_loss

    elapsed = time.time() - t0
    assert elapsed < 120.0
    _report("C9 regressor properties",
            f"gradcheck {worst:.1e}, memorization L1 {mem_l1:.4f}, "
            f"planted-signal distance {planted_b:.4f}, bit-reproducible, "
            f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# C10: end-to-end determinism


def test_c10_end_to_end_determinism(tmp_path):
    from surkit.cli import main
    rng = np.random.default_rng(101)
    gt = make_gt_params(6, rng)
    save_jnd_csv(make_jnd_table(gt, n_subjects=20, seed=7), tmp_path / "jnd.csv")
    write_features(make_planted_features(gt, dim=5, rng=rng), tmp_path / "features.bin")
    save_psnr_csv(make_psnr_curves(gt, rng=rng), tmp_path / "psnr.csv")

    args = ["evaluate", "--jnd", str(tmp_path / "jnd.csv"),
            "--features", str(tmp_path / "features.bin"),
            "--psnr", str(tmp_path / "psnr.csv"),
            "--folds", "3", "--seed", "7", "--jnd-order", "1",
            "--hidden", "8,4", "--epochs", "3", "--lr", "0.003",
            "--patches", "1", "--no-figures"]
    assert main(args + ["--out", str(tmp_path / "r1.json")]) == 0
    assert main(args + ["--out", str(tmp_path / "r2.json")]) == 0
    b1 = (tmp_path / "r1.json").read_bytes()
    assert b1 == (tmp_path / "r2.json").read_bytes()
    json.loads(b1.decode("utf-8"))  # stays valid JSON
    _report("C10 end-to-end determinism", "byte-identical evaluate reports")
