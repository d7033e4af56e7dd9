"""Command-line surface.

Subcommands map one-to-one onto the library operations:

    fit-dist      maximum-likelihood fit of a candidate family per image
    select-model  NLL + Anderson-Darling ranking of candidate families
    sur-curve     sample the analytic SUR model at integer levels
    fit-sur       least-squares fit of the analytic model to SUR samples
    metrics       distribution/level/PSNR metrics between parameter sets
    baseline      PSNR-threshold level prediction under k-fold splits
    train         train the regression head on a feature store
    predict       predict SUR curves with a trained model
    evaluate      full cross-validated pipeline with report and figures

Exit status: 0 on success, 1 on validation errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import data
from .distributions import (FAMILIES, GevParams, fit_from_json, fit_mle,
                            fit_to_json, gev_to_json)
from .errors import SurkitError
from .evaluation import EvalDataset, kfold_split, run_evaluation
from .goodness_of_fit import rank_models
from .metrics import ImageMetrics, aggregate, bhattacharyya, delta_psnr
from .mlp import (MlpConfig, TrainRecord, assemble_input, load_model,
                  predict_image_level, save_model, train)
from .sur import DEFAULT_N_LEVELS, fit_sur_lsq, p_jnd, sur_from_params


def _write_json(obj, out_path: str | None) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _positive_levels(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("level count must be >= 1")
    return n


def _load_params_json(path) -> dict[int, GevParams]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    out = {}
    for key, entry in obj.items():
        fit = fit_from_json(entry)
        out[int(key)] = fit.as_gev()
    return out


def _jnd_tables(args, jnd_path, order):
    table = data.load_jnd_csv(jnd_path)
    names = table.datasets()
    name = getattr(args, "dataset", None)
    if name is None:
        if len(names) != 1:
            raise SurkitError(f"file contains datasets {names}; pick one with --dataset")
        name = names[0]
    elif name not in names:
        raise SurkitError(f"dataset {name!r} not present (found {names})")
    tables = {img: table.qf_samples(name, img, order)
              for img in table.image_ids(name)}
    tables = {img: s for img, s in tables.items() if s.size}
    if not tables:
        raise SurkitError(f"no samples for dataset {name!r} at JND order {order}")
    return name, tables


def _cmd_fit_dist(args) -> int:
    _, tables = _jnd_tables(args, args.jnd, args.jnd_order)
    if args.image_id is not None:
        if args.image_id not in tables:
            raise SurkitError(f"image {args.image_id} not in table")
        tables = {args.image_id: tables[args.image_id]}
    out = {}
    for img in sorted(tables):
        fit = fit_mle(tables[img], args.family, seed=args.seed)
        out[str(img)] = fit_to_json(fit)
    _write_json(out, args.out)
    return 0


def _cmd_select_model(args) -> int:
    _, tables = _jnd_tables(args, args.jnd, args.jnd_order)
    kinds = args.families.split(",") if args.families else list(FAMILIES)
    ranking = rank_models(tables, kinds, b=args.bootstrap, seed=args.seed)
    _write_json(ranking.to_json(), args.out)
    return 0


def _params_from_args(args) -> dict[int, GevParams]:
    if args.params:
        return _load_params_json(args.params)
    _, tables = _jnd_tables(args, args.jnd, args.jnd_order)
    return {img: fit_mle(tables[img], "gev", seed=args.seed).as_gev()
            for img in sorted(tables)}


def _cmd_sur_curve(args) -> int:
    params = _params_from_args(args)
    if args.image_id is not None:
        params = {args.image_id: params[args.image_id]}
    curves = {img: sur_from_params(p, args.n_levels) for img, p in params.items()}
    if args.plot_data:
        for img in sorted(curves):
            for level, value in enumerate(curves[img].values, start=1):
                sys.stdout.write(f"{level}\t{value:.17g}\n")
    if args.out:
        data.save_sur_csv(curves, args.out)
    elif not args.plot_data:
        data.save_sur_csv(curves, "/dev/stdout")
    return 0


def _cmd_fit_sur(args) -> int:
    samples = data.load_sur_csv(args.curve)
    out = {}
    for img in sorted(samples):
        if args.image_id is not None and img != args.image_id:
            continue
        fitted = fit_sur_lsq(samples[img], seed=args.seed)
        out[str(img)] = gev_to_json(fitted)
    if not out:
        raise SurkitError("no matching image in SUR curve file")
    _write_json(out, args.out)
    return 0


def _cmd_metrics(args) -> int:
    gt = _load_params_json(args.gt_params)
    pred = _load_params_json(args.pred_params)
    common = sorted(set(gt) & set(pred))
    if not common:
        raise SurkitError("no common image ids between the two parameter files")
    psnr = data.load_psnr_csv(args.psnr) if args.psnr else None

    rows = []
    per_image = {}
    for img in common:
        gt_curve = sur_from_params(gt[img], args.n_levels)
        pred_curve = sur_from_params(pred[img], args.n_levels)
        gt_level = p_jnd(gt_curve, args.p)
        pred_level = p_jnd(pred_curve, args.p)
        if psnr is not None:
            curve = psnr[img]
            gt_psnr, pred_psnr = curve.at(gt_level), curve.at(pred_level)
            dpsnr = delta_psnr(curve.psnr, gt_level, pred_level)
        else:
            gt_psnr = pred_psnr = dpsnr = 0.0
        m = ImageMetrics(image_id=img,
                         bhattacharyya=bhattacharyya(gt[img], pred[img]),
                         delta_jnd=abs(pred_level - gt_level), delta_psnr=dpsnr,
                         gt_level=gt_level, pred_level=pred_level,
                         gt_psnr=gt_psnr, pred_psnr=pred_psnr)
        rows.append(m)
        per_image[str(img)] = {
            "bhattacharyya": m.bhattacharyya, "delta_jnd": m.delta_jnd,
            "delta_psnr": m.delta_psnr, "gt_jnd": gt_level, "pred_jnd": pred_level,
        }
    _write_json({"per_image": per_image, "avg": aggregate(rows)}, args.out)
    return 0


def _cmd_baseline(args) -> int:
    from .baseline import baseline_threshold, predict_jnd_baseline

    params = _params_from_args(args)
    psnr = data.load_psnr_csv(args.psnr)
    images = sorted(set(params) & set(psnr))
    if len(images) < 2:
        raise SurkitError("baseline needs PSNR curves and parameters for >= 2 images")
    plan = kfold_split(images, args.folds, args.seed)
    levels = {img: p_jnd(sur_from_params(params[img], args.n_levels), args.p)
              for img in images}
    per_image = {}
    deltas = []
    for fold in range(plan.k):
        test = plan.fold_images(fold)
        rest = [i for i in images if plan.assignments[i] != fold]
        if not rest:
            raise SurkitError("baseline needs at least 2 folds")
        t = baseline_threshold([psnr[i].at(levels[i]) for i in rest])
        for img in test:
            pred = predict_jnd_baseline(psnr[img], t)
            dj = abs(pred.level - levels[img])
            dp = delta_psnr(psnr[img].psnr, levels[img], pred.level)
            per_image[str(img)] = {"fold": fold, "threshold_db": t,
                                   "gt_jnd": levels[img], "pred_jnd": pred.level,
                                   "delta_jnd": dj, "delta_psnr": dp,
                                   "saturated": pred.saturated}
            deltas.append((dj, dp))
    _write_json({"per_image": per_image,
                 "avg": {"delta_jnd": float(np.mean([d[0] for d in deltas])),
                         "delta_psnr": float(np.mean([d[1] for d in deltas]))}},
                args.out)
    return 0


def _mlp_config(args, feature_dim: int) -> MlpConfig:
    hidden = tuple(int(h) for h in args.hidden.split(",")) if args.hidden else (512, 256, 128)
    return MlpConfig(input_dim=3 * feature_dim, hidden=hidden, dropout=args.dropout,
                     lr=args.lr, epochs=args.epochs, batch=args.batch,
                     seed=args.seed, patch_count=args.patches)


def _records_from_store(store, images, curves, patch_ids, n_levels):
    records = []
    for img in images:
        for level in range(1, n_levels + 1):
            for pid in patch_ids:
                records.append(TrainRecord(
                    ref_features=store.get(img, 0, pid),
                    dist_features=store.get(img, level, pid),
                    target=float(curves[img][level - 1]),
                    image_id=img, level=level, patch_id=pid))
    return records


def _cmd_train(args) -> int:
    store = data.read_features(args.features)
    name, tables = _jnd_tables(args, args.jnd, args.jnd_order)
    images = [img for img in store.image_ids() if img in tables]
    if len(images) < 2:
        raise SurkitError("training needs features and annotations for >= 2 images")
    patch_ids = sorted({k[2] for k in store.records})
    cfg = _mlp_config(args, store.dim)
    if len(patch_ids) != cfg.patch_count:
        raise SurkitError(f"store has {len(patch_ids)} patches, config wants {cfg.patch_count}")

    curves = {}
    for img in images:
        fit = fit_mle(tables[img], "gev", seed=args.seed)
        curves[img] = sur_from_params(fit.as_gev(), args.n_levels).values

    rng = np.random.default_rng(args.seed)
    shuffled = [images[i] for i in rng.permutation(len(images))]
    n_val = max(1, len(images) // 10)
    val_imgs, train_imgs = shuffled[:n_val], shuffled[n_val:]
    model = train(_records_from_store(store, train_imgs, curves, patch_ids, args.n_levels),
                  _records_from_store(store, val_imgs, curves, patch_ids, args.n_levels),
                  cfg)
    save_model(model, args.out_model)
    sys.stdout.write(json.dumps({"trained_images": len(train_imgs),
                                 "validation_images": len(val_imgs),
                                 "best_validation_loss": model.best_validation_loss}) + "\n")
    return 0


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    store = data.read_features(args.features)
    images = store.image_ids()
    if args.image_id is not None:
        images = [i for i in images if i == args.image_id]
    if not images:
        raise SurkitError("no matching images in the feature store")
    patch_ids = sorted({k[2] for k in store.records})
    if len(patch_ids) != model.config.patch_count:
        raise SurkitError(f"store has {len(patch_ids)} patches, "
                          f"model wants {model.config.patch_count}")
    curves = {}
    for img in images:
        preds = np.empty(args.n_levels)
        for level in range(1, args.n_levels + 1):
            patches = np.stack([assemble_input(store.get(img, 0, pid),
                                               store.get(img, level, pid))
                                for pid in patch_ids])
            preds[level - 1] = predict_image_level(model, patches)
        curves[img] = preds
    data.save_sur_csv(curves, args.out or "/dev/stdout")
    return 0


def _cmd_evaluate(args) -> int:
    name, tables = _jnd_tables(args, args.jnd, args.jnd_order)
    store = data.read_features(args.features)
    psnr = data.load_psnr_csv(args.psnr)
    cfg = _mlp_config(args, store.dim)
    dataset = EvalDataset(name=name, jnd_order=args.jnd_order, features=store,
                          psnr=psnr, qf_samples=tables, n_levels=args.n_levels)
    plan = kfold_split(dataset.image_ids(), args.folds, args.seed)
    report = run_evaluation(dataset, plan, cfg, p=args.p)

    out_path = Path(args.out)
    out_path.write_text(report.to_json_text(), encoding="utf-8")
    data.save_sur_csv(report.pred_curves, out_path.with_suffix(".pred_sur.csv"))
    if not args.no_figures:
        from .figures import render_report_figures
        render_report_figures(report, args.figures_dir or
                              out_path.parent / (out_path.stem + "_figures"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surkit",
        description="Model, fit, predict, and evaluate satisfied-user-ratio curves "
                    "for JND-annotated compressed images.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, *, seed=True, out=True, jnd_order=False, p=False, n_levels=False):
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        if out:
            sp.add_argument("--out", default=None, help="output path (default stdout)")
        if jnd_order:
            sp.add_argument("--jnd-order", type=int, choices=(1, 2, 3), default=1)
        if p:
            sp.add_argument("--p", type=float, default=50.0,
                            help="percent for p%% JND extraction")
        if n_levels:
            sp.add_argument("--n-levels", type=_positive_levels, default=DEFAULT_N_LEVELS)

    sp = sub.add_parser("fit-dist", help="maximum-likelihood fit per image")
    sp.add_argument("--jnd", required=True, help="JND annotation CSV")
    sp.add_argument("--family", choices=sorted(FAMILIES), default="gev")
    sp.add_argument("--image-id", type=int, default=None)
    sp.add_argument("--dataset", default=None)
    common(sp, jnd_order=True)
    sp.set_defaults(fn=_cmd_fit_dist)

    sp = sub.add_parser("select-model", help="rank candidate families")
    sp.add_argument("--jnd", required=True)
    sp.add_argument("--families", default=None, help="comma list (default: all 13)")
    sp.add_argument("--bootstrap", type=int, default=999)
    sp.add_argument("--dataset", default=None)
    common(sp, jnd_order=True)
    sp.set_defaults(fn=_cmd_select_model)

    sp = sub.add_parser("sur-curve", help="sample the analytic SUR model")
    sp.add_argument("--params", default=None, help="parameter JSON from fit-dist")
    sp.add_argument("--jnd", default=None, help="or fit GEV from this annotation CSV")
    sp.add_argument("--image-id", type=int, default=None)
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--plot-data", action="store_true",
                    help="emit level/SUR pairs on stdout for external plotting")
    common(sp, jnd_order=True, n_levels=True)
    sp.set_defaults(fn=_cmd_sur_curve)

    sp = sub.add_parser("fit-sur", help="least-squares fit to SUR samples")
    sp.add_argument("--curve", required=True, help="SUR sample CSV")
    sp.add_argument("--image-id", type=int, default=None)
    common(sp)
    sp.set_defaults(fn=_cmd_fit_sur)

    sp = sub.add_parser("metrics", help="compare parameter sets")
    sp.add_argument("--gt-params", required=True)
    sp.add_argument("--pred-params", required=True)
    sp.add_argument("--psnr", default=None, help="PSNR CSV for level/PSNR deltas")
    common(sp, p=True, n_levels=True)
    sp.set_defaults(fn=_cmd_metrics)

    sp = sub.add_parser("baseline", help="PSNR-threshold prediction under folds")
    sp.add_argument("--psnr", required=True)
    sp.add_argument("--params", default=None)
    sp.add_argument("--jnd", default=None)
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--folds", type=int, default=10)
    common(sp, jnd_order=True, p=True, n_levels=True)
    sp.set_defaults(fn=_cmd_baseline)

    def mlp_flags(sp):
        sp.add_argument("--hidden", default=None, help="comma list, default 512,256,128")
        sp.add_argument("--dropout", type=float, default=0.25)
        sp.add_argument("--lr", type=float, default=1e-5)
        sp.add_argument("--epochs", type=int, default=30)
        sp.add_argument("--batch", type=int, default=16)
        sp.add_argument("--patches", type=int, default=5)

    sp = sub.add_parser("train", help="train the regression head")
    sp.add_argument("--features", required=True)
    sp.add_argument("--jnd", required=True)
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--out-model", required=True)
    mlp_flags(sp)
    common(sp, out=False, jnd_order=True, n_levels=True)
    sp.set_defaults(fn=_cmd_train)

    sp = sub.add_parser("predict", help="predict SUR curves with a trained model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--image-id", type=int, default=None)
    common(sp, seed=False, n_levels=True)
    sp.set_defaults(fn=_cmd_predict)

    sp = sub.add_parser("evaluate", help="full cross-validated evaluation")
    sp.add_argument("--jnd", required=True)
    sp.add_argument("--features", required=True)
    sp.add_argument("--psnr", required=True)
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--figures-dir", default=None)
    sp.add_argument("--no-figures", action="store_true")
    mlp_flags(sp)
    common(sp, out=False, jnd_order=True, p=True, n_levels=True)
    sp.add_argument("--out", required=True, help="report JSON path")
    sp.set_defaults(fn=_cmd_evaluate)

    return parser


def main(argv=None) -> int:
    """Dispatch a command line; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.fn(args)
    except SurkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (FileNotFoundError, json.JSONDecodeError, KeyError) as e:
        print(f"error: {e!r}", file=sys.stderr)
        return 1


def entry() -> None:
    raise SystemExit(main())
