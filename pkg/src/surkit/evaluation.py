"""Grouped k-fold cross-validation and the end-to-end evaluation pipeline.

For every fold the regression head is trained on the remaining folds (one
of them rotated out as the validation split), SUR values are predicted per
test image by patch averaging, the analytic model is re-fitted to the
predicted samples by least squares, and distribution/level/PSNR metrics are
computed against the ground truth.  The PSNR-threshold baseline runs on the
identical fold assignments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .baseline import PsnrCurve, baseline_threshold, predict_jnd_baseline
from .data import FeatureStore
from .distributions import GevParams, fit_mle
from .errors import DomainError, EvaluationError
from .metrics import ImageMetrics, aggregate, bhattacharyya, delta_psnr, plcc
from .mlp import MlpConfig, MlpModel, TrainRecord, assemble_input, predict_image_level, train
from .sur import fit_sur_lsq, p_jnd, sur_from_params


@dataclass(frozen=True)
class FoldPlan:
    """Image-grouped fold assignment: all levels/patches of an image share a fold."""

    k: int
    assignments: dict[int, int]
    seed: int

    def fold_images(self, fold: int) -> list[int]:
        return sorted(i for i, f in self.assignments.items() if f == fold)


def kfold_split(image_ids, k: int, seed: int) -> FoldPlan:
    """Seeded shuffle followed by round-robin assignment; fold sizes differ by <= 1."""
    ids = sorted(set(int(i) for i in image_ids))
    if k < 1 or k > len(ids):
        raise DomainError(f"fold count {k} must lie in 1..{len(ids)}")
    rng = np.random.default_rng(seed)
    order = [ids[i] for i in rng.permutation(len(ids))]
    return FoldPlan(k=k, assignments={img: j % k for j, img in enumerate(order)}, seed=seed)


@dataclass
class EvalDataset:
    """Everything the pipeline needs for one dataset and JND order."""

    name: str
    jnd_order: int
    features: FeatureStore
    psnr: dict[int, PsnrCurve]
    gt_params: dict[int, GevParams] = field(default_factory=dict)
    qf_samples: dict[int, np.ndarray] = field(default_factory=dict)
    n_levels: int = 100

    def image_ids(self) -> list[int]:
        return sorted(set(self.gt_params) | set(self.qf_samples))


@dataclass
class BaselineRow:
    image_id: int
    fold: int
    pred_level: int
    delta_jnd: int
    delta_psnr: float
    saturated: bool


@dataclass
class EvalReport:
    dataset: str
    seed: int
    jnd_order: int
    p: float
    rows: list[ImageMetrics]
    row_folds: dict[int, int]
    plcc: float
    baseline_rows: list[BaselineRow]
    gt_params: dict[int, GevParams]
    pred_params: dict[int, GevParams]
    pred_curves: dict[int, np.ndarray]
    gt_curves: dict[int, np.ndarray]

    def averages(self) -> dict:
        return aggregate(self.rows)

    def baseline_averages(self) -> dict:
        return {
            "delta_jnd": float(np.mean([r.delta_jnd for r in self.baseline_rows])),
            "delta_psnr": float(np.mean([r.delta_psnr for r in self.baseline_rows])),
        }

    def to_json(self) -> dict:
        per_image = []
        for m in self.rows:
            gt = self.gt_params[m.image_id]
            pred = self.pred_params[m.image_id]
            per_image.append({
                "image_id": m.image_id,
                "fold": self.row_folds[m.image_id],
                "gt_mu": gt.mu, "gt_sigma": gt.sigma, "gt_xi": gt.xi,
                "gt_jnd": m.gt_level, "gt_psnr": m.gt_psnr,
                "pred_mu": pred.mu, "pred_sigma": pred.sigma, "pred_xi": pred.xi,
                "pred_jnd": m.pred_level, "pred_psnr": m.pred_psnr,
                "bhattacharyya": m.bhattacharyya,
                "delta_jnd": m.delta_jnd, "delta_psnr": m.delta_psnr,
            })
        return {
            "dataset": self.dataset,
            "seed": self.seed,
            "jnd_order": self.jnd_order,
            "p": self.p,
            "per_image": per_image,
            "avg": self.averages(),
            "plcc": self.plcc,
            "baseline": {
                "per_image": [
                    {"image_id": r.image_id, "fold": r.fold, "pred_level": r.pred_level,
                     "delta_jnd": r.delta_jnd, "delta_psnr": r.delta_psnr,
                     "saturated": r.saturated}
                    for r in self.baseline_rows
                ],
                "avg": self.baseline_averages(),
            },
        }

    def to_json_text(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=False) + "\n"


def _resolve_gt_params(dataset: EvalDataset, seed: int) -> dict[int, GevParams]:
    """Ground-truth GEV triples: explicit if provided, else one MLE fit per image."""
    out = dict(dataset.gt_params)
    for img, samples in dataset.qf_samples.items():
        if img in out:
            continue
        fit = fit_mle(samples, "gev", seed=seed)
        if not fit.converged:
            raise EvaluationError(f"ground-truth GEV fit failed for image {img}")
        out[img] = fit.as_gev()
    return out


def _check_complete(dataset: EvalDataset, images, patch_ids) -> None:
    gaps = []
    for img in images:
        if img not in dataset.psnr:
            gaps.append(f"image {img}: PSNR curve missing")
            continue
        if dataset.psnr[img].n_levels < dataset.n_levels:
            gaps.append(f"image {img}: PSNR curve covers only "
                        f"{dataset.psnr[img].n_levels} levels")
        for level in range(0, dataset.n_levels + 1):
            for pid in patch_ids:
                if (img, level, pid) not in dataset.features.records:
                    gaps.append(f"image {img}: features missing at level {level} patch {pid}")
                    break
            else:
                continue
            break
    if gaps:
        raise EvaluationError("dataset incomplete: " + "; ".join(gaps[:10]) +
                              (" ..." if len(gaps) > 10 else ""))


def _records_for(images, dataset: EvalDataset, gt_curves, patch_ids) -> list[TrainRecord]:
    records = []
    for img in images:
        targets = gt_curves[img]
        for level in range(1, dataset.n_levels + 1):
            for pid in patch_ids:
                records.append(TrainRecord(
                    ref_features=dataset.features.get(img, 0, pid),
                    dist_features=dataset.features.get(img, level, pid),
                    target=float(targets[level - 1]),
                    image_id=img, level=level, patch_id=pid))
    return records


def run_evaluation(dataset: EvalDataset, plan: FoldPlan, cfg: MlpConfig,
                   p: float = 50.0) -> EvalReport:
    """Run the full cross-validated pipeline and assemble the report.

    Per fold: train the regressor on the other folds (one rotated out for
    validation), predict SUR(1..N) for each test image via patch averaging,
    fit the analytic model to the predictions by least squares, and compute
    per-image metrics against the ground truth.  The baseline threshold
    predictor runs on the same splits.  Deterministic given the plan seed
    and config seed.
    """
    images = dataset.image_ids()
    if set(plan.assignments) != set(images):
        raise EvaluationError("fold plan does not cover exactly the dataset images")
    patch_ids = sorted({k[2] for k in dataset.features.records})
    if len(patch_ids) != cfg.patch_count:
        raise EvaluationError(f"feature store has {len(patch_ids)} patches per record, "
                              f"config expects {cfg.patch_count}")
    _check_complete(dataset, images, patch_ids)

    gt_params = _resolve_gt_params(dataset, plan.seed)
    gt_curves = {img: sur_from_params(gt_params[img], dataset.n_levels).values
                 for img in images}
    gt_levels = {img: p_jnd(sur_from_params(gt_params[img], dataset.n_levels), p)
                 for img in images}

    input_dim = 3 * dataset.features.dim
    if cfg.input_dim != input_dim:
        cfg = replace(cfg, input_dim=input_dim)

    rows: list[ImageMetrics] = []
    row_folds: dict[int, int] = {}
    pred_params: dict[int, GevParams] = {}
    pred_curves: dict[int, np.ndarray] = {}
    baseline_rows: list[BaselineRow] = []

    for fold in range(plan.k):
        test_imgs = plan.fold_images(fold)
        val_fold = (fold + 1) % plan.k
        if val_fold == fold:  # k = 1 would leave no training folds
            raise EvaluationError("evaluation needs at least 2 folds "
                                  "(one test fold plus training folds)")
        val_imgs = plan.fold_images(val_fold)
        train_imgs = [i for i in images
                      if plan.assignments[i] not in (fold, val_fold)]
        if not train_imgs:
            raise EvaluationError(f"fold {fold}: empty training set")
        assert not (set(train_imgs) | set(val_imgs)) & set(test_imgs), \
            "test images leaked into training"

        fold_cfg = replace(cfg, seed=int(np.random.SeedSequence(
            (plan.seed, cfg.seed, fold)).generate_state(1)[0]))
        model = train(_records_for(train_imgs, dataset, gt_curves, patch_ids),
                      _records_for(val_imgs, dataset, gt_curves, patch_ids),
                      fold_cfg)

        threshold = baseline_threshold(
            [dataset.psnr[img].at(gt_levels[img]) for img in train_imgs + val_imgs])

        for img in test_imgs:
            preds = _predict_sur_curve(model, dataset, img, patch_ids)
            fitted = fit_sur_lsq(preds, seed=plan.seed)
            pred_params[img] = fitted
            pred_curves[img] = sur_from_params(fitted, dataset.n_levels).values

            gt_level = gt_levels[img]
            pred_level = p_jnd(sur_from_params(fitted, dataset.n_levels), p)
            curve = dataset.psnr[img]
            rows.append(ImageMetrics(
                image_id=img,
                bhattacharyya=bhattacharyya(gt_params[img], fitted),
                delta_jnd=abs(pred_level - gt_level),
                delta_psnr=delta_psnr(curve.psnr, gt_level, pred_level),
                gt_level=gt_level, pred_level=pred_level,
                gt_psnr=curve.at(gt_level), pred_psnr=curve.at(pred_level)))
            row_folds[img] = fold

            base = predict_jnd_baseline(curve, threshold)
            baseline_rows.append(BaselineRow(
                image_id=img, fold=fold, pred_level=base.level,
                delta_jnd=abs(base.level - gt_level),
                delta_psnr=delta_psnr(curve.psnr, gt_level, base.level),
                saturated=base.saturated))

    order = {img: (row_folds[img], img) for img in row_folds}
    rows.sort(key=lambda m: order[m.image_id])
    baseline_rows.sort(key=lambda r: (r.fold, r.image_id))

    return EvalReport(
        dataset=dataset.name, seed=plan.seed, jnd_order=dataset.jnd_order, p=p,
        rows=rows, row_folds=row_folds,
        plcc=plcc([m.gt_psnr for m in rows], [m.pred_psnr for m in rows]),
        baseline_rows=baseline_rows,
        gt_params=gt_params, pred_params=pred_params,
        pred_curves=pred_curves, gt_curves=gt_curves)


def _predict_sur_curve(model: MlpModel, dataset: EvalDataset, img: int,
                       patch_ids) -> np.ndarray:
    preds = np.empty(dataset.n_levels)
    for level in range(1, dataset.n_levels + 1):
        patches = np.stack([
            assemble_input(dataset.features.get(img, 0, pid),
                           dataset.features.get(img, level, pid))
            for pid in patch_ids])
        preds[level - 1] = predict_image_level(model, patches)
    return preds
