"""Shared synthetic-dataset builders for pipeline and CLI tests."""

import numpy as np
import pytest

from surkit import (EvalDataset, FeatureStore, GevParams, JndRow,
                    JndSampleTable, PsnrCurve, gev_sample, sur_from_params)


def make_gt_params(n_images, rng):
    return {img: GevParams(xi=float(rng.uniform(-0.2, 0.35)),
                           mu=float(rng.uniform(15, 32)),
                           sigma=float(rng.uniform(4, 9)))
            for img in range(1, n_images + 1)}


def make_psnr_curves(gt, n_levels=100, rng=None, psnr_at_jnd=None):
    """Smooth decreasing PSNR curves; optionally pinned to a constant PSNR at
    each image's 50% JND level."""
    from surkit import p_jnd
    rng = rng or np.random.default_rng(0)
    curves = {}
    for img, params in gt.items():
        start = float(rng.uniform(38, 46))
        slope = float(rng.uniform(0.08, 0.2))
        levels = np.arange(1, n_levels + 1)
        psnr = start - slope * levels
        if psnr_at_jnd is not None:
            jnd = p_jnd(sur_from_params(params, n_levels), 50)
            psnr += psnr_at_jnd - psnr[jnd - 1]
        curves[img] = PsnrCurve(image_id=img, psnr=psnr)
    return curves


def make_planted_features(gt, dim=6, n_levels=100, patches=1, noise=0.0, rng=None):
    """Feature store where the distorted vector linearly encodes the true SUR.

    The reference vector is a constant marker; component 0 of the distorted
    vector carries SUR(level), the rest is deterministic filler, so a linear
    readout of the assembled input recovers the target exactly.
    """
    rng = rng or np.random.default_rng(1)
    store = FeatureStore(dim=dim)
    for img, params in gt.items():
        curve = sur_from_params(params, n_levels).values
        base = rng.normal(0.0, 0.1, size=dim).astype(np.float32)
        for pid in range(patches):
            ref = base.copy()
            ref[0] = 1.0
            store.add(img, 0, pid, ref)
        for level in range(1, n_levels + 1):
            for pid in range(patches):
                vec = base.copy()
                vec[0] = curve[level - 1]
                if noise:
                    vec[1:] += rng.normal(0, noise, size=dim - 1).astype(np.float32)
                store.add(img, level, pid, vec)
    return store


def make_jnd_table(gt, n_subjects=15, dataset="synthetic", seed=0):
    """Subject annotations drawn from each image's generating model.

    Successive JND orders are forced to strictly decreasing QF per subject.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for img, params in sorted(gt.items()):
        for subj in range(1, n_subjects + 1):
            qf1 = int(np.clip(round(gev_sample(params, 1, rng)[0]), 3, 100))
            qf2 = max(2, min(qf1 - 1, int(np.clip(round(qf1 * rng.uniform(0.5, 0.9)), 2, 99))))
            qf3 = max(1, min(qf2 - 1, int(round(qf2 * rng.uniform(0.5, 0.9)))))
            rows.append(JndRow(dataset, img, subj, 1, qf1))
            rows.append(JndRow(dataset, img, subj, 2, qf2))
            rows.append(JndRow(dataset, img, subj, 3, qf3))
    return JndSampleTable(rows=rows)


@pytest.fixture
def planted_dataset():
    rng = np.random.default_rng(42)
    gt = make_gt_params(12, rng)
    features = make_planted_features(gt, dim=6, patches=1, rng=rng)
    psnr = make_psnr_curves(gt, rng=rng)
    return EvalDataset(name="synthetic", jnd_order=1, features=features,
                       psnr=psnr, gt_params=gt)
