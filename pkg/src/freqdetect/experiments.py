"""Desk-scale experiments on synthetic traffic: detection power and evasion robustness.

Both train a spectral model and a flow-statistics model on the same benign
flows and score held-out benign and attack flows by per-flow maximum loss.
"""
from __future__ import annotations

import dataclasses
from typing import Optional

import numpy as np

from . import metrics, pipeline, synth
from .cluster import ClusterModel
from .config import HyperParams


@dataclasses.dataclass
class Bench:
    spectral: ClusterModel
    fsc: ClusterModel
    benign_spectral: np.ndarray  # held-out benign scores
    benign_fsc: np.ndarray


def build_bench(n_train: int = 60, n_test: int = 50, seed: int = 0,
                hp: HyperParams = HyperParams(), w=None, quantile: Optional[float] = 0.95) -> Bench:
    """Train both detectors on benign flows; the encoding is selected unless ``w`` is given."""
    train = synth.benign_population(n_train, seed=seed, subnet="10.1")
    if w is None:
        w = pipeline.select_params(synth.merge_flows(train), hp, quantile=quantile).w
    spectral = pipeline.train_spectral(train, np.asarray(w, float), hp, seed=seed)
    fsc_model = pipeline.train_fsc(train, hp, seed=seed)
    test = synth.benign_population(n_test, seed=seed + 1, subnet="10.2")
    return Bench(spectral, fsc_model, pipeline.spectral_scores(spectral, test),
                 pipeline.fsc_scores(fsc_model, test))


def _auc(benign, malicious) -> float:
    return metrics.auc(np.r_[benign, malicious], np.r_[np.zeros(len(benign)), np.ones(len(malicious))])


def attack_auc(bench: Bench, kind, n_attack: int = 12, seed: int = 100, ratio: int = 0) -> dict:
    flows = synth.attack_population(kind, n_attack, seed=seed, ratio=ratio)
    return {"spectral": _auc(bench.benign_spectral, pipeline.spectral_scores(bench.spectral, flows)),
            "fsc": _auc(bench.benign_fsc, pipeline.fsc_scores(bench.fsc, flows))}


def evasion_sweep(bench: Bench, kind, ratios=(1, 2, 4, 8), n_attack: int = 12,
                  seed: int = 100) -> dict:
    """AUC of both detectors without noise and at each 1:r mix ratio.

    The malicious part of every flow is identical across ratios.  ``drop``
    is the unmixed AUC minus the worst mixed AUC.
    """
    rows = {0: attack_auc(bench, kind, n_attack, seed, 0)}
    for r in ratios:
        rows[r] = attack_auc(bench, kind, n_attack, seed, r)
    drop = {d: rows[0][d] - min(rows[r][d] for r in ratios) for d in ("spectral", "fsc")}
    return {"auc": rows, "drop": drop}
