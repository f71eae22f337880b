"""K-Means model of benign frequency features and the distance-based detector.

Each flow's feature matrix R is averaged over sampling windows of ``w_win``
consecutive frames.  Training clusters the benign window samples and records
``train_loss``, the mean L2 distance from a sample to its nearest center.  At
detection time a window is malicious when its nearest-center distance is at
least ``phi * train_loss``.
"""
from __future__ import annotations

import dataclasses
import enum
import json
import logging
from typing import Any, Optional, Sequence

import numpy as np

from .config import HyperParams
from .errors import DimensionMismatch, FreqDetectError

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
ZERO_LOSS = 1e-12
ZERO_LOSS_EPS = 1e-9


class InsufficientSamples(FreqDetectError, ValueError):
    def __init__(self, count: int, k_c: int):
        super().__init__(f"{count} training samples, need at least k_c={k_c}")
        self.count = count
        self.k_c = k_c


class Verdict(str, enum.Enum):
    BENIGN = "Benign"
    MALICIOUS = "Malicious"


def window_samples(R, w_win: int) -> np.ndarray:
    """Mean of every run of ``w_win`` consecutive columns, one row per window.

    With fewer than ``w_win`` columns the single fallback sample averages all
    of them.  Returns an ``(N_t, K_f)`` array; empty when R has no columns.
    """
    R = np.asarray(getattr(R, "R", R), dtype=np.float64)
    k_f, n_f = R.shape
    if n_f == 0:
        return np.zeros((0, k_f))
    n_t = n_f // w_win
    if n_t == 0:
        return R.mean(axis=1)[None, :]
    return R[:, :n_t * w_win].reshape(k_f, n_t, w_win).mean(axis=2).T


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _kmeanspp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            i = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            i = min(i, n - 1)
        else:
            i = int(rng.integers(n))
        centers[j] = X[i]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(1))
    return centers


@dataclasses.dataclass
class KMeansRun:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    history: list  # inertia after each assignment step
    n_iter: int


def kmeans(X, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6,
           n_init: int = 4) -> KMeansRun:
    """Lloyd's algorithm with k-means++ seeding; best of ``n_init`` restarts.

    Stops when no center moves by more than ``tol`` (L2).  An emptied cluster
    is re-seeded with the point farthest from its center.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) < k:
        raise InsufficientSamples(len(X), k)
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        C = _kmeanspp(X, k, rng)
        history = []
        for it in range(1, max_iter + 1):
            d = _sq_dists(X, C)
            labels = d.argmin(1)
            history.append(float(d[np.arange(len(X)), labels].sum()))
            newC = C.copy()
            for j in range(k):
                members = labels == j
                if members.any():
                    newC[j] = X[members].mean(0)
            empty = np.flatnonzero(np.bincount(labels, minlength=k) == 0)
            if len(empty):
                far = np.argsort(-d[np.arange(len(X)), labels], kind="stable")
                for j, i in zip(empty, far):
                    newC[j] = X[i]
            shift = np.sqrt(((newC - C) ** 2).sum(1)).max()
            C = newC
            if shift < tol:
                break
        d = _sq_dists(X, C)
        labels = d.argmin(1)
        inertia = float(d[np.arange(len(X)), labels].sum())
        history.append(inertia)
        if best is None or inertia < best.inertia:
            best = KMeansRun(C, labels, inertia, history, it)
    return best


def nearest_distances(X, centers) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    centers = np.asarray(centers, dtype=np.float64)
    if X.shape[1] != centers.shape[1]:
        raise DimensionMismatch(f"sample dimension {X.shape[1]} vs centers {centers.shape[1]}")
    diff = X[:, None, :] - centers[None, :, :]
    return np.sqrt((diff * diff).sum(2)).min(1)


@dataclasses.dataclass
class ClusterModel:
    centers: np.ndarray
    train_loss: float
    hp: HyperParams
    encoding: Optional[np.ndarray]
    seed: int
    kind: str = "spectral"
    scaler: Optional[dict] = None  # min-max extrema for the flow-statistics baseline
    features: Optional[list] = None  # per-packet feature columns; None means all three

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    def threshold(self, phi: float) -> float:
        if not phi > 0:
            raise ValueError("phi must be positive")
        base = self.train_loss if self.train_loss >= ZERO_LOSS else ZERO_LOSS_EPS
        return phi * base

    def to_dict(self) -> dict[str, Any]:
        d = {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "centers": self.centers.tolist(),
            "train_loss": float(self.train_loss),
            "hyperparams": self.hp.to_dict(),
            "encoding_vector": None if self.encoding is None else [float(x) for x in self.encoding],
            "seed": int(self.seed),
        }
        if self.scaler is not None:
            d["scaler"] = self.scaler
        if self.features is not None:
            d["features"] = list(self.features)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClusterModel":
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        enc = d.get("encoding_vector")
        return cls(np.asarray(d["centers"], dtype=np.float64), float(d["train_loss"]),
                   HyperParams.from_dict(d["hyperparams"]),
                   None if enc is None else np.asarray(enc, dtype=np.float64),
                   int(d["seed"]), d.get("kind", "spectral"), d.get("scaler"), d.get("features"))

    @classmethod
    def load(cls, path) -> "ClusterModel":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def train(samples, k_c: int = 10, seed: int = 0, hp: Optional[HyperParams] = None,
          encoding=None, **kmeans_kw) -> ClusterModel:
    X = np.asarray(samples, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("samples must be a 2-D array")
    run = kmeans(X, k_c, seed=seed, **kmeans_kw)
    loss = float(nearest_distances(X, run.centers).mean())
    hp = hp if hp is not None else HyperParams(k_c=k_c)
    log.debug("k-means: %d samples, %d iterations, train_loss=%g", len(X), run.n_iter, loss)
    return ClusterModel(run.centers, loss, hp, None if encoding is None else np.asarray(encoding, float), seed)


def score(model: ClusterModel, sample) -> float:
    """Distance from one window sample to its nearest center."""
    sample = np.asarray(sample, dtype=np.float64)
    if sample.shape != (model.dim,):
        raise DimensionMismatch(f"sample shape {sample.shape}, model dimension {model.dim}")
    return float(nearest_distances(sample[None, :], model.centers)[0])


@dataclasses.dataclass
class DetectionResult:
    flow_key: Any
    scores: np.ndarray
    verdict: Verdict
    threshold_used: float
    empty: bool = False  # no complete frame, nothing to score

    @property
    def max_loss(self) -> float:
        return float(self.scores.max()) if len(self.scores) else 0.0

    def to_dict(self) -> dict[str, Any]:
        d = {"flow": str(self.flow_key), "max_loss": self.max_loss,
             "threshold": self.threshold_used, "verdict": self.verdict.value}
        if self.empty:
            d["diagnostic"] = "no complete frame"
        return d


def detect(model: ClusterModel, R, phi: float, flow_key=None) -> DetectionResult:
    threshold = model.threshold(phi)
    samples = window_samples(R, model.hp.w_win)
    if len(samples) == 0:
        return DetectionResult(flow_key, np.zeros(0), Verdict.BENIGN, threshold, empty=True)
    if samples.shape[1] != model.dim:
        raise DimensionMismatch(f"feature dimension {samples.shape[1]}, model dimension {model.dim}")
    scores = nearest_distances(samples, model.centers)
    verdict = Verdict.MALICIOUS if (scores >= threshold).any() else Verdict.BENIGN
    return DetectionResult(flow_key, scores, verdict, threshold)
