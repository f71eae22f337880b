"""Flow-level statistics baseline (FSC).

Seventeen statistics per flow: max, min, variance, mean and range of each of
the three per-packet features [proto_code, inter_arrival_us, length], then
the flow duration (us) and byte count.  Vectors are min-max scaled with
training extrema and clustered by the same K-Means detector.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .errors import EmptyFlow

STAT_NAMES = [f"{feat}_{stat}"
              for feat in ("proto", "iat", "length")
              for stat in ("max", "min", "var", "mean", "range")] + ["duration_us", "bytes"]
N_STATS = len(STAT_NAMES)


def flow_stats(S, duration_us: float, byte_count: float) -> np.ndarray:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] == 0:
        raise EmptyFlow("flow has no packets")
    mx, mn = S.max(0), S.min(0)
    per_feature = np.stack([mx, mn, S.var(0), S.mean(0), mx - mn], axis=1)
    return np.concatenate([per_feature.ravel(), [duration_us, byte_count]])


def flow_stats_for(flow) -> np.ndarray:
    """Statistics of an ingested :class:`~freqdetect.ingest.Flow`."""
    from .ingest import to_feature_rows
    return flow_stats(to_feature_rows(flow), flow.duration_us, flow.byte_count)


@dataclasses.dataclass(frozen=True)
class MinMaxScaler:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, X) -> "MinMaxScaler":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if len(X) == 0:
            raise ValueError("need at least one training vector")
        return cls(X.min(0), X.max(0))

    def transform(self, X) -> np.ndarray:
        """Scale to [0, 1]; values outside the training range are clamped."""
        X = np.asarray(X, dtype=np.float64)
        span = self.hi - self.lo
        ok = span > 0
        out = np.zeros(np.broadcast_shapes(X.shape, span.shape))
        out[..., ok] = (X[..., ok] - self.lo[ok]) / span[ok]
        return np.clip(out, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d) -> "MinMaxScaler":
        return cls(np.asarray(d["lo"], float), np.asarray(d["hi"], float))


def normalize_stats(vectors):
    """Fit a scaler on training vectors; returns (scaled vectors, scaler)."""
    scaler = MinMaxScaler.fit(vectors)
    return scaler.transform(np.atleast_2d(vectors)), scaler
