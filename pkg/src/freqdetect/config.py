"""Hyper-parameters of the detector.

Defaults follow the recommended configuration: frames of 50 packets, sampling
windows of 100 frames, log scale constant 10, 10 cluster centers, encoding
weights in [10, 1000] and an encoded-feature budget of 1e5.
"""
from __future__ import annotations

import dataclasses
from typing import Any, Optional


@dataclasses.dataclass(frozen=True)
class HyperParams:
    w_seg: int = 50
    w_win: int = 100
    c: float = 10.0
    k_c: int = 10
    w_min: float = 10.0
    w_max: float = 1e3
    budget: float = 1e5
    # no recommended value exists for phi; callers sweep it or pass it explicitly
    phi: Optional[float] = None

    def __post_init__(self):
        for name in ("w_seg", "w_win", "c", "k_c", "w_min", "w_max", "budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.phi is not None and not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi!r}")
        if not self.w_min < self.w_max:
            raise ValueError("w_min must be smaller than w_max")

    @property
    def k_f(self) -> int:
        """Number of retained spectral components per frame."""
        return self.w_seg // 2 + 1

    def replace(self, **changes) -> "HyperParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "HyperParams":
        fields = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - fields
        if unknown:
            raise ValueError(f"unknown hyper-parameters: {sorted(unknown)}")
        return cls(**d)
