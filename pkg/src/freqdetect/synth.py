"""Seeded synthetic traffic: benign Gaussian traffic, floods, bursts, scans, evasion mixes.

Every generator returns an :class:`~freqdetect.ingest.Flow` whose packets carry
a ground-truth label (0 benign, 1 malicious).
"""
from __future__ import annotations

import dataclasses
import enum
from collections.abc import Iterable
from typing import Optional

import numpy as np

from .errors import FreqDetectError
from .ingest import Flow, FlowKey, KeyMode, PacketRecord

MIN_LEN, MAX_LEN = 40, 1514


class InvalidProfile(FreqDetectError, ValueError):
    pass


class Kind(str, enum.Enum):
    BENIGN_GP = "BenignGP"
    SYN_FLOOD = "SynFlood"
    LOW_RATE_BURST = "LowRateBurst"
    CONSTANT_SCAN = "ConstantScan"


@dataclasses.dataclass(frozen=True)
class TrafficProfile:
    """Parameters of one synthetic source.

    For ``LowRateBurst`` the rate is the in-burst packet rate; a burst of
    ``burst_len`` packets starts every ``interval_s`` seconds.  For
    ``BenignGP`` inter-arrival times have mean ``1e6 / rate_pps`` us and
    standard deviation ``iat_cv`` times that mean.
    """

    kind: Kind
    rate_pps: float
    duration_s: float
    length_mean: float = 600.0
    length_std: float = 200.0
    iat_cv: float = 0.5
    proto_code: int = 6
    interval_s: float = 0.5
    burst_len: int = 50
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not self.rate_pps > 0 or not self.duration_s > 0:
            raise InvalidProfile("rate_pps and duration_s must be positive")
        if self.length_std < 0 or self.iat_cv < 0:
            raise InvalidProfile("standard deviations must be non-negative")
        if not 0 <= self.proto_code <= 255:
            raise InvalidProfile("proto_code must be in [0, 255]")
        if self.kind is Kind.LOW_RATE_BURST and (self.interval_s <= 0 or self.burst_len < 1):
            raise InvalidProfile("bursts need interval_s > 0 and burst_len >= 1")

    @property
    def malicious(self) -> bool:
        return self.kind is not Kind.BENIGN_GP

    def packet_count(self) -> int:
        if self.kind is Kind.LOW_RATE_BURST:
            return int(np.floor(self.duration_s / self.interval_s + 1e-9)) * self.burst_len
        return int(round(self.rate_pps * self.duration_s))


def benign(rate_pps=1000.0, duration_s=10.0, **kw) -> TrafficProfile:
    return TrafficProfile(Kind.BENIGN_GP, rate_pps, duration_s, **kw)


def syn_flood(rate_pps=10_000.0, duration_s=1.0, length=60, **kw) -> TrafficProfile:
    return TrafficProfile(Kind.SYN_FLOOD, rate_pps, duration_s, length_mean=length,
                          length_std=0.0, proto_code=6, **kw)


def low_rate_burst(interval_s=0.5, burst_len=50, duration_s=10.0, rate_pps=20_000.0,
                   length=1000, **kw) -> TrafficProfile:
    return TrafficProfile(Kind.LOW_RATE_BURST, rate_pps, duration_s, length_mean=length,
                          length_std=0.0, proto_code=17, interval_s=interval_s,
                          burst_len=burst_len, **kw)


def constant_scan(rate_pps=500.0, duration_s=10.0, length=60, **kw) -> TrafficProfile:
    return TrafficProfile(Kind.CONSTANT_SCAN, rate_pps, duration_s, length_mean=length,
                          length_std=0.0, proto_code=6, **kw)


def _benign_arrays(p: TrafficProfile, n: int, rng: np.random.Generator):
    mean_iat = 1e6 / p.rate_pps
    iat = np.maximum(np.rint(rng.normal(mean_iat, p.iat_cv * mean_iat, n)), 1).astype(np.int64)
    iat[0] = 0
    lengths = np.clip(np.rint(rng.normal(p.length_mean, p.length_std, n)), MIN_LEN, MAX_LEN)
    return np.cumsum(iat), lengths.astype(np.int64)


def _arrays(p: TrafficProfile, rng: np.random.Generator, n: Optional[int] = None):
    n = p.packet_count() if n is None else n
    if p.kind is Kind.BENIGN_GP:
        return _benign_arrays(p, n, rng)
    spacing = 1e6 / p.rate_pps
    lengths = np.full(n, int(round(p.length_mean)), dtype=np.int64)
    if p.kind is Kind.LOW_RATE_BURST:
        i = np.arange(n)
        burst, pos = divmod(i, p.burst_len)
        ts = np.rint(burst * p.interval_s * 1e6 + pos * spacing).astype(np.int64)
        return ts, lengths
    return np.rint(np.arange(n) * spacing).astype(np.int64), lengths


def generate(profile: TrafficProfile, seed: Optional[int] = None, *,
             key: Optional[FlowKey] = None, start_us: int = 0,
             n_packets: Optional[int] = None) -> Flow:
    """Generate one labeled flow.  Identical seeds give identical flows."""
    seed = profile.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    ts, lengths = _arrays(profile, rng, n_packets)
    if key is None:
        key = FlowKey(KeyMode.SOURCE_IP, f"{profile.kind.value.lower()}-{seed}")
    labels = np.full(len(ts), int(profile.malicious), dtype=np.int8)
    proto = np.full(len(ts), profile.proto_code, dtype=np.int64)
    return Flow(key, ts + start_us, lengths, proto, labels)


@dataclasses.dataclass(frozen=True)
class MixSpec:
    malicious: TrafficProfile
    benign: TrafficProfile
    ratio: tuple = (1, 1)  # malicious : benign packet counts

    def __post_init__(self):
        a, b = self.ratio
        if int(a) != a or int(b) != b or a < 1 or b < 1:
            raise InvalidProfile(f"mix ratio components must be positive integers, got {self.ratio}")


def mix(spec: MixSpec, seed: int = 0, *, key: Optional[FlowKey] = None, start_us: int = 0) -> Flow:
    """Inject benign packets into a malicious flow at a fixed packet-count ratio.

    The benign packets share the malicious flow key and follow the benign
    profile's own timing from the flow start; the two streams are merged by
    timestamp with a stable sort, so each keeps its internal order.
    """
    mal = generate(spec.malicious, seed, key=key, start_us=start_us)
    a, b = spec.ratio
    n_benign = len(mal) * int(b) // int(a)
    noise = generate(spec.benign, seed + 1_000_003, key=mal.key, start_us=start_us,
                     n_packets=n_benign)
    ts = np.concatenate([mal.timestamp_us, noise.timestamp_us])
    order = np.argsort(ts, kind="stable")
    return Flow(mal.key, ts[order],
                np.concatenate([mal.length_bytes, noise.length_bytes])[order],
                np.concatenate([mal.proto_code, noise.proto_code])[order],
                np.concatenate([mal.labels, noise.labels])[order])


def merge_flows(flows: Iterable[Flow]) -> list[PacketRecord]:
    """All packets of ``flows`` as records ordered by timestamp (stable)."""
    recs = [r for f in flows for r in f.records()]
    recs.sort(key=lambda r: r.timestamp_us)
    return recs


def random_benign_profile(rng: np.random.Generator, duration_s: float = 5.0) -> TrafficProfile:
    """A benign profile with rate, length and jitter drawn from broad ranges."""
    return benign(rate_pps=float(rng.uniform(300, 2000)), duration_s=duration_s,
                  length_mean=float(rng.uniform(300, 900)),
                  length_std=float(rng.uniform(100, 300)),
                  iat_cv=float(rng.uniform(0.3, 1.0)))


def benign_population(n: int, seed: int = 0, duration_s: float = 5.0,
                      subnet: str = "10.0") -> list[Flow]:
    """``n`` benign flows with heterogeneous profiles and addresses ``<subnet>.x.y``."""
    rng = np.random.default_rng(seed)
    flows = []
    for i in range(n):
        p = random_benign_profile(rng, duration_s)
        key = FlowKey(KeyMode.SOURCE_IP, f"{subnet}.{i // 256}.{i % 256}")
        flows.append(generate(p, int(rng.integers(2**31)), key=key))
    return flows


def attack_profile(kind, rng: np.random.Generator) -> TrafficProfile:
    kind = Kind(kind)
    if kind is Kind.SYN_FLOOD:
        return syn_flood(rate_pps=float(rng.uniform(5_000, 20_000)), duration_s=1.0)
    if kind is Kind.LOW_RATE_BURST:
        return low_rate_burst(interval_s=0.5, burst_len=50, duration_s=10.0)
    if kind is Kind.CONSTANT_SCAN:
        return constant_scan(rate_pps=float(rng.uniform(200, 1000)), duration_s=5.0)
    raise InvalidProfile(f"{kind.value} is not an attack kind")


def attack_population(kind, n: int, seed: int = 0, ratio: int = 0,
                      subnet: str = "172.16") -> list[Flow]:
    """``n`` attack flows; with ``ratio`` r > 0 each carries benign noise at 1:r."""
    rng = np.random.default_rng(seed)
    flows = []
    for i in range(n):
        p = attack_profile(kind, rng)
        noise = random_benign_profile(rng)
        key = FlowKey(KeyMode.SOURCE_IP, f"{subnet}.{i // 256}.{i % 256}")
        s = int(rng.integers(2**31))
        flows.append(generate(p, s, key=key) if ratio == 0
                     else mix(MixSpec(p, noise, (1, ratio)), s, key=key))
    return flows
