"""Frequency-domain features of per-packet feature sequences.

A flow's N x M per-packet feature matrix is collapsed to one real value per
packet with an encoding vector, cut into non-overlapping frames of ``w_seg``
values, transformed with a DFT per frame, reduced to the squared modulus of
the first ``w_seg // 2 + 1`` components and log-scaled:

    R[:, i] = ln(|DFT(frame_i)|**2 + 1) / C

The result is a ``K_f x N_f`` matrix with ``K_f = w_seg // 2 + 1`` and
``N_f = N // w_seg``.  A trailing partial frame is dropped.
"""
from __future__ import annotations

import dataclasses
from importlib import resources

import numpy as np

from .config import HyperParams
from .errors import DimensionMismatch


@dataclasses.dataclass(frozen=True)
class FrequencyFeatures:
    """Log-modulus spectrum, one column per frame."""

    R: np.ndarray
    w_seg: int
    c: float

    @property
    def k_f(self) -> int:
        return self.R.shape[0]

    @property
    def n_f(self) -> int:
        return self.R.shape[1]

    @property
    def shape(self):
        return self.R.shape


def encode(S, w) -> np.ndarray:
    """v_i = sum_k S[i, k] * w[k]."""
    S = np.asarray(S, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if S.ndim != 2 or w.ndim != 1 or S.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"feature matrix {S.shape} vs encoding vector {w.shape}")
    return S @ w


def frame(v, w_seg: int) -> np.ndarray:
    """Split ``v`` into ``len(v) // w_seg`` rows of length ``w_seg``.

    The rows are a view on ``v``; the remainder is dropped.
    """
    v = np.asarray(v, dtype=np.float64)
    n_f = len(v) // w_seg
    return v[:n_f * w_seg].reshape(n_f, w_seg)


def dft_frame(f) -> np.ndarray:
    """Full-length DFT of one frame (or of each row of a 2-D array)."""
    return np.fft.fft(np.asarray(f, dtype=np.float64), axis=-1)


def modulus_half(F) -> np.ndarray:
    """Squared modulus a**2 + b**2 of the first ``n // 2 + 1`` components."""
    F = np.asarray(F)
    k_f = F.shape[-1] // 2 + 1
    half = F[..., :k_f]
    return half.real ** 2 + half.imag ** 2


def log_transform(P, c: float) -> np.ndarray:
    return np.log1p(np.asarray(P, dtype=np.float64)) / c


def spectrum(frames: np.ndarray) -> np.ndarray:
    """Squared-modulus half spectrum of every row, via the real FFT.

    Equivalent to ``modulus_half(dft_frame(frames))`` for real input.
    """
    F = np.fft.rfft(frames, axis=-1)
    return F.real ** 2 + F.imag ** 2


# frames transformed per block; keeps the working set cache-sized on long flows
BLOCK_FRAMES = 2048


def extract(S, w, hp: HyperParams = HyperParams()) -> FrequencyFeatures:
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("feature matrix must be a non-empty 2-D array")
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or S.shape[1] != w.shape[0]:
        raise DimensionMismatch(f"feature matrix {S.shape} vs encoding vector {w.shape}")
    n_f = S.shape[0] // hp.w_seg
    out = np.empty((n_f, hp.k_f))
    step = BLOCK_FRAMES * hp.w_seg
    for i in range(0, n_f * hp.w_seg, step):
        v = encode(S[i:i + step], w)
        out[i // hp.w_seg:(i + step) // hp.w_seg] = log_transform(spectrum(frame(v, hp.w_seg)), hp.c)
    return FrequencyFeatures(np.ascontiguousarray(out.T), hp.w_seg, hp.c)


def compression_ratio(hp: HyperParams, n: int, m: int) -> float:
    """size(R) / size(S) = K_f * N_f / (M * N)."""
    if n < hp.w_seg:
        raise ValueError(f"need at least w_seg={hp.w_seg} packets, got {n}")
    return hp.k_f * (n // hp.w_seg) / (m * n)


# ---------------------------------------------------------------------------
# spectrogram images

def load_colormap() -> np.ndarray:
    """The shipped 256 x 3 uint8 colormap (black -> red -> yellow -> white)."""
    text = resources.files("freqdetect").joinpath("data/hot256.txt").read_text()
    cmap = np.loadtxt(text.splitlines(), dtype=np.int64)
    assert cmap.shape == (256, 3)
    return cmap.astype(np.uint8)


def spectrogram_image(R) -> np.ndarray:
    """Map R to a (K_f, N_f, 3) RGB array after global min-max normalization."""
    R = np.asarray(getattr(R, "R", R), dtype=np.float64)
    if R.size == 0:
        raise ValueError("empty feature matrix")
    lo, hi = R.min(), R.max()
    if hi > lo:
        idx = np.rint((R - lo) / (hi - lo) * 255).astype(np.int64)
    else:
        idx = np.zeros(R.shape, dtype=np.int64)
    return load_colormap()[idx]


def spectrogram_export(R, path) -> None:
    """Write R as a binary PPM (P6): width N_f, height K_f, row 0 = DC."""
    img = spectrogram_image(R)
    height, width = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    """Read back a P6 image written by :func:`spectrogram_export`."""
    with open(path, "rb") as f:
        data = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    pos += 1
    if fields[0] != b"P6" or int(fields[3]) != 255:
        raise ValueError("not an 8-bit P6 image")
    width, height = int(fields[1]), int(fields[2])
    return np.frombuffer(data[pos:pos + width * height * 3], dtype=np.uint8).reshape(height, width, 3)
