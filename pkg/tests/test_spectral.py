import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from freqdetect import spectral
from freqdetect.config import HyperParams
from freqdetect.errors import DimensionMismatch

from oracles import naive_dft


def test_encode_examples():
    assert spectral.encode([[100, 2, 6]], [10, 20, 30]).tolist() == [1220]
    assert spectral.encode(np.zeros((4, 3)), [10, 20, 30]).tolist() == [0] * 4
    S = np.arange(12.0).reshape(4, 3)
    assert spectral.encode(S, [1, 0, 0]).tolist() == S[:, 0].tolist()
    with pytest.raises(DimensionMismatch):
        spectral.encode(S, [1, 2])


def test_frame_examples():
    assert spectral.frame(np.arange(1500.0), 30).shape == (50, 30)
    assert spectral.frame(np.arange(49.0), 50).shape == (0, 50)
    v = np.arange(100.0)
    assert spectral.frame(v, 50).ravel().tolist() == v.tolist()
    assert spectral.frame(np.arange(130.0), 50).ravel().tolist() == list(range(100))


def test_dft_examples():
    assert np.allclose(spectral.dft_frame([1, 0, 0, 0]), [1, 1, 1, 1], atol=1e-12)
    F = spectral.dft_frame(np.full(8, 2.5))
    assert abs(F[0] - 20) < 1e-9 and np.abs(F[1:]).max() < 1e-9


def test_dft_matches_naive_length_50():
    f = np.random.default_rng(3).normal(size=50) * 100
    assert np.abs(spectral.dft_frame(f) - naive_dft(f)).max() <= 1e-9


def test_modulus_half_examples():
    assert spectral.modulus_half(np.ones(4, complex)).tolist() == [1, 1, 1]
    assert spectral.modulus_half(np.ones(50, complex)).shape == (26,)
    f = np.random.default_rng(0).normal(size=12)
    p = np.abs(spectral.dft_frame(f)) ** 2
    for k in range(1, 12):
        assert p[k] == pytest.approx(p[12 - k], rel=1e-12)


def test_rfft_route_equals_full_dft_route():
    frames = np.random.default_rng(1).normal(size=(7, 33))
    assert np.allclose(spectral.spectrum(frames), spectral.modulus_half(spectral.dft_frame(frames)),
                       rtol=1e-12, atol=1e-9)


def test_log_transform_examples():
    assert spectral.log_transform([0, 0, 0], 3.0).tolist() == [0, 0, 0]
    assert spectral.log_transform([math.e - 1], 1.0)[0] == pytest.approx(1.0, abs=1e-15)
    assert spectral.log_transform([1.0], 10.0)[0] == pytest.approx(0.0693147, abs=1e-7)


def test_extract_examples():
    hp = HyperParams(w_seg=30)
    assert spectral.extract(np.ones((1500, 3)), [10, 20, 30], hp).shape == (16, 50)
    R = spectral.extract(np.zeros((100, 3)), [10, 20, 30]).R
    assert R.shape == (26, 2) and not R.any()
    assert spectral.extract(np.ones((5000, 3)), [10, 20, 30]).shape == (26, 100)
    assert spectral.extract(np.ones((20, 3)), [10, 20, 30]).shape == (26, 0)


def test_extract_composition_by_hand():
    rng = np.random.default_rng(5)
    S = rng.integers(0, 1500, size=(95, 3)).astype(float)
    w = np.array([10.0, 15.0, 900.0])
    hp = HyperParams(w_seg=20, c=7.0)
    v = S @ w
    cols = []
    for i in range(95 // 20):
        F = naive_dft(v[i * 20:(i + 1) * 20])
        cols.append(np.log(np.abs(F[:11]) ** 2 + 1) / 7.0)
    assert np.allclose(spectral.extract(S, w, hp).R, np.array(cols).T, rtol=1e-9, atol=1e-12)


def test_compression_ratio_examples():
    hp = HyperParams()
    assert spectral.compression_ratio(hp, 5000, 3) == pytest.approx(26 * 100 / 15000)
    with pytest.raises(ValueError):
        spectral.compression_ratio(hp, 49, 3)


@given(st.integers(2, 200), st.integers(1, 10), st.integers(1, 6))
@settings(max_examples=200, deadline=None)
def test_compression_bound_on_whole_frames(w_seg, n_frames, m):
    # the 1/(2M) bound holds when the packet count is a whole number of frames
    r = spectral.compression_ratio(HyperParams(w_seg=w_seg), w_seg * n_frames, m)
    assert r >= 1 / (2 * m) - 1e-15


def test_compression_bound_fails_with_partial_frame():
    # a dropped remainder lowers the ratio below 1/(2M): 26 * 1 / (3 * 99)
    assert spectral.compression_ratio(HyperParams(), 99, 3) < 1 / 6


@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-1e3, 1e3)))
@settings(max_examples=100, deadline=None)
def test_parseval(f):
    p = np.abs(spectral.dft_frame(f)) ** 2
    lhs = float(np.sum(f * f))
    assert lhs == pytest.approx(p.sum() / len(f), rel=1e-6, abs=1e-6)


@given(arrays(np.float64, st.integers(1, 64), elements=st.floats(-1e3, 1e3)),
       st.floats(-50, 50))
@settings(max_examples=100, deadline=None)
def test_scaling_scales_power_by_square(f, c):
    p = spectral.modulus_half(spectral.dft_frame(f))
    pc = spectral.modulus_half(spectral.dft_frame(c * f))
    assert np.allclose(pc, c * c * p, rtol=1e-9, atol=1e-6 * (1 + c * c))


@given(st.integers(2, 120), st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_shape_law(w_seg, n):
    if n == 0:
        return
    S = np.ones((n, 3))
    R = spectral.extract(S, [10, 10, 10], HyperParams(w_seg=w_seg)).R
    assert R.shape == (w_seg // 2 + 1, n // w_seg)
    assert (R >= 0).all()


def test_colormap_monotone_and_shape():
    cmap = spectral.load_colormap()
    assert cmap.shape == (256, 3)
    assert (np.diff(cmap.astype(int), axis=0) >= 0).all()
    assert cmap[0].tolist() == [0, 0, 0] and cmap[-1].tolist() == [255, 255, 255]


def test_spectrogram_export(tmp_path):
    p = tmp_path / "one.ppm"
    spectral.spectrogram_export(np.array([[3.7]]), p)
    img = spectral.read_ppm(p)
    assert img.shape == (1, 1, 3) and img[0, 0].tolist() == spectral.load_colormap()[0].tolist()

    p = tmp_path / "two.ppm"
    spectral.spectrogram_export(np.array([[0.0, 1.0], [2.0, 3.0]]), p)
    img = spectral.read_ppm(p).astype(int)
    flat = [img[0, 0], img[0, 1], img[1, 0], img[1, 1]]
    for a, b in zip(flat, flat[1:]):
        assert (b >= a).all() and (b > a).any()

    R = np.random.default_rng(0).random((26, 7))
    p = tmp_path / "r.ppm"
    spectral.spectrogram_export(R, p)
    assert p.read_bytes().startswith(b"P6\n7 26\n255\n")
    assert spectral.read_ppm(p).shape == (26, 7, 3)
