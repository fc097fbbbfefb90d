"""Metric suite against scalar oracles, closed forms, and symmetry checks."""

import json
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wavefuse.imageio import GrayImage
from wavefuse.metrics import (
    CSV_HEADER,
    METRIC_NAMES,
    MetricReport,
    cross_entropy_metric,
    entropy,
    evaluate_all,
    fmi,
    ms_ssim,
    q_abf,
    q_nice,
    report_to_json,
    reports_to_csv,
    ssim,
    ssim_with_gradient,
    variance_metric,
)
from wavefuse.metrics import _dct_feature, _nmi, _symmetric_cubic_eigs, _wavelet_feature
from wavefuse.wavelet import dwt2d_level


# --- scalar oracles ------------------------------------------------------------


def gaussian_window_oracle(window, sigma):
    half = (window - 1) / 2.0
    w = np.array([math.exp(-((i - half) ** 2) / (2.0 * sigma * sigma)) for i in range(window)])
    w /= w.sum()
    return np.outer(w, w)


def ssim_map_oracle(x, y, window=11, sigma=1.5, c1=0.01**2, c2=0.03**2):
    """Per-window SSIM recomputed one window at a time."""
    k = gaussian_window_oracle(window, sigma)
    rows = x.shape[0] - window + 1
    cols = x.shape[1] - window + 1
    smap = np.zeros((rows, cols))
    csmap = np.zeros((rows, cols))
    for yy in range(rows):
        for xx in range(cols):
            px = x[yy : yy + window, xx : xx + window]
            py = y[yy : yy + window, xx : xx + window]
            mx = (k * px).sum()
            my = (k * py).sum()
            vx = (k * px * px).sum() - mx * mx
            vy = (k * py * py).sum() - my * my
            cxy = (k * px * py).sum() - mx * my
            cs = (2.0 * cxy + c2) / (vx + vy + c2)
            csmap[yy, xx] = cs
            smap[yy, xx] = (2.0 * mx * my + c1) / (mx * mx + my * my + c1) * cs
    return smap, csmap


def quantize_oracle(p):
    h, w = p.shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            v = math.floor(p[y, x] * 255.0 + 0.5)
            out[y, x] = min(max(v, 0), 255)
    return out


def entropy_oracle(values):
    n = len(values)
    counts = Counter(values)
    return -sum((c / n) * math.log2(c / n) for c in counts.values())


def nmi_oracle(u, v):
    n = u.size
    hu = entropy_oracle(u.reshape(-1).tolist())
    hv = entropy_oracle(v.reshape(-1).tolist())
    hj = entropy_oracle(list(zip(u.reshape(-1).tolist(), v.reshape(-1).tolist())))
    if hu + hv == 0.0:
        return 1.0
    return 2.0 * (hu + hv - hj) / (hu + hv)


def random_image(rng, h, w):
    return rng.uniform(0.0, 1.0, size=(h, w))


# --- SSIM ----------------------------------------------------------------------


def test_ssim_identity_is_one(rng):
    x = random_image(rng, 16, 16)
    assert ssim(x, x) == 1.0


def test_ssim_matches_window_oracle(rng):
    x = random_image(rng, 13, 15)
    y = np.clip(x + 0.1 * rng.standard_normal((13, 15)), 0.0, 1.0)
    smap, _ = ssim_map_oracle(x, y)
    assert abs(ssim(x, y) - smap.mean()) < 1e-12


def test_ssim_constant_pair_closed_form():
    c1v, c2v = 0.3, 0.5
    x = np.full((12, 12), c1v)
    y = np.full((12, 12), c2v)
    expect = (2.0 * c1v * c2v + 0.01**2) / (c1v**2 + c2v**2 + 0.01**2)
    assert abs(ssim(x, y) - expect) < 1e-12


def test_ssim_is_symmetric(rng):
    x = random_image(rng, 14, 14)
    y = random_image(rng, 14, 14)
    assert abs(ssim(x, y) - ssim(y, x)) < 1e-12


def test_ssim_rejects_bad_dims(rng):
    with pytest.raises(ValueError, match="dims differ"):
        ssim(np.zeros((12, 12)), np.zeros((12, 13)))
    with pytest.raises(ValueError, match="smaller than"):
        ssim(np.zeros((8, 8)), np.zeros((8, 8)))


def test_ssim_gradient_value_matches_ssim(rng):
    x = random_image(rng, 13, 13)
    y = random_image(rng, 13, 13)
    value, grad = ssim_with_gradient(x, y)
    assert value == ssim(x, y)
    assert grad.shape == x.shape


def test_ssim_gradient_against_finite_differences(rng):
    x = random_image(rng, 13, 13)
    y = np.clip(x + 0.2 * rng.standard_normal((13, 13)), 0.0, 1.0)
    _, grad = ssim_with_gradient(x, y)
    eps = 1e-5
    worst = 0.0
    for yy in range(13):
        for xx in range(13):
            xp = x.copy()
            xp[yy, xx] += eps
            xm = x.copy()
            xm[yy, xx] -= eps
            fd = (ssim(xp, y) - ssim(xm, y)) / (2.0 * eps)
            denom = max(abs(fd), abs(grad[yy, xx]), 1e-8)
            worst = max(worst, abs(fd - grad[yy, xx]) / denom)
    assert worst < 1e-3


def test_ssim_gradient_directional_derivative(rng):
    x = random_image(rng, 15, 15)
    y = random_image(rng, 15, 15)
    d = rng.standard_normal((15, 15))
    d /= np.abs(d).max()
    _, grad = ssim_with_gradient(x, y)
    eps = 1e-6
    fd = (ssim(x + eps * d, y) - ssim(x - eps * d, y)) / (2.0 * eps)
    an = float((grad * d).sum())
    assert abs(fd - an) < 1e-6 * max(1.0, abs(an))


# --- MS-SSIM ---------------------------------------------------------------------


def test_ms_ssim_identity_is_one(rng):
    x = random_image(rng, 48, 48)
    assert abs(ms_ssim(x, x) - 1.0) < 1e-12


def test_ms_ssim_single_scale_equals_ssim(rng):
    # 16x16 halves to 8 < window, so only one scale survives with weight 1
    x = random_image(rng, 16, 16)
    y = random_image(rng, 16, 16)
    assert abs(ms_ssim(x, y) - max(ssim(x, y), 0.0)) < 1e-12


def test_ms_ssim_two_scale_oracle(rng):
    x = random_image(rng, 22, 22)
    y = np.clip(x + 0.15 * rng.standard_normal((22, 22)), 0.0, 1.0)
    _, cs1 = ssim_map_oracle(x, y)

    def halve(img):
        h2, w2 = img.shape[0] // 2, img.shape[1] // 2
        return img[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))

    s2, _ = ssim_map_oracle(halve(x), halve(y))
    w = np.array([0.0448, 0.2856])
    w = w / w.sum()
    expect = max(cs1.mean(), 0.0) ** w[0] * max(s2.mean(), 0.0) ** w[1]
    assert abs(ms_ssim(x, y) - expect) < 1e-12


def test_ms_ssim_degrades_under_blur(rng):
    x = random_image(rng, 64, 64)
    blurred = x.copy()
    for _ in range(4):  # crude smoothing: repeated 4-neighbor averaging
        blurred = 0.25 * (
            np.roll(blurred, 1, 0) + np.roll(blurred, -1, 0)
            + np.roll(blurred, 1, 1) + np.roll(blurred, -1, 1)
        )
    assert ms_ssim(x, blurred) < ms_ssim(x, x)


def test_ms_ssim_too_small_raises():
    with pytest.raises(ValueError, match="too small"):
        ms_ssim(np.zeros((8, 8)), np.zeros((8, 8)))


# --- histogram metrics -----------------------------------------------------------


def test_entropy_closed_forms():
    assert entropy(np.full((16, 16), 0.5)) == 0.0
    half = np.zeros((16, 16))
    half[:, 8:] = 1.0
    assert entropy(half) == 1.0
    ramp = (np.arange(256, dtype=np.float64) / 255.0).reshape(16, 16)
    assert abs(entropy(ramp) - 8.0) < 1e-12


def test_entropy_matches_counter_oracle(rng):
    x = random_image(rng, 20, 20)
    q = quantize_oracle(x)
    assert abs(entropy(x) - entropy_oracle(q.reshape(-1).tolist())) < 1e-10


def test_entropy_accepts_gray_image(rng):
    x = random_image(rng, 12, 12)
    assert entropy(GrayImage(x)) == entropy(x)


def test_cross_entropy_identity_is_zero(rng):
    x = random_image(rng, 16, 16)
    assert cross_entropy_metric(x, x, x) == 0.0


def test_cross_entropy_matches_scalar_oracle(rng):
    a = random_image(rng, 16, 16)
    b = random_image(rng, 16, 16)
    f = 0.5 * (a + b)

    def smoothed(img):
        counts = [1.0] * 256
        for v in quantize_oracle(img).reshape(-1):
            counts[v] += 1.0
        total = sum(counts)
        return [c / total for c in counts]

    pf = smoothed(f)

    def kl(p):
        return sum(pi * math.log2(pi / qi) for pi, qi in zip(p, pf))

    expect = 0.5 * (kl(smoothed(a)) + kl(smoothed(b)))
    assert abs(cross_entropy_metric(a, b, f) - expect) < 1e-10


def test_cross_entropy_source_swap_symmetric(rng):
    a = random_image(rng, 16, 16)
    b = random_image(rng, 16, 16)
    f = random_image(rng, 16, 16)
    assert cross_entropy_metric(a, b, f) == cross_entropy_metric(b, a, f)


def test_variance_closed_forms(rng):
    assert variance_metric(np.full((8, 8), 0.25)) == 0.0
    half = np.zeros((8, 8))
    half[:, 4:] = 1.0  # quantizes to 0 and 255; population variance (255/2)^2
    assert variance_metric(half) == (255.0 / 2.0) ** 2
    x = random_image(rng, 10, 10)
    q = quantize_oracle(x).astype(np.float64)
    mu = q.sum() / q.size
    expect = sum((v - mu) ** 2 for v in q.reshape(-1)) / q.size
    assert abs(variance_metric(x) - expect) < 1e-9


# --- feature mutual information -----------------------------------------------------


def test_nmi_matches_counter_oracle(rng):
    u = rng.integers(0, 256, size=(12, 12))
    v = rng.integers(0, 4, size=(12, 12)) * 64
    assert abs(_nmi(u, v) - nmi_oracle(u, v)) < 1e-10
    assert _nmi(u, u) == 1.0
    assert _nmi(u, v) == _nmi(v, u)


@pytest.mark.parametrize("variant", ["pixel", "dct", "wavelet"])
def test_fmi_identity_is_one(variant, rng):
    x = random_image(rng, 24, 24)
    assert abs(fmi(x, x, x, variant) - 1.0) < 1e-12


def test_fmi_pixel_constant_fused_scores_zero(rng):
    a = random_image(rng, 16, 16)
    b = random_image(rng, 16, 16)
    f = np.full((16, 16), 0.5)
    assert fmi(a, b, f, "pixel") == 0.0


def test_fmi_source_swap_symmetric(rng):
    a = random_image(rng, 16, 16)
    b = random_image(rng, 16, 16)
    f = 0.5 * (a + b)
    for variant in ("pixel", "dct", "wavelet"):
        assert fmi(a, b, f, variant) == fmi(b, a, f, variant)


def test_fmi_rejects_unknown_variant(rng):
    x = random_image(rng, 12, 12)
    with pytest.raises(ValueError, match="variant"):
        fmi(x, x, x, "sift")


def test_dct_feature_matches_scalar_oracle(rng):
    block = rng.uniform(0.0, 1.0, size=(8, 8))
    feat = _dct_feature(block)
    expect = np.zeros((8, 8))
    for k in range(8):
        for l in range(8):
            s = 0.0
            for a in range(8):
                for b in range(8):
                    ck = math.sqrt(1.0 / 8.0) if k == 0 else math.sqrt(2.0 / 8.0) * math.cos(
                        math.pi * (2 * a + 1) * k / 16.0
                    )
                    cl = math.sqrt(1.0 / 8.0) if l == 0 else math.sqrt(2.0 / 8.0) * math.cos(
                        math.pi * (2 * b + 1) * l / 16.0
                    )
                    s += ck * cl * block[a, b]
            expect[k, l] = abs(s)
    assert np.max(np.abs(feat - expect)) < 1e-12


def test_dct_feature_pads_odd_dims(rng):
    feat = _dct_feature(rng.uniform(0.0, 1.0, size=(10, 13)))
    assert feat.shape == (10, 13)


def test_wavelet_feature_matches_subband_magnitudes(rng):
    p = rng.uniform(0.0, 1.0, size=(6, 6))
    feat = _wavelet_feature(p)
    bands = dwt2d_level(p, "db1")
    mag = np.sqrt(bands.horiz**2 + bands.vert**2 + bands.diag**2)
    assert feat.shape == (6, 6)
    for y in range(6):
        for x in range(6):
            assert feat[y, x] == mag[y // 2, x // 2]


def test_wavelet_feature_crops_odd_dims(rng):
    assert _wavelet_feature(rng.uniform(0.0, 1.0, size=(7, 9))).shape == (7, 9)


# --- edge preservation ---------------------------------------------------------------


def test_q_abf_identity_is_one(rng):
    x = random_image(rng, 24, 24)
    assert abs(q_abf(x, x, x) - 1.0) < 1e-12


def test_q_abf_constant_images_score_zero():
    c = np.full((16, 16), 0.5)
    assert q_abf(c, c, c) == 0.0


def test_q_abf_source_swap_symmetric(rng):
    a = random_image(rng, 20, 20)
    b = random_image(rng, 20, 20)
    f = 0.5 * (a + b)
    assert abs(q_abf(a, b, f) - q_abf(b, a, f)) < 1e-12


def test_q_abf_bounded(rng):
    for _ in range(5):
        a = random_image(rng, 16, 16)
        b = random_image(rng, 16, 16)
        f = random_image(rng, 16, 16)
        q = q_abf(a, b, f)
        assert 0.0 <= q <= 1.0 + 1e-9


def test_q_abf_constants_are_overridable(rng):
    a = random_image(rng, 16, 16)
    b = random_image(rng, 16, 16)
    f = 0.25 * a + 0.75 * b
    assert q_abf(a, b, f) != q_abf(a, b, f, k_g=-5.0)


# --- nonlinear correlation entropy -----------------------------------------------------


def test_symmetric_cubic_eigs_match_eigvalsh(rng):
    for _ in range(50):
        a, b, c = rng.uniform(0.0, 1.0, size=3)
        m = np.array([[1.0, c, a], [c, 1.0, b], [a, b, 1.0]])
        expect = np.sort(np.linalg.eigvalsh(m))
        got = np.sort(_symmetric_cubic_eigs(a, b, c))
        assert np.max(np.abs(got - expect)) < 1e-9


def test_symmetric_cubic_eigs_permutation_invariant(rng):
    a, b, c = rng.uniform(0.0, 1.0, size=3)
    base = sorted(_symmetric_cubic_eigs(a, b, c))
    for per in ((a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
        assert sorted(_symmetric_cubic_eigs(*per)) == base


def test_q_nice_identity_is_one(rng):
    x = random_image(rng, 24, 24)
    assert abs(q_nice(x, x, x) - 1.0) < 1e-9


def test_q_nice_source_swap_symmetric(rng):
    a = random_image(rng, 16, 16)
    b = random_image(rng, 16, 16)
    f = 0.5 * (a + b)
    assert q_nice(a, b, f) == q_nice(b, a, f)


def test_q_nice_independent_images_near_theory(rng):
    # three unrelated noise images: eigenvalues near 1 each, score near 0.8019
    a = random_image(rng, 64, 64)
    b = random_image(rng, 64, 64)
    f = random_image(rng, 64, 64)
    q = q_nice(a, b, f)
    assert 0.75 < q < 0.85


def test_q_nice_in_unit_interval(rng):
    for _ in range(5):
        a = random_image(rng, 12, 12)
        b = random_image(rng, 12, 12)
        f = random_image(rng, 12, 12)
        assert 0.0 <= q_nice(a, b, f) <= 1.0


# --- reporting -------------------------------------------------------------------------


def make_values(rng):
    return {name: float(rng.uniform(0.0, 1.0)) for name in METRIC_NAMES}


def test_metric_report_roundtrip(rng):
    values = make_values(rng)
    rep = MetricReport("left.pgm", "right.pgm", "out.pgm", values)
    row = rep.row()
    assert row[:3] == ["left.pgm", "right.pgm", "out.pgm"]
    assert row[3:] == [values[n] for n in METRIC_NAMES]


def test_metric_report_rejects_missing_and_nonfinite(rng):
    values = make_values(rng)
    del values["Q_ABF"]
    with pytest.raises(ValueError, match="missing"):
        MetricReport("a", "b", "f", values)
    values = make_values(rng)
    values["EN"] = float("nan")
    with pytest.raises(ValueError, match="non-finite"):
        MetricReport("a", "b", "f", values)


def test_reports_to_csv_roundtrips_floats(rng):
    reps = [MetricReport(f"a{i}", f"b{i}", f"f{i}", make_values(rng)) for i in range(3)]
    text = reports_to_csv(reps)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 4
    cells = lines[2].split(",")
    assert cells[:3] == ["a1", "b1", "f1"]
    for cell, name in zip(cells[3:], METRIC_NAMES):
        assert float(cell) == reps[1].values[name]


def test_report_to_json_has_all_metrics(rng):
    rep = MetricReport("a", "b", "f", make_values(rng))
    data = json.loads(report_to_json(rep))
    assert set(data) == set(METRIC_NAMES)
    assert data["VARI"] == rep.values["VARI"]


def test_evaluate_all_smoke(rng):
    a = random_image(rng, 32, 32)
    b = random_image(rng, 32, 32)
    f = 0.5 * (a + b)
    rep = evaluate_all(a, b, f, source_a="sa", source_b="sb", fused_id="ff")
    assert (rep.source_a, rep.source_b, rep.fused) == ("sa", "sb", "ff")
    assert set(rep.values) == set(METRIC_NAMES)
    assert all(math.isfinite(v) for v in rep.values.values())
    expect_ms = 0.5 * (ms_ssim(f, a) + ms_ssim(f, b))
    assert rep.values["MS_SSIM"] == expect_ms


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ssim_range_property(seed):
    r = np.random.default_rng(seed)
    x = r.uniform(0.0, 1.0, size=(12, 12))
    y = r.uniform(0.0, 1.0, size=(12, 12))
    assert -1.0 <= ssim(x, y) <= 1.0
