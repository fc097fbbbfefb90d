"""Fusion quality metrics: EN, CE, FMI (pixel/DCT/wavelet), Q_NICE, Q_ABF,
VARI and MS-SSIM, plus the differentiable SSIM that drives training.

Conventions shared by the histogram family (EN, CE, FMI, Q_NICE, VARI):
pixels are quantized to integer 0..255 first. The SSIM family operates on
the continuous [0, 1] values directly. Every metric is deterministic and
invariant under swapping the two source images.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imageio import GrayImage, quantize_u8
from .wavelet import dwt2d_level

__all__ = [
    "METRIC_NAMES",
    "MetricReport",
    "ssim",
    "ssim_with_gradient",
    "ms_ssim",
    "entropy",
    "cross_entropy_metric",
    "variance_metric",
    "fmi",
    "q_abf",
    "q_nice",
    "evaluate_all",
    "reports_to_csv",
    "report_to_json",
]

METRIC_NAMES = ("EN", "CE", "FMI_pixel", "FMI_dct", "FMI_w", "Q_NICE", "Q_ABF", "VARI", "MS_SSIM")

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2  # data range is 1.0
SSIM_C2 = 0.03**2
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)

# edge-preservation sigmoid constants (standard parameterization)
QABF_GAMMA_G = 0.9994
QABF_K_G = -15.0
QABF_SIGMA_G = 0.5
QABF_GAMMA_A = 0.9879
QABF_K_A = -22.0
QABF_SIGMA_A = 0.8

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = np.array([[1.0, 2.0, 1.0], [0.0, 0.0, 0.0], [-1.0, -2.0, -1.0]])


def _pixels(img) -> np.ndarray:
    p = img.pixels if isinstance(img, GrayImage) else np.asarray(img, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"expected a 2D grayscale image, got shape {p.shape}")
    return np.asarray(p, dtype=np.float64)


def _pixel_pair(x, y):
    a = _pixels(x)
    b = _pixels(y)
    if a.shape != b.shape:
        raise ValueError(f"image dims differ: {a.shape} vs {b.shape}")
    return a, b


# ---------------------------------------------------------------------------
# SSIM family
# ---------------------------------------------------------------------------


def _gaussian_1d(window: int, sigma: float) -> np.ndarray:
    x = np.arange(window, dtype=np.float64) - (window - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _valid_corr(img: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a symmetric 1D kernel."""
    t = sliding_window_view(img, len(kern), axis=1) @ kern
    return sliding_window_view(t, len(kern), axis=0) @ kern


def _ssim_fields(x: np.ndarray, y: np.ndarray, window: int, sigma: float, c1: float, c2: float):
    kern = _gaussian_1d(window, sigma)
    mu_x = _valid_corr(x, kern)
    mu_y = _valid_corr(y, kern)
    sxx = _valid_corr(x * x, kern) - mu_x * mu_x
    syy = _valid_corr(y * y, kern) - mu_y * mu_y
    sxy = _valid_corr(x * y, kern) - mu_x * mu_y
    a1 = 2.0 * mu_x * mu_y + c1
    a2 = 2.0 * sxy + c2
    b1 = mu_x * mu_x + mu_y * mu_y + c1
    b2 = sxx + syy + c2
    return mu_x, mu_y, a1, a2, b1, b2, (a1 * a2) / (b1 * b2)


def ssim(
    x,
    y,
    window: int = SSIM_WINDOW,
    sigma: float = SSIM_SIGMA,
    c1: float = SSIM_C1,
    c2: float = SSIM_C2,
) -> float:
    """Mean SSIM over all fully-interior Gaussian windows (data range 1)."""
    a, b = _pixel_pair(x, y)
    if min(a.shape) < window:
        raise ValueError(f"image dims {a.shape} are smaller than the {window}x{window} window")
    *_, smap = _ssim_fields(a, b, window, sigma, c1, c2)
    return float(smap.mean())


def ssim_with_gradient(x, y, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA):
    """SSIM value plus its analytic gradient with respect to the first image."""
    a, b = _pixel_pair(x, y)
    if min(a.shape) < window:
        raise ValueError(f"image dims {a.shape} are smaller than the {window}x{window} window")
    kern = _gaussian_1d(window, sigma)
    mu_x, mu_y, a1, a2, b1, b2, smap = _ssim_fields(a, b, window, sigma, SSIM_C1, SSIM_C2)
    inv_bb = 1.0 / (b1 * b2)
    # per-window linear form dS/dx[q] = w * (coef0 + coef_y * y[q] + coef_x * x[q])
    coef_y = 2.0 * a1 * inv_bb
    coef_x = -2.0 * smap / b2
    coef0 = (
        2.0 * mu_y * a2 * inv_bb
        - coef_y * mu_y
        - 2.0 * mu_x * smap / b1
        - coef_x * mu_x
    )
    pad = window - 1

    def spread(fields):
        return _valid_corr(np.pad(fields, pad), kern)

    n_win = smap.size
    grad = (spread(coef0) + b * spread(coef_y) + a * spread(coef_x)) / n_win
    return float(smap.mean()), grad


def _halve(img: np.ndarray) -> np.ndarray:
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    return img[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def ms_ssim(x, y, weights=MS_SSIM_WEIGHTS) -> float:
    """Multi-scale SSIM with 2x2-mean dyadic downsampling.

    Inputs smaller than 11 * 2^(scales-1) use fewer scales with the leading
    weights renormalized; negative factor means are clamped at zero.
    """
    a, b = _pixel_pair(x, y)
    dim = min(a.shape)
    scales = 0
    while scales < len(weights) and dim >= SSIM_WINDOW:
        scales += 1
        dim //= 2
    if scales == 0:
        raise ValueError(f"image dims {a.shape} are too small for even one SSIM scale")
    w = np.asarray(weights[:scales], dtype=np.float64)
    w = w / w.sum()
    result = 1.0
    for lv in range(scales):
        *_, a2, _, b2, smap = _ssim_fields(a, b, SSIM_WINDOW, SSIM_SIGMA, SSIM_C1, SSIM_C2)
        if lv < scales - 1:
            factor = float((a2 / b2).mean())  # contrast-structure only
            a = _halve(a)
            b = _halve(b)
        else:
            factor = float(smap.mean())  # full SSIM at the coarsest scale
        result *= max(factor, 0.0) ** w[lv]
    return float(result)


# ---------------------------------------------------------------------------
# histogram machinery
# ---------------------------------------------------------------------------


def _hist256(q: np.ndarray) -> np.ndarray:
    return np.bincount(q.reshape(-1), minlength=256).astype(np.float64)


def _entropy_bits(counts: np.ndarray, n: float) -> float:
    """Shannon entropy in bits; summed over sorted terms so the value is
    invariant under any reordering of the underlying cells."""
    p = counts[counts > 0.0] / n
    p = np.sort(p)
    return float(-(p * np.log2(p)).sum())


def _joint_counts(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.bincount((u.astype(np.int64) * 256 + v).reshape(-1), minlength=65536).astype(
        np.float64
    )


def _nmi(u: np.ndarray, v: np.ndarray) -> float:
    """Normalized mutual information 2*I/(H(u)+H(v)) of two 0..255 rasters.

    Identical rasters give exactly 1; two constants are treated as perfectly
    dependent. Symmetric in its arguments bitwise.
    """
    n = float(u.size)
    hu = _entropy_bits(_hist256(u), n)
    hv = _entropy_bits(_hist256(v), n)
    denom = hu + hv
    if denom == 0.0:
        return 1.0
    hjoint = _entropy_bits(_joint_counts(u, v), n)
    return float(2.0 * (denom - hjoint) / denom)


def entropy(fused) -> float:
    """Shannon entropy (bits) of the 256-bin intensity histogram."""
    q = quantize_u8(_pixels(fused))
    return _entropy_bits(_hist256(q), float(q.size))


def cross_entropy_metric(img_a, img_b, fused) -> float:
    """Mean KL divergence (bits) from each source histogram to the fused one,
    with add-one smoothing."""
    a, f = _pixel_pair(img_a, fused)
    b, _ = _pixel_pair(img_b, fused)

    def smoothed(img):
        h = _hist256(quantize_u8(img)) + 1.0
        return h / h.sum()

    pf = smoothed(f)

    def kl(p):
        return float((p * np.log2(p / pf)).sum())

    return 0.5 * (kl(smoothed(a)) + kl(smoothed(b)))


def variance_metric(fused) -> float:
    """Population variance of the quantized image on the 0..255 scale."""
    q = quantize_u8(_pixels(fused)).astype(np.float64)
    return float(q.var())


# ---------------------------------------------------------------------------
# feature mutual information
# ---------------------------------------------------------------------------

FMI_VARIANTS = ("pixel", "dct", "wavelet")


def _dct_matrix(n: int = 8) -> np.ndarray:
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * m + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    d[0, :] = math.sqrt(1.0 / n)
    return d


_DCT8 = _dct_matrix(8)


def _dct_feature(p: np.ndarray) -> np.ndarray:
    """Blockwise 8x8 DCT coefficient magnitudes (edge-replicated padding)."""
    h, w = p.shape
    ph = (-h) % 8
    pw = (-w) % 8
    padded = np.pad(p, ((0, ph), (0, pw)), mode="edge")
    hb, wb = padded.shape[0] // 8, padded.shape[1] // 8
    blocks = padded.reshape(hb, 8, wb, 8).transpose(0, 2, 1, 3)
    coeffs = np.einsum("ka,ijab,lb->ijkl", _DCT8, blocks, _DCT8)
    out = np.abs(coeffs).transpose(0, 2, 1, 3).reshape(hb * 8, wb * 8)
    return out[:h, :w]


def _wavelet_feature(p: np.ndarray) -> np.ndarray:
    """Magnitude of the level-1 db1 detail bands, upsampled to image size."""
    bands = dwt2d_level(p, "db1")
    mag = np.sqrt(bands.horiz**2 + bands.vert**2 + bands.diag**2)
    up = np.repeat(np.repeat(mag, 2, axis=0), 2, axis=1)
    return up[: p.shape[0], : p.shape[1]]


def _feature_bins(p: np.ndarray, variant: str) -> np.ndarray:
    if variant == "pixel":
        return quantize_u8(p).astype(np.int64)
    feat = _dct_feature(p) if variant == "dct" else _wavelet_feature(p)
    lo = feat.min()
    hi = feat.max()
    if hi <= lo:
        return np.zeros(feat.shape, dtype=np.int64)
    q = np.floor((feat - lo) / (hi - lo) * 256.0).astype(np.int64)
    return np.minimum(q, 255)


def fmi(img_a, img_b, fused, variant: str = "pixel") -> float:
    """Feature mutual information: mean NMI between fused and source features."""
    if variant not in FMI_VARIANTS:
        raise ValueError(f"unknown FMI variant '{variant}'; use one of {FMI_VARIANTS}")
    a, f = _pixel_pair(img_a, fused)
    b, _ = _pixel_pair(img_b, fused)
    fa = _feature_bins(a, variant)
    fb = _feature_bins(b, variant)
    ff = _feature_bins(f, variant)
    return 0.5 * (_nmi(ff, fa) + _nmi(ff, fb))


# ---------------------------------------------------------------------------
# gradient-based edge preservation
# ---------------------------------------------------------------------------


def _corr3_replicate(img: np.ndarray, kern: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    win = sliding_window_view(padded, (3, 3))
    return np.tensordot(win, kern, axes=([2, 3], [0, 1]))


def _sobel(img: np.ndarray):
    gx = _corr3_replicate(img, _SOBEL_X)
    gy = _corr3_replicate(img, _SOBEL_Y)
    mag = np.sqrt(gx * gx + gy * gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        ang = np.where(gx == 0.0, np.pi / 2.0, np.arctan(gy / np.where(gx == 0.0, 1.0, gx)))
    return mag, ang


def _edge_sigmoid(value, gamma: float, k: float, s: float):
    return gamma / (1.0 + np.exp(k * (value - s)))


def _preservation(g_src, a_src, g_f, a_f, consts):
    """Per-pixel edge preservation Q = Qg * Qa; each sigmoid factor is
    normalized by its value at perfect preservation so Q(identical) == 1."""
    gamma_g, k_g, s_g, gamma_a, k_a, s_a = consts
    gmax = np.maximum(g_src, g_f)
    ratio = np.where(gmax > 0.0, np.minimum(g_src, g_f) / np.where(gmax > 0.0, gmax, 1.0), 1.0)
    align = 1.0 - np.abs(a_src - a_f) / (np.pi / 2.0)
    qg = _edge_sigmoid(ratio, gamma_g, k_g, s_g) / _edge_sigmoid(1.0, gamma_g, k_g, s_g)
    qa = _edge_sigmoid(align, gamma_a, k_a, s_a) / _edge_sigmoid(1.0, gamma_a, k_a, s_a)
    return qg * qa


def q_abf(
    img_a,
    img_b,
    fused,
    gamma_g: float = QABF_GAMMA_G,
    k_g: float = QABF_K_G,
    sigma_g: float = QABF_SIGMA_G,
    gamma_a: float = QABF_GAMMA_A,
    k_a: float = QABF_K_A,
    sigma_a: float = QABF_SIGMA_A,
) -> float:
    """Gradient-based edge-transfer score, weighted by source edge strength."""
    a, f = _pixel_pair(img_a, fused)
    b, _ = _pixel_pair(img_b, fused)
    consts = (gamma_g, k_g, sigma_g, gamma_a, k_a, sigma_a)
    ga, aa = _sobel(a)
    gb, ab = _sobel(b)
    gf, af = _sobel(f)
    qaf = _preservation(ga, aa, gf, af, consts)
    qbf = _preservation(gb, ab, gf, af, consts)
    denom = float((ga + gb).sum())
    if denom == 0.0:
        return 0.0
    return float((qaf * ga + qbf * gb).sum() / denom)


# ---------------------------------------------------------------------------
# nonlinear correlation information entropy
# ---------------------------------------------------------------------------


def _symmetric_cubic_eigs(a: float, b: float, c: float):
    """Eigenvalues of [[1,c,a],[c,1,b],[a,b,1]] via the trigonometric cubic
    formula, evaluated on sorted inputs so any permutation of (a, b, c)
    yields bitwise-identical results."""
    v0, v1, v2 = sorted((a, b, c))
    s = v0 * v0 + v1 * v1 + v2 * v2
    if s == 0.0:
        return (1.0, 1.0, 1.0)
    prod = v0 * v1 * v2
    r = math.sqrt(s / 3.0)
    arg = min(1.0, max(-1.0, 3.0 * math.sqrt(3.0) * prod / s**1.5))
    theta = math.acos(arg)
    return tuple(1.0 + 2.0 * r * math.cos((theta - 2.0 * math.pi * k) / 3.0) for k in range(3))


def q_nice(img_a, img_b, fused) -> float:
    """Nonlinear correlation information entropy of the (A, B, F) triple.

    Pairwise nonlinear correlations are NMI values; the score is
    1 + sum (lambda_i / 3) * log_256(lambda_i / 3) over the eigenvalues of
    the 3x3 correlation matrix. Identical triple -> 1; independent -> ~0.8019.
    """
    a, f = _pixel_pair(img_a, fused)
    b, _ = _pixel_pair(img_b, fused)
    qa = quantize_u8(a).astype(np.int64)
    qb = quantize_u8(b).astype(np.int64)
    qf = quantize_u8(f).astype(np.int64)
    n_ab = _nmi(qa, qb)
    n_af = _nmi(qa, qf)
    n_bf = _nmi(qb, qf)
    total = 1.0
    for lam in _symmetric_cubic_eigs(n_af, n_bf, n_ab):
        lam = max(lam, 0.0) / 3.0
        if lam > 0.0:
            total += lam * math.log(lam) / math.log(256.0)
    return float(min(max(total, 0.0), 1.0))


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    """All nine metric values for one fused result."""

    source_a: str
    source_b: str
    fused: str
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [n for n in METRIC_NAMES if n not in self.values]
        if missing:
            raise ValueError(f"metric report is missing {missing}")
        bad = [n for n in METRIC_NAMES if not math.isfinite(self.values[n])]
        if bad:
            raise ValueError(f"non-finite metric values for {bad}")

    def row(self):
        return [self.source_a, self.source_b, self.fused] + [
            self.values[n] for n in METRIC_NAMES
        ]


CSV_HEADER = ("source_a", "source_b", "fused") + METRIC_NAMES


def evaluate_all(img_a, img_b, fused, source_a="a", source_b="b", fused_id="fused") -> MetricReport:
    """Compute the full nine-metric suite for one (A, B, F) triple."""
    values = {
        "EN": entropy(fused),
        "CE": cross_entropy_metric(img_a, img_b, fused),
        "FMI_pixel": fmi(img_a, img_b, fused, "pixel"),
        "FMI_dct": fmi(img_a, img_b, fused, "dct"),
        "FMI_w": fmi(img_a, img_b, fused, "wavelet"),
        "Q_NICE": q_nice(img_a, img_b, fused),
        "Q_ABF": q_abf(img_a, img_b, fused),
        "VARI": variance_metric(fused),
        "MS_SSIM": 0.5 * (ms_ssim(fused, img_a) + ms_ssim(fused, img_b)),
    }
    return MetricReport(source_a, source_b, fused_id, values)


def reports_to_csv(reports) -> str:
    lines = [",".join(CSV_HEADER)]
    for rep in reports:
        cells = rep.row()
        lines.append(",".join(cells[:3] + [repr(v) for v in cells[3:]]))
    return "\n".join(lines) + "\n"


def report_to_json(report: MetricReport) -> str:
    return json.dumps({n: report.values[n] for n in METRIC_NAMES}, indent=2) + "\n"
