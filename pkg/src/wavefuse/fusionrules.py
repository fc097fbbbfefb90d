"""Coefficient fusion rules applied in the wavelet domain.

Three rules operate on pairs of pyramids decomposed from the two source
feature maps:

* ``regional`` - approximation bands are merged by windowed regional energy
  with a matching-degree switch (select the stronger region when the two
  sources disagree, weighted-average them when they agree); detail bands
  keep whichever source has the larger global variance.
* ``l1norm`` - every band is averaged with weights from the block-averaged
  l1 activity summed across the feature channels.
* ``combined`` - the arithmetic mean of the two rules' outputs, band-wise.

All windowed quantities replicate edge samples, so windows may exceed the
band dims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import StructureError
from .wavelet import DetailBands, WaveletPyramid

__all__ = [
    "FusionRuleConfig",
    "regional_energy",
    "fuse_low_regional",
    "fuse_high_variance",
    "fuse_l1norm",
    "fuse_pyramids",
]

RULES = ("regional", "l1norm", "combined")
COMBINE_MODES = ("mean",)


@dataclass(frozen=True)
class FusionRuleConfig:
    """Knobs of the wavelet-domain fusion stage."""

    rule: str = "combined"
    window: int = 3
    match_threshold: float = 0.6
    block_radius: int = 1
    combine_mode: str = "mean"
    levels: int = 2
    basis: str = "db1"

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule '{self.rule}'; use one of {RULES}")
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and >= 1, got {self.window}")
        if not 0.0 < self.match_threshold < 1.0:
            raise ValueError(f"match_threshold must lie in (0, 1), got {self.match_threshold}")
        if self.block_radius < 0:
            raise ValueError(f"block_radius must be >= 0, got {self.block_radius}")
        if self.combine_mode not in COMBINE_MODES:
            raise ValueError(f"unknown combine_mode '{self.combine_mode}'")
        if self.levels < 1:
            raise ValueError(f"levels must be >= 1, got {self.levels}")


def _binomial_kernel(window: int) -> np.ndarray:
    """Normalized 2D binomial weights; window=3 gives [[1,2,1],[2,4,2],[1,2,1]]/16."""
    row = np.array([math.comb(window - 1, i) for i in range(window)], dtype=np.float64)
    kern = np.outer(row, row)
    return kern / kern.sum()


def _windowed_weighted_sum(values: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Kernel-weighted sum over a sliding window with edge replication."""
    r = kernel.shape[0] // 2
    padded = np.pad(values, r, mode="edge")
    win = sliding_window_view(padded, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def _check_pair(c1: np.ndarray, c2: np.ndarray, what: str):
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    if c1.shape != c2.shape:
        raise ValueError(f"{what} dims differ: {c1.shape} vs {c2.shape}")
    return c1, c2


def regional_energy(coeffs, window: int = 3) -> np.ndarray:
    """Windowed binomial-weighted sum of squared coefficients."""
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    c = np.asarray(coeffs, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError(f"coefficients must be 2D, got shape {c.shape}")
    return _windowed_weighted_sum(c * c, _binomial_kernel(window))


def fuse_low_regional(
    low1, low2, window: int = 3, match_threshold: float = 0.6
) -> np.ndarray:
    """Merge two approximation bands by regional energy and matching degree.

    Where the windowed cross-correlation of the two bands (normalized to
    [-1, 1]) falls below the threshold, the coefficient with the larger
    regional energy wins outright; elsewhere the bands are averaged with the
    majority weight 0.5 + 0.5 * (1 - M) / (1 - T).
    """
    if not 0.0 < match_threshold < 1.0:
        raise ValueError(f"match_threshold must lie in (0, 1), got {match_threshold}")
    c1, c2 = _check_pair(low1, low2, "approximation bands")
    kern = _binomial_kernel(window)
    e1 = _windowed_weighted_sum(c1 * c1, kern)
    e2 = _windowed_weighted_sum(c2 * c2, kern)
    cross = _windowed_weighted_sum(c1 * c2, kern)
    total = e1 + e2
    with np.errstate(invalid="ignore", divide="ignore"):
        match = np.where(total > 0.0, 2.0 * cross / np.where(total > 0.0, total, 1.0), 0.0)
    major_first = e1 >= e2
    w_major = np.clip(0.5 + 0.5 * (1.0 - match) / (1.0 - match_threshold), 0.5, 1.0)
    w_minor = 1.0 - w_major
    averaged = np.where(
        major_first, w_major * c1 + w_minor * c2, w_major * c2 + w_minor * c1
    )
    selected = np.where(major_first, c1, c2)
    return np.where(match < match_threshold, selected, averaged)


def fuse_high_variance(band1, band2) -> np.ndarray:
    """Keep whichever detail band has the larger global variance (mean on ties)."""
    c1, c2 = _check_pair(band1, band2, "detail bands")
    v1 = float(c1.var())
    v2 = float(c2.var())
    if v1 > v2:
        return c1.copy()
    if v2 > v1:
        return c2.copy()
    return 0.5 * (c1 + c2)


def _box_mean(values: np.ndarray, radius: int) -> np.ndarray:
    """(2r+1)^2 block average with edge replication; r=0 is the identity."""
    if radius == 0:
        return values
    padded = np.pad(values, radius, mode="edge")
    size = 2 * radius + 1
    win = sliding_window_view(padded, (size, size))
    return win.mean(axis=(2, 3))


def l1_activity_weights(stack1: np.ndarray, stack2: np.ndarray, block_radius: int = 1):
    """Per-position source weights from block-averaged channel-summed |coeffs|.

    Returns (w1, w2) with w1 + w2 == 1 and both 0.5 wherever the combined
    activity vanishes.
    """
    a1 = _box_mean(np.abs(stack1).sum(axis=0), block_radius)
    a2 = _box_mean(np.abs(stack2).sum(axis=0), block_radius)
    total = a1 + a2
    safe = np.where(total > 0.0, total, 1.0)
    w1 = np.where(total > 0.0, a1 / safe, 0.5)
    w2 = np.where(total > 0.0, a2 / safe, 0.5)
    return w1, w2


def _fuse_stack_l1(stack1: np.ndarray, stack2: np.ndarray, block_radius: int) -> np.ndarray:
    w1, w2 = l1_activity_weights(stack1, stack2, block_radius)
    return w1 * stack1 + w2 * stack2


def _check_same_structure(pyrs1, pyrs2):
    if len(pyrs1) == 0 or len(pyrs1) != len(pyrs2):
        raise StructureError(
            f"channel counts differ or are empty: {len(pyrs1)} vs {len(pyrs2)}"
        )
    ref = pyrs1[0]
    for p in list(pyrs1) + list(pyrs2):
        if p.basis_name != ref.basis_name or p.extension != ref.extension:
            raise StructureError(
                f"mixed bases/extensions: {p.basis_name}/{p.extension} vs "
                f"{ref.basis_name}/{ref.extension}"
            )
        if p.original_dims != ref.original_dims or len(p.levels) != len(ref.levels):
            raise StructureError(
                f"pyramid structure differs: dims {p.original_dims} levels {len(p.levels)} "
                f"vs dims {ref.original_dims} levels {len(ref.levels)}"
            )
        for lv, (da, db) in enumerate(zip(p.levels, ref.levels)):
            if da.horiz.shape != db.horiz.shape:
                raise StructureError(
                    f"level {lv} subband dims differ: {da.horiz.shape} vs {db.horiz.shape}"
                )


def _rebuild(pyr: WaveletPyramid, detail_triples, top) -> WaveletPyramid:
    levels = tuple(DetailBands(h, v, d) for (h, v, d) in detail_triples)
    return WaveletPyramid(
        levels=levels,
        top_approx=top,
        original_dims=pyr.original_dims,
        basis_name=pyr.basis_name,
        extension=pyr.extension,
    )


def _fuse_regional(pyrs1, pyrs2, config: FusionRuleConfig):
    fused = []
    for p1, p2 in zip(pyrs1, pyrs2):
        triples = []
        for d1, d2 in zip(p1.levels, p2.levels):
            triples.append(
                tuple(fuse_high_variance(b1, b2) for b1, b2 in zip(d1.bands, d2.bands))
            )
        top = fuse_low_regional(
            p1.top_approx, p2.top_approx, config.window, config.match_threshold
        )
        fused.append(_rebuild(p1, triples, top))
    return fused


def fuse_l1norm(pyrs1, pyrs2, block_radius: int = 1):
    """Fuse two channel stacks of pyramids with the l1-activity rule.

    The activity map is shared across channels (summed |coeffs| per band
    position), so the whole stack must be fused at once.
    """
    _check_same_structure(pyrs1, pyrs2)
    n_levels = len(pyrs1[0].levels)
    fused_details = []  # [level][band] -> fused stack [C, h, w]
    for lv in range(n_levels):
        per_band = []
        for band in range(3):
            s1 = np.stack([p.levels[lv].bands[band] for p in pyrs1])
            s2 = np.stack([p.levels[lv].bands[band] for p in pyrs2])
            per_band.append(_fuse_stack_l1(s1, s2, block_radius))
        fused_details.append(per_band)
    t1 = np.stack([p.top_approx for p in pyrs1])
    t2 = np.stack([p.top_approx for p in pyrs2])
    fused_top = _fuse_stack_l1(t1, t2, block_radius)
    out = []
    for ch, p1 in enumerate(pyrs1):
        triples = [
            (fused_details[lv][0][ch], fused_details[lv][1][ch], fused_details[lv][2][ch])
            for lv in range(n_levels)
        ]
        out.append(_rebuild(p1, triples, fused_top[ch]))
    return out


def _mean_pyramids(pa: WaveletPyramid, pb: WaveletPyramid) -> WaveletPyramid:
    triples = [
        tuple(0.5 * (b1 + b2) for b1, b2 in zip(da.bands, db.bands))
        for da, db in zip(pa.levels, pb.levels)
    ]
    return _rebuild(pa, triples, 0.5 * (pa.top_approx + pb.top_approx))


def fuse_pyramids(pyrs1, pyrs2, config: FusionRuleConfig):
    """Fuse two equal-length lists of structurally identical pyramids.

    One pyramid per feature channel; returns the fused list in channel order.
    """
    _check_same_structure(pyrs1, pyrs2)
    if config.rule == "regional":
        return _fuse_regional(pyrs1, pyrs2, config)
    if config.rule == "l1norm":
        return fuse_l1norm(pyrs1, pyrs2, config.block_radius)
    regional = _fuse_regional(pyrs1, pyrs2, config)
    l1 = fuse_l1norm(pyrs1, pyrs2, config.block_radius)
    return [_mean_pyramids(pa, pb) for pa, pb in zip(regional, l1)]
