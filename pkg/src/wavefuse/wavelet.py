"""Multi-level 2D discrete wavelet transform with exact reconstruction.

Separable Mallat filter bank over the orthonormal Daubechies bases db1-db4.

Boundary handling
-----------------
The default mode is half-sample symmetric extension. It is expansive: a
length-n signal yields subbands of length (n + taps - 1) // 2, which is
ceil(n / 2) for db1. Because the retained coefficient range covers every
filter tap that touches the original samples, reconstruction is exact for
*any* length >= 1 (odd sizes and 1x1 matrices included) and any level count.
``periodization`` is the secondary, non-expansive mode: it needs even
lengths, halves dims exactly, and is orthogonal (preserves energy).

Analysis convolves with the decomposition filters at odd phases,
``a[k] = sum_j g[j] * x_ext[2k + 1 - j]``; synthesis runs the time-reversed
(reconstruction) filters over the zero-stuffed subbands. Orthonormality of
the filter bank makes the pair a perfect-reconstruction system.

Orientation convention (locked by the stripe test in the suite): ``horiz``
is high-pass along x only, hence sensitive to *vertical* edges; ``vert`` is
high-pass along y only (horizontal stripes land there); ``diag`` is
high-pass along both axes. ``WaveletPyramid.levels`` is ordered finest
first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import StructureError

__all__ = [
    "WaveletBasis",
    "SubbandSet",
    "DetailBands",
    "WaveletPyramid",
    "BASES",
    "get_basis",
    "dwt1d",
    "idwt1d",
    "dwt2d_level",
    "idwt2d_level",
    "wavedec2",
    "waverec2",
]

EXTENSION_MODES = ("symmetric", "periodization")

# classic scaling-filter taps (reconstruction low-pass); decomposition
# filters are their time reversal
_SCALING_TAPS = {
    "db1": (
        0.7071067811865476,
        0.7071067811865476,
    ),
    "db2": (
        0.48296291314469025,
        0.836516303737469,
        0.22414386804185735,
        -0.12940952255092145,
    ),
    "db3": (
        0.3326705529509569,
        0.8068915093133388,
        0.4598775021193313,
        -0.13501102001039084,
        -0.08544127388224149,
        0.035226291882100656,
    ),
    "db4": (
        0.23037781330885523,
        0.7148465705525415,
        0.6308807679295904,
        -0.02798376941698385,
        -0.18703481171888114,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ),
}


@dataclass(frozen=True, eq=False)
class WaveletBasis:
    """Orthonormal two-channel filter bank; high-pass is the quadrature
    mirror (alternating-sign reversal) of the low-pass."""

    name: str
    dec_lowpass: np.ndarray
    dec_highpass: np.ndarray
    rec_lowpass: np.ndarray
    rec_highpass: np.ndarray

    @property
    def taps(self) -> int:
        return len(self.dec_lowpass)

    @classmethod
    def from_scaling_taps(cls, name: str, taps) -> "WaveletBasis":
        rec_lo = np.asarray(taps, dtype=np.float64)
        dec_lo = rec_lo[::-1].copy()
        signs = (-1.0) ** np.arange(len(rec_lo))
        dec_hi = signs * rec_lo  # dec_hi[j] = (-1)^j * dec_lo[L-1-j]
        rec_hi = dec_hi[::-1].copy()
        basis = cls(name, dec_lo, dec_hi, rec_lo, rec_hi)
        basis.validate()
        return basis

    def validate(self, tol: float = 1e-10) -> None:
        lo = self.dec_lowpass
        n = len(lo)
        if n < 2 or n % 2 != 0:
            raise ValueError(f"basis '{self.name}': filter length must be even >= 2, got {n}")
        if abs(float(lo @ lo) - 1.0) > tol:
            raise ValueError(f"basis '{self.name}': low-pass taps are not unit-norm")
        if abs(float(lo.sum()) - math.sqrt(2.0)) > tol:
            raise ValueError(f"basis '{self.name}': low-pass taps do not sum to sqrt(2)")
        for shift in range(1, n // 2):
            if abs(float(lo[: n - 2 * shift] @ lo[2 * shift :])) > tol:
                raise ValueError(
                    f"basis '{self.name}': low-pass violates double-shift orthogonality"
                )
        signs = (-1.0) ** np.arange(n)
        if not np.allclose(self.dec_highpass, signs * lo[::-1], atol=tol, rtol=0.0):
            raise ValueError(f"basis '{self.name}': high-pass is not the quadrature mirror")
        if not np.allclose(self.rec_lowpass, lo[::-1], atol=0.0, rtol=0.0) or not np.allclose(
            self.rec_highpass, self.dec_highpass[::-1], atol=0.0, rtol=0.0
        ):
            raise ValueError(f"basis '{self.name}': reconstruction filters must be time-reversed")


BASES = {name: WaveletBasis.from_scaling_taps(name, taps) for name, taps in _SCALING_TAPS.items()}


def get_basis(basis) -> WaveletBasis:
    if isinstance(basis, WaveletBasis):
        return basis
    try:
        return BASES[basis]
    except KeyError:
        raise ValueError(
            f"unknown wavelet basis '{basis}'; available: {', '.join(sorted(BASES))}"
        ) from None


@dataclass(frozen=True, eq=False)
class SubbandSet:
    """One decomposition level: approx plus the three detail orientations."""

    approx: np.ndarray
    horiz: np.ndarray
    vert: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        shapes = {b.shape for b in (self.approx, self.horiz, self.vert, self.diag)}
        if len(shapes) != 1:
            raise StructureError(f"subbands of one level must share dims, got {sorted(shapes)}")


@dataclass(frozen=True, eq=False)
class DetailBands:
    """The three detail subbands of one pyramid level."""

    horiz: np.ndarray
    vert: np.ndarray
    diag: np.ndarray

    def __post_init__(self):
        shapes = {b.shape for b in (self.horiz, self.vert, self.diag)}
        if len(shapes) != 1:
            raise StructureError(f"detail bands of one level must share dims, got {sorted(shapes)}")

    @property
    def bands(self):
        return (self.horiz, self.vert, self.diag)


@dataclass(frozen=True, eq=False)
class WaveletPyramid:
    """Multi-level decomposition of one matrix; ``levels`` runs finest first."""

    levels: tuple
    top_approx: np.ndarray
    original_dims: tuple
    basis_name: str
    extension: str = "symmetric"


def _check_mode(extension: str) -> str:
    if extension not in EXTENSION_MODES:
        raise ValueError(f"unknown extension mode '{extension}'; use one of {EXTENSION_MODES}")
    return extension


def _dec_len(n: int, taps: int, extension: str) -> int:
    if extension == "periodization":
        return n // 2
    return (n + taps - 1) // 2


def _analyze_rows(mat: np.ndarray, basis: WaveletBasis, extension: str):
    """DWT along axis 1 of a 2D array; returns (approx, detail) [R, K]."""
    rows, n = mat.shape
    taps = basis.taps
    if extension == "periodization":
        if n % 2 != 0:
            raise ValueError(f"periodization needs even length, got {n}")
        ext = np.pad(mat, ((0, 0), (taps, taps)), mode="wrap")
    else:
        ext = np.pad(mat, ((0, 0), (taps, taps)), mode="symmetric")
    k_out = _dec_len(n, taps, extension)
    # a[k] = sum_j g[j] * ext[2k + 1 - j]; windows start at offset 2 + 2k
    starts = 2 + 2 * np.arange(k_out)
    win = sliding_window_view(ext, taps, axis=1)[:, starts, :]
    lo_rev = basis.dec_lowpass[::-1]
    hi_rev = basis.dec_highpass[::-1]
    return win @ lo_rev, win @ hi_rev


def _synthesize_rows(
    approx: np.ndarray, detail: np.ndarray, basis: WaveletBasis, target_len: int, extension: str
) -> np.ndarray:
    """Inverse of _analyze_rows along axis 1, truncated to target_len."""
    rows, k_in = approx.shape
    taps = basis.taps
    if detail.shape != approx.shape:
        raise ValueError(f"approx shape {approx.shape} != detail shape {detail.shape}")
    if target_len < 1:
        raise ValueError(f"target length must be >= 1, got {target_len}")
    if extension == "periodization" and target_len % 2 != 0:
        raise ValueError(f"periodization needs an even target length, got {target_len}")
    if _dec_len(target_len, taps, extension) != k_in:
        raise ValueError(
            f"target length {target_len} is inconsistent with {k_in} coefficients "
            f"for a {taps}-tap basis under {extension} extension"
        )
    up = np.zeros((rows, 2 * k_in - 1), dtype=np.float64)
    up_d = np.zeros_like(up)
    up[:, ::2] = approx
    up_d[:, ::2] = detail
    pad = ((0, 0), (taps - 1, taps - 1))
    win_a = sliding_window_view(np.pad(up, pad), taps, axis=1)
    win_d = sliding_window_view(np.pad(up_d, pad), taps, axis=1)
    # full convolution with the synthesis filters (= time-reversed analysis)
    full = win_a @ basis.dec_lowpass + win_d @ basis.dec_highpass
    if extension == "periodization":
        out = np.zeros((rows, target_len), dtype=np.float64)
        idx = (np.arange(full.shape[1]) - (taps - 2)) % target_len
        np.add.at(out, (np.arange(rows)[:, None], idx[None, :]), full)
        return out
    return full[:, taps - 2 : taps - 2 + target_len]


def dwt1d(signal, basis, extension: str = "symmetric"):
    """Single-level 1D analysis; returns (approx, detail)."""
    basis = get_basis(basis)
    _check_mode(extension)
    sig = np.asarray(signal, dtype=np.float64)
    if sig.ndim != 1 or sig.size == 0:
        raise ValueError(f"signal must be a non-empty 1D array, got shape {sig.shape}")
    a, d = _analyze_rows(sig[None, :], basis, extension)
    return a[0], d[0]


def idwt1d(approx, detail, basis, target_len: int, extension: str = "symmetric"):
    """Single-level 1D synthesis back to target_len samples."""
    basis = get_basis(basis)
    _check_mode(extension)
    a = np.asarray(approx, dtype=np.float64)
    d = np.asarray(detail, dtype=np.float64)
    if a.ndim != 1 or d.ndim != 1:
        raise ValueError("approx and detail must be 1D arrays")
    if a.shape != d.shape:
        raise ValueError(f"approx length {a.size} != detail length {d.size}")
    return _synthesize_rows(a[None, :], d[None, :], basis, target_len, extension)[0]


def _check_matrix(matrix) -> np.ndarray:
    mat = np.asarray(matrix, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
        raise ValueError(f"matrix must be 2D with dims >= 1x1, got shape {mat.shape}")
    return mat


def dwt2d_level(matrix, basis, extension: str = "symmetric") -> SubbandSet:
    """One separable 2D analysis level: rows along x first, then columns."""
    basis = get_basis(basis)
    _check_mode(extension)
    mat = _check_matrix(matrix)
    lo_x, hi_x = _analyze_rows(mat, basis, extension)
    ll, lh = _analyze_rows(lo_x.T, basis, extension)  # low-x branch: approx + vert
    hl, hh = _analyze_rows(hi_x.T, basis, extension)  # high-x branch: horiz + diag
    return SubbandSet(approx=ll.T, horiz=hl.T, vert=lh.T, diag=hh.T)


def idwt2d_level(bands: SubbandSet, basis, target_dims, extension: str = "symmetric") -> np.ndarray:
    """Invert one separable level back to target_dims = (height, width)."""
    basis = get_basis(basis)
    _check_mode(extension)
    h, w = target_dims
    lo_x = _synthesize_rows(bands.approx.T, bands.vert.T, basis, h, extension).T
    hi_x = _synthesize_rows(bands.horiz.T, bands.diag.T, basis, h, extension).T
    return _synthesize_rows(lo_x, hi_x, basis, w, extension)


def _max_periodization_level(dims) -> int:
    lv = 0
    h, w = dims
    while h % 2 == 0 and w % 2 == 0 and h > 0 and w > 0:
        lv += 1
        h //= 2
        w //= 2
    return lv


def _dims_chain(dims, taps: int, levels: int, extension: str):
    """Input dims of each level: chain[0] is the full matrix, chain[l] feeds level l+1."""
    chain = [tuple(dims)]
    for _ in range(levels):
        h, w = chain[-1]
        chain.append((_dec_len(h, taps, extension), _dec_len(w, taps, extension)))
    return chain


def wavedec2(matrix, basis, levels: int, extension: str = "symmetric") -> WaveletPyramid:
    """Multi-level 2D decomposition; detail triples are ordered finest first."""
    basis = get_basis(basis)
    _check_mode(extension)
    mat = _check_matrix(matrix)
    if not isinstance(levels, int) or levels < 1:
        raise ValueError(f"levels must be an integer >= 1, got {levels!r}")
    if extension == "periodization":
        feasible = _max_periodization_level(mat.shape)
        if levels > feasible:
            raise ValueError(
                f"levels={levels} exceeds the maximum feasible level {feasible} for "
                f"{mat.shape[0]}x{mat.shape[1]} input under periodization"
            )
    details = []
    cur = mat
    for _ in range(levels):
        bands = dwt2d_level(cur, basis, extension)
        details.append(DetailBands(bands.horiz, bands.vert, bands.diag))
        cur = bands.approx
    return WaveletPyramid(
        levels=tuple(details),
        top_approx=cur,
        original_dims=tuple(mat.shape),
        basis_name=basis.name,
        extension=extension,
    )


def waverec2(pyramid: WaveletPyramid, basis=None) -> np.ndarray:
    """Reconstruct the original matrix from a pyramid (exact round trip)."""
    basis = get_basis(pyramid.basis_name if basis is None else basis)
    extension = _check_mode(pyramid.extension)
    n_levels = len(pyramid.levels)
    if n_levels < 1:
        raise StructureError("pyramid has no decomposition levels")
    chain = _dims_chain(pyramid.original_dims, basis.taps, n_levels, extension)
    for lv, det in enumerate(pyramid.levels):
        expect = chain[lv + 1]
        if det.horiz.shape != expect:
            raise StructureError(
                f"level {lv} detail dims {det.horiz.shape} do not match expected {expect} "
                f"for original dims {pyramid.original_dims} with basis {basis.name}"
            )
    if pyramid.top_approx.shape != chain[n_levels]:
        raise StructureError(
            f"top approximation dims {pyramid.top_approx.shape} do not match "
            f"expected {chain[n_levels]}"
        )
    cur = pyramid.top_approx
    for lv in range(n_levels - 1, -1, -1):
        det = pyramid.levels[lv]
        bands = SubbandSet(approx=cur, horiz=det.horiz, vert=det.vert, diag=det.diag)
        cur = idwt2d_level(bands, basis, chain[lv], extension)
    return cur
