"""Float64 tensor primitives: 2D convolution with explicit backward passes,
ReLU, and a functional Adam optimizer.

Tensors are plain numpy float64 arrays in row-major order. Convolutions are
stride-1 with same-zero padding, so spatial dims are preserved end to end;
the heavy lifting happens in one im2col + matmul per pass.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, NumericError

__all__ = [
    "ConvLayerParams",
    "AdamState",
    "conv2d_forward",
    "conv2d_backward",
    "relu_forward",
    "relu_backward",
    "adam_step",
]


def _f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class ConvLayerParams:
    """One conv layer: kernels [out_ch, in_ch, k, k] and bias [out_ch], k odd."""

    kernels: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kernels", _f64(self.kernels))
        object.__setattr__(self, "bias", _f64(self.bias))
        k = self.kernels
        if k.ndim != 4 or k.shape[2] != k.shape[3]:
            raise DimensionError(f"kernels must be [out, in, k, k] with square k, got {k.shape}")
        if k.shape[2] % 2 == 0:
            raise DimensionError(f"kernel size must be odd for same padding, got {k.shape[2]}")
        if self.bias.shape != (k.shape[0],):
            raise DimensionError(
                f"bias shape {self.bias.shape} does not match {k.shape[0]} output channels"
            )

    @property
    def out_channels(self) -> int:
        return self.kernels.shape[0]

    @property
    def in_channels(self) -> int:
        return self.kernels.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.kernels.shape[2]


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """Zero-padded sliding patches of [C,H,W], flattened to [H*W, C*k*k]."""
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    win = sliding_window_view(xp, (k, k), axis=(1, 2))  # [C, H, W, k, k]
    c, h, w = x.shape
    return win.transpose(1, 2, 0, 3, 4).reshape(h * w, c * k * k)


def _check_input(inp: np.ndarray, params: ConvLayerParams) -> np.ndarray:
    inp = _f64(inp)
    if inp.ndim != 3:
        raise DimensionError(f"input must be [channels, height, width], got shape {inp.shape}")
    if inp.shape[0] != params.in_channels:
        raise DimensionError(
            f"input axis 0 has {inp.shape[0]} channels but kernels expect {params.in_channels}"
        )
    if inp.shape[1] < 1 or inp.shape[2] < 1:
        raise DimensionError(f"spatial axes must be >= 1, got {inp.shape[1]}x{inp.shape[2]}")
    return inp


def conv2d_forward(inp, params: ConvLayerParams) -> np.ndarray:
    """Correlate [C,H,W] with the layer kernels; returns [out_ch, H, W]."""
    inp = _check_input(inp, params)
    _, h, w = inp.shape
    k = params.kernel_size
    cols = _im2col(inp, k)  # [H*W, C*k*k]
    kmat = params.kernels.reshape(params.out_channels, -1)
    out = kmat @ cols.T + params.bias[:, None]
    return out.reshape(params.out_channels, h, w)


def conv2d_backward(inp, params: ConvLayerParams, grad_output):
    """Gradients of a scalar loss w.r.t. conv input, kernels and bias.

    Returns (grad_input [C,H,W], grad_kernels [O,C,k,k], grad_bias [O]).
    """
    inp = _check_input(inp, params)
    g = _f64(grad_output)
    _, h, w = inp.shape
    if g.shape != (params.out_channels, h, w):
        raise DimensionError(
            f"grad_output shape {g.shape} does not match output shape "
            f"({params.out_channels}, {h}, {w})"
        )
    k = params.kernel_size
    gmat = g.reshape(params.out_channels, -1)  # [O, H*W]
    grad_bias = gmat.sum(axis=1)
    cols = _im2col(inp, k)  # [H*W, C*k*k]
    grad_kernels = (gmat @ cols).reshape(params.kernels.shape)
    # grad wrt input: correlate grad_output with the 180-degree-rotated kernels
    gcols = _im2col(g, k)  # [H*W, O*k*k]
    krot = params.kernels[:, :, ::-1, ::-1].transpose(1, 0, 2, 3).reshape(params.in_channels, -1)
    grad_input = (krot @ gcols.T).reshape(inp.shape)
    return grad_input, grad_kernels, grad_bias


def relu_forward(inp) -> np.ndarray:
    return np.maximum(_f64(inp), 0.0)


def relu_backward(inp, grad_output) -> np.ndarray:
    """Pass gradient where input > 0; subgradient 0 at exactly 0."""
    inp = _f64(inp)
    g = _f64(grad_output)
    if inp.shape != g.shape:
        raise DimensionError(f"input shape {inp.shape} != grad_output shape {g.shape}")
    return np.where(inp > 0.0, g, 0.0)


@dataclass(frozen=True, eq=False)
class AdamState:
    """Per-tensor Adam moments; adam_step is functional and returns a new state."""

    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if self.first_moment.shape != self.second_moment.shape:
            raise DimensionError("moment tensors must share one shape")
        if np.any(self.second_moment < 0.0):
            raise ValueError("second moment must be non-negative")

    @classmethod
    def for_params(cls, params, learning_rate=1e-4, beta1=0.9, beta2=0.999, epsilon=1e-8):
        z = np.zeros_like(_f64(params))
        return cls(z, z.copy(), 0, learning_rate, beta1, beta2, epsilon)


def adam_step(params, grads, state: AdamState, label: str = "params"):
    """One Adam update with bias correction; returns (new_params, new_state)."""
    p = _f64(params)
    g = _f64(grads)
    if not (p.shape == g.shape == state.first_moment.shape):
        raise DimensionError(
            f"shape mismatch in '{label}': params {p.shape}, grads {g.shape}, "
            f"moments {state.first_moment.shape}"
        )
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in parameter block '{label}'")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * (g * g)
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_p = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return new_p, replace(state, first_moment=m, second_moment=v, step_count=t)
