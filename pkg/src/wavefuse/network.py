"""Convolutional autoencoder, self-reconstruction training loop, model file
format, and the wavelet-domain fusion pipeline built on top of it.

The encoder turns a single-channel image into 48 feature maps through three
ConvBlocks (two 3x3 convolutions, each followed by ReLU); the decoder maps
48 features back to one channel through two ConvBlocks and a final 1x1
convolution with a sigmoid. Training reconstructs the input image; fusion
happens only at inference by merging the two encoders' feature maps in the
wavelet domain before decoding.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DimensionError,
    FormatError,
    ModelError,
    TrainingError,
    VersionError,
)
from .fusionrules import FusionRuleConfig, fuse_pyramids
from .imageio import GrayImage, load_grayscale, resize_bilinear
from .metrics import ssim_with_gradient
from .numerics import AdamState, ConvLayerParams, adam_step, conv2d_backward, conv2d_forward, relu_backward, relu_forward
from .wavelet import wavedec2, waverec2

__all__ = [
    "ArchitectureSpec",
    "ModelWeights",
    "TrainConfig",
    "LossBreakdown",
    "MODEL_MAGIC",
    "MODEL_VERSION",
    "init_weights",
    "encode",
    "decode",
    "loss",
    "loss_and_param_gradients",
    "train",
    "fuse_images",
    "fuse_images_no_dwt",
    "save_model",
    "load_model",
]

MODEL_MAGIC = b"WVFS"
MODEL_VERSION = 1

IMAGE_EXTENSIONS = (".pgm", ".png")


@dataclass(frozen=True)
class ArchitectureSpec:
    """Channel plan of the autoencoder.

    Each block descriptor is an (in, mid, out) channel triple for the two
    3x3 convolutions of a ConvBlock; ``final_conv`` is the (in, out) pair of
    the trailing 1x1 convolution.
    """

    encoder_blocks: tuple = ((1, 16, 16), (16, 32, 32), (32, 48, 48))
    decoder_blocks: tuple = ((48, 32, 32), (32, 16, 16))
    final_conv: tuple = (16, 1)
    feature_channels: int = 48

    def __post_init__(self):
        if len(self.encoder_blocks) != 3:
            raise ModelError(f"encoder needs exactly 3 blocks, got {len(self.encoder_blocks)}")
        if len(self.decoder_blocks) != 2:
            raise ModelError(f"decoder needs exactly 2 blocks, got {len(self.decoder_blocks)}")
        chain = [t for b in self.encoder_blocks for t in ((b[0], b[1]), (b[1], b[2]))]
        chain += [t for b in self.decoder_blocks for t in ((b[0], b[1]), (b[1], b[2]))]
        chain.append(self.final_conv)
        for (_, out_c), (in_c, _) in zip(chain, chain[1:]):
            if out_c != in_c:
                raise ModelError(f"channel chain broken: layer output {out_c} feeds input {in_c}")
        if self.encoder_blocks[-1][2] != self.feature_channels:
            raise ModelError(
                f"encoder output channels {self.encoder_blocks[-1][2]} != "
                f"feature_channels {self.feature_channels}"
            )
        if self.decoder_blocks[0][0] != self.feature_channels:
            raise ModelError("decoder input channels must equal feature_channels")

    def layer_shapes(self):
        """(out_channels, in_channels, kernel) per conv, topological order."""
        shapes = []
        for blocks in (self.encoder_blocks, self.decoder_blocks):
            for in_c, mid_c, out_c in blocks:
                shapes.append((mid_c, in_c, 3))
                shapes.append((out_c, mid_c, 3))
        shapes.append((self.final_conv[1], self.final_conv[0], 1))
        return tuple(shapes)

    @property
    def encoder_layer_count(self) -> int:
        return 2 * len(self.encoder_blocks)


@dataclass(frozen=True, eq=False)
class ModelWeights:
    """All convolution parameters in topological order, plus the plan."""

    spec: ArchitectureSpec
    layers: tuple  # of ConvLayerParams
    format_version: int = MODEL_VERSION

    def __post_init__(self):
        expected = self.spec.layer_shapes()
        if len(self.layers) != len(expected):
            raise ModelError(f"expected {len(expected)} conv layers, got {len(self.layers)}")
        for i, (layer, (out_c, in_c, k)) in enumerate(zip(self.layers, expected)):
            if layer.kernels.shape != (out_c, in_c, k, k):
                raise ModelError(
                    f"layer {i} kernel shape {layer.kernels.shape} != {(out_c, in_c, k, k)}"
                )

    def value_count(self) -> int:
        return sum(l.kernels.size + l.bias.size for l in self.layers)


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters for the self-reconstruction training run.

    Defaults follow the small-dataset regime. ``max_steps``, when set, stops
    after that many optimizer steps regardless of epoch boundaries, which
    keeps the update count comparable across dataset sizes.
    """

    dataset_dir: str
    learning_rate: float = 1e-4
    batch_size: int = 16
    epochs: int = 100
    lambda_ssim: float = 1000.0
    seed: int = 0
    image_size: int = 256
    max_steps: int | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.lambda_ssim < 0:
            raise ValueError(f"lambda_ssim must be >= 0, got {self.lambda_ssim}")
        if self.image_size < 16:
            raise ValueError(f"image_size must be >= 16, got {self.image_size}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1 when set, got {self.max_steps}")


@dataclass(frozen=True)
class LossBreakdown:
    """total = pixel + lambda * ssim_loss for the lambda it was built with."""

    total: float
    pixel: float
    ssim_loss: float


def init_weights(spec: ArchitectureSpec | None = None, seed: int = 0, rng=None) -> ModelWeights:
    """Glorot-uniform kernels (+-sqrt(6/(fan_in+fan_out))), zero biases."""
    spec = spec or ArchitectureSpec()
    if rng is None:
        rng = np.random.default_rng(seed)
    layers = []
    for out_c, in_c, k in spec.layer_shapes():
        fan_in = in_c * k * k
        fan_out = out_c * k * k
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        kernels = rng.uniform(-limit, limit, size=(out_c, in_c, k, k))
        layers.append(ConvLayerParams(kernels, np.zeros(out_c)))
    return ModelWeights(spec, tuple(layers))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_image_tensor(x, channels: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != channels:
        raise DimensionError(f"{what} must have shape [{channels},H,W], got {x.shape}")
    return x


def _run_layers(x: np.ndarray, layers, relu: bool):
    """Forward through conv layers; returns output plus per-layer caches
    (conv input, pre-activation) needed by the backward pass."""
    caches = []
    for params in layers:
        z = conv2d_forward(x, params)
        caches.append((x, z))
        x = relu_forward(z) if relu else z
    return x, caches


def encode(image, weights: ModelWeights) -> np.ndarray:
    """Image [1,H,W] -> feature maps [48,H,W] through the three ConvBlocks."""
    x = _check_image_tensor(image, weights.spec.encoder_blocks[0][0], "encoder input")
    n_enc = weights.spec.encoder_layer_count
    out, _ = _run_layers(x, weights.layers[:n_enc], relu=True)
    return out


def decode(features, weights: ModelWeights) -> np.ndarray:
    """Feature maps [48,H,W] -> image [1,H,W]; sigmoid keeps values in (0,1)."""
    x = _check_image_tensor(features, weights.spec.feature_channels, "decoder input")
    n_enc = weights.spec.encoder_layer_count
    hidden, _ = _run_layers(x, weights.layers[n_enc:-1], relu=True)
    return _sigmoid(conv2d_forward(hidden, weights.layers[-1]))


def _as_plane(x, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3 and x.shape[0] == 1:
        x = x[0]
    if x.ndim != 2:
        raise DimensionError(f"{what} must be [H,W] or [1,H,W], got shape {x.shape}")
    return x


def loss(output, target, lambda_ssim: float = 1000.0):
    """Reconstruction loss: mean squared error plus lambda * (1 - SSIM).

    Returns (LossBreakdown, gradient w.r.t. output) with the gradient shaped
    like the 2D image plane.
    """
    out = _as_plane(output, "output")
    tgt = _as_plane(target, "target")
    if out.shape != tgt.shape:
        raise DimensionError(f"output shape {out.shape} != target shape {tgt.shape}")
    diff = out - tgt
    pixel = float((diff * diff).mean())
    ssim_value, ssim_grad = ssim_with_gradient(out, tgt)
    ssim_loss = 1.0 - ssim_value
    breakdown = LossBreakdown(pixel + lambda_ssim * ssim_loss, pixel, ssim_loss)
    grad = 2.0 * diff / diff.size - lambda_ssim * ssim_grad
    return breakdown, grad


def loss_and_param_gradients(weights: ModelWeights, image, lambda_ssim: float = 1000.0):
    """Full forward + backward for one image.

    Returns (LossBreakdown, gradients) where gradients is a list of
    (grad_kernels, grad_bias) per conv layer in topological order.
    """
    x = _check_image_tensor(image, weights.spec.encoder_blocks[0][0], "input")
    hidden, caches = _run_layers(x, weights.layers[:-1], relu=True)
    final = weights.layers[-1]
    z_final = conv2d_forward(hidden, final)
    out = _sigmoid(z_final)

    breakdown, grad_plane = loss(out, x, lambda_ssim)
    grad = grad_plane[None, :, :] * out * (1.0 - out)  # through the sigmoid

    grads = [None] * len(weights.layers)
    grad, gk, gb = conv2d_backward(hidden, final, grad)
    grads[-1] = (gk, gb)
    for i in range(len(weights.layers) - 2, -1, -1):
        inp, z = caches[i]
        grad = relu_backward(z, grad)
        grad, gk, gb = conv2d_backward(inp, weights.layers[i], grad)
        grads[i] = (gk, gb)
    return breakdown, grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def list_training_images(dataset_dir) -> list:
    root = Path(dataset_dir)
    if not root.is_dir():
        raise DataError(f"dataset directory not found: {root}")
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS)
    if not files:
        raise DataError(f"no {'/'.join(IMAGE_EXTENSIONS)} images in {root}")
    return files


def _load_training_image(path, size: int) -> np.ndarray:
    img = load_grayscale(path)
    if img.pixels.shape != (size, size):
        img = resize_bilinear(img, size, size)
    return img.pixels[None, :, :]


def train(config: TrainConfig):
    """Self-reconstruction training; returns (weights, per-epoch history).

    Deterministic for a fixed seed: initialization and the per-epoch shuffle
    come from one seeded generator, batches accumulate gradients in index
    order, and every step updates all parameters with Adam.
    """
    files = list_training_images(config.dataset_dir)
    if len(files) < config.batch_size:
        raise DataError(
            f"dataset has {len(files)} images but batch_size is {config.batch_size}"
        )
    images = [_load_training_image(p, config.image_size) for p in files]

    rng = np.random.default_rng(config.seed)
    weights = init_weights(rng=rng)
    states = [
        (AdamState.for_params(l.kernels, config.learning_rate),
         AdamState.for_params(l.bias, config.learning_rate))
        for l in weights.layers
    ]

    steps_per_epoch = len(images) // config.batch_size
    history = []
    step = 0
    done = False
    for epoch in range(config.epochs):
        order = rng.permutation(len(images))
        epoch_losses = []
        for b in range(steps_per_epoch):
            batch = order[b * config.batch_size : (b + 1) * config.batch_size]
            acc = None
            total = pixel = ssim_l = 0.0
            for idx in batch:
                breakdown, grads = loss_and_param_gradients(
                    weights, images[idx], config.lambda_ssim
                )
                if not math.isfinite(breakdown.total):
                    raise TrainingError(
                        f"non-finite loss {breakdown.total} at epoch {epoch} step {step} "
                        f"(image {files[idx].name})"
                    )
                total += breakdown.total
                pixel += breakdown.pixel
                ssim_l += breakdown.ssim_loss
                if acc is None:
                    acc = [(gk, gb) for gk, gb in grads]
                else:
                    acc = [(ak + gk, ab + gb) for (ak, ab), (gk, gb) in zip(acc, grads)]
            n = float(len(batch))
            new_layers = []
            new_states = []
            for li, (layer, (sk, sb)) in enumerate(zip(weights.layers, states)):
                gk, gb = acc[li]
                kernels, sk = adam_step(layer.kernels, gk / n, sk, f"layer{li}.kernels")
                bias, sb = adam_step(layer.bias, gb / n, sb, f"layer{li}.bias")
                new_layers.append(ConvLayerParams(kernels, bias))
                new_states.append((sk, sb))
            weights = replace(weights, layers=tuple(new_layers))
            states = new_states
            epoch_losses.append((total / n, pixel / n, ssim_l / n))
            step += 1
            if config.max_steps is not None and step >= config.max_steps:
                done = True
                break
        if epoch_losses:
            m = np.mean(epoch_losses, axis=0)
            history.append(LossBreakdown(float(m[0]), float(m[1]), float(m[2])))
        if done:
            break
    return weights, history


# ---------------------------------------------------------------------------
# fusion pipeline
# ---------------------------------------------------------------------------


def _pad_to_multiple(p: np.ndarray, m: int) -> np.ndarray:
    ph = (-p.shape[0]) % m
    pw = (-p.shape[1]) % m
    if ph == 0 and pw == 0:
        return p
    return np.pad(p, ((0, ph), (0, pw)), mode="symmetric")


def _fuse_features(img_a: GrayImage, img_b: GrayImage, weights: ModelWeights, merge):
    if img_a.pixels.shape != img_b.pixels.shape:
        raise DimensionError(
            f"input dims differ: {img_a.pixels.shape} vs {img_b.pixels.shape}"
        )
    h, w = img_a.pixels.shape
    multiple = merge.pad_multiple
    pa = _pad_to_multiple(img_a.pixels, multiple)
    pb = _pad_to_multiple(img_b.pixels, multiple)
    feats_a = encode(pa[None, :, :], weights)
    feats_b = encode(pb[None, :, :], weights)
    fused = merge(feats_a, feats_b)
    out = decode(fused, weights)[0, :h, :w]
    return GrayImage(np.clip(out, 0.0, 1.0))


class _WaveletMerge:
    def __init__(self, rcfg: FusionRuleConfig):
        self.rcfg = rcfg
        self.pad_multiple = 2**rcfg.levels

    def __call__(self, feats_a, feats_b):
        cfg = self.rcfg
        pyrs_a = [wavedec2(c, cfg.basis, cfg.levels) for c in feats_a]
        pyrs_b = [wavedec2(c, cfg.basis, cfg.levels) for c in feats_b]
        fused = fuse_pyramids(pyrs_a, pyrs_b, cfg)
        return np.stack([waverec2(p) for p in fused])


class _AverageMerge:
    pad_multiple = 1

    def __call__(self, feats_a, feats_b):
        return 0.5 * (feats_a + feats_b)


def fuse_images(
    img_a: GrayImage, img_b: GrayImage, weights: ModelWeights, rcfg: FusionRuleConfig | None = None
) -> GrayImage:
    """Fuse two same-sized images through the wavelet-domain feature pipeline.

    Dims are padded symmetrically to a multiple of 2^levels for the DWT and
    cropped back after decoding; output values are clamped to [0, 1].
    """
    return _fuse_features(img_a, img_b, weights, _WaveletMerge(rcfg or FusionRuleConfig()))


def fuse_images_no_dwt(img_a: GrayImage, img_b: GrayImage, weights: ModelWeights) -> GrayImage:
    """Ablation baseline: elementwise mean of the feature maps, no DWT."""
    return _fuse_features(img_a, img_b, weights, _AverageMerge())


# ---------------------------------------------------------------------------
# model file format
# ---------------------------------------------------------------------------
#
# Little-endian layout:
#   magic "WVFS" | u32 version | u32 n_enc + triples | u32 n_dec + triples |
#   u32 final_in, final_out | u32 feature_channels | u64 value_count |
#   float64 payload (kernels then bias per layer, topological) |
#   u64 checksum (first 8 bytes of SHA-256 of the payload)


def _payload_bytes(weights: ModelWeights) -> bytes:
    parts = []
    for layer in weights.layers:
        parts.append(layer.kernels.astype("<f8").tobytes())
        parts.append(layer.bias.astype("<f8").tobytes())
    return b"".join(parts)


def _payload_checksum(payload: bytes) -> int:
    return struct.unpack("<Q", hashlib.sha256(payload).digest()[:8])[0]


def save_model(weights: ModelWeights, path) -> None:
    spec = weights.spec
    head = [MODEL_MAGIC, struct.pack("<I", MODEL_VERSION)]
    for blocks in (spec.encoder_blocks, spec.decoder_blocks):
        head.append(struct.pack("<I", len(blocks)))
        for triple in blocks:
            head.append(struct.pack("<III", *triple))
    head.append(struct.pack("<II", *spec.final_conv))
    head.append(struct.pack("<I", spec.feature_channels))
    payload = _payload_bytes(weights)
    head.append(struct.pack("<Q", len(payload) // 8))
    with open(path, "wb") as fh:
        fh.write(b"".join(head))
        fh.write(payload)
        fh.write(struct.pack("<Q", _payload_checksum(payload)))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("model file truncated")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def load_model(path) -> ModelWeights:
    with open(path, "rb") as fh:
        rd = _Reader(fh.read())
    if rd.take(4) != MODEL_MAGIC:
        raise FormatError(f"not a model file (bad magic): {path}")
    version = rd.u32()
    if version != MODEL_VERSION:
        raise VersionError(f"unsupported model version {version}, expected {MODEL_VERSION}")
    enc = tuple(tuple(rd.u32() for _ in range(3)) for _ in range(rd.u32()))
    dec = tuple(tuple(rd.u32() for _ in range(3)) for _ in range(rd.u32()))
    final = (rd.u32(), rd.u32())
    feature_channels = rd.u32()
    try:
        spec = ArchitectureSpec(enc, dec, final, feature_channels)
    except ModelError as exc:
        raise FormatError(f"inconsistent architecture table: {exc}") from exc
    count = rd.u64()
    expected = sum(o * i * k * k + o for o, i, k in spec.layer_shapes())
    if count != expected:
        raise FormatError(f"payload length {count} does not match architecture ({expected} values)")
    payload = rd.take(count * 8)
    if rd.u64() != _payload_checksum(payload):
        raise FormatError("model payload checksum mismatch")
    values = np.frombuffer(payload, dtype="<f8")
    layers = []
    pos = 0
    for out_c, in_c, k in spec.layer_shapes():
        n_k = out_c * in_c * k * k
        kernels = values[pos : pos + n_k].reshape(out_c, in_c, k, k).copy()
        pos += n_k
        bias = values[pos : pos + out_c].copy()
        pos += out_c
        layers.append(ConvLayerParams(kernels, bias))
    return ModelWeights(spec, tuple(layers), format_version=version)
