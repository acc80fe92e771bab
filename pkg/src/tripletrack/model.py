"""Trainable descriptor generator: a compact convolutional embedding.

The network maps fixed-size image patches to n-dimensional descriptors
and is trained online by gradient descent on a triplet loss built from
cosine distances. Everything runs in float64 on the CPU: descriptor
values feed assignment decisions, so training must be bit-reproducible
for a given seed and call sequence.

Layer stacks are small and configurable (conv / relu / maxpool / flatten
/ dense). The default stack takes 32x32x3 patches through two conv+pool
stages into a 64-d linear head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DimensionError, TrainingDivergenceError

# Added to the first coordinate whenever an output row's norm falls below
# OUTPUT_NORM_FLOOR, keeping cosine distances well-defined. Treated as a
# constant shift in the backward pass.
OUTPUT_NORM_FLOOR = 1e-8
OUTPUT_FLOOR_BUMP = 1e-6

DEFAULT_LAYER_STRING = "conv:8x3:p1,relu,pool:2,conv:16x3:p1,relu,pool:2,flatten,dense:64"


# ---------------------------------------------------------------------------
# Layer specifications


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int
    stride: int = 1
    pad: int = 0


@dataclass(frozen=True)
class Relu:
    pass


@dataclass(frozen=True)
class MaxPool:
    size: int


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Dense:
    units: int


LayerSpec = Union[Conv, Relu, MaxPool, Flatten, Dense]


def parse_layers(text: str) -> tuple[LayerSpec, ...]:
    """Parse a compact layer string, e.g. "conv:8x3:p1,relu,pool:2,flatten,dense:64".

    conv:FxK[:sS][:pP] -> Conv(F filters, KxK kernel, stride S, pad P)
    pool:S             -> MaxPool(SxS, stride S)
    dense:U            -> Dense(U units)
    relu, flatten      -> as named
    """
    layers: list[LayerSpec] = []
    for raw in text.split(","):
        token = raw.strip().lower()
        if not token:
            raise ConfigError("empty layer token")
        parts = token.split(":")
        kind = parts[0]
        try:
            if kind == "conv":
                f_str, k_str = parts[1].split("x")
                stride, pad = 1, 0
                for extra in parts[2:]:
                    if extra.startswith("s"):
                        stride = int(extra[1:])
                    elif extra.startswith("p"):
                        pad = int(extra[1:])
                    else:
                        raise ConfigError(f"unknown conv option {extra!r}")
                layers.append(Conv(int(f_str), int(k_str), stride, pad))
            elif kind == "relu":
                layers.append(Relu())
            elif kind == "pool":
                layers.append(MaxPool(int(parts[1])))
            elif kind == "flatten":
                layers.append(Flatten())
            elif kind == "dense":
                layers.append(Dense(int(parts[1])))
            else:
                raise ConfigError(f"unknown layer kind {kind!r}")
        except (IndexError, ValueError) as exc:
            raise ConfigError(f"bad layer token {token!r}: {exc}") from exc
    return tuple(layers)


def layers_to_string(layers: Sequence[LayerSpec]) -> str:
    out = []
    for layer in layers:
        if isinstance(layer, Conv):
            token = f"conv:{layer.filters}x{layer.kernel}"
            if layer.stride != 1:
                token += f":s{layer.stride}"
            if layer.pad != 0:
                token += f":p{layer.pad}"
            out.append(token)
        elif isinstance(layer, Relu):
            out.append("relu")
        elif isinstance(layer, MaxPool):
            out.append(f"pool:{layer.size}")
        elif isinstance(layer, Flatten):
            out.append("flatten")
        elif isinstance(layer, Dense):
            out.append(f"dense:{layer.units}")
        else:
            raise ConfigError(f"unknown layer {layer!r}")
    return ",".join(out)


# ---------------------------------------------------------------------------
# Configuration


@dataclass(frozen=True)
class ModelConfig:
    input_shape: tuple[int, int, int] = (32, 32, 3)  # (h, w, c)
    layers: tuple[LayerSpec, ...] = field(
        default_factory=lambda: parse_layers(DEFAULT_LAYER_STRING)
    )
    output_dim: int = 64
    seed: int = 0

    def __post_init__(self):
        infer_shapes(self)  # raises ConfigError on inconsistency

    def to_dict(self) -> dict:
        return {
            "input_shape": list(self.input_shape),
            "layers": layers_to_string(self.layers),
            "output_dim": self.output_dim,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        return ModelConfig(
            input_shape=tuple(d["input_shape"]),
            layers=parse_layers(d["layers"]),
            output_dim=int(d["output_dim"]),
            seed=int(d["seed"]),
        )


def infer_shapes(config: ModelConfig) -> list[tuple[int, ...]]:
    """Shapes after each layer; raises ConfigError on any inconsistency."""
    if config.output_dim < 8:
        raise ConfigError(f"output_dim must be >= 8, got {config.output_dim}")
    h, w, c = config.input_shape
    if h < 1 or w < 1 or c < 1:
        raise ConfigError(f"bad input shape {config.input_shape}")
    shape: tuple[int, ...] = (h, w, c)
    shapes = []
    for layer in config.layers:
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise ConfigError("conv requires an unflattened input")
            ih, iw, ic = shape
            if layer.kernel < 1 or layer.stride < 1 or layer.pad < 0:
                raise ConfigError(f"bad conv geometry {layer}")
            oh = (ih + 2 * layer.pad - layer.kernel) // layer.stride + 1
            ow = (iw + 2 * layer.pad - layer.kernel) // layer.stride + 1
            if oh < 1 or ow < 1:
                raise ConfigError(f"conv {layer} does not fit input {shape}")
            shape = (oh, ow, layer.filters)
        elif isinstance(layer, MaxPool):
            if len(shape) != 3:
                raise ConfigError("pool requires an unflattened input")
            ih, iw, ic = shape
            if layer.size < 1 or ih % layer.size or iw % layer.size:
                raise ConfigError(
                    f"pool size {layer.size} must divide spatial dims {shape[:2]}"
                )
            shape = (ih // layer.size, iw // layer.size, ic)
        elif isinstance(layer, Relu):
            pass
        elif isinstance(layer, Flatten):
            shape = (int(np.prod(shape)),)
        elif isinstance(layer, Dense):
            if len(shape) != 1:
                raise ConfigError("dense requires a flattened input")
            if layer.units < 1:
                raise ConfigError(f"bad dense units {layer.units}")
            shape = (layer.units,)
        else:
            raise ConfigError(f"unknown layer {layer!r}")
        shapes.append(shape)
    if len(shape) != 1:
        raise ConfigError("network must end in a flat output")
    if shape[0] != config.output_dim:
        raise ConfigError(
            f"layer stack produces {shape[0]} outputs, config says {config.output_dim}"
        )
    return shapes


@dataclass(frozen=True)
class TrainerConfig:
    learning_rate: float = 3.28e-5
    margin: float = 0.3
    batch_size: int = 20

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.margin < 0:
            raise ConfigError("margin must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


# ---------------------------------------------------------------------------
# Patches and parameters


@dataclass(eq=False)
class Patch:
    """A normalized image crop from one detection.

    ``pixels`` is (h, w, c) float64 in [0, 1]; ``bbox`` is the original
    (left, top, width, height) in frame coordinates.
    """

    pixels: np.ndarray
    frame_index: int
    detection_index: int
    bbox: tuple[float, float, float, float]
    confidence: float = 1.0


@dataclass(frozen=True)
class ModelParameters:
    """Immutable snapshot of network weights.

    Tensors are never mutated in place: training returns a fresh object
    with ``version`` incremented, so readers always see a consistent
    snapshot.
    """

    config: ModelConfig
    tensors: tuple[tuple[np.ndarray, ...], ...]
    version: int = 0


def init_model(config: ModelConfig) -> ModelParameters:
    """Seeded uniform fan-in-scaled initialization.

    The same config and seed always produce bit-identical tensors.
    """
    infer_shapes(config)
    rng = np.random.default_rng(config.seed)
    h, w, c = config.input_shape
    shape: tuple[int, ...] = (h, w, c)
    tensors: list[tuple[np.ndarray, ...]] = []
    for layer in config.layers:
        if isinstance(layer, Conv):
            fan_in = layer.kernel * layer.kernel * shape[2]
            bound = 1.0 / np.sqrt(fan_in)
            wgt = rng.uniform(-bound, bound, size=(layer.kernel, layer.kernel, shape[2], layer.filters))
            bias = rng.uniform(-bound, bound, size=layer.filters)
            tensors.append((wgt, bias))
            oh = (shape[0] + 2 * layer.pad - layer.kernel) // layer.stride + 1
            ow = (shape[1] + 2 * layer.pad - layer.kernel) // layer.stride + 1
            shape = (oh, ow, layer.filters)
        elif isinstance(layer, Dense):
            fan_in = shape[0]
            bound = 1.0 / np.sqrt(fan_in)
            wgt = rng.uniform(-bound, bound, size=(fan_in, layer.units))
            bias = rng.uniform(-bound, bound, size=layer.units)
            tensors.append((wgt, bias))
            shape = (layer.units,)
        else:
            tensors.append(())
            if isinstance(layer, MaxPool):
                shape = (shape[0] // layer.size, shape[1] // layer.size, shape[2])
            elif isinstance(layer, Flatten):
                shape = (int(np.prod(shape)),)
    return ModelParameters(config=config, tensors=tuple(tensors), version=0)


# ---------------------------------------------------------------------------
# Forward / backward


def _conv_forward(x, layer: Conv, wgt, bias, want_cache):
    b, h, w, c = x.shape
    if layer.pad:
        x = np.pad(x, ((0, 0), (layer.pad, layer.pad), (layer.pad, layer.pad), (0, 0)))
    win = sliding_window_view(x, (layer.kernel, layer.kernel), axis=(1, 2))
    win = win[:, :: layer.stride, :: layer.stride]
    # (B, Ho, Wo, C, kh, kw) -> (B, Ho, Wo, kh, kw, C)
    win = win.transpose(0, 1, 2, 4, 5, 3)
    bsz, ho, wo = win.shape[:3]
    cols = np.ascontiguousarray(win).reshape(bsz * ho * wo, -1)
    wmat = wgt.reshape(-1, layer.filters)
    out = (cols @ wmat + bias).reshape(bsz, ho, wo, layer.filters)
    cache = (cols, x.shape, ho, wo) if want_cache else None
    return out, cache


def _conv_backward(dout, layer: Conv, wgt, cache):
    cols, padded_shape, ho, wo = cache
    bsz = dout.shape[0]
    dflat = dout.reshape(bsz * ho * wo, layer.filters)
    wmat = wgt.reshape(-1, layer.filters)
    dwgt = (cols.T @ dflat).reshape(wgt.shape)
    dbias = dflat.sum(axis=0)
    dcols = (dflat @ wmat.T).reshape(bsz, ho, wo, layer.kernel, layer.kernel, -1)
    dx = np.zeros(padded_shape)
    s = layer.stride
    for i in range(layer.kernel):
        for j in range(layer.kernel):
            dx[:, i : i + ho * s : s, j : j + wo * s : s, :] += dcols[:, :, :, i, j, :]
    if layer.pad:
        p = layer.pad
        dx = dx[:, p:-p, p:-p, :]
    return dx, (dwgt, dbias)


def _pool_forward(x, layer: MaxPool, want_cache):
    b, h, w, c = x.shape
    s = layer.size
    ho, wo = h // s, w // s
    r = x.reshape(b, ho, s, wo, s, c).transpose(0, 1, 3, 5, 2, 4).reshape(b, ho, wo, c, s * s)
    if not want_cache:
        return r.max(axis=-1), None
    idx = np.argmax(r, axis=-1)  # first max wins ties, deterministically
    out = np.take_along_axis(r, idx[..., None], axis=-1)[..., 0]
    return out, (idx, x.shape)


def _pool_backward(dout, layer: MaxPool, cache):
    idx, in_shape = cache
    b, h, w, c = in_shape
    s = layer.size
    ho, wo = h // s, w // s
    dr = np.zeros((b, ho, wo, c, s * s))
    np.put_along_axis(dr, idx[..., None], dout[..., None], axis=-1)
    dx = dr.reshape(b, ho, wo, c, s, s).transpose(0, 1, 4, 2, 5, 3).reshape(b, h, w, c)
    return dx


def _forward_stack(x: np.ndarray, params: ModelParameters, want_cache: bool):
    caches = []
    for layer, tensors in zip(params.config.layers, params.tensors):
        if isinstance(layer, Conv):
            x, cache = _conv_forward(x, layer, tensors[0], tensors[1], want_cache)
        elif isinstance(layer, Relu):
            cache = (x > 0) if want_cache else None
            x = np.maximum(x, 0.0)
        elif isinstance(layer, MaxPool):
            x, cache = _pool_forward(x, layer, want_cache)
        elif isinstance(layer, Flatten):
            cache = x.shape if want_cache else None
            x = x.reshape(x.shape[0], -1)
        elif isinstance(layer, Dense):
            cache = x if want_cache else None
            x = x @ tensors[0] + tensors[1]
        caches.append(cache)
    # Output floor: never hand a zero vector to the cosine metric.
    norms = np.linalg.norm(x, axis=1)
    low = norms < OUTPUT_NORM_FLOOR
    if np.any(low):
        x = x.copy()
        x[low, 0] += OUTPUT_FLOOR_BUMP
    return x, caches


def _backward_stack(dout: np.ndarray, params: ModelParameters, caches):
    grads: list[tuple[np.ndarray, ...]] = [()] * len(params.config.layers)
    dx = dout
    for i in range(len(params.config.layers) - 1, -1, -1):
        layer = params.config.layers[i]
        tensors = params.tensors[i]
        cache = caches[i]
        if isinstance(layer, Conv):
            dx, grad = _conv_backward(dx, layer, tensors[0], cache)
            grads[i] = grad
        elif isinstance(layer, Relu):
            dx = dx * cache
        elif isinstance(layer, MaxPool):
            dx = _pool_backward(dx, layer, cache)
        elif isinstance(layer, Flatten):
            dx = dx.reshape(cache)
        elif isinstance(layer, Dense):
            xin = cache
            grads[i] = (xin.T @ dx, dx.sum(axis=0))
            dx = dx @ tensors[0].T
    return grads


def _stack_pixels(patches: Sequence[Patch], config: ModelConfig) -> np.ndarray:
    expect = config.input_shape
    arrs = []
    for p in patches:
        px = np.asarray(p.pixels, dtype=np.float64)
        if px.shape != expect:
            raise DimensionError(
                f"patch shape {px.shape} does not match model input {expect}"
            )
        arrs.append(px)
    return np.stack(arrs)


def forward(params: ModelParameters, patch: Patch) -> np.ndarray:
    """Descriptor for a single patch. Deterministic for fixed inputs."""
    return forward_batch(params, [patch])[0]


def forward_batch(params: ModelParameters, patches: Sequence[Patch]) -> np.ndarray:
    """Descriptors for a list of patches, stacked as (k, n)."""
    if len(patches) == 0:
        return np.zeros((0, params.config.output_dim))
    x = _stack_pixels(patches, params.config)
    out, _ = _forward_stack(x, params, want_cache=False)
    return out


Embedder = Callable[[Sequence[Patch]], np.ndarray]


def as_embedder(model) -> Embedder:
    """Normalize a model argument into a patches->descriptors callable.

    Accepts ModelParameters or any callable with the same signature
    (tests inject hand-built embeddings this way).
    """
    if isinstance(model, ModelParameters):
        return lambda patches: forward_batch(model, patches)
    if callable(model):
        return model
    raise TypeError(f"cannot embed with {type(model)!r}")


class DescriptorCache:
    """Per-patch descriptor memo, invalidated by model version.

    Tracks and buffers re-embed their head patches every frame so that
    descriptors always reflect the current model; between training steps
    the model is unchanged, so the values are identical and recomputing
    them is pure waste. Entries are keyed by patch identity and dropped
    wholesale whenever the version changes. Embedders that are not
    ModelParameters (test stubs) bypass the cache.
    """

    def __init__(self):
        self._version: int | None = None
        self._table: dict[int, np.ndarray] = {}

    def _sync(self, model) -> None:
        if model.version != self._version:
            self._version = model.version
            self._table.clear()

    def insert(self, model, patches: Sequence[Patch], descriptors: np.ndarray) -> None:
        """Pre-seed entries with descriptors already computed under ``model``."""
        if not isinstance(model, ModelParameters):
            return
        self._sync(model)
        for patch, desc in zip(patches, descriptors):
            self._table[id(patch)] = desc

    def embed(self, model, patches: Sequence[Patch]) -> np.ndarray:
        if not isinstance(model, ModelParameters):
            return as_embedder(model)(patches)
        self._sync(model)
        missing = [p for p in patches if id(p) not in self._table]
        if missing:
            fresh = forward_batch(model, missing)
            for patch, desc in zip(missing, fresh):
                self._table[id(patch)] = desc
        if len(patches) == 0:
            return np.zeros((0, model.config.output_dim))
        return np.stack([self._table[id(p)] for p in patches])


# ---------------------------------------------------------------------------
# Triplet cosine loss


def triplet_cosine_loss(d_anchor, d_positive, d_negative, margin: float) -> float:
    """max(0, D(a, p) + margin - D(a, n)) with cosine distances."""
    from .descriptors import cosine_distance

    return max(
        0.0,
        cosine_distance(d_anchor, d_positive)
        + margin
        - cosine_distance(d_anchor, d_negative),
    )


def _cosine_pair_grads(u: np.ndarray, v: np.ndarray):
    """Distances and gradients of D(u, v) = 1 - u.v/(|u||v|), row-wise."""
    nu = np.linalg.norm(u, axis=1)
    nv = np.linalg.norm(v, axis=1)
    dot = np.sum(u * v, axis=1)
    denom = nu * nv
    dist = 1.0 - dot / denom
    du = (dot / (nu**3 * nv))[:, None] * u - v / denom[:, None]
    dv = (dot / (nu * nv**3))[:, None] * v - u / denom[:, None]
    return dist, du, dv


def _triplet_losses_and_descriptor_grads(da, dp, dn, margin: float):
    n = da.shape[0]
    d_ap, dap_da, dap_dp = _cosine_pair_grads(da, dp)
    d_an, dan_da, dan_dn = _cosine_pair_grads(da, dn)
    raw = d_ap + margin - d_an
    losses = np.maximum(raw, 0.0)
    active = (raw > 0.0)[:, None]  # inactive triplets contribute exactly zero
    scale = active / n
    ga = (dap_da - dan_da) * scale
    gp = dap_dp * scale
    gn = -dan_dn * scale
    return losses, ga, gp, gn


def batch_loss(params: ModelParameters, batch, margin: float) -> float:
    """Mean triplet loss of a batch under fixed parameters (no gradients).

    This forward-only path is what finite-difference checks differentiate.
    """
    n = len(batch)
    patches = [t.anchor for t in batch] + [t.positive for t in batch] + [t.negative for t in batch]
    x = _stack_pixels(patches, params.config)
    # Divergence shows up as non-finite values; callers check for them,
    # so numpy's overflow warnings are just noise here.
    with np.errstate(over="ignore", invalid="ignore"):
        out, _ = _forward_stack(x, params, want_cache=False)
        da, dp, dn = out[:n], out[n : 2 * n], out[2 * n :]
        d_ap, _, _ = _cosine_pair_grads(da, dp)
        d_an, _, _ = _cosine_pair_grads(da, dn)
        return float(np.mean(np.maximum(d_ap + margin - d_an, 0.0)))


def batch_loss_and_grads(params: ModelParameters, batch, margin: float):
    """Mean batch loss plus analytic parameter gradients (backprop)."""
    n = len(batch)
    patches = [t.anchor for t in batch] + [t.positive for t in batch] + [t.negative for t in batch]
    x = _stack_pixels(patches, params.config)
    with np.errstate(over="ignore", invalid="ignore"):
        out, caches = _forward_stack(x, params, want_cache=True)
        da, dp, dn = out[:n], out[n : 2 * n], out[2 * n :]
        losses, ga, gp, gn = _triplet_losses_and_descriptor_grads(da, dp, dn, margin)
        dout = np.concatenate([ga, gp, gn], axis=0)
        grads = _backward_stack(dout, params, caches)
        return float(np.mean(losses)), grads


def train_batch(params: ModelParameters, batch, cfg: TrainerConfig):
    """One full-batch gradient step on the mean triplet loss.

    Returns (updated parameters, pre-update mean loss). The batch is used
    once and discarded by the caller. A zero mean loss leaves the weights
    numerically unchanged but still bumps the version. Non-finite loss or
    gradients raise TrainingDivergenceError and leave ``params`` valid.
    """
    if len(batch) != cfg.batch_size:
        raise ValueError(
            f"batch has {len(batch)} triplets, trainer expects {cfg.batch_size}"
        )
    mean_loss, grads = batch_loss_and_grads(params, batch, cfg.margin)
    if not np.isfinite(mean_loss):
        raise TrainingDivergenceError(f"non-finite loss {mean_loss}")
    if mean_loss == 0.0:
        return replace(params, version=params.version + 1), 0.0
    new_tensors = []
    for tensors, layer_grads in zip(params.tensors, grads):
        if not tensors:
            new_tensors.append(())
            continue
        updated = []
        for tensor, grad in zip(tensors, layer_grads):
            if not np.all(np.isfinite(grad)):
                raise TrainingDivergenceError("non-finite gradient")
            stepped = tensor - cfg.learning_rate * grad
            if not np.all(np.isfinite(stepped)):
                raise TrainingDivergenceError("non-finite parameter after update")
            updated.append(stepped)
        new_tensors.append(tuple(updated))
    return (
        ModelParameters(
            config=params.config,
            tensors=tuple(new_tensors),
            version=params.version + 1,
        ),
        mean_loss,
    )


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(params: ModelParameters, path) -> None:
    """Round-trip-exact binary serialization of config + tensors + version."""
    payload = {
        "config_json": np.array(json.dumps(params.config.to_dict())),
        "version": np.array(params.version, dtype=np.int64),
    }
    for i, tensors in enumerate(params.tensors):
        for k, tensor in enumerate(tensors):
            payload[f"t{i}_{k}"] = tensor
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_checkpoint(path) -> ModelParameters:
    with np.load(path, allow_pickle=False) as data:
        config = ModelConfig.from_dict(json.loads(str(data["config_json"])))
        version = int(data["version"])
        tensors: list[tuple[np.ndarray, ...]] = []
        for i, layer in enumerate(config.layers):
            layer_tensors = []
            for k in range(2):
                key = f"t{i}_{k}"
                if key in data:
                    layer_tensors.append(np.array(data[key]))
            tensors.append(tuple(layer_tensors))
    return ModelParameters(config=config, tensors=tuple(tensors), version=version)


# ---------------------------------------------------------------------------
# Finite-difference gradient verification


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_tensor: list[tuple[str, float]]
    probed: int = 0
    skipped_nonsmooth: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= 1e-4


def _clone_tensors(params: ModelParameters) -> list[list[np.ndarray]]:
    return [[t.copy() for t in tensors] for tensors in params.tensors]


# The relative-error denominator is floored here: below this gradient
# magnitude a central difference of a float64 loss is dominated by the
# rounding of the loss itself and carries no signal about the analytic
# value. Elements under the floor are still held to an absolute standard
# of floor * threshold.
_GRADCHECK_DENOM_FLOOR = 1e-5


def gradient_check(
    params: ModelParameters,
    batch,
    margin: float,
    eps: float = 1e-5,
    samples_per_tensor: int | None = None,
    rng: np.random.Generator | None = None,
    corrupt: bool = False,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``samples_per_tensor`` limits how many elements of each parameter
    tensor are probed (None probes all).

    The loss is piecewise smooth (relu, max-pooling, hinge); where a
    perturbation of +-eps crosses one of those kinks, a central
    difference does not estimate the derivative and comparing against it
    is meaningless. Each probe therefore takes differences at eps and
    eps/2: if the two disagree, the reference is kink-corrupted and the
    element is skipped (counted in ``skipped_nonsmooth``). A genuine
    gradient bug disagrees with a self-consistent reference and is never
    skipped.

    ``corrupt`` deliberately biases the analytic gradient, as a negative
    control that the check can fail.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    _, grads = batch_loss_and_grads(params, batch, margin)
    if corrupt:
        grads = [
            tuple(g + 1e-2 for g in layer_grads) if layer_grads else ()
            for layer_grads in grads
        ]
    work = _clone_tensors(params)
    max_err = 0.0
    probed = 0
    skipped = 0
    per_tensor: list[tuple[str, float]] = []
    for li, tensors in enumerate(work):
        for ti, tensor in enumerate(tensors):
            flat = tensor.reshape(-1)
            size = flat.shape[0]
            if samples_per_tensor is None or size <= samples_per_tensor:
                indices = np.arange(size)
            else:
                indices = np.sort(rng.choice(size, size=samples_per_tensor, replace=False))
            analytic = grads[li][ti].reshape(-1)
            tensor_err = 0.0
            probe = ModelParameters(
                config=params.config,
                tensors=tuple(tuple(ts) for ts in work),
                version=params.version,
            )

            def central(idx: int, step: float) -> float:
                orig = flat[idx]
                flat[idx] = orig + step
                up = batch_loss(probe, batch, margin)
                flat[idx] = orig - step
                down = batch_loss(probe, batch, margin)
                flat[idx] = orig
                return (up - down) / (2.0 * step)

            for idx in indices:
                fd = central(idx, eps)
                fd_half = central(idx, eps / 2.0)
                if abs(fd - fd_half) > max(5e-5 * max(abs(fd), abs(fd_half)), 2e-8):
                    skipped += 1
                    continue
                probed += 1
                a = float(analytic[idx])
                err = abs(a - fd_half) / max(abs(a), abs(fd_half), _GRADCHECK_DENOM_FLOOR)
                tensor_err = max(tensor_err, err)
            per_tensor.append((f"layer{li}.t{ti}", tensor_err))
            max_err = max(max_err, tensor_err)
    return GradCheckReport(
        max_rel_error=max_err,
        per_tensor=per_tensor,
        probed=probed,
        skipped_nonsmooth=skipped,
    )


def random_patch(rng: np.random.Generator, config: ModelConfig, frame: int = 0, det: int = 0) -> Patch:
    pixels = rng.uniform(0.0, 1.0, size=config.input_shape)
    return Patch(
        pixels=pixels,
        frame_index=frame,
        detection_index=det,
        bbox=(0.0, 0.0, float(config.input_shape[1]), float(config.input_shape[0])),
    )


def run_gradient_check(
    config: ModelConfig | None = None,
    trials: int = 20,
    triplets_per_trial: int = 5,
    eps: float = 1e-5,
    samples_per_tensor: int | None = 20,
    margin: float = 0.3,
    base_seed: int = 0,
    corrupt: bool = False,
):
    """Run seeded gradient-check trials; returns (max error, per-trial reports)."""
    from .mining import Triplet

    if config is None:
        config = ModelConfig()
    per_trial = []
    worst = 0.0
    for trial in range(trials):
        rng = np.random.default_rng(base_seed + 1000 * trial)
        trial_config = replace(config, seed=int(rng.integers(0, 2**31)))
        params = init_model(trial_config)
        batch = [
            Triplet(
                anchor=random_patch(rng, config),
                positive=random_patch(rng, config),
                negative=random_patch(rng, config),
            )
            for _ in range(triplets_per_trial)
        ]
        report = gradient_check(
            params,
            batch,
            margin,
            eps=eps,
            samples_per_tensor=samples_per_tensor,
            rng=rng,
            corrupt=corrupt,
        )
        per_trial.append(report)
        worst = max(worst, report.max_rel_error)
    return worst, per_trial
