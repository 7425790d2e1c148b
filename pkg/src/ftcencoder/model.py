"""FTC-Encoder: a 1D convolutional autoencoder trained with a contrastive
reconstruction loss so that exp(-L) is the probability of a frozen landscape.

Frozen (peak winter) segments are the "normal" class the model learns to
reconstruct; thawed (peak summer) segments are known anomalies whose
reconstruction error is pushed up.
"""
from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ndcore as nd
from .datapipe import LabeledSegment, PixelSeries, StratumKey
from .ndcore import ContractError, ConvLayer

log = logging.getLogger(__name__)

MODEL_VERSION = "ftc-encoder-1"
CHANNELS = (3, 32, 64, 64)
KERNEL_WIDTH = 7
STRIDE = 2
DROPOUT_RATE = 0.10
STD_FLOOR = 1e-6
DEFAULT_WINDOW = 21


class NumericalError(ArithmeticError):
    def __init__(self, layer_index: int, message: str = "non-finite activations"):
        super().__init__(f"{message} at layer {layer_index}")
        self.layer_index = layer_index


# --------------------------------------------------------------------- params


@dataclass
class ModelParams:
    encoder: list[ConvLayer]
    decoder: list[ConvLayer]
    dropout_rate: float = DROPOUT_RATE
    version: str = MODEL_VERSION

    def __post_init__(self):
        if self.decoder[-1].out_channels != self.encoder[0].in_channels:
            raise ContractError("decoder must reconstruct the encoder's input channels")

    @property
    def layers(self) -> list[ConvLayer]:
        return self.encoder + self.decoder

    @property
    def length_multiple(self) -> int:
        return int(np.prod([layer.stride for layer in self.encoder]))

    def arrays(self) -> list[np.ndarray]:
        """Trainable arrays in canonical order (weights, bias per layer)."""
        return [a for layer in self.layers for a in (layer.weights, layer.bias)]

    def copy(self) -> "ModelParams":
        def dup(layers):
            return [ConvLayer(l.weights.copy(), l.bias.copy(), l.stride) for l in layers]
        return ModelParams(dup(self.encoder), dup(self.decoder), self.dropout_rate, self.version)


def init_params(rng: np.random.Generator, channels: tuple[int, ...] = CHANNELS,
                kernel_width: int = KERNEL_WIDTH, stride: int = STRIDE,
                dropout_rate: float = DROPOUT_RATE) -> ModelParams:
    enc = [ConvLayer.init(a, b, kernel_width, stride, rng) for a, b in zip(channels[:-1], channels[1:])]
    back = channels[::-1]
    # decoder weights are (out, in, k) like the encoder's
    dec = [ConvLayer.init(a, b, kernel_width, stride, rng) for a, b in zip(back[:-1], back[1:])]
    return ModelParams(enc, dec, dropout_rate)


def zero_params(channels: tuple[int, ...] = CHANNELS, kernel_width: int = KERNEL_WIDTH,
                stride: int = STRIDE) -> ModelParams:
    def z(a, b):
        return ConvLayer(np.zeros((b, a, kernel_width)), np.zeros(b), stride)
    back = channels[::-1]
    return ModelParams([z(a, b) for a, b in zip(channels[:-1], channels[1:])],
                       [z(a, b) for a, b in zip(back[:-1], back[1:])])


# -------------------------------------------------------------- standardize


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.maximum(np.asarray(self.std, dtype=np.float64), STD_FLOOR)

    @classmethod
    def identity(cls, channels: int = 3) -> "Standardizer":
        return cls(np.zeros(channels), np.ones(channels))

    @classmethod
    def fit(cls, segments: list[LabeledSegment]) -> "Standardizer":
        cols = np.concatenate([s.x[:, s.mask.astype(bool)] for s in segments], axis=1)
        return cls(cols.mean(axis=1), cols.std(axis=1))

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean[:, None]) / self.std[:, None]

    def destandardize(self, z: np.ndarray) -> np.ndarray:
        return z * self.std[:, None] + self.mean[:, None]


# ------------------------------------------------------------------ forward


def _check(a: np.ndarray, index: int) -> None:
    if not np.all(np.isfinite(a)):
        raise NumericalError(index)


def _run(params: ModelParams, x: np.ndarray, train: bool, rng: np.random.Generator | None,
         keep_cache: bool):
    rate = params.dropout_rate
    cache = []
    lengths = []
    a = x
    for i, layer in enumerate(params.encoder):
        lengths.append(a.shape[-1])
        z = nd.conv1d_forward(layer, a, same=True)
        _check(z, i)
        r = nd.relu(z)
        out, kept = nd.dropout(r, rate, rng, train)
        if keep_cache:
            cache.append((a, z, kept if train else None))
        a = out
    n_enc = len(params.encoder)
    last = len(params.decoder) - 1
    for j, layer in enumerate(params.decoder):
        target = lengths[n_enc - 1 - j]
        z = nd.tconv1d_forward(layer, a, target)
        _check(z, n_enc + j)
        if j == last:
            # linear output: standardized inputs take both signs
            if keep_cache:
                cache.append((a, z, None))
            a = z
            break
        r = nd.relu(z)
        out, kept = nd.dropout(r, rate, rng, train)
        if keep_cache:
            cache.append((a, z, kept if train else None))
        a = out
    return a, cache, lengths


def _check_input(params: ModelParams, x: np.ndarray, mask: np.ndarray) -> None:
    m = params.length_multiple
    if x.shape[-2] != params.encoder[0].in_channels:
        raise ContractError(f"expected {params.encoder[0].in_channels} channels, got {x.shape[-2]}")
    if x.shape[-1] % m:
        raise ContractError(f"series length {x.shape[-1]} is not a multiple of {m}; pad it first")
    if np.shape(mask) != x.shape[:-2] + x.shape[-1:]:
        raise ContractError(f"mask shape {np.shape(mask)} does not match series shape {x.shape}")


def forward(params: ModelParams, x: np.ndarray, mask: np.ndarray, train: bool = False,
            rng: np.random.Generator | None = None):
    """Reconstruct ``x`` and return ``(xhat, L)`` with L the masked mean squared error.

    ``x`` is a standardized ``(3, n)`` or ``(batch, 3, n)`` array whose length
    is a multiple of 8.  Dropout is active only when ``train`` is true.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_input(params, x, mask)
    xhat, _, _ = _run(params, x, train, rng, keep_cache=False)
    return xhat, nd.masked_mse(x, xhat, mask)


def contrastive_loss(L, y, clamp: float = 1e-6):
    """Negative Bernoulli log-likelihood with eta = exp(-L).

    ``y = 1`` gives ``L``; ``y = 0`` gives ``-log(1 - exp(-max(L, clamp)))``.
    Works elementwise on arrays.
    """
    L = np.asarray(L, dtype=np.float64)
    if np.any(L < 0):
        raise ContractError("reconstruction loss must be non-negative")
    y = np.asarray(y)
    out = np.where(y == 1, L, -np.log(-np.expm1(-np.maximum(L, clamp))))
    return float(out) if out.ndim == 0 else out


def contrastive_grad(L, y, clamp: float = 1e-6):
    """d contrastive_loss / d L."""
    L = np.asarray(L, dtype=np.float64)
    y = np.asarray(y)
    safe = np.maximum(L, clamp)
    # -1 / (e^L - 1), written to stay finite for large L
    thawed = np.where(L > clamp, np.exp(-safe) / np.expm1(-safe), 0.0)
    return np.where(y == 1, 1.0, thawed)


def freeze_probability(L):
    """exp(-L): probability of the frozen (normal) class."""
    L = np.asarray(L, dtype=np.float64)
    if np.any(L < 0):
        raise ContractError("reconstruction loss must be non-negative")
    p = np.exp(-L)
    return float(p) if p.ndim == 0 else p


def _activation_backward(g: np.ndarray, z: np.ndarray, kept: np.ndarray | None, rate: float) -> np.ndarray:
    if kept is not None:
        g = nd.dropout_backward(g, kept, rate)
    return nd.relu_backward(z, g)


def objective_and_grads(params: ModelParams, x: np.ndarray, mask: np.ndarray, y: np.ndarray,
                        clamp: float = 1e-6, train: bool = True,
                        rng: np.random.Generator | None = None):
    """Mean contrastive objective over a batch and its gradient.

    Returns ``(objective, L, grads)`` where ``grads`` follows
    :meth:`ModelParams.arrays` order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x, mask, y = x[None], np.asarray(mask)[None], np.atleast_1d(y)
    _check_input(params, x, mask)
    xhat, cache, lengths = _run(params, x, train, rng, keep_cache=True)
    L = nd.masked_mse(x, xhat, mask)
    batch = x.shape[0]
    objective = float(np.mean(contrastive_loss(L, y, clamp)))
    g = nd.masked_mse_backward(x, xhat, mask, contrastive_grad(L, y, clamp) / batch)

    rate = params.dropout_rate
    n_enc = len(params.encoder)
    grads: list[np.ndarray] = [None] * (2 * len(params.layers))
    last = len(params.decoder) - 1
    for j in range(last, -1, -1):
        layer = params.decoder[j]
        a_in, z, kept = cache[n_enc + j]
        if j != last:
            g = _activation_backward(g, z, kept, rate)
        tg = nd.tconv1d_backward(layer, a_in, g, lengths[n_enc - 1 - j])
        grads[2 * (n_enc + j)], grads[2 * (n_enc + j) + 1] = tg.dweights, tg.dbias
        g = tg.dx
    for i in range(n_enc - 1, -1, -1):
        a_in, z, kept = cache[i]
        g = _activation_backward(g, z, kept, rate)
        cg = nd.conv1d_backward(params.encoder[i], a_in, g, same=True)
        grads[2 * i], grads[2 * i + 1] = cg.dweights, cg.dbias
        g = cg.dx
    return objective, L, grads


# ----------------------------------------------------------------- training


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    rng_seed: int = 0
    loss_clamp: float = 1e-6
    normalization: str = "stratum"  # or "none"
    max_chunk: int = 32  # longer segments are cut into near-equal pieces; 0 keeps them whole
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ContractError("learning_rate must be > 0")
        if self.loss_clamp <= 0:
            raise ContractError("loss_clamp must be > 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise ContractError("epochs and batch_size must be >= 1")
        if self.normalization not in ("stratum", "none"):
            raise ContractError(f"unknown normalization mode {self.normalization!r}")
        if self.max_chunk and self.max_chunk < KERNEL_WIDTH:
            raise ContractError(f"max_chunk must be 0 or >= {KERNEL_WIDTH}")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


@dataclass
class TrainLog:
    epochs: list[dict] = field(default_factory=list)

    @property
    def objective(self) -> np.ndarray:
        return np.array([e["objective"] for e in self.epochs])


@dataclass
class FTCModel:
    """A trained stratum model: parameters plus the input scaling they expect."""

    params: ModelParams
    scaler: Standardizer
    stratum: StratumKey | None = None
    config_hash: str = ""

    def prepare(self, x_kelvin: np.ndarray, length: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Standardize and right-pad a ``(3, n)`` series; returns ``(x, mask)``."""
        return pad_series(self.scaler.standardize(x_kelvin), self.params.length_multiple, length)


def padded_length(n: int, multiple: int = 8) -> int:
    return -(-n // multiple) * multiple


def pad_series(x: np.ndarray, multiple: int = 8, length: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[-1]
    target = padded_length(n, multiple) if length is None else length
    out = np.zeros(x.shape[:-1] + (target,))
    out[..., :n] = x
    mask = np.zeros(target, dtype=bool)
    mask[:n] = True
    return out, mask


def _chunks(seg: LabeledSegment, max_chunk: int) -> list[np.ndarray]:
    x = seg.x[:, seg.mask.astype(bool)]
    n = x.shape[1]
    if not max_chunk or n <= max_chunk:
        return [x]
    return np.array_split(x, -(-n // max_chunk), axis=1)


def _adam_step(arrays, grads, m, v, t: int, cfg: TrainConfig) -> None:
    b1, b2 = cfg.beta1, cfg.beta2
    lr_t = cfg.learning_rate * np.sqrt(1 - b2 ** t) / (1 - b1 ** t)
    for p, g, mi, vi in zip(arrays, grads, m, v):
        mi *= b1
        mi += (1 - b1) * g
        vi *= b2
        vi += (1 - b2) * g * g
        p -= lr_t * mi / (np.sqrt(vi) + cfg.adam_eps)


def train(segments: list[LabeledSegment], cfg: TrainConfig = TrainConfig(),
          stratum: StratumKey | None = None) -> tuple[FTCModel, TrainLog]:
    """Fit one stratum's FTC-Encoder by mini-batch Adam on the contrastive objective."""
    if not segments:
        raise ContractError("no training segments")
    labels = {s.y for s in segments}
    if labels != {0, 1}:
        raise ContractError(
            f"training needs both frozen and thawed segments, got only y={sorted(labels)}; "
            "the contrastive loss is degenerate with a single class")
    strata = {s.stratum for s in segments}
    if len(strata) > 1:
        raise ContractError(f"segments span several strata: {sorted(map(str, strata))}")
    stratum = stratum if stratum is not None else next(iter(strata))

    scaler = Standardizer.fit(segments) if cfg.normalization == "stratum" else Standardizer.identity()
    rng = np.random.default_rng(cfg.rng_seed)
    params = init_params(rng)
    mult = params.length_multiple

    # bucket by padded length so each batch is a dense (B, 3, n) array
    buckets: dict[int, list[tuple[np.ndarray, np.ndarray, int]]] = {}
    for seg in segments:
        for piece in _chunks(seg, cfg.max_chunk):
            x, mask = pad_series(scaler.standardize(piece), mult)
            buckets.setdefault(x.shape[1], []).append((x, mask, seg.y))
    stacked = {n: (np.stack([b[0] for b in items]), np.stack([b[1] for b in items]),
                   np.array([b[2] for b in items])) for n, items in sorted(buckets.items())}

    arrays = params.arrays()
    m = [np.zeros_like(a) for a in arrays]
    v = [np.zeros_like(a) for a in arrays]
    step = 0
    history = TrainLog()
    for epoch in range(cfg.epochs):
        batches = []
        for n, (xs, ms, ys) in stacked.items():
            order = rng.permutation(len(ys))
            for k in range(0, len(order), cfg.batch_size):
                batches.append((n, order[k: k + cfg.batch_size]))
        batch_order = rng.permutation(len(batches))
        tot, tot_n = 0.0, 0
        sums = {0: 0.0, 1: 0.0}
        counts = {0: 0, 1: 0}
        for bi in batch_order:
            n, idx = batches[bi]
            xs, ms, ys = stacked[n]
            obj, L, grads = objective_and_grads(params, xs[idx], ms[idx], ys[idx], cfg.loss_clamp, True, rng)
            step += 1
            _adam_step(arrays, grads, m, v, step, cfg)
            tot += obj * len(idx)
            tot_n += len(idx)
            for label in (0, 1):
                sel = ys[idx] == label
                sums[label] += float(L[sel].sum())
                counts[label] += int(sel.sum())
        entry = {
            "epoch": epoch,
            "objective": tot / tot_n,
            "mean_L_frozen": sums[1] / max(counts[1], 1),
            "mean_L_thawed": sums[0] / max(counts[0], 1),
        }
        history.epochs.append(entry)
        log.debug("%s epoch %d objective %.5f", stratum, epoch, entry["objective"])
    return FTCModel(params, scaler, stratum, cfg.digest()), history


def segment_losses(model: FTCModel, segments: list[LabeledSegment]) -> np.ndarray:
    """Inference-mode reconstruction loss of each (unchunked) segment."""
    out = np.empty(len(segments))
    for i, seg in enumerate(segments):
        x, mask = model.prepare(seg.x[:, seg.mask.astype(bool)])
        out[i] = forward(model.params, x, mask)[1]
    return out


# ---------------------------------------------------------------- retrieval


@dataclass
class RetrievalSeries:
    pixel_id: str
    dates: np.ndarray
    p_frozen: np.ndarray
    window: int


def window_losses(model: FTCModel, x_kelvin: np.ndarray, window: int = DEFAULT_WINDOW,
                  batch: int = 1024) -> np.ndarray:
    """Loss of the centred window around every day of a ``(3, n)`` daily series.

    Windows are truncated at the series ends and mask-padded to a multiple of 8.
    """
    if window < KERNEL_WIDTH or window % 2 == 0:
        raise ContractError(f"window must be odd and >= {KERNEL_WIDTH}, got {window}")
    n = x_kelvin.shape[1]
    if n < KERNEL_WIDTH:
        raise ContractError(f"series of {n} days is shorter than {KERNEL_WIDTH}")
    z = model.scaler.standardize(x_kelvin)
    half = window // 2
    t = np.arange(n)
    starts = np.maximum(t - half, 0)
    sizes = np.minimum(t + half + 1, n) - starts
    mult = model.params.length_multiple
    losses = np.empty(n)
    for size in np.unique(sizes):
        days = np.flatnonzero(sizes == size)
        plen = padded_length(int(size), mult)
        mask = np.zeros(plen, dtype=bool)
        mask[:size] = True
        for k in range(0, len(days), batch):
            sel = days[k: k + batch]
            idx = starts[sel, None] + np.arange(size)
            xb = np.zeros((len(sel), z.shape[0], plen))
            xb[:, :, :size] = z[:, idx].transpose(1, 0, 2)
            _, L = forward(model.params, xb, np.broadcast_to(mask, (len(sel), plen)))
            losses[sel] = L
    return losses


def retrieve(model: FTCModel, series: PixelSeries, window: int = DEFAULT_WINDOW) -> RetrievalSeries:
    """Daily frozen probability for one daily pixel series."""
    if not series.is_daily:
        raise ContractError(f"pixel {series.pixel_id}: series must be daily; interpolate first")
    L = window_losses(model, series.features(), window)
    return RetrievalSeries(series.pixel_id, series.dates.copy(), freeze_probability(L), window)


# -------------------------------------------------------------- checkpoints

MAGIC = b"FTCENC\n"
FORMAT_VERSION = 1


def _payload(model: FTCModel) -> bytes:
    parts = [a.astype("<f8", copy=False).tobytes(order="C") for a in model.params.arrays()]
    parts += [model.scaler.mean.astype("<f8").tobytes(), model.scaler.std.astype("<f8").tobytes()]
    return b"".join(parts)


def checkpoint_bytes(model: FTCModel) -> bytes:
    payload = _payload(model)
    header = {
        "format_version": FORMAT_VERSION,
        "model_version": model.params.version,
        "stratum": None if model.stratum is None else str(model.stratum),
        "dropout_rate": model.params.dropout_rate,
        "layers": [{"kind": kind, "shape": list(l.weights.shape), "stride": l.stride}
                   for kind, group in (("conv", model.params.encoder), ("tconv", model.params.decoder))
                   for l in group],
        "standardization": {"mean": model.scaler.mean.tolist(), "std": model.scaler.std.tolist()},
        "train_config_hash": model.config_hash,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return MAGIC + struct.pack("<I", len(head)) + head + payload


def save_checkpoint(model: FTCModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(checkpoint_bytes(model))
    return path


def read_header(path: str | Path) -> dict:
    return _split(Path(path).read_bytes(), str(path))[0]


def _split(raw: bytes, name: str) -> tuple[dict, bytes]:
    if not raw.startswith(MAGIC):
        raise ContractError(f"{name}: not an FTC-Encoder checkpoint")
    (n,) = struct.unpack_from("<I", raw, len(MAGIC))
    start = len(MAGIC) + 4
    header = json.loads(raw[start: start + n])
    if header.get("format_version") != FORMAT_VERSION:
        raise ContractError(f"{name}: unsupported checkpoint format {header.get('format_version')}")
    payload = raw[start + n:]
    if len(payload) != header["payload_bytes"] or hashlib.sha256(payload).hexdigest() != header["payload_sha256"]:
        raise ContractError(f"{name}: checkpoint payload is truncated or corrupt")
    return header, payload


def load_checkpoint(path: str | Path) -> FTCModel:
    header, payload = _split(Path(path).read_bytes(), str(path))
    flat = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        out = flat[pos: pos + size].reshape(shape).copy()
        pos += size
        return out

    enc, dec = [], []
    for spec in header["layers"]:
        w = take(tuple(spec["shape"]))
        b = take((spec["shape"][0],))
        (enc if spec["kind"] == "conv" else dec).append(ConvLayer(w, b, spec["stride"]))
    channels = enc[0].in_channels
    mean, std = take((channels,)), take((channels,))
    params = ModelParams(enc, dec, header["dropout_rate"], header["model_version"])
    stratum = None if header["stratum"] is None else StratumKey.parse(header["stratum"])
    return FTCModel(params, Standardizer(mean, std), stratum, header["train_config_hash"])
