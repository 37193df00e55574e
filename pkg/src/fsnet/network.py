"""Dense stacks (encoder, classifier head, decoder), the embedding-predicted
reconstruction layer, and parameter initialization / counting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import FeatureEmbeddings
from .numerics import DimensionError, leaky_relu, matmul, softmax
from .rng import RngState


@dataclass(frozen=True)
class Architecture:
    """Layer widths of the full network.

    The default widths give the stack
    d -> n_select -> 64 -> 32 -> 16 (-> n_classes) -> 32 -> 64 -> d.
    """

    n_features: int
    n_select: int
    n_classes: int
    encoder: tuple[int, ...] = (64, 32, 16)
    decoder: tuple[int, ...] = (32, 64)

    def __post_init__(self):
        if self.n_features < 1 or self.n_select < 1 or self.n_classes < 2:
            raise ValueError(
                f"invalid architecture: d={self.n_features}, K={self.n_select},"
                f" classes={self.n_classes}"
            )
        if self.n_select > self.n_features:
            raise ValueError(
                f"cannot select {self.n_select} of {self.n_features} features"
            )
        if not self.encoder or not self.decoder:
            raise ValueError("encoder and decoder need at least one layer each")
        if any(w < 1 for w in self.encoder + self.decoder):
            raise ValueError("layer widths must be positive")

    @property
    def hidden_width(self) -> int:
        return self.encoder[-1]

    @property
    def recon_width(self) -> int:
        return self.decoder[-1]


@dataclass
class DenseStack:
    """Ordered fully connected layers; weights are (out, in), biases optional."""

    weights: list[np.ndarray]
    biases: list[np.ndarray] | None = None

    def layer_dims(self) -> list[tuple[int, int]]:
        return [w.shape for w in self.weights]


@dataclass
class FsNetParams:
    """Every trainable array of the model, in a fixed order.

    select_w and recon_w are (K, b) and (h', b) in predictor mode; in dense
    mode they address features directly and are (K, d) and (h', d).
    """

    select_w: np.ndarray
    encoder: DenseStack
    classifier: DenseStack
    decoder: DenseStack
    recon_w: np.ndarray

    def named(self) -> list[tuple[str, np.ndarray]]:
        out: list[tuple[str, np.ndarray]] = [("select_w", self.select_w)]
        for label, stack in (
            ("encoder", self.encoder),
            ("classifier", self.classifier),
            ("decoder", self.decoder),
        ):
            for i, w in enumerate(stack.weights):
                out.append((f"{label}.{i}", w))
            if stack.biases is not None:
                for i, b in enumerate(stack.biases):
                    out.append((f"{label}.{i}.bias", b))
        out.append(("recon_w", self.recon_w))
        return out

    def arrays(self) -> list[np.ndarray]:
        return [arr for _, arr in self.named()]

    def replace_arrays(self, arrays: list[np.ndarray]) -> "FsNetParams":
        """Same structure with new values, in named() order."""
        it = iter(arrays)

        def take(template: np.ndarray) -> np.ndarray:
            arr = next(it)
            if arr.shape != template.shape:
                raise DimensionError(
                    f"replacement shape {arr.shape} != expected {template.shape}"
                )
            return arr

        def stack_like(stack: DenseStack) -> DenseStack:
            ws = [take(w) for w in stack.weights]
            bs = [take(b) for b in stack.biases] if stack.biases is not None else None
            return DenseStack(ws, bs)

        sw = take(self.select_w)
        enc = stack_like(self.encoder)
        cls = stack_like(self.classifier)
        dec = stack_like(self.decoder)
        rw = take(self.recon_w)
        return FsNetParams(sw, enc, cls, dec, rw)


def count_parameters(params: FsNetParams) -> int:
    return int(sum(arr.size for arr in params.arrays()))


def stack_param_count(arch: Architecture, use_bias: bool = False) -> int:
    """Parameters in encoder + classifier head + decoder (no virtual layers)."""
    enc_dims = [arch.n_select, *arch.encoder]
    dec_dims = [arch.hidden_width, *arch.decoder]
    total = sum(a * b for a, b in zip(enc_dims[1:], enc_dims[:-1]))
    total += arch.n_classes * arch.hidden_width
    total += sum(a * b for a, b in zip(dec_dims[1:], dec_dims[:-1]))
    if use_bias:
        total += sum(arch.encoder) + arch.n_classes + sum(arch.decoder)
    return total


def trainable_param_count(arch: Architecture, embed_size: int, mode: str, use_bias: bool = False) -> int:
    """Total trainable parameters for either weight-provenance mode."""
    width = embed_size if mode == "predictor" else arch.n_features
    return arch.n_select * width + arch.recon_width * width + stack_param_count(arch, use_bias)


def _glorot(rng: RngState, out_dim: int, in_dim: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    return (rng.uniform((out_dim, in_dim)) * 2.0 - 1.0) * bound


def init_params(
    arch: Architecture,
    embed_size: int,
    mode: str,
    rng: RngState,
    use_bias: bool = False,
) -> FsNetParams:
    """Glorot-uniform parameters, drawn in a fixed order so a seed pins the model."""
    if mode not in ("predictor", "dense"):
        raise ValueError(f"mode must be 'predictor' or 'dense', got {mode!r}")
    width = embed_size if mode == "predictor" else arch.n_features
    select_w = _glorot(rng, arch.n_select, width)

    def build_stack(dims: list[int]) -> DenseStack:
        ws = [_glorot(rng, o, i) for i, o in zip(dims[:-1], dims[1:])]
        bs = [np.zeros(o) for o in dims[1:]] if use_bias else None
        return DenseStack(ws, bs)

    encoder = build_stack([arch.n_select, *arch.encoder])
    classifier = build_stack([arch.hidden_width, arch.n_classes])
    decoder = build_stack([arch.hidden_width, *arch.decoder])
    recon_w = _glorot(rng, arch.recon_width, width)
    return FsNetParams(select_w, encoder, classifier, decoder, recon_w)


def zeros_params(
    arch: Architecture, embed_size: int, mode: str, use_bias: bool = False
) -> FsNetParams:
    """All-zero parameters with the same structure init_params would produce."""
    if mode not in ("predictor", "dense"):
        raise ValueError(f"mode must be 'predictor' or 'dense', got {mode!r}")
    width = embed_size if mode == "predictor" else arch.n_features

    def build_stack(dims: list[int]) -> DenseStack:
        ws = [np.zeros((o, i)) for i, o in zip(dims[:-1], dims[1:])]
        bs = [np.zeros(o) for o in dims[1:]] if use_bias else None
        return DenseStack(ws, bs)

    return FsNetParams(
        np.zeros((arch.n_select, width)),
        build_stack([arch.n_select, *arch.encoder]),
        build_stack([arch.hidden_width, arch.n_classes]),
        build_stack([arch.hidden_width, *arch.decoder]),
        np.zeros((arch.recon_width, width)),
    )


def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise DimensionError(f"expected a vector or matrix, got shape {x.shape}")


def _stack_apply(stack: DenseStack, batch: np.ndarray, slope: float, final_softmax: bool) -> np.ndarray:
    a = batch
    last = len(stack.weights) - 1
    for i, w in enumerate(stack.weights):
        z = matmul(a, w.T)
        if stack.biases is not None:
            z = z + stack.biases[i]
        if i == last and final_softmax:
            a = softmax(z, axis=1)
        else:
            a = leaky_relu(z, slope)
    return a


def encode(enc: DenseStack, x_selected: np.ndarray, slope: float) -> np.ndarray:
    """Hidden representation from the selected inputs (leaky activations throughout)."""
    batch, single = _as_batch(x_selected)
    out = _stack_apply(enc, batch, slope, final_softmax=False)
    return out[0] if single else out


def classify(cls: DenseStack, hidden: np.ndarray, slope: float) -> np.ndarray:
    """Class probabilities from the hidden representation (softmax output)."""
    batch, single = _as_batch(hidden)
    out = _stack_apply(cls, batch, slope, final_softmax=True)
    return out[0] if single else out


def decode(dec: DenseStack, hidden: np.ndarray, slope: float) -> np.ndarray:
    """Reconstruction-side hidden representation (leaky activations throughout)."""
    batch, single = _as_batch(hidden)
    out = _stack_apply(dec, batch, slope, final_softmax=False)
    return out[0] if single else out


def recon_matrix(recon_w: np.ndarray, emb: FeatureEmbeddings | None) -> np.ndarray:
    """Virtual reconstruction weights, one row per feature.

    Predictor mode maps each feature embedding through tanh(recon_w @ phi);
    dense mode (emb is None) squashes the learned matrix directly, which is
    the predictor formula with one-hot embeddings.
    """
    if emb is None:
        return np.tanh(recon_w.T)
    if recon_w.shape[1] != emb.width:
        raise DimensionError(
            f"reconstruction predictor expects embeddings of width {recon_w.shape[1]},"
            f" got {emb.width}"
        )
    return np.tanh(emb.table @ recon_w.T)  # (d, h')


def reconstruct(
    recon_w: np.ndarray, emb: FeatureEmbeddings | None, h_tilde: np.ndarray
) -> np.ndarray:
    """Reconstructed inputs: h_tilde mapped through the virtual weight rows."""
    w = recon_matrix(recon_w, emb)
    batch, single = _as_batch(h_tilde)
    if batch.shape[1] != w.shape[1]:
        raise DimensionError(
            f"decoder output width {batch.shape[1]} does not match"
            f" reconstruction width {w.shape[1]}"
        )
    out = batch @ w.T
    return out[0] if single else out
