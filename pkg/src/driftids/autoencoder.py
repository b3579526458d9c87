"""Fully-connected autoencoder with explicit forward/backward passes.

The encoder maps inputs to a latent feature vector; the decoder mirrors it.
Hidden layers use ReLU; the latent and reconstruction layers are linear so
downstream subspace modeling sees an unclipped geometry. Everything runs in
float64 so gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class MlpParams:
    """Weights and biases for the encoder/decoder stacks."""

    encoder_weights: list[np.ndarray]
    encoder_biases: list[np.ndarray]
    decoder_weights: list[np.ndarray]
    decoder_biases: list[np.ndarray]
    encoder_dims: tuple[int, ...]
    activation: str = "relu"

    @property
    def input_dim(self) -> int:
        return self.encoder_dims[0]

    @property
    def latent_dim(self) -> int:
        return self.encoder_dims[-1]

    @property
    def decoder_dims(self) -> tuple[int, ...]:
        return tuple(reversed(self.encoder_dims))

    def flat_arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (weights then bias per layer)."""
        out: list[np.ndarray] = []
        for w, b in zip(self.encoder_weights, self.encoder_biases):
            out.extend([w, b])
        for w, b in zip(self.decoder_weights, self.decoder_biases):
            out.extend([w, b])
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            encoder_weights=[w.copy() for w in self.encoder_weights],
            encoder_biases=[b.copy() for b in self.encoder_biases],
            decoder_weights=[w.copy() for w in self.decoder_weights],
            decoder_biases=[b.copy() for b in self.decoder_biases],
            encoder_dims=self.encoder_dims,
            activation=self.activation,
        )


@dataclass
class AdamState:
    """First/second-moment accumulators aligned with ``MlpParams.flat_arrays``."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class EncoderSnapshot:
    """Frozen copy of the encoder taken at an experience boundary."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    encoder_dims: tuple[int, ...]
    activation: str
    experience_index: int

    @property
    def latent_dim(self) -> int:
        return self.encoder_dims[-1]

    def encode(self, x: np.ndarray) -> np.ndarray:
        out, _ = _forward_stack(list(self.weights), list(self.biases), self.activation, np.asarray(x, dtype=np.float64))
        return out


def _init_stack(dims: tuple[int, ...], rng: np.random.Generator) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Scaled-uniform fan-in weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def init_from_dims(encoder_dims: tuple[int, ...] | list[int], seed: int, learning_rate: float = 0.001) -> tuple[MlpParams, AdamState]:
    """Initialize an autoencoder whose encoder follows ``encoder_dims``."""
    encoder_dims = tuple(int(d) for d in encoder_dims)
    if len(encoder_dims) < 2 or any(d < 1 for d in encoder_dims):
        raise ValueError(f"encoder dims must be >= 1 with at least two layers, got {encoder_dims}")
    if encoder_dims[-1] >= encoder_dims[0]:
        logger.warning(
            "latent dim %d is not smaller than the input dim %d; the latent "
            "space will not compress",
            encoder_dims[-1],
            encoder_dims[0],
        )
    rng = np.random.default_rng(seed)
    enc_w, enc_b = _init_stack(encoder_dims, rng)
    dec_w, dec_b = _init_stack(tuple(reversed(encoder_dims)), rng)
    params = MlpParams(enc_w, enc_b, dec_w, dec_b, encoder_dims)
    adam = AdamState(
        m=[np.zeros_like(a) for a in params.flat_arrays()],
        v=[np.zeros_like(a) for a in params.flat_arrays()],
        learning_rate=learning_rate,
    )
    return params, adam


def init(input_dim: int, latent_dim: int, hidden_width: int, seed: int, learning_rate: float = 0.001) -> tuple[MlpParams, AdamState]:
    """Initialize the default architecture: two hidden layers of ``hidden_width``."""
    return init_from_dims((input_dim, hidden_width, hidden_width, latent_dim), seed, learning_rate)


def _forward_stack(
    weights: list[np.ndarray], biases: list[np.ndarray], activation: str, x: np.ndarray
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Forward pass; ReLU on all but the last layer, which stays linear.

    Returns the output and a cache of (layer input, pre-activation) pairs.
    """
    if activation != "relu":
        raise ValueError(f"unsupported activation: {activation}")
    cache = []
    out = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        pre = out @ w + b
        cache.append((out, pre))
        out = pre if i == last else np.maximum(pre, 0.0)
    return out, cache


def _backward_stack(
    weights: list[np.ndarray],
    cache: list[tuple[np.ndarray, np.ndarray]],
    grad_out: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Backpropagate grad_out through a stack, returning per-layer gradients."""
    grad_w = [np.empty(0)] * len(weights)
    grad_b = [np.empty(0)] * len(weights)
    grad = grad_out
    last = len(weights) - 1
    for i in range(last, -1, -1):
        layer_in, pre = cache[i]
        if i != last:
            grad = grad * (pre > 0.0)
        grad_w[i] = layer_in.T @ grad
        grad_b[i] = grad.sum(axis=0)
        grad = grad @ weights[i].T
    return grad_w, grad_b, grad


def _check_batch(x: np.ndarray, expected_cols: int, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != expected_cols:
        raise ValueError(f"{what} expects shape (batch, {expected_cols}), got {x.shape}")
    return x


def encode(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Map a batch of inputs to latent features."""
    x = _check_batch(x, params.input_dim, "encode")
    h, _ = _forward_stack(params.encoder_weights, params.encoder_biases, params.activation, x)
    if not np.isfinite(h).all():
        raise FloatingPointError("encoder produced non-finite activations (training diverged?)")
    return h


def decode(params: MlpParams, h: np.ndarray) -> np.ndarray:
    """Map a batch of latent features back to input space."""
    h = _check_batch(h, params.latent_dim, "decode")
    out, _ = _forward_stack(params.decoder_weights, params.decoder_biases, params.activation, h)
    if not np.isfinite(out).all():
        raise FloatingPointError("decoder produced non-finite activations (training diverged?)")
    return out


def encode_with_cache(params: MlpParams, x: np.ndarray):
    x = _check_batch(x, params.input_dim, "encode")
    return _forward_stack(params.encoder_weights, params.encoder_biases, params.activation, x)


def decode_with_cache(params: MlpParams, h: np.ndarray):
    h = _check_batch(h, params.latent_dim, "decode")
    return _forward_stack(params.decoder_weights, params.decoder_biases, params.activation, h)


def encoder_backward(params: MlpParams, cache, grad_h: np.ndarray):
    """Gradients of the encoder parameters (and input) given dLoss/dLatent."""
    return _backward_stack(params.encoder_weights, cache, grad_h)


def decoder_backward(params: MlpParams, cache, grad_out: np.ndarray):
    """Gradients of the decoder parameters (and latent) given dLoss/dOutput."""
    return _backward_stack(params.decoder_weights, cache, grad_out)


def train_step(params: MlpParams, adam: AdamState, grads: list[np.ndarray]) -> tuple[MlpParams, AdamState]:
    """One Adam update with bias correction; mutates params/adam in place."""
    arrays = params.flat_arrays()
    if len(grads) != len(arrays):
        raise ValueError(f"expected {len(arrays)} gradient arrays, got {len(grads)}")
    for g, a in zip(grads, arrays):
        if g.shape != a.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {a.shape}")
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
    adam.t += 1
    bc1 = 1.0 - adam.beta1**adam.t
    bc2 = 1.0 - adam.beta2**adam.t
    for i, (g, a) in enumerate(zip(grads, arrays)):
        adam.m[i] = adam.beta1 * adam.m[i] + (1.0 - adam.beta1) * g
        adam.v[i] = adam.beta2 * adam.v[i] + (1.0 - adam.beta2) * (g * g)
        m_hat = adam.m[i] / bc1
        v_hat = adam.v[i] / bc2
        a -= adam.learning_rate * m_hat / (np.sqrt(v_hat) + adam.epsilon)
    return params, adam


def snapshot(params: MlpParams, experience_index: int) -> EncoderSnapshot:
    """Deep, immutable copy of the encoder only (the decoder is not replayed)."""
    weights = tuple(w.copy() for w in params.encoder_weights)
    biases = tuple(b.copy() for b in params.encoder_biases)
    for arr in weights + biases:
        arr.setflags(write=False)
    return EncoderSnapshot(
        weights=weights,
        biases=biases,
        encoder_dims=params.encoder_dims,
        activation=params.activation,
        experience_index=experience_index,
    )


def parameter_count(params: MlpParams) -> int:
    return int(sum(a.size for a in params.flat_arrays()))


def save_checkpoint(
    path: str | Path,
    params: MlpParams,
    adam: AdamState | None = None,
    rng_state: dict | None = None,
) -> None:
    """Serialize the model (and optimizer/RNG state) to a single .npz file."""
    arrays: dict[str, np.ndarray] = {}
    for i, w in enumerate(params.encoder_weights):
        arrays[f"enc_w{i}"] = w
        arrays[f"enc_b{i}"] = params.encoder_biases[i]
    for i, w in enumerate(params.decoder_weights):
        arrays[f"dec_w{i}"] = w
        arrays[f"dec_b{i}"] = params.decoder_biases[i]
    header = {
        "version": CHECKPOINT_VERSION,
        "encoder_dims": list(params.encoder_dims),
        "activation": params.activation,
        "n_encoder_layers": len(params.encoder_weights),
        "n_decoder_layers": len(params.decoder_weights),
        "has_adam": adam is not None,
        "rng_state": rng_state,
    }
    if adam is not None:
        for i, (m, v) in enumerate(zip(adam.m, adam.v)):
            arrays[f"adam_m{i}"] = m
            arrays[f"adam_v{i}"] = v
        header["adam"] = {
            "t": adam.t,
            "learning_rate": adam.learning_rate,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "epsilon": adam.epsilon,
            "n_slots": len(adam.m),
        }
    arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path: str | Path) -> tuple[MlpParams, AdamState | None, dict | None]:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        n_enc = header["n_encoder_layers"]
        n_dec = header["n_decoder_layers"]
        params = MlpParams(
            encoder_weights=[data[f"enc_w{i}"] for i in range(n_enc)],
            encoder_biases=[data[f"enc_b{i}"] for i in range(n_enc)],
            decoder_weights=[data[f"dec_w{i}"] for i in range(n_dec)],
            decoder_biases=[data[f"dec_b{i}"] for i in range(n_dec)],
            encoder_dims=tuple(header["encoder_dims"]),
            activation=header["activation"],
        )
        adam = None
        if header["has_adam"]:
            meta = header["adam"]
            adam = AdamState(
                m=[data[f"adam_m{i}"] for i in range(meta["n_slots"])],
                v=[data[f"adam_v{i}"] for i in range(meta["n_slots"])],
                t=meta["t"],
                learning_rate=meta["learning_rate"],
                beta1=meta["beta1"],
                beta2=meta["beta2"],
                epsilon=meta["epsilon"],
            )
    return params, adam, header.get("rng_state")
