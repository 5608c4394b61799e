"""Tiny decoder-only autoregressive network with exact analytic gradients.

Pre-norm transformer blocks with learned positional embeddings, multi-head
causal self-attention, a GELU feed-forward, and an untied output projection.
Everything runs in float64 so algebraic identities and finite-difference
checks hold to tight tolerances.  Reverse-mode gradients are written out by
hand per layer; ``backward`` returns exact gradients for every named
parameter array given the gradient of a scalar loss w.r.t. the logits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import erf

from .errors import ConfigError, DataError

CHECKPOINT_MAGIC = "conceptlm-ckpt-v1"
_LN_EPS = 1e-5
_INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    context_len: int
    d_model: int
    n_layers: int
    n_heads: int
    d_ff: int
    seed: int = 0

    def __post_init__(self):
        for name in ("vocab_size", "context_len", "d_model", "n_layers", "n_heads", "d_ff"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"model config: {name} must be positive")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"model config: d_model ({self.d_model}) must be divisible by "
                f"n_heads ({self.n_heads})"
            )
        if self.context_len < 2:
            raise ConfigError("model config: context_len must be at least 2")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


@dataclass
class ModelState:
    """Named parameter arrays plus the config that shaped them."""

    config: ModelConfig
    params: dict[str, np.ndarray]

    def param_names(self) -> list[str]:
        return sorted(self.params)

    def copy(self) -> "ModelState":
        return ModelState(self.config, {k: v.copy() for k, v in self.params.items()})


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    c = config
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (c.vocab_size, c.d_model),
        "pos_emb": (c.context_len, c.d_model),
        "ln_f.gamma": (c.d_model,),
        "ln_f.beta": (c.d_model,),
        "out.w": (c.d_model, c.vocab_size),
        "out.b": (c.vocab_size,),
    }
    for i in range(c.n_layers):
        p = f"layers.{i}"
        shapes[f"{p}.ln1.gamma"] = (c.d_model,)
        shapes[f"{p}.ln1.beta"] = (c.d_model,)
        shapes[f"{p}.attn.wq"] = (c.d_model, c.d_model)
        shapes[f"{p}.attn.wk"] = (c.d_model, c.d_model)
        shapes[f"{p}.attn.wv"] = (c.d_model, c.d_model)
        shapes[f"{p}.attn.wo"] = (c.d_model, c.d_model)
        shapes[f"{p}.ln2.gamma"] = (c.d_model,)
        shapes[f"{p}.ln2.beta"] = (c.d_model,)
        shapes[f"{p}.ffn.w1"] = (c.d_model, c.d_ff)
        shapes[f"{p}.ffn.b1"] = (c.d_ff,)
        shapes[f"{p}.ffn.w2"] = (c.d_ff, c.d_model)
        shapes[f"{p}.ffn.b2"] = (c.d_model,)
    return shapes


def param_count(config: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init(config: ModelConfig) -> ModelState:
    """Deterministic small-random initialization from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(config).items():
        if name.endswith((".gamma",)):
            params[name] = np.ones(shape)
        elif name.endswith((".beta", ".b1", ".b2", "out.b")):
            params[name] = np.zeros(shape)
        else:
            params[name] = rng.normal(0.0, _INIT_STD, size=shape)
    return ModelState(config, params)


def zero_grads(config: ModelConfig) -> dict[str, np.ndarray]:
    return {name: np.zeros(shape) for name, shape in param_shapes(config).items()}


@dataclass
class ForwardTrace:
    """Logits plus the cached activations backward needs.

    Keeps a reference to the producing state so concept-level losses can run
    sibling forwards for substituted completions.
    """

    state: ModelState
    tokens: tuple[int, ...]
    logits: np.ndarray
    cache: dict = field(repr=False, default_factory=dict)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return cdf + x * pdf


def _layernorm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, (xhat, inv_std)


def _layernorm_backward(dy: np.ndarray, gamma: np.ndarray, ln_cache):
    xhat, inv_std = ln_cache
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    d = xhat.shape[-1]
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / d
    )
    return dx, dgamma, dbeta


def _split_heads(x: np.ndarray, n_heads: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, n_heads, d // n_heads).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def forward(state: ModelState, tokens: Sequence[int]) -> ForwardTrace:
    """Run the network causally over ``tokens`` and cache for backprop.

    Logits row i depends only on tokens 0..i; each row's softmax is a
    proper distribution over the vocabulary.
    """
    c = state.config
    ids = np.asarray(tokens, dtype=np.int64)
    if ids.ndim != 1 or ids.size == 0:
        raise DataError("forward expects a non-empty 1-D token sequence")
    if ids.size > c.context_len:
        raise DataError(f"input length {ids.size} exceeds context window {c.context_len}")
    if ids.min() < 0 or ids.max() >= c.vocab_size:
        raise DataError("token id out of vocabulary range")
    p = state.params
    n = ids.size

    x = p["tok_emb"][ids] + p["pos_emb"][:n]
    cache: dict = {"ids": ids, "n": n, "layers": []}
    mask = np.triu(np.ones((n, n), dtype=bool), k=1)
    scale = 1.0 / np.sqrt(c.d_head)

    for i in range(c.n_layers):
        lp = f"layers.{i}"
        lc: dict = {"x_in": x}
        ln1_out, ln1_cache = _layernorm(x, p[f"{lp}.ln1.gamma"], p[f"{lp}.ln1.beta"])
        lc["ln1_out"], lc["ln1_cache"] = ln1_out, ln1_cache

        q = _split_heads(ln1_out @ p[f"{lp}.attn.wq"], c.n_heads)
        k = _split_heads(ln1_out @ p[f"{lp}.attn.wk"], c.n_heads)
        v = _split_heads(ln1_out @ p[f"{lp}.attn.wv"], c.n_heads)
        scores = (q @ k.transpose(0, 2, 1)) * scale
        scores = np.where(mask[None, :, :], -np.inf, scores)
        scores -= scores.max(axis=-1, keepdims=True)
        attn = np.exp(scores)
        attn /= attn.sum(axis=-1, keepdims=True)
        z = _merge_heads(attn @ v)
        attn_out = z @ p[f"{lp}.attn.wo"]
        lc.update(q=q, k=k, v=v, attn=attn, z=z)
        x = x + attn_out

        lc["x_mid"] = x
        ln2_out, ln2_cache = _layernorm(x, p[f"{lp}.ln2.gamma"], p[f"{lp}.ln2.beta"])
        u = ln2_out @ p[f"{lp}.ffn.w1"] + p[f"{lp}.ffn.b1"]
        g = _gelu(u)
        ffn_out = g @ p[f"{lp}.ffn.w2"] + p[f"{lp}.ffn.b2"]
        lc.update(ln2_out=ln2_out, ln2_cache=ln2_cache, u=u, g=g)
        x = x + ffn_out
        cache["layers"].append(lc)

    cache["h_final"] = x
    h_norm, lnf_cache = _layernorm(x, p["ln_f.gamma"], p["ln_f.beta"])
    cache["h_norm"], cache["lnf_cache"] = h_norm, lnf_cache
    logits = h_norm @ p["out.w"] + p["out.b"]
    if not np.all(np.isfinite(logits)):
        raise DataError("non-finite logits in forward pass")
    return ForwardTrace(state=state, tokens=tuple(int(t) for t in ids), logits=logits, cache=cache)


def backward(state: ModelState, trace: ForwardTrace, loss_grad: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the scalar loss whose logit-gradient is ``loss_grad``."""
    if trace.state is not state:
        raise DataError("trace was not produced by forward() on this state")
    if loss_grad.shape != trace.logits.shape:
        raise DataError(
            f"loss_grad shape {loss_grad.shape} does not match logits {trace.logits.shape}"
        )
    c = state.config
    p = state.params
    cache = trace.cache
    n = cache["n"]
    grads = zero_grads(c)
    scale = 1.0 / np.sqrt(c.d_head)

    h_norm = cache["h_norm"]
    grads["out.w"] += h_norm.T @ loss_grad
    grads["out.b"] += loss_grad.sum(axis=0)
    dh_norm = loss_grad @ p["out.w"].T
    dx, dgamma, dbeta = _layernorm_backward(dh_norm, p["ln_f.gamma"], cache["lnf_cache"])
    grads["ln_f.gamma"] += dgamma
    grads["ln_f.beta"] += dbeta

    for i in reversed(range(c.n_layers)):
        lp = f"layers.{i}"
        lc = cache["layers"][i]

        # Feed-forward sublayer (residual: dx flows through both branches).
        dg = dx @ p[f"{lp}.ffn.w2"].T
        grads[f"{lp}.ffn.w2"] += lc["g"].T @ dx
        grads[f"{lp}.ffn.b2"] += dx.sum(axis=0)
        du = dg * _gelu_grad(lc["u"])
        grads[f"{lp}.ffn.w1"] += lc["ln2_out"].T @ du
        grads[f"{lp}.ffn.b1"] += du.sum(axis=0)
        dln2_out = du @ p[f"{lp}.ffn.w1"].T
        dx_mid, dgamma, dbeta = _layernorm_backward(
            dln2_out, p[f"{lp}.ln2.gamma"], lc["ln2_cache"]
        )
        grads[f"{lp}.ln2.gamma"] += dgamma
        grads[f"{lp}.ln2.beta"] += dbeta
        dx = dx + dx_mid

        # Attention sublayer.
        dz = dx @ p[f"{lp}.attn.wo"].T
        grads[f"{lp}.attn.wo"] += lc["z"].T @ dx
        dzh = _split_heads(dz, c.n_heads)
        attn, q, k, v = lc["attn"], lc["q"], lc["k"], lc["v"]
        dattn = dzh @ v.transpose(0, 2, 1)
        dv = attn.transpose(0, 2, 1) @ dzh
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dq = (dscores @ k) * scale
        dk = (dscores.transpose(0, 2, 1) @ q) * scale
        ln1_out = lc["ln1_out"]
        dq_f, dk_f, dv_f = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
        grads[f"{lp}.attn.wq"] += ln1_out.T @ dq_f
        grads[f"{lp}.attn.wk"] += ln1_out.T @ dk_f
        grads[f"{lp}.attn.wv"] += ln1_out.T @ dv_f
        dln1_out = (
            dq_f @ p[f"{lp}.attn.wq"].T
            + dk_f @ p[f"{lp}.attn.wk"].T
            + dv_f @ p[f"{lp}.attn.wv"].T
        )
        dx_in, dgamma, dbeta = _layernorm_backward(
            dln1_out, p[f"{lp}.ln1.gamma"], lc["ln1_cache"]
        )
        grads[f"{lp}.ln1.gamma"] += dgamma
        grads[f"{lp}.ln1.beta"] += dbeta
        dx = dx + dx_in

    np.add.at(grads["tok_emb"], cache["ids"], dx)
    grads["pos_emb"][:n] += dx
    return grads


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise log-softmax, numerically stable."""
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


# --- checkpoints ---------------------------------------------------------------


def save_checkpoint(state: ModelState, path: str | Path) -> None:
    """Versioned binary checkpoint: magic line, JSON header, little-endian f64."""
    names = state.param_names()
    header = {
        "config": asdict(state.config),
        "arrays": [{"name": n, "shape": list(state.params[n].shape)} for n in names],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write((CHECKPOINT_MAGIC + "\n").encode("ascii"))
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for name in names:
            fh.write(np.ascontiguousarray(state.params[name], dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> ModelState:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad checkpoint magic {magic!r}")
        try:
            header = json.loads(fh.readline().decode("utf-8"))
            config = ModelConfig(**header["config"])
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}: malformed checkpoint header: {e}") from e
        params: dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise DataError(f"{path}: truncated checkpoint array {spec['name']!r}")
            params[spec["name"]] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    expected = param_shapes(config)
    if set(params) != set(expected) or any(params[k].shape != expected[k] for k in expected):
        raise DataError(f"{path}: checkpoint arrays do not match config shapes")
    return ModelState(config, params)
