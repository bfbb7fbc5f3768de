"""Minimal dense-network engine: forward, exact reverse-mode gradients,
Adam updates, soft target updates, and the bilinear attention block.

Everything is float64 numpy and batch-first: inputs are (batch, dim).
Backward passes return gradients summed over the batch; callers that
want means scale the upstream gradient by 1/batch.
"""
from __future__ import annotations

import json
from typing import Sequence

import numpy as np

_ACTIVATIONS = ("relu", "tanh", "linear")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def stable_softmax(scores: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-shifted softmax: immune to any common offset of the scores."""
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def _flat_views(flat: np.ndarray, shapes: list[tuple[int, ...]]) -> list[np.ndarray]:
    views, offset = [], 0
    for shape in shapes:
        size = int(np.prod(shape))
        views.append(flat[offset:offset + size].reshape(shape))
        offset += size
    return views


class DenseNet:
    """Fully connected network with per-layer activations.

    Parameters live in one flat buffer; params() returns per-layer views
    into it, so optimizers can work on the whole vector at once.
    """

    def __init__(self, sizes: Sequence[int], activations: Sequence[str],
                 rng: np.random.Generator | None = None):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for a in activations:
            if a not in _ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activations = tuple(activations)
        shapes = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            shapes.append((fan_out, fan_in))
            shapes.append((fan_out,))
        self.flat = np.zeros(sum(int(np.prod(s)) for s in shapes))
        self._params = _flat_views(self.flat, shapes)
        self._grad_flat = np.zeros_like(self.flat)
        self._grads = _flat_views(self._grad_flat, shapes)
        if rng is not None:
            for i, fan_in in enumerate(self.sizes[:-1]):
                bound = 1.0 / np.sqrt(fan_in)
                self._params[2 * i][...] = rng.uniform(
                    -bound, bound, size=self._params[2 * i].shape)
                self._params[2 * i + 1][...] = rng.uniform(
                    -bound, bound, size=self._params[2 * i + 1].shape)
        self._cache: list[tuple[np.ndarray, np.ndarray, np.ndarray]] | None = None

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        return self._params

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"expected input (batch, {self.in_dim}), got {x.shape}")
        self._cache = None  # free last call's arrays before allocating anew
        cache = []
        out = x
        for i, act in enumerate(self.activations):
            w, b = self._params[2 * i], self._params[2 * i + 1]
            z = out @ w.T + b
            a = _act(act, z)
            cache.append((out, z, a))
            out = a
        self._cache = cache
        return out

    def backward(self, upstream: np.ndarray,
                 with_param_grads: bool = True) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for all parameters and the input, given dL/d(output).

        Requires a preceding forward call; gradients are summed over the
        batch. The returned list views an internal buffer (also exposed as
        grad_flat) that the next backward call overwrites.
        """
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        d_out = np.asarray(upstream, dtype=float)
        for i in reversed(range(len(self.activations))):
            x, z, a = self._cache[i]
            dz = d_out * _act_grad(self.activations[i], z, a)
            if with_param_grads:
                np.matmul(dz.T, x, out=self._grads[2 * i])
                dz.sum(axis=0, out=self._grads[2 * i + 1])
            d_out = dz @ self._params[2 * i]
        return (self._grads if with_param_grads else []), d_out

    @property
    def grad_flat(self) -> np.ndarray:
        return self._grad_flat

    def copy(self) -> "DenseNet":
        dup = DenseNet(self.sizes, self.activations)
        dup.flat[...] = self.flat
        return dup

    def spec(self) -> dict:
        return {"kind": "dense", "sizes": list(self.sizes),
                "activations": list(self.activations)}

    @classmethod
    def from_spec(cls, spec: dict) -> "DenseNet":
        return cls(spec["sizes"], spec["activations"])


class AttentionBlock:
    """Bilinear softmax attention over the other agents' embeddings.

    Scores are max-shifted before exponentiation, and both the softmax
    normalizer and the value sum are reduced in score-sorted order, so the
    output is bit-identical under any permutation of the other agents.
    """

    def __init__(self, embed_dim: int, key_dim: int, value_dim: int,
                 rng: np.random.Generator | None = None):
        self.embed_dim = embed_dim
        self.key_dim = key_dim
        self.value_dim = value_dim
        shapes = [(key_dim, embed_dim), (key_dim, embed_dim), (value_dim, embed_dim)]
        self.flat = np.zeros(sum(int(np.prod(s)) for s in shapes))
        self._params = _flat_views(self.flat, shapes)
        self._grad_flat = np.zeros_like(self.flat)
        self._grads = _flat_views(self._grad_flat, shapes)
        if rng is not None:
            bound = 1.0 / np.sqrt(embed_dim)
            for p in self._params:
                p[...] = rng.uniform(-bound, bound, size=p.shape)
        self._cache = None

    def params(self) -> list[np.ndarray]:
        return self._params

    def forward(self, embeds: np.ndarray, agent: int) -> tuple[np.ndarray, np.ndarray]:
        """Attention weights over the other agents and the pooled value.

        embeds: (batch, num_agents, embed_dim). Returns (alpha, value) with
        alpha (batch, num_agents - 1) in original other-agent order and
        value (batch, value_dim). A single agent yields an empty alpha and
        a zero value vector.
        """
        w_query, w_key, w_value = self._params
        embeds = np.asarray(embeds, dtype=float)
        self._cache = None  # free last call's arrays before allocating anew
        batch, num_agents, _ = embeds.shape
        others = [j for j in range(num_agents) if j != agent]
        if not others:
            self._cache = (embeds, agent, others, None)
            return np.zeros((batch, 0)), np.zeros((batch, self.value_dim))

        e_own = embeds[:, agent, :]                       # (B, de)
        e_oth = embeds[:, others, :]                      # (B, J, de)
        query = e_own @ w_query.T                         # (B, dk)
        keys = e_oth @ w_key.T                            # (B, J, dk)
        scores = np.einsum("bd,bjd->bj", query, keys)     # (B, J)

        order = np.argsort(scores, axis=1, kind="stable")
        inv = np.argsort(order, axis=1, kind="stable")
        scores_s = np.take_along_axis(scores, order, axis=1)
        e_oth_s = np.take_along_axis(e_oth, order[:, :, None], axis=1)
        keys_s = np.take_along_axis(keys, order[:, :, None], axis=1)

        alpha_s = stable_softmax(scores_s, axis=1)

        pre_v = e_oth_s @ w_value.T                       # (B, J, dv)
        val_s = np.maximum(pre_v, 0.0)
        value = (alpha_s[:, :, None] * val_s).sum(axis=1)

        self._cache = (embeds, agent, others,
                       (order, inv, e_own, e_oth_s, keys_s, query, alpha_s, pre_v, val_s))
        alpha = np.take_along_axis(alpha_s, inv, axis=1)
        return alpha, value

    def backward(self, upstream_value: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for (w_query, w_key, w_value) and all input embeddings."""
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        embeds, agent, others, inner = self._cache
        d_embeds = np.zeros_like(embeds)
        w_query, w_key, w_value = self._params
        grads = self._grads
        if inner is None:
            self._grad_flat[...] = 0.0
            return grads, d_embeds

        order, inv, e_own, e_oth_s, keys_s, query, alpha_s, pre_v, val_s = inner
        g = np.asarray(upstream_value, dtype=float)       # (B, dv)

        d_alpha = np.einsum("bv,bjv->bj", g, val_s)
        d_val = alpha_s[:, :, None] * g[:, None, :]
        d_pre = d_val * (pre_v > 0.0)
        grads[2][...] = np.einsum("bjv,bje->ve", d_pre, e_oth_s)
        d_e_oth_s = np.einsum("bjv,ve->bje", d_pre, w_value)

        inner_prod = (alpha_s * d_alpha).sum(axis=1, keepdims=True)
        d_scores = alpha_s * (d_alpha - inner_prod)

        d_query = np.einsum("bj,bjd->bd", d_scores, keys_s)
        d_keys = d_scores[:, :, None] * query[:, None, :]
        grads[0][...] = d_query.T @ e_own
        d_e_own = d_query @ w_query
        grads[1][...] = np.einsum("bjd,bje->de", d_keys, e_oth_s)
        d_e_oth_s += np.einsum("bjd,de->bje", d_keys, w_key)

        d_e_oth = np.take_along_axis(d_e_oth_s, inv[:, :, None], axis=1)
        d_embeds[:, agent, :] = d_e_own
        d_embeds[:, others, :] = d_e_oth
        return grads, d_embeds

    @property
    def grad_flat(self) -> np.ndarray:
        return self._grad_flat

    def copy(self) -> "AttentionBlock":
        dup = AttentionBlock(self.embed_dim, self.key_dim, self.value_dim)
        dup.flat[...] = self.flat
        return dup

    def spec(self) -> dict:
        return {"kind": "attention", "embed_dim": self.embed_dim,
                "key_dim": self.key_dim, "value_dim": self.value_dim}

    @classmethod
    def from_spec(cls, spec: dict) -> "AttentionBlock":
        return cls(spec["embed_dim"], spec["key_dim"], spec["value_dim"])


class Adam:
    """Adaptive-moment optimizer over a parameter list."""

    def __init__(self, params: Sequence[np.ndarray], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / b1t) / (np.sqrt(v / b2t) + self.eps)


def forward_stack(nets: Sequence["DenseNet"], x: np.ndarray) -> np.ndarray:
    """Run same-architecture nets side by side: x (nets, batch, in_dim).

    No caches are kept; use for inference only (e.g. target policies).
    """
    out = np.asarray(x, dtype=float)
    first = nets[0]
    for layer, act in enumerate(first.activations):
        w = np.stack([n.params()[2 * layer] for n in nets])
        b = np.stack([n.params()[2 * layer + 1] for n in nets])
        out = np.matmul(out, w.transpose(0, 2, 1)) + b[:, None, :]
        out = _act(act, out)
    return out


def soft_update(target_params: Sequence[np.ndarray],
                online_params: Sequence[np.ndarray], rate: float) -> None:
    """Blend online weights into the target copy, in place."""
    for tgt, src in zip(target_params, online_params):
        if tgt.shape != src.shape:
            raise ValueError("target/online parameter shapes differ")
        tgt *= 1.0 - rate
        tgt += rate * src


def save_components(path, components: dict[str, object], meta: dict,
                    extra_arrays: dict[str, np.ndarray] | None = None) -> None:
    """Serialize named components (DenseNet/AttentionBlock) plus metadata.

    Layout: an .npz archive with one row-major float64 array per parameter
    under '<name>.<index>', a JSON header under 'meta' that records each
    component's architecture, and optional extra arrays (optimizer moments,
    replay contents) under their own keys.
    """
    arrays: dict[str, np.ndarray] = dict(extra_arrays or {})
    header = dict(meta)
    header["components"] = {}
    for name, comp in components.items():
        header["components"][name] = comp.spec()
        for i, p in enumerate(comp.params()):
            arrays[f"{name}.{i}"] = p
    arrays["meta"] = np.frombuffer(json.dumps(header, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **arrays)


def load_components(path, with_arrays: bool = False):
    """Rebuild components saved by save_components.

    Returns (components, meta) or (components, meta, extra_arrays).
    """
    with np.load(path) as data:
        header = json.loads(bytes(data["meta"].tobytes()).decode())
        components: dict[str, object] = {}
        used = {"meta"}
        for name, spec in header["components"].items():
            comp = DenseNet.from_spec(spec) if spec["kind"] == "dense" \
                else AttentionBlock.from_spec(spec)
            for i, p in enumerate(comp.params()):
                p[...] = data[f"{name}.{i}"]
                used.add(f"{name}.{i}")
            components[name] = comp
        extra = {k: data[k] for k in data.files if k not in used}
    header.pop("components")
    if with_arrays:
        return components, header, extra
    return components, header
