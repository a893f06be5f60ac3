"""Embedding tables, Adam updates, gradient checking and checkpoint I/O."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np


class TrainingFault(FloatingPointError):
    """Raised when parameters, gradients or losses become non-finite."""


@dataclass
class EmbeddingState:
    params: dict[str, np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    step: int = 0
    m1: dict[str, np.ndarray] = field(default_factory=dict)
    m2: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        for name, p in self.params.items():
            if p.ndim != 2 or p.shape[1] <= 0:
                raise ValueError(f"parameter {name!r} must be a 2-D table with d > 0")
            self.m1.setdefault(name, np.zeros_like(p))
            self.m2.setdefault(name, np.zeros_like(p))

    @property
    def P0(self) -> np.ndarray:
        return self.params["user"]

    @property
    def Q0(self) -> np.ndarray:
        return self.params["item"]

    @property
    def Q_enc(self) -> np.ndarray:
        """Item table fed to the user encoder; the backbone item table unless a separate one exists."""
        return self.params.get("item_enc", self.params["item"])

    @property
    def dim(self) -> int:
        return self.P0.shape[1]

    def copy(self) -> "EmbeddingState":
        return EmbeddingState(
            {k: v.copy() for k, v in self.params.items()},
            self.lr, self.beta1, self.beta2, self.eps, self.weight_decay, self.step,
            {k: v.copy() for k, v in self.m1.items()},
            {k: v.copy() for k, v in self.m2.items()},
        )

    def check_finite(self) -> None:
        for name, p in self.params.items():
            if not np.all(np.isfinite(p)):
                raise TrainingFault(f"non-finite entries in parameter {name!r} at step {self.step}")


def init_embeddings(m: int, n: int, d: int, seed: int = 0, *, separate_encoder: bool = False,
                    rng: np.random.Generator | None = None, dtype=np.float64, **hyper) -> EmbeddingState:
    """Uniform(-1/sqrt(d), 1/sqrt(d)) user and item tables."""
    if min(m, n, d) <= 0:
        raise ValueError("m, n and d must be positive")
    rng = rng if rng is not None else np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(d)
    params = {
        "user": rng.uniform(-bound, bound, size=(m, d)).astype(dtype),
        "item": rng.uniform(-bound, bound, size=(n, d)).astype(dtype),
    }
    if separate_encoder:
        params["item_enc"] = rng.uniform(-bound, bound, size=(n, d)).astype(dtype)
    return EmbeddingState(params, **hyper)


def adam_step(state: EmbeddingState, grads: dict[str, np.ndarray]) -> EmbeddingState:
    """One bias-corrected Adam update in place; L2 enters as ``grad + weight_decay * param``.

    Parameters without an entry in ``grads`` still receive the L2 term.
    """
    for name, g in grads.items():
        if name not in state.params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if g.shape != state.params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {state.params[name].shape} for {name!r}")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in state.params.items():
        g = grads.get(name)
        g = state.weight_decay * p if g is None else g + state.weight_decay * p
        if not np.all(np.isfinite(g)):
            raise TrainingFault(f"non-finite gradient for {name!r} at step {t}")
        m1, m2 = state.m1[name], state.m2[name]
        m1 *= b1
        m1 += (1.0 - b1) * g
        m2 *= b2
        m2 += (1.0 - b2) * g * g
        p -= state.lr * (m1 / c1) / (np.sqrt(m2 / c2) + state.eps)
    state.check_finite()
    return state


def finite_diff_check(loss, state: EmbeddingState, grads: dict[str, np.ndarray], probe_count: int = 20,
                      h: float = 1e-5, seed: int = 0, floor: float = 1e-8) -> float:
    """Max relative error between central differences and ``grads`` on random coordinates.

    ``loss`` maps an EmbeddingState to a float; the state is perturbed in place
    and restored after each probe. The error is ``|fd - an| / max(floor, |fd| + |an|)``,
    so coordinates whose true gradient vanishes are judged on an absolute scale.
    """
    rng = np.random.default_rng(seed)
    names = sorted(state.params)
    sizes = np.array([state.params[k].size for k in names])
    worst = 0.0
    for _ in range(probe_count):
        k = int(rng.choice(len(names), p=sizes / sizes.sum()))
        name = names[k]
        flat = state.params[name].reshape(-1)
        idx = int(rng.integers(flat.size))
        orig = flat[idx]
        flat[idx] = orig + h
        up = loss(state)
        flat[idx] = orig - h
        down = loss(state)
        flat[idx] = orig
        g_fd = (up - down) / (2.0 * h)
        g_an = float(grads[name].reshape(-1)[idx]) if name in grads else 0.0
        err = abs(g_fd - g_an) / max(floor, abs(g_fd) + abs(g_an))
        worst = max(worst, err)
    return worst


_MAGIC = b"SHRCKPT1"
_HYPER = ("lr", "beta1", "beta2", "eps", "weight_decay")


def save_checkpoint(state: EmbeddingState, path) -> None:
    """Flat little-endian dump: header, then (name, shape, float64 row-major data) blocks."""
    blocks = []
    for name in sorted(state.params):
        blocks += [("param/" + name, state.params[name]), ("m1/" + name, state.m1[name]),
                   ("m2/" + name, state.m2[name])]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<q", state.step))
        fh.write(struct.pack("<5d", *(getattr(state, k) for k in _HYPER)))
        fh.write(struct.pack("<q", len(blocks)))
        for name, arr in blocks:
            raw = name.encode()
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> EmbeddingState:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:8] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    off = 8
    (step,) = struct.unpack_from("<q", buf, off)
    off += 8
    hyper = struct.unpack_from("<5d", buf, off)
    off += 40
    (count,) = struct.unpack_from("<q", buf, off)
    off += 8
    arrays: dict[str, dict[str, np.ndarray]] = {"param": {}, "m1": {}, "m2": {}}
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", buf, off)
        off += 2
        name = buf[off:off + ln].decode()
        off += ln
        (ndim,) = struct.unpack_from("<B", buf, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}q", buf, off)
        off += 8 * ndim
        size = int(np.prod(shape))
        arr = np.frombuffer(buf, dtype="<f8", count=size, offset=off).reshape(shape).astype(np.float64)
        off += 8 * size
        kind, key = name.split("/", 1)
        arrays[kind][key] = arr
    return EmbeddingState(arrays["param"], *hyper, step=step, m1=arrays["m1"], m2=arrays["m2"])
