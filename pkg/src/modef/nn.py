"""Small fully connected networks with hand-rolled reverse-mode gradients.

A shared tanh trunk feeds a categorical policy head and (optionally) one
scalar value head per objective. Parameters live in one flat float64 vector
with a layout descriptor, which keeps optimizer state trivial, makes
checkpoints a raw little-endian dump, and lets the finite-difference tests
perturb single coordinates.

Loss functions are supplied by the trainers as callables that map
(logits, values) to (loss, dloss/dlogits, dloss/dvalues); ``grad`` chains
them through the trunk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rngutil
from .errors import NumericError


@dataclass(frozen=True)
class NetSpec:
    input_dim: int
    policy_out: int
    value_heads: int = 0
    hidden_dims: tuple[int, ...] = (64, 64)
    activation: str = "tanh"

    def __post_init__(self):
        dims = (self.input_dim, self.policy_out, *self.hidden_dims)
        if any(d < 1 for d in dims) or self.value_heads < 0:
            raise ValueError(f"invalid network spec {self}")
        if self.activation != "tanh":
            raise ValueError(f"unsupported activation {self.activation!r}")

    def layer_shapes(self) -> list[tuple[str, tuple[int, ...]]]:
        shapes: list[tuple[str, tuple[int, ...]]] = []
        prev = self.input_dim
        for i, h in enumerate(self.hidden_dims):
            shapes.append((f"w{i}", (prev, h)))
            shapes.append((f"b{i}", (h,)))
            prev = h
        shapes.append(("wp", (prev, self.policy_out)))
        shapes.append(("bp", (self.policy_out,)))
        if self.value_heads > 0:
            shapes.append(("wv", (prev, self.value_heads)))
            shapes.append(("bv", (self.value_heads,)))
        return shapes

    @property
    def n_params(self) -> int:
        return sum(int(np.prod(s)) for _, s in self.layer_shapes())

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "policy_out": self.policy_out,
            "value_heads": self.value_heads,
            "hidden_dims": list(self.hidden_dims),
            "activation": self.activation,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetSpec":
        return NetSpec(
            input_dim=int(d["input_dim"]),
            policy_out=int(d["policy_out"]),
            value_heads=int(d["value_heads"]),
            hidden_dims=tuple(int(h) for h in d["hidden_dims"]),
            activation=d.get("activation", "tanh"),
        )


class Params:
    """Flat parameter vector plus named views into it."""

    def __init__(self, spec: NetSpec, vec: np.ndarray | None = None):
        self.spec = spec
        if vec is None:
            vec = np.zeros(spec.n_params, dtype=np.float64)
        vec = np.ascontiguousarray(vec, dtype=np.float64)
        if vec.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {vec.shape}")
        self.vec = vec
        self.views: dict[str, np.ndarray] = {}
        off = 0
        for name, shape in spec.layer_shapes():
            size = int(np.prod(shape))
            self.views[name] = self.vec[off : off + size].reshape(shape)
            off += size

    def copy(self) -> "Params":
        return Params(self.spec, self.vec.copy())

    def __getitem__(self, name: str) -> np.ndarray:
        return self.views[name]


def _orthogonal(rng: np.random.Generator, shape: tuple[int, int], gain: float) -> np.ndarray:
    rows, cols = shape
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q *= np.sign(np.diag(r))
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init(spec: NetSpec, seed: int) -> Params:
    """Orthogonal weights, zero biases; policy head scaled to 0.01."""
    rng = rngutil.rng_from(seed, rngutil.INIT)
    p = Params(spec)
    n_hidden = len(spec.hidden_dims)
    for i in range(n_hidden):
        p[f"w{i}"][...] = _orthogonal(rng, p[f"w{i}"].shape, np.sqrt(2.0))
    p["wp"][...] = _orthogonal(rng, p["wp"].shape, 0.01)
    if spec.value_heads > 0:
        p["wv"][...] = _orthogonal(rng, p["wv"].shape, 1.0)
    return p


def _trunk(p: Params, x: np.ndarray) -> list[np.ndarray]:
    acts = [x]
    h = x
    for i in range(len(p.spec.hidden_dims)):
        h = np.tanh(h @ p[f"w{i}"] + p[f"b{i}"])
        acts.append(h)
    return acts


def forward(p: Params, x: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
    """Logits and per-objective values for a single input or a batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.shape[1] != p.spec.input_dim:
        raise ValueError(f"input dim {xb.shape[1]} != spec {p.spec.input_dim}")
    h = _trunk(p, xb)[-1]
    logits = h @ p["wp"] + p["bp"]
    values = h @ p["wv"] + p["bv"] if p.spec.value_heads > 0 else None
    if single:
        logits = logits[0]
        values = None if values is None else values[0]
    return logits, values


def grad(p: Params, x: np.ndarray, loss_head) -> tuple[float, np.ndarray]:
    """Loss and flat gradient for a batch under a trainer-supplied loss head.

    ``loss_head(logits, values) -> (loss, dlogits, dvalues)`` carries the
    head-level derivative; this routine backpropagates it through the trunk.
    """
    xb = np.asarray(x, dtype=np.float64)
    if xb.ndim != 2 or xb.shape[0] == 0:
        raise ValueError("grad expects a non-empty [N, input_dim] batch")
    acts = _trunk(p, xb)
    h = acts[-1]
    logits = h @ p["wp"] + p["bp"]
    values = h @ p["wv"] + p["bv"] if p.spec.value_heads > 0 else None

    loss, dlogits, dvalues = loss_head(logits, values)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss!r} from {loss_head!r}")

    g = Params(p.spec)  # zero-filled gradient accumulator
    g["wp"][...] = h.T @ dlogits
    g["bp"][...] = dlogits.sum(axis=0)
    dh = dlogits @ p["wp"].T
    if p.spec.value_heads > 0 and dvalues is not None:
        g["wv"][...] = h.T @ dvalues
        g["bv"][...] = dvalues.sum(axis=0)
        dh = dh + dvalues @ p["wv"].T
    for i in range(len(p.spec.hidden_dims) - 1, -1, -1):
        dpre = dh * (1.0 - acts[i + 1] ** 2)
        g[f"w{i}"][...] = acts[i].T @ dpre
        g[f"b{i}"][...] = dpre.sum(axis=0)
        dh = dpre @ p[f"w{i}"].T
    return float(loss), g.vec


# --- softmax utilities shared by the trainers --------------------------------

def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def sample_categorical(rng: np.random.Generator, logits: np.ndarray) -> np.ndarray:
    """One draw per row, via inverse CDF on a single uniform per row."""
    probs = softmax(np.atleast_2d(logits))
    cdf = probs.cumsum(axis=1)
    u = rng.random(probs.shape[0])
    return np.minimum((u[:, None] > cdf).sum(axis=1), probs.shape[1] - 1)


# --- optimizer ----------------------------------------------------------------

@dataclass
class OptState:
    learning_rate: float
    max_grad_norm: float = 0.5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    @staticmethod
    def for_params(p: Params, learning_rate: float, max_grad_norm: float = 0.5) -> "OptState":
        return OptState(
            learning_rate=learning_rate,
            max_grad_norm=max_grad_norm,
            m=np.zeros_like(p.vec),
            v=np.zeros_like(p.vec),
        )


def opt_step(p: Params, g: np.ndarray, s: OptState) -> None:
    """Global-norm clip then Adam; mutates params and optimizer state."""
    if g.shape != p.vec.shape:
        raise ValueError(f"gradient shape {g.shape} != params {p.vec.shape}")
    norm = float(np.sqrt((g * g).sum()))
    if s.max_grad_norm > 0 and norm > s.max_grad_norm:
        g = g * (s.max_grad_norm / norm)
    s.step += 1
    s.m = s.beta1 * s.m + (1.0 - s.beta1) * g
    s.v = s.beta2 * s.v + (1.0 - s.beta2) * (g * g)
    mhat = s.m / (1.0 - s.beta1**s.step)
    vhat = s.v / (1.0 - s.beta2**s.step)
    p.vec -= s.learning_rate * mhat / (np.sqrt(vhat) + s.eps)


# --- checkpoints --------------------------------------------------------------

@dataclass
class PolicyCheckpoint:
    spec: NetSpec
    params: np.ndarray
    trainer: str               # "moppo" | "pcn"
    n_obj: int
    seed: int
    weights: list[float] | None = None    # moppo scalarization weights
    scaling: list[float] | None = None    # pcn conditioning scale
    config_hash: str = ""
    extra: dict = field(default_factory=dict)

    def to_params(self) -> Params:
        return Params(self.spec, self.params.copy())


def save_checkpoint(ckpt: PolicyCheckpoint, path_base) -> tuple[Path, Path]:
    base = Path(path_base)
    meta = {
        "net_spec": ckpt.spec.to_dict(),
        "trainer": ckpt.trainer,
        "n_obj": ckpt.n_obj,
        "seed": ckpt.seed,
        "weights": ckpt.weights,
        "scaling": ckpt.scaling,
        "config_hash": ckpt.config_hash,
        "extra": ckpt.extra,
    }
    meta_path = base.parent / (base.name + ".meta.json")
    params_path = base.parent / (base.name + ".params.f64le")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    params_path.write_bytes(np.ascontiguousarray(ckpt.params, dtype="<f8").tobytes())
    return meta_path, params_path


def load_checkpoint(path_base) -> PolicyCheckpoint:
    base = Path(path_base)
    if base.name.endswith(".meta.json"):
        base = base.with_name(base.name[: -len(".meta.json")])
    elif base.name.endswith(".params.f64le"):
        base = base.with_name(base.name[: -len(".params.f64le")])
    meta = json.loads((base.parent / (base.name + ".meta.json")).read_text(encoding="utf-8"))
    spec = NetSpec.from_dict(meta["net_spec"])
    raw = (base.parent / (base.name + ".params.f64le")).read_bytes()
    params = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if params.shape != (spec.n_params,):
        raise ValueError(f"checkpoint {base}: expected {spec.n_params} params, got {params.size}")
    return PolicyCheckpoint(
        spec=spec,
        params=params,
        trainer=meta["trainer"],
        n_obj=int(meta["n_obj"]),
        seed=int(meta["seed"]),
        weights=meta.get("weights"),
        scaling=meta.get("scaling"),
        config_hash=meta.get("config_hash", ""),
        extra=meta.get("extra", {}),
    )
