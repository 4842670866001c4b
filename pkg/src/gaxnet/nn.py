"""Dense float64 tensors with reverse-mode differentiation.

Small by design: exactly the fused operations the actor, mixer, and
training loop need, each with an analytic backward pass. Graphs are
taped per forward call and freed after `backward`. No broadcasting
beyond the shapes the ops declare, no dtype but float64.

Gradient recording is controlled by `no_grad()`; inside the context
every op returns a detached tensor, which keeps target-network and
greedy-execution forwards off the tape.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "ParamStore",
    "ShapeError",
    "NumericError",
    "no_grad",
    "tensor",
    "affine",
    "affine_stack",
    "gru_cell",
    "gru_cell_stack",
    "scaled_dot",
    "row_dot",
    "softmax",
    "weighted_sum",
    "scale_rows",
    "dot_rows",
    "concat",
    "reshape",
    "transpose_01",
    "gather_columns",
    "gather_actions",
    "gather_actions_stack",
    "add",
    "mul",
    "tanh",
    "sigmoid",
    "elu",
    "absolute",
    "total",
    "sum_squared_error",
]


class ShapeError(ValueError):
    """Operand shapes do not match an op's contract."""


class NumericError(RuntimeError):
    """A non-finite value appeared in an op output or a gradient."""


_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable taping for the enclosed forward passes."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _as_array(value) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    return arr


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")


class Tensor:
    """A float64 array plus an optional place on the current tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        parents: tuple["Tensor", ...] = (),
        backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
    ):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:  # debugging aid only
        return f"Tensor(shape={self.data.shape}, grad={self.requires_grad})"

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every leaf."""
        if self.data.size != 1:
            raise ShapeError("backward() needs a scalar loss")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            if node._backward is None or node.grad is None:
                continue
            parent_grads = node._backward(node.grad)
            for parent, g in zip(node._parents, parent_grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += g
            # free the tape as we go
            node._backward = None
            node._parents = ()
            if node is not self:
                node.grad = None


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative DFS: episode-long graphs overflow the recursion limit.
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    order.reverse()
    return order


def tensor(data) -> Tensor:
    """Wrap plain data as a constant (non-differentiable) tensor."""
    return Tensor(data)


def _make(
    data: np.ndarray,
    parents: tuple[Tensor, ...],
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]],
    op: str,
) -> Tensor:
    _check_finite(data, op)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=parents, backward=backward)
    return Tensor(data)


# ---------------------------------------------------------------------------
# fused ops


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b for x:(B,K), w:(K,M), b:(M,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError("affine expects x:(B,K), w:(K,M), b:(M,)")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"affine shape mismatch: x{x.data.shape} w{w.data.shape} b{b.data.shape}"
        )
    out = x.data @ w.data + b.data

    def backward(g: np.ndarray):
        return g @ w.data.T, x.data.T @ g, g.sum(axis=0)

    return _make(out, (x, w, b), backward, "affine")


def affine_stack(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Per-slice affine: y[a] = x[a] @ w[a] + b[a].

    x:(A,M,K), w:(A,K,O), b:(A,O). One call covers a whole team of
    same-shaped, independently parameterized layers.
    """
    if x.data.ndim != 3 or w.data.ndim != 3 or b.data.ndim != 2:
        raise ShapeError("affine_stack expects x:(A,M,K), w:(A,K,O), b:(A,O)")
    if (x.data.shape[0] != w.data.shape[0] or x.data.shape[2] != w.data.shape[1]
            or b.data.shape != (w.data.shape[0], w.data.shape[2])):
        raise ShapeError(
            f"affine_stack mismatch: x{x.data.shape} w{w.data.shape} "
            f"b{b.data.shape}"
        )
    out = x.data @ w.data + b.data[:, None, :]

    def backward(g: np.ndarray):
        return (
            g @ w.data.swapaxes(1, 2),
            x.data.swapaxes(1, 2) @ g,
            g.sum(axis=1),
        )

    return _make(out, (x, w, b), backward, "affine_stack")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def backward(g: np.ndarray):
        return (g * (1.0 - out * out),)

    return _make(out, (x,), backward, "tanh")


def _sigmoid_array(d: np.ndarray) -> np.ndarray:
    # numerically stable split by sign
    return np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.clip(d, 0, None))),
                    np.exp(np.clip(d, None, 0))
                    / (1.0 + np.exp(np.clip(d, None, 0))))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid_array(x.data)

    def backward(g: np.ndarray):
        return (g * out * (1.0 - out),)

    return _make(out, (x,), backward, "sigmoid")


def elu(x: Tensor) -> Tensor:
    d = x.data
    neg = np.exp(np.clip(d, None, 0.0)) - 1.0
    out = np.where(d > 0.0, d, neg)

    def backward(g: np.ndarray):
        return (g * np.where(d > 0.0, 1.0, neg + 1.0),)

    return _make(out, (x,), backward, "elu")


def absolute(x: Tensor) -> Tensor:
    out = np.abs(x.data)

    def backward(g: np.ndarray):
        return (g * np.sign(x.data),)

    return _make(out, (x,), backward, "absolute")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data

    def backward(g: np.ndarray):
        return g, g

    return _make(out, (a, b), backward, "add")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data * b.data

    def backward(g: np.ndarray):
        return g * b.data, g * a.data

    return _make(out, (a, b), backward, "mul")


def concat(parts: Sequence[Tensor]) -> Tensor:
    """Concatenate tensors along the last axis (leading dims must agree)."""
    if not parts:
        raise ShapeError("concat of nothing")
    lead = parts[0].data.shape[:-1]
    if any(p.data.shape[:-1] != lead for p in parts):
        raise ShapeError("concat needs matching leading dimensions")
    widths = [p.data.shape[-1] for p in parts]
    out = np.concatenate([p.data for p in parts], axis=-1)
    edges = np.cumsum([0] + widths)

    def backward(g: np.ndarray):
        return tuple(g[..., edges[i]: edges[i + 1]] for i in range(len(widths)))

    return _make(out, tuple(parts), backward, "concat")


def transpose_01(x: Tensor) -> Tensor:
    """Swap the first two axes."""
    if x.data.ndim < 2:
        raise ShapeError("transpose_01 needs at least two axes")
    out = np.ascontiguousarray(x.data.swapaxes(0, 1))

    def backward(g: np.ndarray):
        return (g.swapaxes(0, 1),)

    return _make(out, (x,), backward, "transpose_01")


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = x.data.reshape(shape)
    orig = x.data.shape

    def backward(g: np.ndarray):
        return (g.reshape(orig),)

    return _make(out, (x,), backward, "reshape")


def row_dot(q: Tensor, keys: Tensor, scale: float = 1.0) -> Tensor:
    """Scores s[b,n] = q[b]·keys[b,n] / scale for q:(B,J), keys:(B,N,J)."""
    if q.data.ndim != 2 or keys.data.ndim != 3:
        raise ShapeError("row_dot expects q:(B,J), keys:(B,N,J)")
    if q.data.shape[0] != keys.data.shape[0] or q.data.shape[1] != keys.data.shape[2]:
        raise ShapeError(f"row_dot mismatch: q{q.data.shape} keys{keys.data.shape}")
    inv = 1.0 / scale
    out = np.einsum("bj,bnj->bn", q.data, keys.data) * inv

    def backward(g: np.ndarray):
        gs = g * inv
        return (
            np.einsum("bn,bnj->bj", gs, keys.data),
            np.einsum("bn,bj->bnj", gs, q.data),
        )

    return _make(out, (q, keys), backward, "row_dot")


def softmax(x: Tensor) -> Tensor:
    """Row-wise softmax over the last axis of a 2-D tensor."""
    if x.data.ndim != 2:
        raise ShapeError("softmax expects a 2-D tensor")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=1, keepdims=True)

    def backward(g: np.ndarray):
        inner = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - inner),)

    return _make(out, (x,), backward, "softmax")


def weighted_sum(w: Tensor, values: Tensor) -> Tensor:
    """mixed[b] = sum_n w[b,n] * values[b,n,:] for w:(B,N), values:(B,N,J)."""
    if w.data.ndim != 2 or values.data.ndim != 3:
        raise ShapeError("weighted_sum expects w:(B,N), values:(B,N,J)")
    if w.data.shape != values.data.shape[:2]:
        raise ShapeError(
            f"weighted_sum mismatch: w{w.data.shape} values{values.data.shape}"
        )
    out = np.einsum("bn,bnj->bj", w.data, values.data)

    def backward(g: np.ndarray):
        return (
            np.einsum("bj,bnj->bn", g, values.data),
            np.einsum("bn,bj->bnj", w.data, g),
        )

    return _make(out, (w, values), backward, "weighted_sum")


def scale_rows(values: Tensor, w: Tensor) -> Tensor:
    """out[b,n,:] = w[b,n] * values[b,n,:]."""
    if w.data.ndim != 2 or values.data.ndim != 3:
        raise ShapeError("scale_rows expects values:(B,N,J), w:(B,N)")
    if w.data.shape != values.data.shape[:2]:
        raise ShapeError(
            f"scale_rows mismatch: values{values.data.shape} w{w.data.shape}"
        )
    out = values.data * w.data[:, :, None]

    def backward(g: np.ndarray):
        return g * w.data[:, :, None], (g * values.data).sum(axis=2)

    return _make(out, (values, w), backward, "scale_rows")


def dot_rows(a: Tensor, b: Tensor) -> Tensor:
    """out[b] = a[b]·b[b] for two (B,J) tensors."""
    if a.data.shape != b.data.shape or a.data.ndim != 2:
        raise ShapeError(f"dot_rows mismatch: {a.data.shape} vs {b.data.shape}")
    out = (a.data * b.data).sum(axis=1)

    def backward(g: np.ndarray):
        return g[:, None] * b.data, g[:, None] * a.data

    return _make(out, (a, b), backward, "dot_rows")


def gather_columns(x: Tensor, index: np.ndarray) -> Tensor:
    """out[:, i] = x[:, index[i]] for a fixed integer index vector."""
    if x.data.ndim != 2:
        raise ShapeError("gather_columns expects a 2-D tensor")
    idx = np.asarray(index, dtype=np.intp)
    out = x.data[:, idx]

    def backward(g: np.ndarray):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (slice(None), idx), g)
        return (gx,)

    return _make(out, (x,), backward, "gather_columns")


def gather_actions(q: Tensor, actions: np.ndarray) -> Tensor:
    """out[b] = q[b, actions[b]] for q:(B,A)."""
    if q.data.ndim != 2:
        raise ShapeError("gather_actions expects q:(B,A)")
    act = np.asarray(actions, dtype=np.intp)
    if act.shape != (q.data.shape[0],):
        raise ShapeError("one action per batch row required")
    rows = np.arange(q.data.shape[0])
    out = q.data[rows, act]

    def backward(g: np.ndarray):
        gq = np.zeros_like(q.data)
        gq[rows, act] = g
        return (gq,)

    return _make(out, (q,), backward, "gather_actions")


def total(x: Tensor) -> Tensor:
    """Scalar sum of all entries."""
    out = np.asarray(x.data.sum())

    def backward(g: np.ndarray):
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return _make(out, (x,), backward, "total")


def sum_squared_error(pred: Tensor, target: np.ndarray) -> Tensor:
    """Scalar sum of squared residuals against a constant target."""
    t = np.asarray(target, dtype=np.float64)
    if pred.data.shape != t.shape:
        raise ShapeError(f"target shape {t.shape} != prediction {pred.data.shape}")
    resid = pred.data - t
    out = np.asarray((resid * resid).sum())

    def backward(g: np.ndarray):
        return (2.0 * g * resid,)

    return _make(out, (pred,), backward, "sum_squared_error")


# GRU cell parameter order: update gate, reset gate, candidate.
_GRU_NAMES = ("wz", "uz", "bz", "wr", "ur", "br", "wc", "uc", "bc")


def gru_cell(x: Tensor, h: Tensor, p: dict[str, Tensor]) -> Tensor:
    """One gated-recurrent step: h' = z*h + (1-z)*tanh-candidate.

    x:(B,K), h:(B,H); p maps the nine names wz,uz,bz,wr,ur,br,wc,uc,bc
    to tensors shaped (K,H), (H,H), (H,) respectively.
    """
    if x.data.ndim != 2 or h.data.ndim != 2 or x.data.shape[0] != h.data.shape[0]:
        raise ShapeError("gru_cell expects batched x:(B,K), h:(B,H)")
    wz, uz, bz = p["wz"], p["uz"], p["bz"]
    wr, ur, br = p["wr"], p["ur"], p["br"]
    wc, uc, bc = p["wc"], p["uc"], p["bc"]
    if x.data.shape[1] != wz.data.shape[0] or h.data.shape[1] != uz.data.shape[0]:
        raise ShapeError(
            f"gru_cell mismatch: x{x.data.shape} h{h.data.shape} wz{wz.data.shape}"
        )

    az = x.data @ wz.data + h.data @ uz.data + bz.data
    ar = x.data @ wr.data + h.data @ ur.data + br.data
    z = _sigmoid_array(az)
    r = _sigmoid_array(ar)
    rh = r * h.data
    ac = x.data @ wc.data + rh @ uc.data + bc.data
    c = np.tanh(ac)
    out = z * h.data + (1.0 - z) * c

    def backward(g: np.ndarray):
        dc = g * (1.0 - z)
        dz = g * (h.data - c)
        dh = g * z
        dac = dc * (1.0 - c * c)
        drh = dac @ uc.data.T
        dr = drh * h.data
        dh = dh + drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        dx = daz @ wz.data.T + dar @ wr.data.T + dac @ wc.data.T
        dh = dh + daz @ uz.data.T + dar @ ur.data.T
        return (
            dx,
            dh,
            x.data.T @ daz,
            h.data.T @ daz,
            daz.sum(axis=0),
            x.data.T @ dar,
            h.data.T @ dar,
            dar.sum(axis=0),
            x.data.T @ dac,
            rh.T @ dac,
            dac.sum(axis=0),
        )

    parents = (x, h, wz, uz, bz, wr, ur, br, wc, uc, bc)
    return _make(out, parents, backward, "gru_cell")


def gru_cell_stack(x: Tensor, h: Tensor, p: dict[str, Tensor]) -> Tensor:
    """Per-slice gated-recurrent step: one cell per leading index.

    x:(A,M,K), h:(A,M,H); parameters shaped (A,K,H), (A,H,H), (A,H).
    Same algebra as gru_cell, batched over the first axis.
    """
    if x.data.ndim != 3 or h.data.ndim != 3 or x.data.shape[:2] != h.data.shape[:2]:
        raise ShapeError("gru_cell_stack expects x:(A,M,K), h:(A,M,H)")
    wz, uz, bz = p["wz"], p["uz"], p["bz"]
    wr, ur, br = p["wr"], p["ur"], p["br"]
    wc, uc, bc = p["wc"], p["uc"], p["bc"]
    if wz.data.ndim != 3 or x.data.shape[2] != wz.data.shape[1]:
        raise ShapeError(
            f"gru_cell_stack mismatch: x{x.data.shape} wz{wz.data.shape}"
        )

    az = x.data @ wz.data + h.data @ uz.data + bz.data[:, None, :]
    ar = x.data @ wr.data + h.data @ ur.data + br.data[:, None, :]
    z = _sigmoid_array(az)
    r = _sigmoid_array(ar)
    rh = r * h.data
    ac = x.data @ wc.data + rh @ uc.data + bc.data[:, None, :]
    c = np.tanh(ac)
    out = z * h.data + (1.0 - z) * c

    def backward(g: np.ndarray):
        dc = g * (1.0 - z)
        dz = g * (h.data - c)
        dh = g * z
        dac = dc * (1.0 - c * c)
        drh = dac @ uc.data.swapaxes(1, 2)
        dr = drh * h.data
        dh = dh + drh * r
        daz = dz * z * (1.0 - z)
        dar = dr * r * (1.0 - r)
        xt = x.data.swapaxes(1, 2)
        ht = h.data.swapaxes(1, 2)
        dx = (daz @ wz.data.swapaxes(1, 2) + dar @ wr.data.swapaxes(1, 2)
              + dac @ wc.data.swapaxes(1, 2))
        dh = dh + daz @ uz.data.swapaxes(1, 2) + dar @ ur.data.swapaxes(1, 2)
        return (
            dx,
            dh,
            xt @ daz,
            ht @ daz,
            daz.sum(axis=1),
            xt @ dar,
            ht @ dar,
            dar.sum(axis=1),
            xt @ dac,
            rh.swapaxes(1, 2) @ dac,
            dac.sum(axis=1),
        )

    parents = (x, h, wz, uz, bz, wr, ur, br, wc, uc, bc)
    return _make(out, parents, backward, "gru_cell_stack")


def gather_actions_stack(q: Tensor, actions: np.ndarray) -> Tensor:
    """out[a,b] = q[a, b, actions[a,b]] for q:(A,B,C)."""
    if q.data.ndim != 3:
        raise ShapeError("gather_actions_stack expects q:(A,B,C)")
    act = np.asarray(actions, dtype=np.intp)
    if act.shape != q.data.shape[:2]:
        raise ShapeError("one action per (slice, batch) entry required")
    out = np.take_along_axis(q.data, act[..., None], axis=2)[..., 0]

    def backward(g: np.ndarray):
        gq = np.zeros_like(q.data)
        np.put_along_axis(gq, act[..., None], g[..., None], axis=2)
        return (gq,)

    return _make(out, (q,), backward, "gather_actions_stack")


def scaled_dot(q: Tensor, keys: Tensor, values: Tensor, scale: float) -> tuple[Tensor, Tensor]:
    """Attention weights and the weight-mixed value vector.

    q:(B,J), keys/values:(B,N,J); returns (weights:(B,N), mixed:(B,J)).
    """
    if keys.data.ndim != 3 or keys.data.shape[1] == 0:
        raise ShapeError("scaled_dot needs at least one neighbor row")
    scores = row_dot(q, keys, scale=scale)
    weights = softmax(scores)
    mixed = weighted_sum(weights, values)
    return weights, mixed


# ---------------------------------------------------------------------------
# parameters and the optimizer


class ParamStore:
    """Named parameter tensors with adaptive-moment optimizer state.

    Iteration is always in sorted-name order, which makes update order
    (and therefore whole training runs) reproducible.
    """

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, shape: tuple[int, ...], rng: np.random.Generator,
            fan_in: int | None = None) -> Tensor:
        """Create a parameter, uniform in ±sqrt(1/fan_in)."""
        if name in self._params:
            raise ValueError(f"duplicate parameter {name!r}")
        if fan_in is None:
            if len(shape) != 2:
                raise ValueError(f"fan_in required for non-matrix param {name!r}")
            fan_in = shape[0]
        bound = math.sqrt(1.0 / fan_in)
        data = rng.uniform(-bound, bound, size=shape)
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        self._m[name] = np.zeros(shape)
        self._v[name] = np.zeros(shape)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        for name in self.names():
            yield name, self._params[name]

    def n_scalars(self) -> int:
        return sum(p.data.size for _, p in self.items())

    def zero_grads(self) -> None:
        for _, p in self.items():
            p.grad = None

    def copy_from(self, other: "ParamStore") -> None:
        """Hard-copy parameter values (target-network refresh)."""
        if self.names() != other.names():
            raise ValueError("stores hold different parameter sets")
        for name in self.names():
            np.copyto(self._params[name].data, other._params[name].data)

    def clone(self) -> "ParamStore":
        twin = ParamStore()
        for name, p in self.items():
            t = Tensor(p.data.copy(), requires_grad=True)
            twin._params[name] = t
            twin._m[name] = np.zeros_like(p.data)
            twin._v[name] = np.zeros_like(p.data)
        return twin

    def state_dict(self) -> dict:
        return {
            name: {"shape": list(p.data.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in self.items()
        }

    def load_state_dict(self, state: dict) -> None:
        missing = sorted(set(self._params) ^ set(state))
        if missing:
            raise ValueError(f"parameter set mismatch: {missing}")
        for name in self.names():
            entry = state[name]
            shape = tuple(entry["shape"])
            if shape != self._params[name].data.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: {shape} vs "
                    f"{self._params[name].data.shape}"
                )
            arr = np.asarray(entry["data"], dtype=np.float64).reshape(shape)
            np.copyto(self._params[name].data, arr)

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8) -> None:
        """One adaptive-moment update over all parameters, then zero grads."""
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - beta1 ** t
        bias2 = 1.0 - beta2 ** t
        for name in self.names():
            p = self._params[name]
            g = p.grad
            if g is None:
                continue
            if not np.all(np.isfinite(g)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            m = self._m[name]
            v = self._v[name]
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
            p.data -= lr * (m / bias1) / (np.sqrt(v / bias2) + eps)
            p.grad = None
