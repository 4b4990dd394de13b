"""Reverse-mode automatic differentiation over dense float64 tensors (rank <= 2).

Ops are recorded on the active `Tape` (a context manager) whenever one of their inputs
requires grad. Outside of a tape the same functions run forward-only.

    with Tape() as tape:
        loss = mean(power(matmul(x, w) - y, 2))
    grads = tape.backward(loss)  # {w: dloss/dw}
"""

from collections.abc import Callable, Iterable
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Union

import numpy as np

from core.errors import NumericError, ShapeError, TapeError
from core.settings import settings

ArrayLike = Union[float, int, list, np.ndarray]
Operand = Union["Tensor", float, int]

_active_tape: ContextVar["Tape | None"] = ContextVar("active_tape", default=None)


class Tensor:
    """dense row-major tensor; `is_param` marks leaves that receive gradients."""

    __slots__ = ("data", "requires_grad", "is_param", "grad", "name")
    __array_ufunc__ = None  # numpy scalars defer to the reflected Tensor operators

    def __init__(self, data: ArrayLike, requires_grad: bool = False, is_param: bool = False, name: str = "") -> None:
        arr = np.array(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeError("tensor", arr.shape, ("rank<=2",))
        self.data = arr
        self.requires_grad = requires_grad or is_param
        self.is_param = is_param
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def __len__(self) -> int:
        return self.data.shape[0]

    def __repr__(self) -> str:
        tag = "param" if self.is_param else ("grad" if self.requires_grad else "const")
        return f"Tensor({self.name or tag}, shape={self.shape})"

    # operators
    def __add__(self, other: Operand) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: Operand) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: Operand) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: Operand) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: Operand) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: Operand) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: Operand) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: Operand) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)


@dataclass
class Node:
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    vjp: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class Tape:
    """Ordered record of ops. Nodes are appended in execution order, so inputs always precede outputs."""

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.grads: dict[Tensor, np.ndarray] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def record(self, node: Node) -> None:
        self.nodes.append(node)

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Propagate d loss / d x back through the tape; returns (and stores on `.grad`) parameter gradients."""
        if loss.data.shape != ():
            raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not self.nodes:
            raise TapeError("backward on an empty tape")

        buffers: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        params: dict[int, Tensor] = {}
        for node in reversed(self.nodes):
            upstream = buffers.pop(id(node.output), None)
            if upstream is None:
                continue
            for tensor, g in zip(node.inputs, node.vjp(upstream)):
                if g is None or not tensor.requires_grad:
                    continue
                key = id(tensor)
                buffers[key] = buffers[key] + g if key in buffers else g
                if tensor.is_param:
                    params[key] = tensor

        self.grads = {}
        for key, p in params.items():
            p.grad = buffers[key]
            self.grads[p] = buffers[key]
        return dict(self.grads)


# construction
def parameter(data: ArrayLike, name: str = "") -> Tensor:
    return Tensor(data, is_param=True, name=name)


def constant(data: ArrayLike, name: str = "") -> Tensor:
    return Tensor(data, name=name)


def _as_tensor(x: Operand) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _emit(op: str, inputs: tuple[Tensor, ...], out: np.ndarray, vjp: Callable) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{op}: non-finite output")
    result = Tensor(out, requires_grad=any(t.requires_grad for t in inputs))
    tape = _active_tape.get()
    if tape is not None and result.requires_grad:
        tape.record(Node(op, inputs, result, vjp))
    return result


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    # only scalar <-> tensor broadcasting exists
    return np.asarray(g.sum()) if shape == () and g.shape != () else g


def _binary_shapes(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(op, a.shape, b.shape)


# elementwise
def add(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("add", a, b)
    return _emit("add", (a, b), a.data + b.data, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("sub", a, b)
    return _emit("sub", (a, b), a.data - b.data, lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("mul", a, b)
    return _emit(
        "mul",
        (a, b),
        a.data * b.data,
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _binary_shapes("div", a, b)
    if np.any(b.data == 0):
        raise NumericError("div: zero denominator")
    return _emit(
        "div",
        (a, b),
        a.data / b.data,
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * a.data / b.data**2, b.shape)),
    )


def _expit(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x: Tensor) -> Tensor:
    s = _expit(x.data)
    return _emit("sigmoid", (x,), s, lambda g: (g * s * (1.0 - s),))


def softplus(x: Tensor) -> Tensor:
    return _emit("softplus", (x,), np.logaddexp(0.0, x.data), lambda g: (g * _expit(x.data),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _emit("tanh", (x,), t, lambda g: (g * (1.0 - t**2),))


def log(x: Tensor, lo: float = settings.EPS_LOG, hi: float | None = None) -> Tensor:
    """log with the argument clamped to [lo, hi]; clamped entries pass no gradient."""
    clipped = np.clip(x.data, lo, hi if hi is not None else np.inf)
    live = clipped == x.data
    return _emit("log", (x,), np.log(clipped), lambda g: (np.where(live, g / clipped, 0.0),))


def log1m(x: Tensor, eps: float = settings.EPS_LOG) -> Tensor:
    """log(1 - x) with x clamped to [eps, 1 - eps]."""
    clipped = np.clip(x.data, eps, 1.0 - eps)
    live = clipped == x.data
    return _emit("log1m", (x,), np.log1p(-clipped), lambda g: (np.where(live, -g / (1.0 - clipped), 0.0),))


def plog(p: Tensor) -> Tensor:
    """log of a probability, clamped to [eps_log, 1 - eps_log]."""
    return log(p, lo=settings.EPS_LOG, hi=1.0 - settings.EPS_LOG)


def power(x: Tensor, exponent: float) -> Tensor:
    c = float(exponent)
    if c == 0.0:
        return _emit("power", (x,), np.ones_like(x.data), lambda g: (np.zeros_like(x.data),))
    return _emit("power", (x,), x.data**c, lambda g: (g * c * x.data ** (c - 1.0),))


def absolute(x: Tensor) -> Tensor:
    return _emit("abs", (x,), np.abs(x.data), lambda g: (g * np.sign(x.data),))


# reductions
def _expand(g: np.ndarray, shape: tuple, axis: int | None) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape).copy()
    return np.broadcast_to(np.expand_dims(g, axis), shape).copy()


def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001
    return _emit("sum", (x,), np.sum(x.data, axis=axis), lambda g: (_expand(g, x.shape, axis),))


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    if x.size == 0:
        raise ShapeError("mean", x.shape, ("non-empty",))
    count = x.size if axis is None else x.shape[axis]
    return _emit("mean", (x,), np.mean(x.data, axis=axis), lambda g: (_expand(g, x.shape, axis) / count,))


def norm(x: Tensor, axis: int | None = None) -> Tensor:
    """L2 norm over `axis` (all entries when None)."""
    n = np.sqrt(np.sum(x.data**2, axis=axis))

    def vjp(g: np.ndarray) -> tuple:
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g / safe, 0.0)
        return (_expand(scale, x.shape, axis) * x.data,)

    return _emit("norm", (x,), n, vjp)


# linear algebra and indexing
def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim == 0 or b.data.ndim == 0 or a.shape[-1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    out = a.data @ b.data

    def vjp(g: np.ndarray) -> tuple:
        if a.data.ndim == 2 and b.data.ndim == 2:
            return g @ b.data.T, a.data.T @ g
        if a.data.ndim == 2:  # matrix @ vector
            return np.outer(g, b.data), a.data.T @ g
        if b.data.ndim == 2:  # vector @ matrix
            return b.data @ g, np.outer(a.data, g)
        return g * b.data, g * a.data

    return _emit("matmul", (a, b), out, vjp)


def bias_add(x: Tensor, b: Tensor) -> Tensor:
    """row-wise bias: x (n, k) + b (k,)."""
    if x.data.ndim != 2 or b.shape != (x.shape[1],):
        raise ShapeError("bias_add", x.shape, b.shape)
    return _emit("bias_add", (x, b), x.data + b.data, lambda g: (g, g.sum(axis=0)))


def take(x: Tensor, idx: Iterable[int]) -> Tensor:
    """select entries (rank 1) or rows (rank 2)."""
    idx = np.asarray(list(idx), dtype=np.int64)
    if x.data.ndim == 0:
        raise ShapeError("take", x.shape, idx.shape)

    def vjp(g: np.ndarray) -> tuple:
        out = np.zeros_like(x.data)
        np.add.at(out, idx, g)
        return (out,)

    return _emit("take", (x,), x.data[idx], vjp)


def concat(tensors: list[Tensor]) -> Tensor:
    """stack along axis 0."""
    if not tensors:
        raise ShapeError("concat", (), ("non-empty",))
    tail = tensors[0].shape[1:]
    for t in tensors[1:]:
        if t.data.ndim == 0 or t.shape[1:] != tail:
            raise ShapeError("concat", tensors[0].shape, t.shape)
    bounds = np.cumsum([0] + [t.shape[0] for t in tensors])

    def vjp(g: np.ndarray) -> tuple:
        return tuple(g[bounds[i] : bounds[i + 1]] for i in range(len(tensors)))

    return _emit("concat", tuple(tensors), np.concatenate([t.data for t in tensors], axis=0), vjp)


def cross_entropy(logits: Tensor, labels: Iterable[int]) -> Tensor:
    """mean softmax cross-entropy of integer `labels` under `logits` (n, k)."""
    labels = np.asarray(list(labels), dtype=np.int64)
    if logits.data.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("cross_entropy", logits.shape, labels.shape)
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    n = labels.shape[0]
    loss = -log_probs[np.arange(n), labels].mean()

    def vjp(g: np.ndarray) -> tuple:
        grad = np.exp(log_probs)
        grad[np.arange(n), labels] -= 1.0
        return (g * grad / n,)

    return _emit("cross_entropy", (logits,), np.asarray(loss), vjp)


# gradient plumbing
def grl(x: Tensor, lam: float = 1.0) -> Tensor:
    """gradient reversal: identity forward, -lam * upstream backward."""
    if lam < 0:
        raise ValueError(f"grl: lambda must be >= 0, got {lam}")
    return _emit("grl", (x,), x.data.copy(), lambda g: (-lam * g,))


def detach(x: Tensor) -> Tensor:
    """same values, cut from the graph."""
    return Tensor(x.data.copy(), name=x.name)


def gradcheck(fn: Callable[[], Tensor], params: list[Tensor], h: float = 1e-5, atol: float = 1e-6) -> float:
    """Largest norm-wise relative error between tape gradients and central differences of `fn`.

    The normalizer never drops below `atol`, so a vanishing gradient compares in absolute terms.
    """
    with Tape() as tape:
        loss = fn()
    analytic = tape.backward(loss)

    worst = 0.0
    for p in params:
        numeric = np.zeros_like(p.data)
        flat, nflat = p.data.reshape(-1), numeric.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = fn().item()
            flat[i] = orig - h
            down = fn().item()
            flat[i] = orig
            nflat[i] = (up - down) / (2.0 * h)
        a = analytic.get(p, np.zeros_like(p.data))
        scale = max(np.linalg.norm(a), np.linalg.norm(numeric), atol)
        worst = max(worst, float(np.linalg.norm(a - numeric) / scale))
    return worst
