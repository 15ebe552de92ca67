"""Minimal dense reverse-mode autodiff over 2-D float64 tensors.

Every op builds a new :class:`Tensor` that remembers its parents and a
closure mapping the output cotangent to one cotangent per parent.  The
tape is the graph of those references; :func:`backward` linearises it in
topological order and walks it once in reverse.

Only two shapes of broadcasting exist: matrix-with-matrix (same shape) and
matrix-with-scalar (a 1x1 operand).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, NumericError, ShapeError


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got ndim={arr.ndim}")
        _check_finite(arr, name or "tensor")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return hadamard(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    @property
    def T(self):
        return transpose(self)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(arr: np.ndarray, what: str):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values produced by {what}")


def _node(value: np.ndarray, parents: Sequence[Tensor], vjp: Callable, op: str) -> Tensor:
    _check_finite(value, op)
    out = Tensor.__new__(Tensor)
    out.data = value
    out.grad = None
    out.name = None
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = vjp
    else:
        out._parents = ()
        out._backward = None
    return out


def _same_or_scalar(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape and (1, 1) not in (a.shape, b.shape):
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.array([[g.sum()]])


# linear algebra ---------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    return _node(a.data @ b.data, (a, b),
                 lambda g: (g @ b.data.T, a.data.T @ g), "matmul")


def _as_operator(op):
    from .graph import Graph

    if isinstance(op, Graph):
        return op.sparse()
    if sp.issparse(op):
        return op.tocsr()
    arr = np.asarray(op, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError("operator must be a 2-D matrix")
    return arr


def sparse_matmul(op, x: Tensor) -> Tensor:
    """``op @ x`` for a constant operator (Graph, scipy sparse or ndarray)."""
    m = _as_operator(op)
    x = as_tensor(x)
    if m.shape[1] != x.shape[0]:
        raise ShapeError(f"sparse_matmul: operator {m.shape} vs signal {x.shape}")
    mt = m.T
    value = np.asarray(m @ x.data)
    return _node(value, (x,), lambda g: (np.asarray(mt @ g),), "sparse_matmul")


def transpose(x: Tensor) -> Tensor:
    return _node(x.data.T.copy(), (x,), lambda g: (g.T,), "transpose")


def reshape(x: Tensor, shape) -> Tensor:
    """Row-major reshape."""
    old = x.shape
    value = x.data.reshape(shape)
    if value.ndim != 2:
        raise ShapeError("reshape target must be 2-D")
    return _node(value.copy(), (x,), lambda g: (g.reshape(old),), "reshape")


# elementwise ------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_or_scalar(a, b, "add")
    sa, sb = a.shape, b.shape
    return _node(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_or_scalar(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _node(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _node(x.data * c, (x,), lambda g: (g * c,), "scale")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _same_or_scalar(a, b, "hadamard")
    sa, sb = a.shape, b.shape
    return _node(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, sa), _unbroadcast(g * a.data, sb)),
                 "hadamard")


def power(x: Tensor, e: float) -> Tensor:
    e = float(e)
    with np.errstate(all="ignore"):
        value = x.data ** e
    return _node(value, (x,), lambda g: (g * e * x.data ** (e - 1.0),), "power")


def relu(x: Tensor) -> Tensor:
    on = x.data > 0
    return _node(np.where(on, x.data, 0.0), (x,), lambda g: (g * on,), "relu")


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _node(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        e = np.exp(x.data)
    return _node(e, (x,), lambda g: (g * e,), "exp")


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(x.data)
    return _node(value, (x,), lambda g: (g / x.data,), "log")


def xlogx(x: Tensor) -> Tensor:
    """``x log x`` with the convention ``0 log 0 = 0`` (gradient 0 there)."""
    pos = x.data > 0
    safe = np.where(pos, x.data, 1.0)
    lx = np.log(safe)
    value = np.where(pos, x.data * lx, 0.0)
    return _node(value, (x,), lambda g: (np.where(pos, g * (lx + 1.0), 0.0),), "xlogx")


def softmax_rows(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return _node(s, (x,), vjp, "softmax_rows")


def log_softmax_rows(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    value = z - lse
    s = np.exp(value)
    return _node(value, (x,), lambda g: (g - s * g.sum(axis=1, keepdims=True),),
                 "log_softmax_rows")


# structural ------------------------------------------------------------------


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])
    value = np.concatenate([p.data for p in parts], axis=1)
    return _node(value, parts,
                 lambda g: tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts))),
                 "concat_cols")


def concat_rows(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ {sorted(cols)}")
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])
    value = np.concatenate([p.data for p in parts], axis=0)
    return _node(value, parts,
                 lambda g: tuple(g[bounds[i]:bounds[i + 1]] for i in range(len(parts))),
                 "concat_rows")


def gather_rows(x: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64).ravel()
    if len(idx) and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise ShapeError(f"gather_rows: index outside [0, {x.shape[0]})")
    n = x.shape[0]

    def vjp(g):
        out = np.zeros((n, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return _node(x.data[idx], (x,), vjp, "gather_rows")


REDUCTIONS = ("mean", "sum", "max", "var")


def reduce(x: Tensor, how: str) -> Tensor:
    """Per-column statistic over rows, giving a 1 x C tensor.

    ``var`` is the population variance.  ``max`` routes the gradient to the
    lowest-index maximal row.
    """
    n = x.shape[0]
    if n == 0:
        raise ShapeError("reduce over zero rows")
    d = x.data
    if how == "sum":
        return _node(d.sum(axis=0, keepdims=True), (x,),
                     lambda g: (np.repeat(g, n, axis=0),), "reduce_sum")
    if how == "mean":
        return _node(d.mean(axis=0, keepdims=True), (x,),
                     lambda g: (np.repeat(g / n, n, axis=0),), "reduce_mean")
    if how == "max":
        arg = np.argmax(d, axis=0)
        cols = np.arange(d.shape[1])

        def vjp(g):
            out = np.zeros_like(d)
            out[arg, cols] = g[0]
            return (out,)

        return _node(d[arg, cols][None, :].copy(), (x,), vjp, "reduce_max")
    if how in ("var", "variance"):
        centred = d - d.mean(axis=0, keepdims=True)
        return _node((centred ** 2).mean(axis=0, keepdims=True), (x,),
                     lambda g: (2.0 * centred * g / n,), "reduce_var")
    raise ContractError(f"unknown reduction {how!r}; expected one of {REDUCTIONS}")


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _node(np.array([[x.data.sum()]]), (x,),
                 lambda g: (np.full(shape, g[0, 0]),), "sum_all")


def cross_entropy(logits: Tensor, labels, mask=None) -> Tensor:
    """Mean negative log-likelihood of ``labels`` over the masked rows."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    n, m = logits.shape
    if len(labels) != n:
        raise ShapeError(f"cross_entropy: {len(labels)} labels for {n} rows")
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    rows = np.nonzero(mask)[0]
    if len(rows) == 0:
        raise ContractError("cross_entropy over an empty batch")
    y = labels[rows]
    if y.min() < 0 or y.max() >= m:
        raise ShapeError("cross_entropy: masked label outside class range")
    z = logits.data[rows]
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    value = -logp[np.arange(len(rows)), y].mean()
    p = np.exp(logp)

    def vjp(g):
        d = p.copy()
        d[np.arange(len(rows)), y] -= 1.0
        out = np.zeros((n, m))
        out[rows] = d * (g[0, 0] / len(rows))
        return (out,)

    return _node(np.array([[value]]), (logits,), vjp, "cross_entropy")


def dropout(x: Tensor, rate: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; the identity outside training or at rate 0."""
    if not train or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must lie in [0, 1), got {rate}")
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _node(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# reverse pass ---------------------------------------------------------------


def _topological(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor):
    """Populate ``.grad`` on every tensor that requires it.

    Gradients accumulate across calls until cleared with ``zero_grad``.
    """
    if loss.shape != (1, 1):
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor requiring grad")
    order = _topological(loss)
    pending = {id(loss): np.ones((1, 1))}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad or pg is None:
                continue
            pg = np.asarray(pg, dtype=np.float64)
            _check_finite(pg, "backward")
            key = id(parent)
            pending[key] = pg if key not in pending else pending[key] + pg


# initialisation and optimisation ------------------------------------------------


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def adam_init(params: Sequence[Tensor]) -> dict:
    return {
        "t": 0,
        "m": [np.zeros_like(p.data) for p in params],
        "v": [np.zeros_like(p.data) for p in params],
    }


def adam_step(params, grads, state, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8,
              weight_decay=0.0):
    """One Adam update with decoupled weight decay, in place.

    ``state`` comes from :func:`adam_init` and is updated and returned.
    """
    if len(params) != len(grads):
        raise ShapeError("params and grads differ in length")
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for k, (p, g) in enumerate(zip(params, grads)):
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"grad shape {g.shape} != param shape {p.data.shape}")
        _check_finite(g, "gradient")
        m = state["m"][k] = beta1 * state["m"][k] + (1.0 - beta1) * g
        v = state["v"][k] = beta2 * state["v"][k] + (1.0 - beta2) * g * g
        if weight_decay:
            p.data = p.data - lr * weight_decay * p.data
        p.data = p.data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


class Adam:
    def __init__(self, params, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
        self.params = list(params)
        self.hyper = dict(lr=lr, beta1=beta1, beta2=beta2, eps=eps, weight_decay=weight_decay)
        self.state = adam_init(self.params)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state, **self.hyper)


# finite differences ----------------------------------------------------------------


def numeric_grad(f: Callable[[], Tensor], x: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar ``f()`` with respect to ``x.data``."""
    x.data = np.ascontiguousarray(x.data)
    out = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        up = f().item()
        flat[k] = old - h
        down = f().item()
        flat[k] = old
        out.reshape(-1)[k] = (up - down) / (2.0 * h)
    return out


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def gradcheck(f: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    """Largest relative error between analytic and numeric gradients."""
    for p in params:
        p.grad = None
    backward(f())
    worst = 0.0
    for p in params:
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        worst = max(worst, relative_error(analytic, numeric_grad(f, p, h)))
    return worst


# checkpoints -------------------------------------------------------------------

CHECKPOINT_MAGIC = "# graphcnn-checkpoint v1"


def save_checkpoint(path, params: dict[str, Tensor]):
    """Text table, one parameter per line: ``name rows cols v0 v1 ...``.

    Values use ``repr`` so a load reproduces every bit.
    """
    lines = [CHECKPOINT_MAGIC]
    for name, t in params.items():
        if any(c.isspace() for c in name):
            raise ContractError(f"parameter name {name!r} contains whitespace")
        r, c = t.shape
        lines.append(" ".join([name, str(r), str(c)] + [repr(float(v)) for v in t.data.ravel()]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path, params: dict[str, Tensor]):
    """Load values into ``params`` after checking names and shapes match exactly."""
    from .errors import ParseError

    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ParseError("missing checkpoint header", path, 1)
    found = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        tok = line.split()
        try:
            name, r, c = tok[0], int(tok[1]), int(tok[2])
            values = np.array([float(v) for v in tok[3:]])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed checkpoint row: {exc}", path, lineno) from None
        if values.size != r * c:
            raise ParseError(f"{name}: expected {r * c} values, got {values.size}", path, lineno)
        found[name] = values.reshape(r, c)
    if set(found) != set(params):
        raise ParseError(
            f"parameter names differ: missing {sorted(set(params) - set(found))}, "
            f"unexpected {sorted(set(found) - set(params))}", path)
    for name, t in params.items():
        if found[name].shape != t.shape:
            raise ParseError(f"{name}: shape {found[name].shape} != {t.shape}", path)
        t.data = found[name]
