"""Dense float64 tensors with a reverse-mode differentiation tape.

Every value in the pipeline is a :class:`Tensor` wrapping a row-major
numpy float64 array. Operations run eagerly; when a :class:`Tape` is
active and an input requires gradients, the operation appends a node
(parent handles plus a pull-back closure over the saved activations) to
the tape. Because nodes are appended in execution order the tape is
topologically sorted by construction, and ``backward`` is a single
reverse sweep.

Gradients are verified externally against central differences by
:func:`finite_difference_check`; that check is the oracle for every
differentiable operation in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ShapeError

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_CUBIC = 0.044715

_active_tape = None


def active_tape():
    """Return the currently active Tape, or None outside any tape."""
    return _active_tape


class Tensor:
    """N-dimensional float64 array with an optional tape handle.

    ``requires_grad`` marks leaves (trainable parameters). Outputs of
    recorded operations get it set automatically so that downstream
    operations keep recording.
    """

    __slots__ = ("data", "requires_grad", "_tape", "_node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self._tape = None
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def grad(self):
        """Gradient from the most recent backward over this leaf, if any."""
        if self._tape is None or self._node is None:
            return None
        return self._tape.gradients.get(self._node)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """A copy of the value with no gradient tracking."""
        return Tensor(self.data.copy())

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)

    def __repr__(self):
        tag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{tag})"


def as_tensor(x) -> Tensor:
    """Wrap scalars/arrays as constant Tensors; pass Tensors through."""
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


class Tape:
    """Execution-ordered record of differentiable operations.

    Used as a context manager around a forward pass::

        with Tape() as tape:
            loss = f()
        grads = tape.backward(loss)   # {leaf Tensor: ndarray}

    A tape can run backward once; reuse raises ContractError. Outside a
    tape, all operations run untracked (inference mode).
    """

    def __init__(self):
        self._parents: list[tuple[int, ...]] = []
        self._pullbacks: list = []
        self._shapes: list[tuple[int, ...]] = []
        self._leaves: dict[int, Tensor] = {}
        self.gradients: dict[int, np.ndarray] = {}
        self._spent = False

    def __enter__(self):
        global _active_tape
        if _active_tape is not None:
            raise ContractError("a Tape is already active; tapes do not nest")
        _active_tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        global _active_tape
        _active_tape = None
        return False

    def __len__(self):
        return len(self._parents)

    def _handle(self, t: Tensor) -> int:
        """Node handle of ``t`` on this tape, registering a leaf if needed."""
        if t._tape is self and t._node is not None:
            return t._node
        node = len(self._parents)
        self._parents.append(())
        self._pullbacks.append(None)
        self._shapes.append(t.data.shape)
        self._leaves[node] = t
        t._tape = self
        t._node = node
        return node

    def record(self, out: Tensor, parents, pullback) -> None:
        """Append an operation node; ``pullback(g)`` must return one
        gradient (or None) per parent, already reduced to parent shape."""
        handles = tuple(
            self._handle(p) if isinstance(p, Tensor) and p.requires_grad else -1
            for p in parents
        )
        node = len(self._parents)
        self._parents.append(handles)
        self._pullbacks.append(pullback)
        self._shapes.append(out.data.shape)
        out._tape = self
        out._node = node
        out.requires_grad = True

    def backward(self, loss: Tensor) -> dict:
        """Reverse sweep from a scalar loss recorded on this tape.

        Returns a map from leaf Tensors to their gradient arrays. Leaves
        the per-node gradients in ``self.gradients``.
        """
        if self._spent:
            raise ContractError("backward() already ran on this tape; use a fresh tape")
        if not isinstance(loss, Tensor) or loss._tape is not self or loss._node is None:
            raise ContractError("loss is not recorded on this tape")
        if loss.data.size != 1:
            raise ContractError(f"loss must be a scalar, got shape {loss.shape}")
        self._spent = True
        grads = self.gradients
        grads[loss._node] = np.ones_like(loss.data)
        for node in range(loss._node, -1, -1):
            g = grads.get(node)
            if g is None:
                continue
            pullback = self._pullbacks[node]
            if pullback is None:
                continue
            for parent, pg in zip(self._parents[node], pullback(g)):
                if parent < 0 or pg is None:
                    continue
                if parent in grads:
                    grads[parent] = grads[parent] + pg
                else:
                    grads[parent] = pg
        return {t: grads[node] for node, t in self._leaves.items() if node in grads}

    def grad(self, t: Tensor):
        if t._tape is not self or t._node is None:
            return None
        return self.gradients.get(t._node)


def backward(loss: Tensor) -> dict:
    """Run reverse-mode accumulation from a scalar loss.

    Convenience wrapper over ``loss``'s tape; returns the leaf gradient
    map. Repeated calls on the same tape are rejected.
    """
    if not isinstance(loss, Tensor) or loss._tape is None:
        raise ContractError("loss was not recorded on any tape")
    return loss._tape.backward(loss)


# ---------------------------------------------------------------------
# operation helpers
# ---------------------------------------------------------------------

def _tracked(*tensors) -> bool:
    if _active_tape is None:
        return False
    return any(isinstance(t, Tensor) and t.requires_grad for t in tensors)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce a broadcast gradient back to ``shape``."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)
    if _tracked(a, b):
        ash, bsh = a.data.shape, b.data.shape
        _active_tape.record(out, (a, b), lambda g: (
            _unbroadcast(g, ash), _unbroadcast(g, bsh)))
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data - b.data)
    if _tracked(a, b):
        ash, bsh = a.data.shape, b.data.shape
        _active_tape.record(out, (a, b), lambda g: (
            _unbroadcast(g, ash), _unbroadcast(-g, bsh)))
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)
    if _tracked(a, b):
        ad, bd = a.data, b.data
        _active_tape.record(out, (a, b), lambda g: (
            _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))
    return out


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data / b.data)
    if _tracked(a, b):
        ad, bd = a.data, b.data
        _active_tape.record(out, (a, b), lambda g: (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape)))
    return out


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data)
    if _tracked(a):
        _active_tape.record(out, (a,), lambda g: (-g,))
    return out


def power(a, exponent: float) -> Tensor:
    """Elementwise ``a ** exponent`` for strictly positive inputs."""
    a = as_tensor(a)
    out = Tensor(a.data ** exponent)
    if _tracked(a):
        ad = a.data
        _active_tape.record(out, (a,), lambda g: (g * exponent * ad ** (exponent - 1.0),))
    return out


# ---------------------------------------------------------------------
# matrix product
# ---------------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Batched matrix product with leading-dimension broadcasting.

    Both operands must have ndim >= 2; inner dimensions must agree.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        out_data = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(f"matmul batch dimensions incompatible: {a.shape} @ {b.shape}") from exc
    out = Tensor(out_data)
    if _tracked(a, b):
        ad, bd = a.data, b.data

        def pullback(g):
            ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
            gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
            return ga, gb

        _active_tape.record(out, (a, b), pullback)
    return out


# ---------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape))
    if _tracked(a):
        orig = a.data.shape
        _active_tape.record(out, (a,), lambda g: (g.reshape(orig),))
    return out


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    out = Tensor(a.data.transpose(axes))
    if _tracked(a):
        inverse = tuple(np.argsort(axes))
        _active_tape.record(out, (a,), lambda g: (g.transpose(inverse),))
    return out


def getitem(a, key) -> Tensor:
    """Indexing with basic keys (ints/slices) or an integer array of rows."""
    a = as_tensor(a)
    out = Tensor(a.data[key])
    if _tracked(a):
        shape = a.data.shape
        fancy = isinstance(key, (list, np.ndarray))

        def pullback(g):
            full = np.zeros(shape)
            if fancy:
                np.add.at(full, key, g)
            else:
                full[key] += g
            return (full,)

        _active_tape.record(out, (a,), pullback)
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    if _tracked(*tensors):
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def pullback(g):
            moved = np.moveaxis(g, axis, 0)
            return tuple(
                np.moveaxis(moved[offsets[i]:offsets[i + 1]], 0, axis)
                for i in range(len(sizes))
            )

        _active_tape.record(out, tuple(tensors), pullback)
    return out


def stack(tensors, axis: int = 0) -> Tensor:
    """Stack equal-shaped tensors along a new leading axis."""
    if axis != 0:
        raise ShapeError("stack supports axis=0 only")
    expanded = [reshape(t, (1,) + as_tensor(t).shape) for t in tensors]
    return concat(expanded, axis=0)


# ---------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))
    if _tracked(a):
        shape = a.data.shape

        def pullback(g):
            if axis is None:
                return (np.broadcast_to(g, shape).copy(),)
            axes = axis if isinstance(axis, tuple) else (axis,)
            gk = g if keepdims else np.expand_dims(g, axes)
            return (np.broadcast_to(gk, shape).copy(),)

        _active_tape.record(out, (a,), pullback)
    return out


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.shape[ax]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / count)


# ---------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------

def texp(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.exp(a.data))
    if _tracked(a):
        od = out.data
        _active_tape.record(out, (a,), lambda g: (g * od,))
    return out


def tlog(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.data))
    if _tracked(a):
        ad = a.data
        _active_tape.record(out, (a,), lambda g: (g / ad,))
    return out


def tsqrt(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.sqrt(a.data))
    if _tracked(a):
        od = out.data
        _active_tape.record(out, (a,), lambda g: (g * 0.5 / od,))
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    out = Tensor(out_data)
    if _tracked(a):
        od = out.data
        _active_tape.record(out, (a,), lambda g: (g * od * (1.0 - od),))
    return out


def softplus(a) -> Tensor:
    """log(1 + exp(x)), stable for large |x|."""
    a = as_tensor(a)
    out = Tensor(np.logaddexp(0.0, a.data))
    if _tracked(a):
        ad = a.data

        def pullback(g):
            s = np.empty_like(ad)
            pos = ad >= 0
            s[pos] = 1.0 / (1.0 + np.exp(-ad[pos]))
            ex = np.exp(ad[~pos])
            s[~pos] = ex / (1.0 + ex)
            return (g * s,)

        _active_tape.record(out, (a,), pullback)
    return out


def gelu(a) -> Tensor:
    """GELU via the tanh approximation (the package-wide nonlinearity)."""
    a = as_tensor(a)
    x = a.data
    inner = _SQRT_2_OVER_PI * (x + _GELU_CUBIC * x ** 3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t))
    if _tracked(a):
        def pullback(g):
            dinner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_CUBIC * x ** 2)
            local = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner
            return (g * local,)

        _active_tape.record(out, (a,), pullback)
    return out


def softmax_lastdim(a) -> Tensor:
    """Softmax along the last dimension, stabilized by max subtraction."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = Tensor(e / e.sum(axis=-1, keepdims=True))
    if _tracked(a):
        y = out.data

        def pullback(g):
            dot = (g * y).sum(axis=-1, keepdims=True)
            return ((g - dot) * y,)

        _active_tape.record(out, (a,), pullback)
    return out


def layer_norm(a, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize the last dimension to zero mean, unit variance, then
    apply the elementwise affine ``gain * xhat + bias``."""
    a, gain, bias = as_tensor(a), as_tensor(gain), as_tensor(bias)
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match last dim {d}")
    mu = a.data.mean(axis=-1, keepdims=True)
    centered = a.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = Tensor(xhat * gain.data + bias.data)
    if _tracked(a, gain, bias):
        gd = gain.data
        lead = tuple(range(a.ndim - 1))

        def pullback(g):
            dgain = (g * xhat).sum(axis=lead) if lead else (g * xhat)
            dbias = g.sum(axis=lead) if lead else g
            dxhat = g * gd
            m1 = dxhat.mean(axis=-1, keepdims=True)
            m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
            dx = inv * (dxhat - m1 - xhat * m2)
            return dx, dgain, dbias

        _active_tape.record(out, (a, gain, bias), pullback)
    return out


# ---------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------

@dataclass
class ParamCheck:
    """Per-parameter result of a finite-difference comparison."""

    label: str
    checked: int
    max_rel_err: float
    worst_coord: tuple | None = None
    analytic: float = 0.0
    numeric: float = 0.0


@dataclass
class GradCheckReport:
    """Outcome of finite_difference_check; failures reported, not raised."""

    h: float
    tol: float
    params: list[ParamCheck] = field(default_factory=list)

    @property
    def max_rel_err(self) -> float:
        return max((p.max_rel_err for p in self.params), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol

    def summary(self) -> str:
        lines = [
            f"gradcheck h={self.h:g} tol={self.tol:g} params={len(self.params)}"
        ]
        for p in self.params:
            lines.append(
                f"  {p.label}: checked={p.checked} max_rel_err={p.max_rel_err:.3e}"
                f" worst={p.worst_coord} analytic={p.analytic:.6e} numeric={p.numeric:.6e}"
            )
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"overall max_rel_err={self.max_rel_err:.3e} -> {verdict}")
        return "\n".join(lines)


def finite_difference_check(
    f,
    params,
    h: float = 1e-5,
    tol: float = 1e-4,
    samples_per_param: int | None = None,
    rng: np.random.Generator | None = None,
    labels=None,
    floor: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must be a deterministic zero-argument callable returning a
    scalar Tensor that depends on the Tensors in ``params``. The
    relative error uses ``|a - n| / max(|a|, |n|, floor)`` so that
    near-zero gradients are compared absolutely, below the noise floor
    of float64 central differences. With ``samples_per_param`` set, only
    that many coordinates per parameter are perturbed (rng required for
    more coordinates than samples).
    """
    if not (0.0 < h <= 1e-2):
        raise ContractError(f"step size h={h} outside (0, 1e-2]")
    if labels is None:
        labels = [f"param{i}" for i in range(len(params))]
    with Tape() as tape:
        loss = f()
    gradmap = tape.backward(loss)

    report = GradCheckReport(h=h, tol=tol)
    for label, p in zip(labels, params):
        analytic = gradmap.get(p)
        if analytic is None:
            analytic = np.zeros_like(p.data)
        n = p.data.size
        if samples_per_param is None or samples_per_param >= n:
            coords = np.arange(n)
        else:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=samples_per_param, replace=False)
        flat = p.data.reshape(-1)
        ana_flat = analytic.reshape(-1)
        check = ParamCheck(label=label, checked=len(coords), max_rel_err=0.0)
        for c in coords:
            keep = flat[c]
            flat[c] = keep + h
            f_plus = f().item()
            flat[c] = keep - h
            f_minus = f().item()
            flat[c] = keep
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = ana_flat[c]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            if rel >= check.max_rel_err:
                check.max_rel_err = rel
                check.worst_coord = tuple(np.unravel_index(int(c), p.data.shape))
                check.analytic = float(a)
                check.numeric = float(numeric)
        report.params.append(check)
    return report
