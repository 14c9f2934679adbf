"""Dense float64 tensors with reverse-mode automatic differentiation.

A Tape records every op executed while it is the active context; backward
walks the recording in exact reverse order, accumulating gradients into leaf
tensors. Gradients accumulate across backward calls until explicitly zeroed,
so training steps must zero between batches. Ops run outside any tape compute
values only, which is how evaluation avoids bookkeeping.

Everything is float64 on purpose: the models here are desk-scale, and exact
finite-difference agreement is worth more than speed.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np


class ShapeError(ValueError):
    """Incompatible operand shapes; the message names both."""


class Tensor:
    """A dense float64 array plus its accumulated gradient.

    watched marks trainable parameters; grad is allocated lazily the first
    time backward reaches the tensor. tape points at the recording the tensor
    was produced on (None for leaves and for values computed outside a tape).
    """

    __slots__ = ("values", "grad", "watched", "name", "tape")

    def __init__(
        self,
        values,
        watched: bool = False,
        name: str | None = None,
    ):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.watched = watched
        self.name = name
        self.tape: "Tape | None" = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.values.shape}, watched={self.watched})"


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Recording of ops in execution order; a context manager.

    Entering makes this tape the active recorder (the previous one is
    restored on exit, so tapes nest). backward may be called after exit.
    """

    def __init__(self):
        self._entries: list[tuple[Tensor, Callable[[], None]]] = []
        self._prev: Tape | None = None

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        self._prev = None

    def record(self, out: Tensor, backward_thunk: Callable[[], None]) -> None:
        out.tape = self
        self._entries.append((out, backward_thunk))

    def __len__(self) -> int:
        return len(self._entries)

    def backward(self, loss: Tensor) -> None:
        """Populate grads of everything that fed the scalar loss.

        Intermediate grads are reset first, so repeated calls accumulate only
        into leaves (parameters and inputs), never double-count internals.
        """
        if loss.tape is not self:
            raise ValueError("loss was not recorded on this tape")
        if loss.values.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.values.shape}")
        for out, _ in self._entries:
            out.grad = None
        loss.grad = np.ones_like(loss.values)
        for out, thunk in reversed(self._entries):
            if out.grad is not None:
                thunk()


def active_tape() -> "Tape | None":
    """The tape currently recording, if any (custom ops hook in here)."""
    return _ACTIVE_TAPE


def backward(loss: Tensor) -> None:
    if loss.tape is None:
        raise ValueError("loss was not recorded on any tape")
    loss.tape.backward(loss)


def zero_grad(tensors: Sequence[Tensor]) -> None:
    for t in tensors:
        t.grad = None


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _record(out: Tensor, thunk: Callable[[], None]) -> Tensor:
    if _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE.record(out, thunk)
    return out


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.values.shape, b.values.shape)
    except ValueError:
        raise ShapeError(
            f"{op}: shapes {a.values.shape} and {b.values.shape} do not broadcast"
        ) from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    out = Tensor(a.values + b.values)

    def thunk():
        _accumulate(a, _unbroadcast(out.grad, a.values.shape))
        _accumulate(b, _unbroadcast(out.grad, b.values.shape))

    return _record(out, thunk)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    out = Tensor(a.values - b.values)

    def thunk():
        _accumulate(a, _unbroadcast(out.grad, a.values.shape))
        _accumulate(b, _unbroadcast(-out.grad, b.values.shape))

    return _record(out, thunk)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    out = Tensor(a.values * b.values)

    def thunk():
        _accumulate(a, _unbroadcast(out.grad * b.values, a.values.shape))
        _accumulate(b, _unbroadcast(out.grad * a.values, b.values.shape))

    return _record(out, thunk)


def scale(a: Tensor, factor: float) -> Tensor:
    factor = float(factor)
    out = Tensor(a.values * factor)

    def thunk():
        _accumulate(a, out.grad * factor)

    return _record(out, thunk)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.values.ndim != 2 or b.values.ndim != 2 or a.values.shape[1] != b.values.shape[0]:
        raise ShapeError(
            f"matmul: cannot multiply {a.values.shape} by {b.values.shape}"
        )
    out = Tensor(a.values @ b.values)

    def thunk():
        _accumulate(a, out.grad @ b.values.T)
        _accumulate(b, a.values.T @ out.grad)

    return _record(out, thunk)


def transpose(a: Tensor) -> Tensor:
    if a.values.ndim != 2:
        raise ShapeError(f"transpose: need a matrix, got shape {a.values.shape}")
    out = Tensor(a.values.T.copy())

    def thunk():
        _accumulate(a, out.grad.T)

    return _record(out, thunk)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: no tensors")
    ndim = tensors[0].values.ndim
    if not 0 <= axis < ndim:
        raise ShapeError(f"concat: axis {axis} out of range for ndim {ndim}")
    for t in tensors[1:]:
        if t.values.ndim != ndim or any(
            t.values.shape[d] != tensors[0].values.shape[d]
            for d in range(ndim)
            if d != axis
        ):
            raise ShapeError(
                f"concat: shapes {tensors[0].values.shape} and {t.values.shape} "
                f"differ off axis {axis}"
            )
    out = Tensor(np.concatenate([t.values for t in tensors], axis=axis))
    offsets = np.cumsum([0] + [t.values.shape[axis] for t in tensors])

    def thunk():
        for t, start, stop in zip(tensors, offsets, offsets[1:]):
            index = [slice(None)] * ndim
            index[axis] = slice(start, stop)
            _accumulate(t, out.grad[tuple(index)])

    return _record(out, thunk)


def flatten(a: Tensor) -> Tensor:
    """Row-major view of any tensor as a vector."""
    out = Tensor(a.values.reshape(-1).copy())

    def thunk():
        _accumulate(a, out.grad.reshape(a.values.shape))

    return _record(out, thunk)


def tensor_sum(a: Tensor) -> Tensor:
    out = Tensor(a.values.sum())

    def thunk():
        _accumulate(a, np.broadcast_to(out.grad, a.values.shape).copy())

    return _record(out, thunk)


def tanh(a: Tensor) -> Tensor:
    out = Tensor(np.tanh(a.values))

    def thunk():
        _accumulate(a, out.grad * (1.0 - out.values**2))

    return _record(out, thunk)


def sigmoid(a: Tensor) -> Tensor:
    x = a.values
    # Two-branch form stays finite for arbitrarily large |x|.
    positive = x >= 0
    z = np.exp(np.where(positive, -x, x))
    out = Tensor(np.where(positive, 1.0 / (1.0 + z), z / (1.0 + z)))

    def thunk():
        _accumulate(a, out.grad * out.values * (1.0 - out.values))

    return _record(out, thunk)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    ndim = a.values.ndim
    if not -ndim <= axis < ndim:
        raise ShapeError(f"softmax: axis {axis} out of range for shape {a.values.shape}")
    if a.values.shape[axis] == 0:
        raise ShapeError(f"softmax: empty axis {axis} in shape {a.values.shape}")
    shifted = a.values - a.values.max(axis=axis, keepdims=True)
    exp = np.exp(shifted)
    out = Tensor(exp / exp.sum(axis=axis, keepdims=True))

    def thunk():
        y, dy = out.values, out.grad
        inner = (dy * y).sum(axis=axis, keepdims=True)
        _accumulate(a, y * (dy - inner))

    return _record(out, thunk)


def dropout(
    a: Tensor, keep_prob: float, rng: np.random.Generator, train: bool = True
) -> Tensor:
    """Inverted dropout: retained activations are scaled by 1/keep_prob."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    if not train:
        return a
    mask = (rng.random(a.values.shape) < keep_prob) / keep_prob
    out = Tensor(a.values * mask)

    def thunk():
        _accumulate(a, out.grad * mask)

    return _record(out, thunk)


def lookup(table: Tensor, indices: Sequence[int]) -> Tensor:
    """Gather rows of an embedding matrix; backward scatters into the rows."""
    if table.values.ndim != 2:
        raise ShapeError(f"lookup: table must be a matrix, got {table.values.shape}")
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1 or idx.size == 0:
        raise ShapeError(f"lookup: need a non-empty index vector, got shape {idx.shape}")
    rows = table.values.shape[0]
    if idx.min() < 0 or idx.max() >= rows:
        raise ValueError(f"lookup: index out of range for {rows} rows")
    out = Tensor(table.values[idx])

    def thunk():
        if table.grad is None:
            table.grad = np.zeros_like(table.values)
        np.add.at(table.grad, idx, out.grad)

    return _record(out, thunk)


def cross_entropy(logits: Tensor, class_index: int) -> Tensor:
    """Fused stable softmax + negative log-likelihood of the true class.

    The gradient is exactly softmax(logits) minus the one-hot target.
    """
    if logits.values.ndim != 1:
        raise ShapeError(f"cross_entropy: logits must be a vector, got {logits.values.shape}")
    n = logits.values.shape[0]
    if not 0 <= class_index < n:
        raise ValueError(f"cross_entropy: class {class_index} out of range for {n} logits")
    shifted = logits.values - logits.values.max()
    lse = np.log(np.exp(shifted).sum())
    out = Tensor(lse - shifted[class_index])
    probs = np.exp(shifted - lse)

    def thunk():
        g = probs.copy()
        g[class_index] -= 1.0
        _accumulate(logits, g * out.grad)

    return _record(out, thunk)


# --- optimizer ---------------------------------------------------------------


class Adam:
    """Bias-corrected Adam over named watched tensors."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        names = [p.name for p in params]
        if any(name is None for name in names):
            raise ValueError("every Adam parameter needs a name")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names: {sorted(names)}")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {p.name: np.zeros_like(p.values) for p in params}
        self._v = {p.name: np.zeros_like(p.values) for p in params}

    def step(self) -> None:
        missing = [p.name for p in self.params if p.grad is None]
        if missing:
            raise ValueError(f"parameters without gradients: {missing}")
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for p in self.params:
            g = p.grad
            m = self._m[p.name]
            v = self._v[p.name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / correction1
            v_hat = v / correction2
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


# --- gradient checking -------------------------------------------------------


@dataclass(frozen=True)
class GradCheckReport:
    """Worst relative finite-difference error per parameter."""

    worst_by_param: dict[str, float]
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def grad_check(
    forward_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    rng: np.random.Generator,
    samples: int = 5,
    eps: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients with central differences.

    forward_fn must be deterministic (dropout off) and return a scalar loss.
    For each parameter a random coordinate subset is perturbed; the relative
    error denominator is floored at 1e-4 so near-zero coordinates do not
    explode the ratio.
    """
    zero_grad(params)
    with Tape() as tape:
        loss = forward_fn()
    tape.backward(loss)
    analytic = {
        p.name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.values))
        for p in params
    }

    def loss_value() -> float:
        out = forward_fn()
        if out.values.size != 1:
            raise ValueError("forward_fn must return a scalar loss")
        return float(out.values)

    worst: dict[str, float] = {}
    for p in params:
        flat = p.values.reshape(-1)
        count = min(samples, flat.size)
        coords = rng.choice(flat.size, size=count, replace=False)
        err = 0.0
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            plus = loss_value()
            flat[i] = original - eps
            minus = loss_value()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * eps)
            exact = float(analytic[p.name].reshape(-1)[i])
            err = max(
                err, abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-4)
            )
        worst[p.name] = err
    return GradCheckReport(
        worst_by_param=worst,
        max_rel_err=max(worst.values()) if worst else 0.0,
        tolerance=tolerance,
    )


# --- checkpoints -------------------------------------------------------------

CHECKPOINT_MAGIC = b"MPECKPT1"
CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    tensors: Mapping[str, "Tensor | np.ndarray"],
    meta: Mapping | None = None,
) -> None:
    """Binary layout: magic, u32 version, JSON meta, then named f64 tensors.

    Per tensor: u32 name length + UTF-8 name, u32 ndim, u64 dims, row-major
    little-endian float64 payload. Names are written sorted so identical
    contents produce identical bytes.
    """
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", CHECKPOINT_VERSION)
    meta_bytes = json.dumps(dict(meta or {}), sort_keys=True).encode("utf-8")
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    blob += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        values = tensors[name]
        array = np.asarray(
            values.values if isinstance(values, Tensor) else values, dtype=np.float64
        )
        name_bytes = name.encode("utf-8")
        blob += struct.pack("<I", len(name_bytes))
        blob += name_bytes
        blob += struct.pack("<I", array.ndim)
        blob += struct.pack(f"<{array.ndim}Q", *array.shape)
        blob += array.astype("<f8", copy=False).tobytes(order="C")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    path = Path(path)
    blob = path.read_bytes()
    view = memoryview(blob)
    offset = 0

    def take(count: int) -> memoryview:
        nonlocal offset
        if offset + count > len(blob):
            raise ValueError(f"{path}: truncated checkpoint at byte {offset}")
        piece = view[offset : offset + count]
        offset += count
        return piece

    if bytes(take(len(CHECKPOINT_MAGIC))) != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<I", take(4))
    meta = json.loads(bytes(take(meta_len)).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = bytes(take(name_len)).decode("utf-8")
        (ndim,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape)
        tensors[name] = data.astype(np.float64)
    if offset != len(blob):
        raise ValueError(f"{path}: {len(blob) - offset} trailing bytes")
    return tensors, meta
