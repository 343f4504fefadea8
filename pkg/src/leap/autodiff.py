"""A small tape-based reverse-mode autodiff engine over dense float64 matrices.

Only the operations the model needs are provided. Every forward op records
itself on a :class:`Tape`; :meth:`Tape.backward` replays the record in exact
reverse order and accumulates gradients into ``Tensor.grad``.

    tape = Tape()
    h = tape.relu(tape.matmul(x, w))
    loss = tape.sum(h)
    tape.backward(loss)
    w.grad  # d loss / d w
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        values = np.array(values, dtype=np.float64)
        if values.ndim == 0:
            values = values.reshape(1, 1)
        elif values.ndim == 1:
            values = values.reshape(-1, 1)
        elif values.ndim != 2:
            raise ValueError(f"tensors are 2-D, got shape {values.shape}")
        self.values = values
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() on a tensor of shape {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


@dataclass(eq=False)
class SparseAdj:
    """Row-compressed adjacency with one weight per stored entry.

    ``weights`` is either a fixed array or an ``(nnz, 1)`` tensor, in which
    case :meth:`Tape.spmm` also backpropagates into the weights.
    """

    shape: tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray | Tensor

    @classmethod
    def from_coo(cls, rows, cols, weights, shape) -> tuple["SparseAdj", np.ndarray]:
        """Build from unsorted triples; also returns the sort permutation.

        If ``weights`` is a tensor it must already be in sorted order, so
        callers that gather weights should sort first with
        :func:`coo_order` and gather in that order.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        order = coo_order(rows, cols)
        indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=shape[0]), out=indptr[1:])
        if not isinstance(weights, Tensor):
            weights = np.asarray(weights, dtype=np.float64).reshape(-1)[order]
        return cls(tuple(shape), indptr, cols[order], weights), order

    @classmethod
    def identity(cls, n: int) -> "SparseAdj":
        return cls((n, n), np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def empty(cls, n: int) -> "SparseAdj":
        return cls((n, n), np.zeros(n + 1, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0))

    @property
    def nnz(self) -> int:
        return len(self.indices)

    @property
    def row_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))

    def weight_values(self) -> np.ndarray:
        if isinstance(self.weights, Tensor):
            return self.weights.values[:, 0]
        return self.weights

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.weight_values(), self.indices, self.indptr), shape=self.shape)


def coo_order(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.lexsort((cols, rows))


class Tape:
    """Ordered record of executed ops; one backward pass per recording.

    ``Tape(record=False)`` evaluates ops without keeping anything for backward.
    """

    def __init__(self, record: bool = True):
        self.record = record
        self._ops: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self._consumed = False

    def __len__(self) -> int:
        return len(self._ops)

    def reset(self) -> None:
        self._ops.clear()
        self._consumed = False

    def _record(self, values: np.ndarray, inputs: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
        if not np.isfinite(values).all():
            raise NonFiniteError(f"{op} produced non-finite values")
        needs = self.record and any(t.requires_grad for t in inputs)
        out = Tensor(values, requires_grad=needs)
        if needs:
            self._ops.append((out, tuple(inputs), backward))
        return out

    def backward(self, loss: Tensor) -> None:
        if self._consumed:
            raise RuntimeError("backward already ran on this tape; call reset() first")
        if loss.shape != (1, 1):
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        self._consumed = True
        loss.grad = np.ones((1, 1))
        for out, inputs, backward in reversed(self._ops):
            if out.grad is None:
                continue
            for inp, g in zip(inputs, backward(out.grad)):
                if g is None or not inp.requires_grad:
                    continue
                inp.grad = g.copy() if inp.grad is None else inp.grad + g

    # --- ops ----------------------------------------------------------------

    def matmul(self, a, b) -> Tensor:
        a, b = as_tensor(a), as_tensor(b)
        if a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
        av, bv = a.values, b.values
        return self._record(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")

    def add_bias(self, a, bias) -> Tensor:
        a, bias = as_tensor(a), as_tensor(bias)
        if bias.shape != (1, a.shape[1]):
            raise ValueError(f"bias shape {bias.shape} does not fit {a.shape}")
        return self._record(
            a.values + bias.values, (a, bias),
            lambda g: (g, g.sum(axis=0, keepdims=True)), "add_bias",
        )

    def add(self, a, b) -> Tensor:
        a, b = as_tensor(a), as_tensor(b)
        _same_shape(a, b, "add")
        return self._record(a.values + b.values, (a, b), lambda g: (g, g), "add")

    def mul(self, a, b) -> Tensor:
        """Elementwise product."""
        a, b = as_tensor(a), as_tensor(b)
        _same_shape(a, b, "mul")
        av, bv = a.values, b.values
        return self._record(av * bv, (a, b), lambda g: (g * bv, g * av), "mul")

    def scale(self, a, c: float) -> Tensor:
        a = as_tensor(a)
        return self._record(a.values * c, (a,), lambda g: (g * c,), "scale")

    def neg(self, a) -> Tensor:
        return self.scale(a, -1.0)

    def relu(self, a) -> Tensor:
        a = as_tensor(a)
        mask = a.values > 0
        return self._record(np.where(mask, a.values, 0.0), (a,), lambda g: (g * mask,), "relu")

    def sigmoid(self, a) -> Tensor:
        a = as_tensor(a)
        s = expit(a.values)
        return self._record(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")

    def logsigmoid(self, a) -> Tensor:
        a = as_tensor(a)
        x = a.values
        return self._record(-np.logaddexp(0.0, -x), (a,), lambda g: (g * expit(-x),), "logsigmoid")

    def sum(self, a) -> Tensor:
        a = as_tensor(a)
        shape = a.shape
        return self._record(
            np.array([[a.values.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),), "sum"
        )

    def rowwise_dot(self, a, b) -> Tensor:
        a, b = as_tensor(a), as_tensor(b)
        _same_shape(a, b, "rowwise_dot")
        av, bv = a.values, b.values
        return self._record(
            np.einsum("ij,ij->i", av, bv)[:, None], (a, b),
            lambda g: (g * bv, g * av), "rowwise_dot",
        )

    def mse(self, a, b) -> Tensor:
        """Mean over rows of the squared Euclidean row distance."""
        a, b = as_tensor(a), as_tensor(b)
        _same_shape(a, b, "mse")
        diff = a.values - b.values
        n = max(a.shape[0], 1)
        return self._record(
            np.array([[np.sum(diff * diff) / n]]), (a, b),
            lambda g: (g[0, 0] * 2.0 * diff / n, -g[0, 0] * 2.0 * diff / n), "mse",
        )

    def gather_rows(self, a, idx) -> Tensor:
        a = as_tensor(a)
        idx = np.asarray(idx, dtype=np.int64)
        shape = a.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)

        return self._record(a.values[idx], (a,), back, "gather_rows")

    def gather(self, a, rows, cols) -> Tensor:
        """Column tensor of the entries ``a[rows[e], cols[e]]``."""
        a = as_tensor(a)
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        shape = a.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, (rows, cols), g[:, 0])
            return (out,)

        return self._record(a.values[rows, cols][:, None], (a,), back, "gather")

    def spmm(self, s: SparseAdj, h) -> Tensor:
        """Row ``i`` of the result is ``sum_j alpha_ij * h_j``."""
        h = as_tensor(h)
        if s.shape[1] != h.shape[0]:
            raise ValueError(f"spmm shape mismatch {s.shape} @ {h.shape}")
        mat = s.to_scipy()
        hv = h.values
        weighted = isinstance(s.weights, Tensor)
        inputs = (h, s.weights) if weighted else (h,)
        row = s.row_index if weighted else None

        def back(g):
            dh = np.asarray(mat.T @ g)
            if not weighted:
                return (dh,)
            dw = np.einsum("ij,ij->i", g[row], hv[s.indices])[:, None]
            return (dh, dw)

        return self._record(np.asarray(mat @ hv), inputs, back, "spmm")


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op} shape mismatch {a.shape} vs {b.shape}")


# --- optimizer ----------------------------------------------------------------

class Adam:
    """Adam with bias correction; parameters update in place."""

    def __init__(self, params: Sequence[Tensor], lr: float = 0.01,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        for i, p in enumerate(self.params):
            g = np.zeros_like(p.values) if p.grad is None else p.grad
            self.m[i], self.v[i], p.values = adam_step(
                p.values, g, self.m[i], self.v[i], self.t,
                self.lr, self.beta1, self.beta2, self.eps,
            )


def adam_step(x, g, m, v, t, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update; returns ``(m, v, x)``. ``t`` counts from 1."""
    m = beta1 * m + (1.0 - beta1) * g
    v = beta2 * v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    return m, v, x - lr * m_hat / (np.sqrt(v_hat) + eps)


# --- checkpoints --------------------------------------------------------------

CHECKPOINT_MAGIC = b"LEAPCKPT1"


def save_checkpoint(path, named: dict[str, np.ndarray]) -> None:
    """Write named matrices as float32 little-endian, atomically.

    Layout: magic, u32 count, then per entry u32 name length, UTF-8 name,
    u64 rows, u64 cols, rows*cols float32 values in row-major order.
    """
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(named))]
    for name, arr in named.items():
        arr = np.asarray(arr)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)) + raw)
        chunks.append(struct.pack("<QQ", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    atomic_write_bytes(path, b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    pos = len(CHECKPOINT_MAGIC)
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + nlen].decode("utf-8")
        pos += nlen
        rows, cols = struct.unpack_from("<QQ", data, pos)
        pos += 16
        size = rows * cols * 4
        if pos + size > len(data):
            raise ValueError(f"{path}: truncated entry {name!r}")
        out[name] = np.frombuffer(data[pos:pos + size], dtype="<f4").reshape(rows, cols).astype(np.float64)
        pos += size
    return out


def atomic_write_bytes(path, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
