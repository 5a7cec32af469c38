"""Labeled dense/sparse tensors and the element-wise algebra used by GBP.

Entries are always addressed by label, never by axis position: two tensors
holding the same labels in different axis orders represent the same object.
Every tensor carries a real ``log_scale`` so that the represented values are
``exp(log_scale) * stored``; this keeps large-beta partition functions inside
double precision.

Storage is either a dense complex ``numpy`` array (row-major over ``labels``)
or a sparse coordinate list without explicit zeros.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateNormalizer, DimMismatch, UnknownLabel, ZeroToNegativePower

#: Magnitudes below this are structural zeros in ratios and powers.
ZERO_TOL = 1e-300

__all__ = [
    "ZERO_TOL",
    "IndexLabel",
    "LabeledTensor",
    "label_key",
    "sorted_labels",
    "hadamard",
    "sum_over",
    "elem_pow",
    "normalize",
    "contract",
    "to_sparse",
    "to_dense",
    "ones",
    "allclose",
]


def label_key(label: Hashable) -> str:
    """Total, deterministic ordering key for heterogeneous label ids."""
    return repr(label)


def sorted_labels(labels: Iterable[Hashable]) -> tuple:
    return tuple(sorted(labels, key=label_key))


@dataclass(frozen=True, order=True)
class IndexLabel:
    """An index of a tensor network: an opaque id with a dimension."""

    id: Hashable
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"index {self.id!r} has dimension {self.dim} < 1")


class LabeledTensor:
    """Multi-index array keyed by globally unique labels.

    Parameters
    ----------
    labels : sequence of hashable
        Label ids, one per axis. Must be distinct.
    data : array_like, optional
        Dense entries; ``data.ndim == len(labels)``.
    shape : sequence of int, optional
        Required for sparse tensors.
    coords, values : array_like, optional
        Sparse coordinates ``(nnz, ndim)`` and their values.
    log_scale : float
        The tensor represents ``exp(log_scale) * entries``.
    """

    __slots__ = ("labels", "shape", "data", "coords", "values", "log_scale")

    def __init__(self, labels, data=None, *, shape=None, coords=None, values=None,
                 log_scale=0.0):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise ValueError(f"repeated labels in {labels!r}")
        self.labels = labels
        self.log_scale = float(log_scale)
        if data is not None:
            arr = np.asarray(data, dtype=np.complex128)
            if arr.ndim != len(labels):
                raise ValueError(
                    f"dense data has {arr.ndim} axes but {len(labels)} labels were given")
            self.data = arr
            self.shape = tuple(int(s) for s in arr.shape)
            self.coords = None
            self.values = None
        else:
            if shape is None:
                raise ValueError("sparse tensors need an explicit shape")
            self.shape = tuple(int(s) for s in shape)
            if len(self.shape) != len(labels):
                raise ValueError("shape and labels disagree in length")
            v = np.zeros(0, dtype=np.complex128) if values is None else \
                np.asarray(values, dtype=np.complex128).reshape(-1)
            c = np.zeros((0, len(labels)), dtype=np.int64) if coords is None else \
                np.asarray(coords, dtype=np.int64).reshape(len(v), len(labels))
            if len(c) != len(v):
                raise ValueError("coords and values disagree in length")
            if len(c) and (np.any(c < 0) or np.any(c >= np.asarray(self.shape))):
                raise IndexError("sparse coordinate out of range")
            self.coords, self.values = _canonical_coo(c, v, self.shape)
            self.data = None
        for s in self.shape:
            if s < 1:
                raise ValueError("every dimension must be >= 1")

    # -- introspection -------------------------------------------------
    @property
    def is_sparse(self) -> bool:
        return self.data is None

    @property
    def ndim(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64))

    @property
    def nnz(self) -> int:
        if self.is_sparse:
            return len(self.values)
        return int(np.count_nonzero(np.abs(self.data) >= ZERO_TOL))

    @property
    def dims(self) -> dict:
        return dict(zip(self.labels, self.shape))

    @property
    def indices(self) -> tuple:
        return tuple(IndexLabel(l, d) for l, d in zip(self.labels, self.shape))

    def dense_array(self, labels: Sequence | None = None, *, scaled=True) -> np.ndarray:
        """Entries as a dense array with axes in ``labels`` order."""
        t = to_dense(self)
        arr = t.data
        if labels is not None:
            labels = tuple(labels)
            if set(labels) != set(self.labels) or len(labels) != self.ndim:
                raise UnknownLabel(f"{labels!r} is not a permutation of {self.labels!r}")
            arr = np.transpose(arr, [self.labels.index(l) for l in labels])
        if scaled and self.log_scale != 0.0:
            arr = arr * math.exp(self.log_scale)
        return arr

    def entry(self, assignment: Mapping) -> complex:
        """Scaled value at a label -> index-value assignment."""
        try:
            idx = tuple(int(assignment[l]) for l in self.labels)
        except KeyError as exc:
            raise UnknownLabel(f"assignment misses label {exc.args[0]!r}") from None
        if self.is_sparse:
            hit = np.nonzero(np.all(self.coords == np.asarray(idx), axis=1))[0]
            val = complex(self.values[hit[0]]) if len(hit) else 0j
        else:
            val = complex(self.data[idx])
        return val * math.exp(self.log_scale)

    def transpose(self, labels: Sequence) -> "LabeledTensor":
        labels = tuple(labels)
        if sorted(labels, key=label_key) != sorted(self.labels, key=label_key):
            raise UnknownLabel(f"{labels!r} is not a permutation of {self.labels!r}")
        perm = [self.labels.index(l) for l in labels]
        if self.is_sparse:
            return LabeledTensor(labels, shape=[self.shape[p] for p in perm],
                                 coords=self.coords[:, perm], values=self.values,
                                 log_scale=self.log_scale)
        return LabeledTensor(labels, np.transpose(self.data, perm), log_scale=self.log_scale)

    def canonical(self) -> "LabeledTensor":
        """Same tensor with axes in canonical (sorted) label order."""
        return self.transpose(sorted_labels(self.labels))

    def relabel(self, mapping: Mapping) -> "LabeledTensor":
        labels = [mapping.get(l, l) for l in self.labels]
        if self.is_sparse:
            return LabeledTensor(labels, shape=self.shape, coords=self.coords,
                                 values=self.values, log_scale=self.log_scale)
        return LabeledTensor(labels, self.data, log_scale=self.log_scale)

    def with_log_scale(self, log_scale: float) -> "LabeledTensor":
        if self.is_sparse:
            return LabeledTensor(self.labels, shape=self.shape, coords=self.coords,
                                 values=self.values, log_scale=log_scale)
        return LabeledTensor(self.labels, self.data, log_scale=log_scale)

    def total(self) -> complex:
        """Unscaled sum of the stored entries."""
        if self.is_sparse:
            return complex(self.values.sum())
        return complex(self.data.sum())

    def __repr__(self):
        kind = f"sparse nnz={self.nnz}" if self.is_sparse else "dense"
        return (f"LabeledTensor(labels={self.labels!r}, shape={self.shape}, {kind}, "
                f"log_scale={self.log_scale:g})")


def _canonical_coo(coords, values, shape):
    keep = np.abs(values) >= ZERO_TOL
    coords, values = coords[keep], values[keep]
    if len(values) == 0:
        return coords.reshape(0, len(shape)), values
    flat = np.ravel_multi_index(coords.T, shape) if len(shape) else np.zeros(len(values), np.int64)
    uniq, inv = np.unique(flat, return_inverse=True)
    summed = np.zeros(len(uniq), dtype=np.complex128)
    np.add.at(summed, inv, values)
    keep = np.abs(summed) >= ZERO_TOL
    uniq, summed = uniq[keep], summed[keep]
    if len(shape):
        out = np.stack(np.unravel_index(uniq, shape), axis=1).astype(np.int64)
    else:
        out = np.zeros((len(uniq), 0), dtype=np.int64)
    return out, summed


def ones(labels: Sequence, dims: Sequence[int] | Mapping) -> LabeledTensor:
    labels = tuple(labels)
    if isinstance(dims, Mapping):
        dims = [dims[l] for l in labels]
    return LabeledTensor(labels, np.ones(tuple(dims), dtype=np.complex128))


def to_dense(t: LabeledTensor) -> LabeledTensor:
    if not t.is_sparse:
        return t
    arr = np.zeros(t.shape, dtype=np.complex128)
    if t.ndim == 0:
        arr[()] = t.values.sum()
    elif len(t.values):
        arr[tuple(t.coords.T)] = t.values
    return LabeledTensor(t.labels, arr, log_scale=t.log_scale)


def to_sparse(t: LabeledTensor) -> LabeledTensor:
    if t.is_sparse:
        return t
    if t.ndim == 0:
        coords = np.zeros((1, 0), dtype=np.int64)
        vals = t.data.reshape(1)
    else:
        nz = np.nonzero(np.abs(t.data) >= ZERO_TOL)
        coords = np.stack(nz, axis=1)
        vals = t.data[nz]
    return LabeledTensor(t.labels, shape=t.shape, coords=coords, values=vals,
                         log_scale=t.log_scale)


def _check_shared(a: LabeledTensor, b: LabeledTensor):
    da, db = a.dims, b.dims
    for l in da.keys() & db.keys():
        if da[l] != db[l]:
            raise DimMismatch(f"label {l!r}: dimension {da[l]} vs {db[l]}")


def _union_labels(a: LabeledTensor, b: LabeledTensor) -> tuple:
    return a.labels + tuple(l for l in b.labels if l not in a.dims)


def hadamard(a: LabeledTensor, b: LabeledTensor) -> LabeledTensor:
    """Element-wise product over the union of labels (outer product if disjoint)."""
    _check_shared(a, b)
    out = _union_labels(a, b)
    dims = {**a.dims, **b.dims}
    scale = a.log_scale + b.log_scale
    if a.is_sparse or b.is_sparse:
        return _sparse_hadamard(a, b, out, dims, scale)
    ids = {l: i for i, l in enumerate(out)}
    data = np.einsum(a.data, [ids[l] for l in a.labels],
                     b.data, [ids[l] for l in b.labels],
                     [ids[l] for l in out])
    return LabeledTensor(out, data, log_scale=scale)


def _expand(t: LabeledTensor, out: tuple, dims: Mapping):
    """Sparse (coords over ``out``, values) of ``t`` broadcast to labels ``out``."""
    s = to_sparse(t)
    extra = [l for l in out if l not in s.dims]
    coords, vals = s.coords, s.values
    if extra:
        grid = np.indices([dims[l] for l in extra]).reshape(len(extra), -1).T
        n, m = len(vals), len(grid)
        coords = np.concatenate([np.repeat(coords, m, axis=0), np.tile(grid, (n, 1))], axis=1)
        vals = np.repeat(vals, m)
    order = list(s.labels) + extra
    perm = [order.index(l) for l in out]
    return coords[:, perm], vals


def _sparse_hadamard(a, b, out, dims, scale):
    shape = tuple(dims[l] for l in out)
    if not a.is_sparse or not b.is_sparse:
        sp, de = (a, b) if a.is_sparse else (b, a)
        coords, vals = _expand(sp, out, dims)
        pos = [out.index(l) for l in de.labels]
        other = de.data[tuple(coords[:, p] for p in pos)] if de.ndim else \
            np.full(len(vals), complex(de.data))
        return LabeledTensor(out, shape=shape, coords=coords, values=vals * other,
                             log_scale=scale)
    shared = [l for l in a.labels if l in b.dims]
    ka = a.coords[:, [a.labels.index(l) for l in shared]]
    kb = b.coords[:, [b.labels.index(l) for l in shared]]
    buckets: dict = {}
    for j, key in enumerate(map(tuple, kb)):
        buckets.setdefault(key, []).append(j)
    ia, ib = [], []
    for i, key in enumerate(map(tuple, ka)):
        for j in buckets.get(key, ()):
            ia.append(i)
            ib.append(j)
    ia = np.asarray(ia, dtype=np.int64)
    ib = np.asarray(ib, dtype=np.int64)
    b_only = [b.labels.index(l) for l in out[a.ndim:]]
    coords = np.concatenate([a.coords[ia], b.coords[ib][:, b_only]], axis=1)
    vals = a.values[ia] * b.values[ib]
    return LabeledTensor(out, shape=shape, coords=coords, values=vals, log_scale=scale)


def sum_over(t: LabeledTensor, drop: Iterable) -> LabeledTensor:
    """Sum out the labels in ``drop``; ``log_scale`` is preserved."""
    drop = set(drop)
    missing = drop - set(t.labels)
    if missing:
        raise UnknownLabel(f"cannot sum over labels {sorted(missing, key=label_key)!r}")
    keep = tuple(l for l in t.labels if l not in drop)
    if not drop:
        return t
    if t.is_sparse:
        pos = [t.labels.index(l) for l in keep]
        return LabeledTensor(keep, shape=[t.shape[p] for p in pos], coords=t.coords[:, pos],
                             values=t.values, log_scale=t.log_scale)
    axes = tuple(t.labels.index(l) for l in drop)
    return LabeledTensor(keep, t.data.sum(axis=axes), log_scale=t.log_scale)


def _pow_values(vals: np.ndarray, p, zero_convention: bool) -> np.ndarray:
    zero = np.abs(vals) < ZERO_TOL
    if not np.any(zero):
        return vals.copy() if p == 1 else np.power(vals, p)
    if p.real < 0 and not zero_convention:
        raise ZeroToNegativePower(f"{int(zero.sum())} structural zero(s) raised to power {p}")
    out = np.zeros_like(vals)
    out[~zero] = np.power(vals[~zero], p)
    if p == 0:
        out[zero] = 1.0
    return out


def elem_pow(t: LabeledTensor, p, *, zero_convention=False) -> LabeledTensor:
    """Entry-wise principal power.

    Structural zeros stay zero for positive ``p``. For negative ``p`` they raise
    :class:`ZeroToNegativePower` unless ``zero_convention`` maps them to zero.
    """
    if isinstance(p, complex) and p.imag == 0:
        p = p.real
    if isinstance(p, complex) and t.log_scale != 0.0:
        # a complex exponent would make the scale complex; fold it first
        t = LabeledTensor(t.labels, t.dense_array())
    scale = 0.0 if isinstance(p, complex) else t.log_scale * p
    if t.is_sparse:
        if t.nnz < t.size:
            if p == 0:
                return LabeledTensor(t.labels, np.ones(t.shape, np.complex128))
            if p.real < 0 and not zero_convention:
                raise ZeroToNegativePower(f"implicit zeros raised to power {p}")
        return LabeledTensor(t.labels, shape=t.shape, coords=t.coords,
                             values=_pow_values(t.values, p, zero_convention), log_scale=scale)
    return LabeledTensor(t.labels, _pow_values(t.data, p, zero_convention), log_scale=scale)


def normalize(t: LabeledTensor, *, tol: float = 1e-300):
    """Return ``(t / sum(t), log sum(t))`` with ``log_scale`` folded in."""
    s = t.total()
    if not abs(s) > tol or not cmath.isfinite(s):
        raise DegenerateNormalizer(f"tensor sum {s!r} cannot be normalized")
    log_z = cmath.log(s) + t.log_scale
    if t.is_sparse:
        out = LabeledTensor(t.labels, shape=t.shape, coords=t.coords, values=t.values / s)
    else:
        out = LabeledTensor(t.labels, t.data / s)
    return out, log_z


def contract(t1: LabeledTensor, t2: LabeledTensor) -> LabeledTensor:
    """Sum over shared labels without materialising the Hadamard product."""
    _check_shared(t1, t2)
    shared = set(t1.labels) & set(t2.labels)
    if t1.is_sparse or t2.is_sparse:
        return sum_over(hadamard(t1, t2), shared)
    out = tuple(l for l in t1.labels if l not in shared) + \
        tuple(l for l in t2.labels if l not in shared)
    ids = {l: i for i, l in enumerate(_union_labels(t1, t2))}
    data = np.einsum(t1.data, [ids[l] for l in t1.labels],
                     t2.data, [ids[l] for l in t2.labels],
                     [ids[l] for l in out], optimize=True)
    return LabeledTensor(out, data, log_scale=t1.log_scale + t2.log_scale)


def allclose(a: LabeledTensor, b: LabeledTensor, *, rtol=1e-12, atol=1e-12) -> bool:
    """Label-aware comparison of the scaled entries of two tensors."""
    if set(a.labels) != set(b.labels) or a.dims != {**a.dims, **b.dims}:
        return False
    order = a.labels
    return bool(np.allclose(a.dense_array(order), b.dense_array(order), rtol=rtol, atol=atol))
