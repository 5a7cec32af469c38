"""Exact contraction of small networks.

Three independent paths are provided: greedy pairwise contraction (the main
oracle), sequential absorption in a caller-given order (used as a column
sweep on square grids), and brute-force enumeration over the full joint index
space. Every label is summed unless it is explicitly kept; labels shared by
more than two tensors are allowed and are summed once the last tensor holding
them has been merged.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..errors import BudgetExceeded
from ..regions import network_dims
from ..tensor import LabeledTensor, label_key, sorted_labels

__all__ = [
    "ContractionBudget",
    "exact_log_z",
    "exact_contract",
    "environment",
    "sequential_log_z",
    "brute_force_log_z",
]

DEFAULT_BUDGET = 10**8


@dataclass(frozen=True)
class ContractionBudget:
    max_intermediate_entries: int = DEFAULT_BUDGET


def _budget_value(budget) -> int:
    if budget is None:
        return DEFAULT_BUDGET
    if isinstance(budget, ContractionBudget):
        return budget.max_intermediate_entries
    return int(budget)


class _Item:
    __slots__ = ("labels", "data", "log")

    def __init__(self, labels, data, log):
        self.labels = tuple(labels)
        self.data = data
        self.log = log


def _rescale(item: _Item) -> _Item:
    peak = float(np.max(np.abs(item.data))) if item.data.size else 0.0
    if peak > 0 and math.isfinite(peak):
        item.data = item.data / peak
        item.log += math.log(peak)
    return item


def _merge(x: _Item, y: _Item, keep_after: set) -> _Item:
    """Hadamard product of ``x`` and ``y`` summed over labels not in ``keep_after``."""
    letters: dict = {}
    for l in x.labels + y.labels:
        if l not in letters:
            letters[l] = _letter(len(letters))
    out = tuple(sorted_labels(l for l in letters if l in keep_after))
    spec = "{},{}->{}".format("".join(letters[l] for l in x.labels),
                              "".join(letters[l] for l in y.labels),
                              "".join(letters[l] for l in out))
    data = np.einsum(spec, x.data, y.data, optimize=True)
    return _rescale(_Item(out, data, x.log + y.log))


def _letter(i: int) -> str:
    return "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"[i]


def _reduce_single(item: _Item, keep: set) -> _Item:
    drop = [k for k, l in enumerate(item.labels) if l not in keep]
    if not drop:
        return item
    data = item.data.sum(axis=tuple(drop))
    return _rescale(_Item([l for l in item.labels if l in keep], data, item.log))


def _greedy(items: list, keep: frozenset, budget: int, dims: dict) -> _Item:
    """Contract ``items`` down to one tensor over the labels ``keep``."""
    cnt: dict = {}
    for it in items:
        for l in it.labels:
            cnt[l] = cnt.get(l, 0) + 1
    items = [_reduce_single(it, keep | {l for l in it.labels if cnt[l] > 1}) for it in items]
    while len(items) > 1:
        cnt: dict = {}
        for it in items:
            for l in it.labels:
                cnt[l] = cnt.get(l, 0) + 1
        best = None
        sizes = [it.data.size for it in items]
        order_keys = [tuple(label_key(l) for l in sorted_labels(it.labels)) for it in items]
        by_label: dict = {}
        for k, it in enumerate(items):
            for l in it.labels:
                by_label.setdefault(l, []).append(k)
        pairs = set()
        for ks in by_label.values():
            for p in range(len(ks)):
                for q in range(p + 1, len(ks)):
                    pairs.add((ks[p], ks[q]))
        if not pairs:
            small = sorted(range(len(items)), key=lambda k: (sizes[k], order_keys[k]))[:2]
            pairs = {tuple(sorted(small))}
        for i, j in pairs:
            li, lj = set(items[i].labels), set(items[j].labels)
            union = li | lj
            out = [l for l in union
                   if l in keep or cnt[l] - (l in li) - (l in lj) > 0]
            size = 1
            for l in out:
                size *= dims[l]
            score = (size - sizes[i] - sizes[j], min(order_keys[i], order_keys[j]),
                     max(order_keys[i], order_keys[j]))
            if best is None or score < best[0]:
                best = (score, i, j, size)
        _, i, j, size = best
        if size > budget:
            raise BudgetExceeded(size, budget)
        li, lj = set(items[i].labels), set(items[j].labels)
        keep_after = {l for l in li | lj if l in keep or cnt[l] - (l in li) - (l in lj) > 0}
        merged = _merge(items[i], items[j], keep_after)
        items = [it for k, it in enumerate(items) if k not in (i, j)] + [merged]
    return _reduce_single(items[0], keep)


def _items(network: Sequence[LabeledTensor]) -> list:
    out = []
    for t in network:
        out.append(_rescale(_Item(t.labels, t.dense_array(scaled=False), t.log_scale)))
    return out


def exact_log_z(network: Sequence[LabeledTensor], budget=None) -> complex:
    """``log`` of the sum over every label of the product of all tensors."""
    dims = network_dims(network)
    if not network:
        return 0j
    res = _greedy(_items(network), frozenset(), _budget_value(budget), dims)
    return cmath.log(complex(res.data.reshape(()))) + res.log


def exact_contract(network: Sequence[LabeledTensor], budget=None, *,
                   subset: Iterable[int] | None = None):
    """``log Z``, plus the environment of ``subset`` when one is given."""
    logz = exact_log_z(network, budget)
    if subset is None:
        return logz
    return logz, environment(network, subset, budget)


def environment(network: Sequence[LabeledTensor], subset: Iterable[int], budget=None
                ) -> LabeledTensor:
    """Contraction of every tensor outside ``subset``.

    The result lives on the labels of the subset that are shared with
    outside tensors (the boundary), in canonical order, with its scale in
    ``log_scale``.
    """
    subset = set(subset)
    dims = network_dims(network)
    inside = {l for i in subset for l in network[i].labels}
    outside = [t for i, t in enumerate(network) if i not in subset]
    boundary = frozenset(l for t in outside for l in t.labels if l in inside)
    if not outside:
        return LabeledTensor((), np.ones(()))
    res = _greedy(_items(outside), boundary, _budget_value(budget), dims)
    labels = sorted_labels(res.labels)
    data = np.transpose(res.data, [res.labels.index(l) for l in labels])
    return LabeledTensor(labels, data, log_scale=res.log)


def sequential_log_z(network: Sequence[LabeledTensor], order: Sequence[int] | None = None,
                     budget=None) -> complex:
    """Absorb tensors one at a time in ``order`` (default: network order).

    On a square grid listed column by column this is an untruncated
    boundary sweep.
    """
    budget = _budget_value(budget)
    order = list(range(len(network))) if order is None else list(order)
    items = _items(network)
    remaining: dict = {}
    for it in items:
        for l in it.labels:
            remaining[l] = remaining.get(l, 0) + 1
    acc = _Item((), np.ones(()), 0.0)
    for k in order:
        it = items[k]
        for l in it.labels:
            remaining[l] -= 1
        union = set(acc.labels) | set(it.labels)
        keep = {l for l in union if remaining[l] > 0}
        size = 1
        dims = {l: s for l, s in zip(acc.labels, acc.data.shape)}
        dims.update({l: s for l, s in zip(it.labels, it.data.shape)})
        for l in keep:
            size *= dims[l]
        if size > budget:
            raise BudgetExceeded(size, budget)
        acc = _merge(acc, it, keep)
    return cmath.log(complex(acc.data.reshape(()))) + acc.log


def brute_force_log_z(network: Sequence[LabeledTensor], max_entries: int = 1 << 22) -> complex:
    """Sum the product of all tensors over the full joint index space."""
    dims = network_dims(network)
    labels = sorted_labels(dims)
    total_size = int(np.prod([dims[l] for l in labels])) if labels else 1
    if total_size > max_entries:
        raise BudgetExceeded(total_size, max_entries)
    pos = {l: k for k, l in enumerate(labels)}
    joint = np.ones([dims[l] for l in labels], dtype=np.complex128)
    log = 0.0
    for t in network:
        arr = t.dense_array(scaled=False)
        order = sorted(range(t.ndim), key=lambda ax: pos[t.labels[ax]])
        shape = [1] * len(labels)
        for ax in order:
            shape[pos[t.labels[ax]]] = t.shape[ax]
        joint = joint * np.transpose(arr, order).reshape(shape)
        log += t.log_scale
    return cmath.log(complex(joint.sum())) + log
