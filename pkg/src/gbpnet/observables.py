"""Beliefs on tensor subsets, network derivatives and expectation values.

A subset of network tensors spans the labels ``x_A``; labels shared with
tensors outside the subset form its boundary ``x_e`` and the rest its
interior ``x_i``. Beliefs on ``x_A`` come either from a single region that
contains all of ``x_A`` or from stitching the regions inside ``x_A`` with
counting numbers recomputed on that sub-poset.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import GbpState, kikuchi_free_energy
from .errors import DivisionDegeneracy, UncoveredIndex
from .models.base import double_factor
from .regions import _moebius
from .tensor import LabeledTensor, label_key, sorted_labels

__all__ = [
    "TensorSubset",
    "ObservableSpec",
    "Derivative",
    "tensor_subset",
    "stitching_counting_numbers",
    "stitched_belief",
    "label_belief",
    "network_derivative",
    "expectation",
    "energy_entropy_densities",
]


@dataclass(frozen=True)
class TensorSubset:
    """Tensor positions with their combined, interior and boundary labels."""

    tensors: tuple
    labels: tuple
    interior: tuple
    boundary: tuple


@dataclass
class ObservableSpec:
    """Single-site operators acting on the physical index of the listed sites.

    ``operators`` maps a network position to a square matrix. Sites not
    listed carry the identity.
    """

    operators: dict
    hermitian: bool = True

    def __post_init__(self):
        for site, op in self.operators.items():
            op = np.asarray(op)
            if op.ndim != 2 or op.shape[0] != op.shape[1]:
                raise ValueError(f"operator on site {site!r} is not square")
            if self.hermitian and not np.allclose(op, op.conj().T, atol=1e-12):
                raise ValueError(f"operator on site {site!r} is declared Hermitian but is not")

    @property
    def sites(self) -> tuple:
        return tuple(sorted(self.operators))


@dataclass
class Derivative:
    """Approximate derivative of the contracted network on ``tensor.labels``.

    ``division_degeneracies`` counts entries where a vanishing divisor met
    nonzero mass from the other factors; those entries are set to zero.
    ``method`` records which construction produced it.
    """

    tensor: LabeledTensor
    subset: TensorSubset
    counting_numbers: dict = field(default_factory=dict)
    division_degeneracies: int = 0
    method: str = "structural"


def tensor_subset(network: Sequence[LabeledTensor], tensors: Iterable[int]) -> TensorSubset:
    """Split the labels of ``tensors`` into interior and boundary labels."""
    tensors = tuple(sorted(set(int(v) for v in tensors)))
    if not tensors:
        raise ValueError("a tensor subset needs at least one tensor")
    inside = set(tensors)
    labels = sorted_labels({l for v in tensors for l in network[v].labels})
    outside = {l for i, t in enumerate(network) if i not in inside for l in t.labels}
    boundary = tuple(l for l in labels if l in outside)
    interior = tuple(l for l in labels if l not in outside)
    return TensorSubset(tensors, labels, interior, boundary)


def _resolve(state: GbpState, subset) -> TensorSubset:
    if isinstance(subset, TensorSubset):
        return subset
    return tensor_subset(state.graph.network, subset)


def stitching_counting_numbers(state: GbpState, labels: Iterable) -> dict:
    """Region key -> counting number on the sub-poset of regions inside ``labels``.

    Returns ``{key: 1}`` for a single region containing all of ``labels``
    when one exists (the smallest such region, ties broken by key order).
    Raises :class:`UncoveredIndex` when a label lies in no region inside
    ``labels``.
    """
    g = state.graph
    xa = frozenset(labels)
    covering = [k for k in g.regions if xa <= frozenset(k)]
    if covering:
        best = min(covering, key=lambda k: (len(k), [label_key(l) for l in k]))
        return {best: 1}
    keys = [k for k in g.regions if frozenset(k) <= xa]
    covered = {l for k in keys for l in k}
    missing = [l for l in xa if l not in covered]
    if missing:
        raise UncoveredIndex(f"labels {sorted_labels(missing)!r} lie in no region inside the subset")
    keyset = set(keys)
    sup = {k: [s for s in g.supersets[k] if s in keyset] for k in keys}
    cn = _moebius(keys, sup)
    # every label in x_A must be counted exactly once
    for l in xa:
        if sum(c for k, c in cn.items() if l in k) != 1:
            raise UncoveredIndex(f"stitching counts label {l!r} more or less than once")
    return {k: c for k, c in cn.items() if c != 0}


def _stitch_plan(state: GbpState, labels: Iterable) -> tuple:
    """Counting numbers and the label set they live on.

    When some label of ``labels`` lies only in regions reaching outside the
    set (for example a boundary tensor absorbed by a plaquette), the set is
    enlarged by the smallest region holding each such label until it can
    be stitched; the caller sums the extra labels out again.
    """
    g = state.graph
    target = set(labels)
    for _ in range(len(g.regions) + 1):
        try:
            return stitching_counting_numbers(state, target), sorted_labels(target)
        except UncoveredIndex:
            inside = [k for k in g.regions if set(k) <= target]
            covered = {l for k in inside for l in k}
            grown = set(target)
            for l in sorted_labels(target - covered):
                holders = [k for k in g.regions if l in k]
                grown |= set(min(holders, key=lambda k: (len(k), [label_key(x) for x in k])))
            if grown == target:
                raise
            target = grown
    raise UncoveredIndex("label set could not be enlarged to a stitchable one")


def _sum_to(arr: np.ndarray, labels: Sequence, keep: Sequence) -> np.ndarray:
    ks = set(keep)
    drop = tuple(i for i, l in enumerate(labels) if l not in ks)
    if drop:
        arr = arr.sum(axis=drop)
    left = [l for l in labels if l in ks]
    return np.transpose(arr, [left.index(l) for l in keep])


def _broadcast(arr: np.ndarray, labels: Sequence, target: Sequence) -> np.ndarray:
    pos = {l: i for i, l in enumerate(target)}
    order = sorted(range(len(labels)), key=lambda ax: pos[labels[ax]])
    arr = np.transpose(arr, order)
    shape = [1] * len(target)
    for ax in order:
        shape[pos[labels[ax]]] = arr.shape[order.index(ax)]
    return arr.reshape(shape)


def _product_on(tensors: Sequence[LabeledTensor], key: tuple, dims: Mapping) -> np.ndarray:
    out = np.ones(tuple(dims[l] for l in key), dtype=np.complex128)
    for t in tensors:
        out = out * _broadcast(t.dense_array(scaled=False), t.labels, key)
        peak = np.max(np.abs(out))
        if peak > 0:
            out = out / peak
    return out


def _region_weight(state: GbpState, key, exclude: frozenset = frozenset()) -> np.ndarray:
    """Unnormalized belief of a region with the tensors in ``exclude`` left out."""
    g = state.graph
    net = g.network
    kept = [net[i] for i in g.members[key] if i not in exclude]
    w = _product_on(kept, key, g.dims)
    pos = {l: i for i, l in enumerate(key)}
    if key in state._ppos:
        for b in g.child_links[key]:
            w = w * _broadcast(state.messages[(key, b)], b, key)
        return w
    c = g.regions[key].counting_number
    if c == 0:
        return _marginal_weight(state, g.parent_links[key][0], key, exclude)
    for a in g.parent_links[key]:
        w = w * _safe_power(state.messages[(a, key)], -1.0 / c)
    return w


def _marginal_weight(state, parent, key, exclude) -> np.ndarray:
    wa = _region_weight(state, parent, exclude)
    drop = tuple(i for i, l in enumerate(parent) if l not in set(key))
    wa = wa.sum(axis=drop) if drop else wa
    kept_labels = [l for l in parent if l in set(key)]
    return np.transpose(wa, [kept_labels.index(l) for l in key])


def _safe_power(x: np.ndarray, p: float) -> np.ndarray:
    zero = x == 0
    with np.errstate(all="ignore"):
        return np.where(zero, 0.0, np.power(np.where(zero, 1.0, x), p))


def _combine(factors: Sequence[tuple], target: tuple, dims: Mapping):
    """``prod f^p`` broadcast onto ``target`` with ``0^(negative) -> 0``.

    ``factors`` holds ``(array, labels, power)``; arrays over labels outside
    ``target`` are summed down first. Returns the product and the number of
    entries where a vanishing divisor met a nonzero numerator.
    """
    tset = set(target)
    num = np.ones(tuple(dims[l] for l in target), dtype=np.complex128)
    zero_mask = np.zeros(num.shape, dtype=bool)
    for arr, labels, p in factors:
        if p == 0:
            continue
        labels = tuple(labels)
        if not set(labels) <= tset:
            drop = tuple(i for i, l in enumerate(labels) if l not in tset)
            arr = arr.sum(axis=drop)
            labels = tuple(l for l in labels if l in tset)
        peak = np.max(np.abs(arr)) if arr.size else 0.0
        if peak > 0:
            arr = arr / peak
        arr = _broadcast(arr, labels, target)
        if p > 0:
            num = num * (arr if p == 1 else arr ** p)
        else:
            zero = arr == 0
            num = num * _safe_power(arr, p)
            zero_mask = zero_mask | zero
        peak = np.max(np.abs(num))
        if peak > 0:
            num = num / peak
    degenerate = int(np.count_nonzero(zero_mask & (num != 0)))
    return np.where(zero_mask, 0.0, num), degenerate


def _belief_factors(state: GbpState, cn: Mapping) -> list:
    return [(_region_weight(state, k), k, c) for k, c in cn.items()]


def stitched_belief(subset, state: GbpState) -> LabeledTensor:
    """Normalized belief on the labels of a tensor subset.

    ``subset`` is a :class:`TensorSubset` or an iterable of tensor positions.
    """
    sub = _resolve(state, subset)
    return label_belief(state, sub.labels)


def label_belief(state: GbpState, labels: Iterable) -> LabeledTensor:
    """Normalized belief on an arbitrary label set (single region or stitched)."""
    target = sorted_labels(set(labels))
    cn, span = _stitch_plan(state, target)
    arr, _ = _combine(_belief_factors(state, cn), span, state.graph.dims)
    arr = _sum_to(arr, span, target)
    tot = arr.sum()
    if not abs(tot) > 0:
        raise DivisionDegeneracy("stitched belief vanishes identically")
    return LabeledTensor(target, arr / tot)


def _children_disjoint(g) -> bool:
    seen: set = set()
    for b in g.children:
        if seen & set(b):
            return False
        seen |= set(b)
    return True


def _structural_factors(state: GbpState, cn: Mapping, sub: TensorSubset) -> list:
    """Region factors without the subset tensors and messages with net exponents.

    A message ``m_ab`` enters the parent belief with power one and the child
    belief with power ``-1/c_b``; collecting the powers first lets factors
    that cancel between stitched regions drop out exactly.
    """
    g = state.graph
    exclude = frozenset(sub.tensors)
    net = g.network
    factors = []
    powers: dict = {}
    for key, c in cn.items():
        kept = [net[i] for i in g.members[key] if i not in exclude]
        if kept:
            factors.append((_product_on(kept, key, g.dims), key, c))
        if key in state._ppos:
            for b in g.child_links[key]:
                powers[(key, b)] = powers.get((key, b), 0.0) + c
            continue
        cb = g.regions[key].counting_number
        if cb == 0:
            # no message form for this belief; use the parent marginal
            factors.append((_marginal_weight(state, g.parent_links[key][0], key, exclude), key, c))
            continue
        for a in g.parent_links[key]:
            powers[(a, key)] = powers.get((a, key), 0.0) - c / cb
    for (a, b), p in sorted(powers.items(), key=lambda kv: [label_key(l) for l in kv[0][0] + kv[0][1]]):
        if abs(p) > 1e-12:
            factors.append((state.messages[(a, b)], b, p))
    # a subset tensor counted with total power other than one keeps the remainder
    for v in sub.tensors:
        total = sum(c for k, c in cn.items() if v in g.members[k])
        if total != 1:
            t = net[v]
            factors.append((t.dense_array(scaled=False), t.labels, total - 1))
    return factors


def network_derivative(subset, state: GbpState, *, method: str = "auto",
                       sum_interior: bool = True, strict: bool = False) -> Derivative:
    """Approximate derivative of the network with respect to the subset tensors.

    Parameters
    ----------
    method : {"auto", "belief", "structural"}
        ``"belief"`` divides the stitched belief by the subset tensors on
        their support and sets entries where a subset tensor vanishes to
        zero. ``"structural"`` rebuilds every stitched region without the
        subset tensors, so it also yields values where a subset tensor
        vanishes; for simple or block BP this is the outer product of the
        incoming messages. When children overlap, those extra values depend
        on message components that no belief constrains, so ``"auto"``
        picks ``"structural"`` only when all children are disjoint and the
        subset labels can be stitched without enlarging them.
    sum_interior : bool
        Sum over interior labels, leaving a tensor on the boundary labels.
        With ``False`` the result lives on all subset labels.
    strict : bool
        Raise :class:`DivisionDegeneracy` instead of counting degenerate
        entries.
    """
    if method not in ("auto", "belief", "structural"):
        raise ValueError(f"unknown derivative method {method!r}")
    sub = _resolve(state, subset)
    g = state.graph
    cn, span = _stitch_plan(state, sub.labels)
    if method == "auto":
        method = "structural" if _children_disjoint(g) and span == sub.labels else "belief"
    if method == "structural" and span != sub.labels:
        raise UncoveredIndex("the structural derivative needs regions inside the subset labels")
    if method == "structural":
        arr, degenerate = _combine(_structural_factors(state, cn, sub), sub.labels, g.dims)
    else:
        p, degenerate = _combine(_belief_factors(state, cn), span, g.dims)
        p = _sum_to(p, span, sub.labels)
        tensors = [(g.network[v].dense_array(scaled=False), g.network[v].labels, -1)
                   for v in sub.tensors]
        ones = np.ones(p.shape, dtype=np.complex128)
        tt, _ = _combine([(t, l, 1) for t, l, _ in tensors], sub.labels, g.dims)
        support = tt != 0
        scale = np.max(np.abs(p)) if p.size else 0.0
        lost = np.count_nonzero(~support & (np.abs(p) > 1e-12 * scale))
        degenerate += int(lost)
        arr = np.where(support, p / np.where(support, tt, ones), 0.0)
    if degenerate and strict:
        raise DivisionDegeneracy(f"{degenerate} entries divide nonzero mass by zero")
    labels = sub.labels
    if sum_interior and sub.interior:
        axes = tuple(i for i, l in enumerate(labels) if l in set(sub.interior))
        arr = arr.sum(axis=axes)
        labels = sub.boundary
    peak = np.max(np.abs(arr)) if arr.size else 0.0
    if peak > 0:
        arr = arr / peak
    return Derivative(LabeledTensor(labels, arr), sub, dict(cn), degenerate, method)


def _contract_all(tensors: Sequence[tuple]) -> complex:
    """Full contraction of ``(array, labels)`` pairs by one einsum."""
    letters: dict = {}
    terms, ops = [], []
    for arr, labels in tensors:
        for l in labels:
            if l not in letters:
                n = len(letters)
                letters[l] = chr(ord("a") + n) if n < 26 else chr(ord("A") + n - 26)
        terms.append("".join(letters[l] for l in labels))
        ops.append(arr)
    return complex(np.einsum(",".join(terms) + "->", *ops, optimize=True))


def expectation(obs: ObservableSpec, state: GbpState, kets: Sequence[LabeledTensor],
                physical: Mapping | None = None, *, method: str = "auto") -> complex:
    """``<O>`` as the ratio of the environment contracted with sandwiched and plain double factors.

    The environment is :func:`network_derivative` of the operator sites,
    summed over their interior labels.

    Parameters
    ----------
    obs : ObservableSpec
        Operators keyed by network position.
    kets : sequence of LabeledTensor
        Ket tensors in network order, each carrying the virtual labels of
        the matching norm tensor plus one physical label.
    physical : mapping, optional
        Network position -> physical label; defaults to the ket label that
        does not appear on the norm tensor.
    method : str
        Passed to :func:`network_derivative`.
    """
    sites = obs.sites
    net = state.graph.network
    env = network_derivative(sites, state, method=method).tensor
    num_terms = [(env.data, env.labels)]
    den_terms = [(env.data, env.labels)]
    for v in sites:
        ket = kets[v]
        if physical is not None:
            phys = physical[v]
        else:
            extra = [l for l in ket.labels if l not in set(net[v].labels)]
            if len(extra) != 1:
                raise ValueError(f"cannot identify the physical label of ket {v}")
            phys = extra[0]
        plain = double_factor(ket, phys)
        sand = double_factor(ket, phys, operator=obs.operators[v])
        den_terms.append((plain.data, plain.labels))
        num_terms.append((sand.data, sand.labels))
    den = _contract_all(den_terms)
    if not abs(den) > 0:
        raise DivisionDegeneracy("the environment contracted with the plain factors vanishes")
    return _contract_all(num_terms) / den


def energy_entropy_densities(model, state: GbpState, beta: float) -> tuple:
    """Per-site ``(f, e, s)`` for an Ising model carrying ``couplings``.

    ``f`` is the Kikuchi free energy over ``model.n_sites`` (dimensionless,
    ``-log Z / N``), ``e = -sum J <s_i s_j> / N`` from the belief on each
    coupled pair of spin labels, and ``s = beta e - f``.
    """
    if not model.couplings:
        raise ValueError("model carries no couplings")
    n = model.n_sites
    f = kikuchi_free_energy(state).real / n
    spin = np.array([1.0, -1.0])
    cache: dict = {}
    total = 0.0
    for J, l1, l2 in model.couplings:
        key = sorted_labels({l1, l2})
        if key not in cache:
            cache[key] = label_belief(state, key)
        p = cache[key].dense_array([l1, l2]).real
        total += -J * float(spin @ p @ spin)
    e = total / n
    return f, e, beta * e - f
