"""Region graphs: parent regions, recursive intersections and counting numbers.

A region is a set of index labels. The caller picks the parent regions (or a
preset does); children are discovered by intersecting parents pairwise, then
intersecting the newly found children pairwise, and so on until a generation
adds nothing new. Every region carries a Moebius counting number so that the
counting numbers of all supersets of a region (itself included) sum to one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import CoverageError, DegenerateRegionGraph, DimMismatch, GeometryMissing, UnknownLabel
from .tensor import LabeledTensor, label_key, sorted_labels

__all__ = [
    "Region",
    "RegionGraph",
    "Cell",
    "Geometry",
    "network_dims",
    "build_regions",
    "counting_numbers",
    "region_factor",
    "preset_regions",
    "PRESETS",
]

PRESETS = (
    "simple_bp",
    "block_bp",
    "r1_plaquettes",
    "r2_plaquettes",
    "r1_voxels",
    "r2_voxels",
    "factor_graph_plaquettes",
)


@dataclass(frozen=True)
class Region:
    """A set of index labels, identified by its sorted label tuple ``key``."""

    key: tuple
    counting_number: int
    kind: str  # "parent" or "child"
    level: int  # 0 for parents, generation depth for children

    @property
    def labels(self) -> frozenset:
        return frozenset(self.key)

    def __len__(self):
        return len(self.key)


@dataclass(frozen=True)
class Cell:
    """A plaquette or voxel of a lattice.

    ``bonds`` are the internal indices (the loop or cage edges); ``tensors``
    are the positions in the network of the tensors sitting on the cell.
    """

    bonds: tuple
    tensors: tuple


@dataclass
class Geometry:
    """Lattice metadata consumed by the plaquette and voxel presets."""

    plaquettes: list = field(default_factory=list)
    voxels: list = field(default_factory=list)
    info: dict = field(default_factory=dict)


def network_dims(network: Sequence[LabeledTensor]) -> dict:
    """Label -> dimension over the whole network, checking consistency."""
    dims: dict = {}
    for t in network:
        for l, d in zip(t.labels, t.shape):
            if dims.setdefault(l, d) != d:
                raise DimMismatch(f"label {l!r} has dimension {dims[l]} and {d}")
    return dims


class RegionGraph:
    """The poset of parent and child regions together with region factors.

    Attributes
    ----------
    regions : dict
        Region key -> :class:`Region`, in canonical key order.
    parents, children : tuple
        Region keys of each kind.
    parent_links : dict
        Child key -> keys of the top-level parents containing it, ``P(b)``.
    child_links : dict
        Parent key -> keys of the children it contains, ``C(a)``.
    supersets : dict
        Region key -> keys of every strictly larger region containing it.
    factors : dict
        Region key -> region factor on the region's labels (canonical order).
    members : dict
        Region key -> positions of the network tensors inside the region.
    """

    def __init__(self, network, regions, parents, children, parent_links, child_links,
                 supersets, dims, members):
        self.network = tuple(network)
        self.regions = regions
        self.parents = parents
        self.children = children
        self.parent_links = parent_links
        self.child_links = child_links
        self.supersets = supersets
        self.dims = dims
        self.members = members
        self._factors: dict = {}

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions.values())

    def __getitem__(self, key) -> Region:
        return self.regions[key]

    def counting_number(self, key) -> int:
        return self.regions[key].counting_number

    def shape(self, key) -> tuple:
        return tuple(self.dims[l] for l in key)

    def factor(self, key) -> LabeledTensor:
        if key not in self._factors:
            self._factors[key] = _factor_from_members(
                key, [self.network[i] for i in self.members[key]], self.dims)
        return self._factors[key]

    @property
    def factors(self) -> dict:
        return {k: self.factor(k) for k in self.regions}

    def check_counting_numbers(self) -> bool:
        """Whether every region satisfies the inclusion-exclusion identity exactly."""
        for key, r in self.regions.items():
            total = r.counting_number + sum(self.regions[s].counting_number
                                            for s in self.supersets[key])
            if total != 1:
                return False
        return True

    def to_dict(self) -> dict:
        """JSON-ready description (labels rendered with ``str``)."""
        def names(key):
            return [str(l) for l in key]
        return {
            "regions": [
                {"labels": names(k), "kind": r.kind, "level": r.level,
                 "counting_number": r.counting_number}
                for k, r in self.regions.items()
            ],
            "parent_links": [
                {"child": names(b), "parents": [names(a) for a in ps]}
                for b, ps in self.parent_links.items()
            ],
        }

    def dump_json(self, path=None, **kw) -> str:
        text = json.dumps(self.to_dict(), indent=kw.pop("indent", 1), **kw)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def __repr__(self):
        return (f"RegionGraph({len(self.parents)} parents, {len(self.children)} children, "
                f"{len(self.network)} tensors)")


def _key(labels: Iterable) -> tuple:
    return sorted_labels(set(labels))


def _sort_keys(keys) -> list:
    return sorted(keys, key=lambda k: tuple(label_key(l) for l in k))


def _strict_supersets(keys: list) -> dict:
    """Key -> strict supersets among ``keys`` using a label -> region index."""
    by_label: dict = {}
    sets = {k: frozenset(k) for k in keys}
    for k in keys:
        for l in k:
            by_label.setdefault(l, set()).add(k)
    out = {}
    for k in keys:
        if not k:
            out[k] = ()
            continue
        # the rarest label gives the smallest candidate pool
        pool = min((by_label[l] for l in k), key=len)
        s = sets[k]
        out[k] = tuple(_sort_keys(c for c in pool if len(c) > len(k) and s < sets[c]))
    return out


def build_regions(parents: Iterable[Iterable[Hashable]], network: Sequence[LabeledTensor]
                  ) -> RegionGraph:
    """Build the region graph generated by ``parents`` over ``network``.

    Parents that are strict subsets of another parent are dropped (their
    tensors are absorbed by the larger region) so that every remaining parent
    keeps counting number one.
    """
    network = list(network)
    dims = network_dims(network)
    pkeys = {_key(p) for p in parents}
    pkeys.discard(())
    for k in pkeys:
        for l in k:
            if l not in dims:
                raise UnknownLabel(f"parent region uses label {l!r} absent from the network")
    psets = {k: frozenset(k) for k in pkeys}
    maximal = [k for k in pkeys if not any(psets[k] < psets[o] for o in pkeys if len(o) > len(k))]
    maximal = _sort_keys(maximal)

    for i, t in enumerate(network):
        s = frozenset(t.labels)
        if not any(s <= psets[k] for k in maximal):
            raise CoverageError(f"tensor {i} with labels {t.labels!r} lies in no parent region")

    level_of = {k: 0 for k in maximal}
    generation = maximal
    level = 0
    while generation:
        level += 1
        sets = [frozenset(k) for k in generation]
        found = set()
        for i, j in combinations(range(len(generation)), 2):
            inter = sets[i] & sets[j]
            if inter:
                k = _key(inter)
                if k not in level_of:
                    found.add(k)
        generation = _sort_keys(found)
        for k in generation:
            level_of[k] = level

    keys = _sort_keys(level_of)
    supersets = _strict_supersets(keys)
    cnums = _moebius(keys, supersets)

    parent_set = set(maximal)
    regions = {k: Region(k, cnums[k], "parent" if k in parent_set else "child", level_of[k])
               for k in keys}
    children = tuple(k for k in keys if k not in parent_set)
    parent_links = {b: tuple(a for a in supersets[b] if a in parent_set) for b in children}
    child_links = {a: [] for a in maximal}
    for b in children:
        for a in parent_links[b]:
            child_links[a].append(b)
    child_links = {a: tuple(v) for a, v in child_links.items()}

    members = _members(keys, network)
    return RegionGraph(network, regions, tuple(maximal), children, parent_links, child_links,
                       supersets, dims, members)


def _moebius(keys: list, supersets: Mapping) -> dict:
    out: dict = {}
    for k in sorted(keys, key=len, reverse=True):
        out[k] = 1 - sum(out[s] for s in supersets[k])
    return out


def _members(keys: list, network) -> dict:
    by_label: dict = {}
    for i, t in enumerate(network):
        for l in t.labels:
            by_label.setdefault(l, []).append(i)
    out = {}
    for k in keys:
        s = frozenset(k)
        cand = sorted({i for l in k for i in by_label.get(l, ())})
        out[k] = tuple(i for i in cand if frozenset(network[i].labels) <= s)
    return out


def counting_numbers(g: RegionGraph) -> dict:
    """Region key -> counting number."""
    return {k: r.counting_number for k, r in g.regions.items()}


def _factor_from_members(key, tensors, dims) -> LabeledTensor:
    """Hadamard product of ``tensors`` broadcast to the labels ``key``.

    The product is rescaled to unit maximum magnitude; the removed scale goes
    into ``log_scale`` so large-beta factors never overflow.
    """
    shape = tuple(dims[l] for l in key)
    data = np.ones(shape, dtype=np.complex128)
    log_scale = 0.0
    pos = {l: i for i, l in enumerate(key)}
    for t in tensors:
        arr = t.dense_array(scaled=False)
        order = sorted(range(t.ndim), key=lambda ax: pos[t.labels[ax]])
        arr = np.transpose(arr, order)
        bshape = [1] * len(key)
        for ax in order:
            bshape[pos[t.labels[ax]]] = t.shape[ax]
        data = data * arr.reshape(bshape)
        log_scale += t.log_scale
        peak = np.max(np.abs(data)) if data.size else 0.0
        if peak > 0 and (peak > 1e100 or peak < 1e-100):
            data = data / peak
            log_scale += float(np.log(peak))
    peak = np.max(np.abs(data)) if data.size else 0.0
    if peak > 0 and peak != 1.0:
        data = data / peak
        log_scale += float(np.log(peak))
    return LabeledTensor(key, data, log_scale=log_scale)


def region_factor(region, network: Sequence[LabeledTensor]) -> LabeledTensor:
    """Hadamard product of all tensors whose labels lie inside ``region``.

    ``region`` may be a :class:`Region` or any iterable of labels. Regions
    holding no complete tensor get the all-ones factor.
    """
    key = region.key if isinstance(region, Region) else _key(region)
    dims = network_dims(network)
    s = frozenset(key)
    for l in key:
        if l not in dims:
            raise UnknownLabel(f"region label {l!r} is absent from the network")
    inside = [t for t in network if frozenset(t.labels) <= s]
    return _factor_from_members(key, inside, dims)


def preset_regions(network: Sequence[LabeledTensor], preset: str, geometry: Geometry | None = None,
                   *, partition: Sequence[Sequence[int]] | None = None) -> list:
    """Parent regions (as label tuples) for a named region choice.

    Parameters
    ----------
    preset : str
        One of :data:`PRESETS` (dashes are accepted in place of underscores).
    geometry : Geometry, optional
        Required by the plaquette and voxel presets.
    partition : sequence of sequences of int, optional
        Tensor positions per block, required by ``block_bp``.
    """
    preset = preset.replace("-", "_")
    tensor_regions = [_key(t.labels) for t in network]
    if preset == "simple_bp":
        return tensor_regions
    if preset == "block_bp":
        if partition is None:
            raise ValueError("block_bp needs a partition of the tensors")
        return [_key(l for i in block for l in network[i].labels) for block in partition]
    if preset not in PRESETS:
        raise ValueError(f"unknown region preset {preset!r}")

    kind = "voxels" if "voxel" in preset else "plaquettes"
    cells = getattr(geometry, kind, None) if geometry is not None else None
    if not cells:
        raise GeometryMissing(f"preset {preset!r} needs {kind} metadata")
    if preset == "factor_graph_plaquettes":
        return [_key(l for i in c.tensors for l in network[i].labels) for c in cells]
    if preset.startswith("r1"):
        return tensor_regions + [_key(c.bonds) for c in cells]
    # R2: internal plus external indices of each cell. Per-tensor regions are
    # included too; those inside a cell are dropped again by build_regions.
    full = [_key(list(c.bonds) + [l for i in c.tensors for l in network[i].labels])
            for c in cells]
    return tensor_regions + full


def check_update_coefficients(g: RegionGraph):
    """Raise if some child has ``c_b + |P(b)| == 0``."""
    for b in g.children:
        if g.regions[b].counting_number + len(g.parent_links[b]) == 0:
            raise DegenerateRegionGraph(f"child {b!r} has c_b + |P(b)| = 0")
