"""Periodic and open lattices with bond lists, minimal cycles and cages.

A lattice is given by primitive vectors, basis positions and a nearest
neighbour distance. Neighbours are found by distance in the infinite crystal,
so the same builder wires the square, honeycomb, diamond and wurtzite
(hexagonal ice) structures. Cycles are searched in the infinite crystal and
then folded onto the torus, which avoids mistaking short wrap-around loops of
a small torus for plaquettes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Lattice",
    "periodic_lattice",
    "square_lattice",
    "honeycomb_lattice",
    "diamond_lattice",
    "wurtzite_lattice",
    "minimal_cycles",
    "cages",
]

_TOL = 1e-6


@dataclass
class Lattice:
    """Sites and nearest-neighbour bonds of a finite lattice.

    Attributes
    ----------
    kind : str
    extents : tuple of int
        Number of unit cells along each primitive vector.
    periodic : bool
    sites : list of (cell, basis index)
    bonds : list of (site i, site j, cell shift of j relative to i's image)
        ``i < j`` is not guaranteed; each undirected bond appears once.
    site_bonds : list of list of int
        Bond ids at each site, ordered by neighbour direction.
    """

    kind: str
    extents: tuple
    periodic: bool
    vectors: np.ndarray
    basis: np.ndarray
    sites: list
    bonds: list
    site_bonds: list
    offsets: list = field(default_factory=list)  # per basis: [(basis j, cell shift)]

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def site_index(self, cell, b) -> int | None:
        cell = tuple(cell)
        if self.periodic:
            cell = tuple(c % e for c, e in zip(cell, self.extents))
        elif any(c < 0 or c >= e for c, e in zip(cell, self.extents)):
            return None
        return self._index[(cell, b)]

    def position(self, cell, b) -> np.ndarray:
        return np.asarray(cell, dtype=float) @ self.vectors + self.basis[b]

    def bond_between(self, i, j) -> list:
        return [k for k in self.site_bonds[i] if set(self.bonds[k][:2]) == {i, j}]


def _neighbour_offsets(vectors, basis, dist) -> list:
    dim = len(vectors)
    out = []
    for a in range(len(basis)):
        lst = []
        for shift in itertools.product((-1, 0, 1), repeat=dim):
            for b in range(len(basis)):
                d = np.asarray(shift, dtype=float) @ vectors + basis[b] - basis[a]
                if abs(np.linalg.norm(d) - dist) < _TOL:
                    lst.append((b, tuple(shift), d))
        lst.sort(key=lambda x: tuple(np.round(x[2], 6)))
        out.append([(b, s) for b, s, _ in lst])
    return out


def periodic_lattice(kind, vectors, basis, extents, nn_dist, periodic=True) -> Lattice:
    """Build a lattice from primitive ``vectors`` and ``basis`` positions."""
    vectors = np.asarray(vectors, dtype=float)
    basis = np.asarray(basis, dtype=float)
    extents = tuple(int(e) for e in extents)
    if periodic and any(e < 2 for e in extents):
        raise ValueError("periodic lattices need at least 2 cells per direction")
    offsets = _neighbour_offsets(vectors, basis, nn_dist)
    sites = [(cell, b) for cell in itertools.product(*(range(e) for e in extents))
             for b in range(len(basis))]
    lat = Lattice(kind, extents, periodic, vectors, basis, sites, [], [[] for _ in sites], offsets)
    lat._index = {s: i for i, s in enumerate(sites)}
    slot: dict = {}
    for i, (cell, a) in enumerate(sites):
        for b, shift in offsets[a]:
            back = tuple(-x for x in shift)
            if (a, b, shift) > (b, a, back):
                continue  # registered from the other end
            j = lat.site_index(tuple(c + x for c, x in zip(cell, shift)), b)
            if j is None:
                continue
            k = len(lat.bonds)
            lat.bonds.append((i, j, shift))
            slot[(i, b, shift)] = k
            slot[(j, a, back)] = k
    for i, (cell, a) in enumerate(sites):
        lat.site_bonds[i] = [slot[(i, b, shift)] for b, shift in offsets[a]
                             if (i, b, shift) in slot]
    return lat


def square_lattice(lx, ly, periodic=True) -> Lattice:
    return periodic_lattice("square", [[1, 0], [0, 1]], [[0, 0]], (lx, ly), 1.0, periodic)


def honeycomb_lattice(lx, ly, periodic=True) -> Lattice:
    vec = [[1.0, 0.0], [0.5, math.sqrt(3) / 2]]
    basis = [[0.0, 0.0], [0.5, math.sqrt(3) / 6]]
    return periodic_lattice("honeycomb", vec, basis, (lx, ly), 1 / math.sqrt(3), periodic)


def diamond_lattice(l1, l2, l3, periodic=True) -> Lattice:
    """Diamond cubic (cubic ice) on the FCC primitive cell, two sites per cell."""
    vec = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
    basis = [[0.0, 0.0, 0.0], [0.25, 0.25, 0.25]]
    return periodic_lattice("diamond_cubic", vec, basis, (l1, l2, l3), math.sqrt(3) / 4, periodic)


def wurtzite_lattice(l1, l2, l3, periodic=True) -> Lattice:
    """Oxygen positions of hexagonal ice (ideal wurtzite), four sites per cell."""
    c = math.sqrt(8 / 3)
    vec = np.array([[1.0, 0.0, 0.0], [0.5, math.sqrt(3) / 2, 0.0], [0.0, 0.0, c]])
    u = 3 / 8
    frac = [[1 / 3, 1 / 3, 0.0], [2 / 3, 2 / 3, 0.5], [1 / 3, 1 / 3, u], [2 / 3, 2 / 3, 0.5 + u]]
    basis = np.asarray(frac) @ vec
    return periodic_lattice("hexagonal_ice", vec, basis, (l1, l2, l3), u * c, periodic)


def _infinite_cycles(lat: Lattice, length: int) -> set:
    """Simple cycles of ``length`` bonds through home-cell sites of the crystal.

    Nodes are (basis index, cell) pairs of the infinite crystal; each cycle is
    returned as a frozenset of its nodes, so translates are distinct.
    """
    dim = len(lat.extents)
    found = set()
    for a in range(len(lat.basis)):
        start = (a, (0,) * dim)
        stack = [(start, (start,))]
        while stack:
            node, path = stack.pop()
            b0, cell = node
            for b, shift in lat.offsets[b0]:
                nxt = (b, tuple(c + s for c, s in zip(cell, shift)))
                if len(path) == length:
                    if nxt == start:
                        found.add(frozenset(path))
                    continue
                if nxt in path:
                    continue
                # only walk paths whose start is the minimal node, so each
                # cycle is found from one of its sites
                if nxt < start:
                    continue
                stack.append((nxt, path + (nxt,)))
    return found


def minimal_cycles(lat: Lattice, length: int) -> list:
    """Cycles of ``length`` bonds folded onto the lattice.

    Returns a sorted list of ``(site ids, bond ids)`` tuples. Raises if a
    cycle does not stay a simple cycle after folding (torus too small).
    """
    node_sets = _infinite_cycles(lat, length)
    out = set()
    for nodes in node_sets:
        # translate so that every translate of the cycle on the torus is produced
        for cell in itertools.product(*(range(e) for e in lat.extents)):
            sites = []
            ok = True
            for b, c in nodes:
                idx = lat.site_index(tuple(x + y for x, y in zip(c, cell)), b)
                if idx is None:
                    ok = False
                    break
                sites.append(idx)
            if not ok:
                continue
            if len(set(sites)) != length:
                raise ValueError("lattice too small: a cycle folds onto itself")
            bonds = _cycle_bonds(lat, nodes, cell)
            out.add((tuple(sorted(sites)), tuple(sorted(bonds))))
    cycles = sorted(out)
    keys = [c[1] for c in cycles]
    if len(set(keys)) != len(keys):
        raise ValueError("lattice too small: distinct cycles share the same bonds")
    return cycles


def _cycle_bonds(lat, nodes, cell) -> list:
    nodes = list(nodes)
    node_set = set(nodes)
    bonds = []
    for b0, c0 in nodes:
        i = lat.site_index(tuple(x + y for x, y in zip(c0, cell)), b0)
        for b, shift in lat.offsets[b0]:
            nb = (b, tuple(x + s for x, s in zip(c0, shift)))
            if nb in node_set:
                j = lat.site_index(tuple(x + y for x, y in zip(nb[1], cell)), b)
                cand = [k for k in lat.site_bonds[i]
                        if _bond_matches(lat, k, i, j, b0, shift)]
                bonds.extend(cand)
    return sorted(set(bonds))


def _bond_matches(lat, k, i, j, b0, shift) -> bool:
    bi, bj, s = lat.bonds[k]
    if (bi, bj) == (i, j) and s == tuple(shift):
        return True
    if (bi, bj) == (j, i) and s == tuple(-x for x in shift):
        return True
    return False


def cages(lat: Lattice, ring_length: int, n_rings: int) -> list:
    """Closed cages built from ``n_rings`` minimal rings.

    A cage is a set of rings in which every bond used lies on exactly two of
    the rings. Returned as sorted ``(site ids, bond ids)`` tuples.
    """
    rings = minimal_cycles(lat, ring_length)
    by_bond: dict = {}
    for r, (_, bonds) in enumerate(rings):
        for k in bonds:
            by_bond.setdefault(k, []).append(r)
    found = set()

    def extend(chosen: tuple):
        count: dict = {}
        for r in chosen:
            for k in rings[r][1]:
                count[k] = count.get(k, 0) + 1
        open_bonds = sorted(k for k, v in count.items() if v == 1)
        if len(chosen) == n_rings:
            if not open_bonds and all(v == 2 for v in count.values()):
                found.add(tuple(sorted(chosen)))
            return
        if any(v > 2 for v in count.values()) or not open_bonds:
            return
        k = open_bonds[0]
        for r in by_bond[k]:
            if r not in chosen and r > -1:
                extend(chosen + (r,))

    for r in range(len(rings)):
        extend((r,))
    out = []
    for combo in sorted(found):
        sites = sorted({s for r in combo for s in rings[r][0]})
        bonds = sorted({k for r in combo for k in rings[r][1]})
        out.append((tuple(sites), tuple(bonds)))
    return sorted(set(out))
