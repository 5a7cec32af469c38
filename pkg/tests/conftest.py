import numpy as np
import pytest

from gbpnet.models.lattices import minimal_cycles, square_lattice
from gbpnet.regions import Cell, Geometry
from gbpnet.tensor import LabeledTensor


def graph_network(n, extra_edges=0, seed=0, dims=(2, 3), dangling=0.3, low=0.1):
    """Random positive network on a random tree plus ``extra_edges`` chords.

    Each tensor may also carry a dangling label of its own (summed once).
    """
    rng = np.random.default_rng(seed)
    edges = [(int(rng.integers(0, i)), i) for i in range(1, n)]
    have = {tuple(sorted(e)) for e in edges}
    tries = 0
    while extra_edges and tries < 100:
        tries += 1
        i, j = (int(x) for x in rng.choice(n, 2, replace=False))
        e = tuple(sorted((i, j)))
        if e not in have:
            have.add(e)
            edges.append(e)
            extra_edges -= 1
    labels = [[] for _ in range(n)]
    size = {}
    for k, (i, j) in enumerate(edges):
        size[("e", k)] = int(rng.choice(dims))
        labels[i].append(("e", k))
        labels[j].append(("e", k))
    for i in range(n):
        if rng.random() < dangling:
            size[("d", i)] = int(rng.choice(dims))
            labels[i].append(("d", i))
    net = []
    for i in range(n):
        shape = [size[l] for l in labels[i]]
        net.append(LabeledTensor(labels[i], rng.uniform(low, 1.0, shape)))
    return net


def grid_network(lx, ly, chi=2, seed=0, periodic=False, low=0.1):
    """Random positive tensors on a square grid with its plaquettes as geometry."""
    lat = square_lattice(lx, ly, periodic=periodic)
    rng = np.random.default_rng(seed)
    net = []
    for bonds in lat.site_bonds:
        labels = tuple(("b", k) for k in bonds)
        net.append(LabeledTensor(labels, rng.uniform(low, 1.0, (chi,) * len(labels))))
    geo = Geometry()
    for sites, bonds in minimal_cycles(lat, 4):
        geo.plaquettes.append(Cell(tuple(("b", k) for k in bonds), sites))
    return net, geo


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bp_message_gap(state, ref):
    """Largest entry difference between engine messages and :class:`SimpleBP` messages.

    With one region per tensor the engine message on (tensor region, bond)
    is the plain-BP message arriving at that tensor along that bond.
    """
    gap = 0.0
    for a, b in state.message_keys:
        (i,) = state.graph.members[a]
        gap = max(gap, float(np.max(np.abs(state.messages[(a, b)] - ref.incoming(i, b[0])))))
    return gap
