"""The fully frustrated square-lattice Ising (Villain) model.

Spins sit on an ``2*Lx`` by ``2*Ly`` periodic square lattice (``Lx*Ly`` unit
cells of 2x2 spins). All couplings are ferromagnetic except horizontal bonds
in odd rows, so that every plaquette has exactly one antiferromagnetic bond.
"""

from __future__ import annotations

import numpy as np

from ..regions import Cell, Geometry
from ..tensor import LabeledTensor
from .base import ModelInstance

__all__ = ["villain_network", "coupling", "boltzmann_matrix", "spin_value"]


def spin_value(index: int) -> int:
    """Index 0 is spin +1 and index 1 is spin -1."""
    return 1 - 2 * index


def coupling(row: int, horizontal: bool) -> int:
    return -1 if horizontal and row % 2 == 1 else 1


def boltzmann_matrix(beta: float, J: int) -> np.ndarray:
    """``exp(beta*J*x*x')`` over x, x' in (+1, -1)."""
    s = np.array([1.0, -1.0])
    return np.exp(beta * J * np.outer(s, s))


def villain_network(beta: float, extents=(4, 4), representation: str = "factor_graph"
                    ) -> ModelInstance:
    """Villain model on a torus of ``extents`` 2x2 unit cells.

    ``factor_graph``: one tensor per bond on the two spin labels it joins;
    each spin label is shared by its four bonds. Plaquettes list the four
    bond tensors around each face.

    ``vertex_tensor``: one four-leg tensor per spin. The legs towards the
    left and upper neighbours carry the site's own spin (enforced by a delta),
    the legs towards the right and lower neighbours carry those neighbours'
    spins, and the two bonds leaving to the right and down are absorbed.
    """
    if beta < 0:
        raise ValueError("beta must be non-negative")
    lx, ly = (int(e) for e in extents)
    if lx < 1 or ly < 1:
        raise ValueError("extents must be positive")
    nr, nc = 2 * ly, 2 * lx
    geometry = Geometry(info={"rows": nr, "cols": nc})
    network = []
    couplings = []
    if representation == "factor_graph":
        def spin(r, c):
            return ("s", r % nr, c % nc)
        bond_index = {}
        for r in range(nr):
            for c in range(nc):
                for horizontal in (True, False):
                    J = coupling(r, horizontal)
                    other = spin(r, c + 1) if horizontal else spin(r + 1, c)
                    bond_index[(r, c, horizontal)] = len(network)
                    network.append(LabeledTensor((spin(r, c), other), boltzmann_matrix(beta, J)))
                    couplings.append((J, spin(r, c), other))
        for r in range(nr):
            for c in range(nc):
                tensors = (bond_index[(r, c, True)], bond_index[((r + 1) % nr, c, True)],
                           bond_index[(r, c, False)], bond_index[(r, (c + 1) % nc, False)])
                corners = (spin(r, c), spin(r, c + 1), spin(r + 1, c), spin(r + 1, c + 1))
                geometry.plaquettes.append(Cell(corners, tensors))
    elif representation == "vertex_tensor":
        def h(r, c):
            return ("h", r % nr, c % nc)

        def v(r, c):
            return ("v", r % nr, c % nc)
        site_index = {}
        for r in range(nr):
            for c in range(nc):
                wh = boltzmann_matrix(beta, coupling(r, True))
                wv = boltzmann_matrix(beta, coupling(r, False))
                t = np.einsum("lu,lr,ld->lurd", np.eye(2), wh, wv)
                site_index[(r, c)] = len(network)
                network.append(LabeledTensor((h(r, c - 1), v(r - 1, c), h(r, c), v(r, c)), t))
                couplings.append((coupling(r, True), h(r, c - 1), h(r, c)))
                couplings.append((coupling(r, False), h(r, c - 1), v(r, c)))
        for r in range(nr):
            for c in range(nc):
                bonds = (h(r, c), h(r + 1, c), v(r, c), v(r, c + 1))
                tensors = (site_index[(r, c)], site_index[(r, (c + 1) % nc)],
                           site_index[((r + 1) % nr, c)], site_index[((r + 1) % nr, (c + 1) % nc)])
                geometry.plaquettes.append(Cell(bonds, tensors))
    else:
        raise ValueError(f"unknown representation {representation!r}")
    return ModelInstance("villain", {"beta": beta, "extents": (lx, ly),
                                     "representation": representation},
                         network, geometry, nr * nc, couplings=couplings)
