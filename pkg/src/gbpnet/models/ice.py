"""Ice-type (two-in two-out) vertex models on four-coordinated bipartite lattices.

Each bond carries a binary index. On a bipartite lattice the ice rule at
every vertex is that exactly two of its four bond indices equal one.
"""

from __future__ import annotations

import numpy as np

from ..regions import Cell, Geometry
from ..tensor import LabeledTensor, to_sparse
from .base import ModelInstance
from .lattices import cages, diamond_lattice, minimal_cycles, square_lattice, wurtzite_lattice

__all__ = ["ice_tensor", "ice_network", "DEFAULT_EXTENTS"]

DEFAULT_EXTENTS = {
    "square": (4, 4),
    "diamond_cubic": (3, 3, 3),
    "hexagonal_ice": (3, 3, 2),
}

_RING = {"square": 4, "diamond_cubic": 6, "hexagonal_ice": 6}
_ALIASES = {"diamond": "diamond_cubic", "hexagonal": "hexagonal_ice", "ih": "hexagonal_ice",
            "ic": "diamond_cubic"}


def ice_tensor(labels=("a", "b", "c", "d"), sparse: bool = False) -> LabeledTensor:
    """Four-leg tensor equal to one when exactly two legs are set."""
    idx = np.indices((2, 2, 2, 2)).sum(axis=0)
    t = LabeledTensor(labels, (idx == 2).astype(float))
    return to_sparse(t) if sparse else t


def ice_network(lattice: str = "square", extents=None, *, sparse: bool = False,
                voxels: bool = False) -> ModelInstance:
    """Ice model on a torus.

    Parameters
    ----------
    lattice : {"square", "hexagonal_ice", "diamond_cubic"}
    extents : tuple of int, optional
        Unit cells per direction; see :data:`DEFAULT_EXTENTS`.
    sparse : bool
        Store vertex tensors in coordinate form.
    voxels : bool
        Also enumerate adamantane cages (diamond only).
    """
    lattice = _ALIASES.get(lattice, lattice)
    if lattice not in _RING:
        raise ValueError(f"unknown ice lattice {lattice!r}")
    extents = tuple(extents or DEFAULT_EXTENTS[lattice])
    builder = {"square": square_lattice, "diamond_cubic": diamond_lattice,
               "hexagonal_ice": wurtzite_lattice}[lattice]
    lat = builder(*extents)
    for i, b in enumerate(lat.site_bonds):
        if len(b) != 4:
            raise ValueError(f"site {i} has coordination {len(b)}, not 4")
    network = [ice_tensor(tuple(("b", k) for k in bonds), sparse) for bonds in lat.site_bonds]
    geometry = Geometry(info={"lattice": lattice, "extents": extents})
    for sites, bonds in minimal_cycles(lat, _RING[lattice]):
        geometry.plaquettes.append(Cell(tuple(("b", k) for k in bonds), sites))
    if voxels:
        if lattice != "diamond_cubic":
            raise ValueError("cage enumeration is implemented for the diamond lattice only")
        if min(extents) < 3:
            # cages wrap onto themselves and their intersections multiply
            raise ValueError("cage enumeration needs at least 3 cells per direction")
        for sites, bonds in cages(lat, 6, 4):
            geometry.voxels.append(Cell(tuple(("b", k) for k in bonds), sites))
    return ModelInstance("ice", {"lattice": lattice, "extents": extents}, network, geometry,
                         lat.n_sites, lattice=lat)
