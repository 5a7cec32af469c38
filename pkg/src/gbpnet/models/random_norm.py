"""Norm networks of random PEPS on an open square lattice."""

from __future__ import annotations

import numpy as np

from ..engine import make_rng
from ..regions import Cell, Geometry
from ..tensor import LabeledTensor
from .base import ModelInstance, double_factor
from .lattices import minimal_cycles, square_lattice

__all__ = ["random_norm_network", "negative_fraction"]


def random_norm_network(n: int = 6, chi: int = 3, alpha: float = 0.0, seed: int = 0,
                        stream: int = 0, phys_dim: int = 2) -> ModelInstance:
    """``n`` x ``n`` open-boundary PEPS with entries uniform on ``(-alpha, 1 - alpha)``.

    Ket tensors are drawn site by site in row-major order from
    ``make_rng(seed, stream)``; each site's entries fill its
    (virtual legs..., physical) array in row-major order.
    """
    if n < 2 or chi < 1 or not 0.0 <= alpha <= 1.0:
        raise ValueError("need n >= 2, chi >= 1 and 0 <= alpha <= 1")
    lat = square_lattice(n, n, periodic=False)
    rng = make_rng(seed, stream)
    network, kets = [], []
    for i in range(lat.n_sites):
        labels = tuple(("b", k) for k in lat.site_bonds[i])
        shape = (chi,) * len(labels) + (phys_dim,)
        psi = rng.random(shape) - alpha
        ket = LabeledTensor(labels + (("s", i),), psi)
        kets.append(ket)
        network.append(double_factor(ket, ("s", i)))
    geometry = Geometry(info={"lattice": "square", "n": n, "open": True})
    for sites, bonds in minimal_cycles(lat, 4):
        geometry.plaquettes.append(Cell(tuple(("b", k) for k in bonds), sites))
    return ModelInstance("random_norm", {"n": n, "chi": chi, "alpha": alpha, "seed": seed,
                                         "stream": stream},
                         network, geometry, lat.n_sites, kets=kets,
                         pair_dims={("b", k): chi for k in range(len(lat.bonds))}, lattice=lat)


def negative_fraction(model: ModelInstance) -> float:
    """Fraction of norm-network entries with negative real part."""
    neg = sum(int(np.count_nonzero(t.dense_array().real < 0)) for t in model.network)
    tot = sum(t.size for t in model.network)
    return neg / tot
