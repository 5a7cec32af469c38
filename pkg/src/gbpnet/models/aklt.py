"""Norm network of the deformed spin-3/2 AKLT state on the honeycomb lattice."""

from __future__ import annotations

import math

import numpy as np

from ..regions import Cell, Geometry
from ..tensor import LabeledTensor
from .base import ModelInstance, double_factor
from .lattices import honeycomb_lattice, minimal_cycles

__all__ = ["aklt_kets", "aklt_double_factor", "aklt_double_factor_closed_form",
           "aklt_norm_network", "spin_matrices"]


def spin_matrices(s: float = 1.5) -> dict:
    """``Sx, Sy, Sz, I`` in the basis m = s, s-1, ..., -s from ladder operators."""
    ms = np.arange(s, -s - 1, -1)
    n = len(ms)
    sp = np.zeros((n, n))
    for k in range(1, n):
        m = ms[k]
        sp[k - 1, k] = math.sqrt(s * (s + 1) - m * (m + 1))
    sm = sp.T
    return {"Sx": (sp + sm) / 2 + 0j, "Sy": (sp - sm) / 2j, "Sz": np.diag(ms) + 0j,
            "I": np.eye(n, dtype=complex)}


def aklt_kets(a: float):
    """Site tensors ``A[z1, z2, z3, s]`` and ``B[z1, z2, z3, s]``.

    The physical index runs over m = 3/2, 1/2, -1/2, -3/2 and a virtual
    index 0 (1) carries spin up (down). ``A`` is the symmetric projection of
    three virtual spins, weighted by ``a`` on the fully polarized states.
    ``B`` absorbs a bond singlet ``[[0, 1], [-1, 0]]`` on each leg, so that
    contracting equal virtual indices across a bond gives the valence-bond
    state. Both share the same double factor.
    """
    A = np.zeros((2, 2, 2, 4))
    for z in np.ndindex(2, 2, 2):
        w = sum(z)
        A[z + (w,)] = a if w in (0, 3) else 1.0
    eps = np.array([[0.0, 1.0], [-1.0, 0.0]])
    B = np.einsum("ai,bj,ck,ijks->abcs", eps, eps, eps, A)
    return A, B


def aklt_double_factor(a: float, sublattice: str = "A") -> np.ndarray:
    """Explicit ket-bra trace, each leg merged as ``z*2 + z'`` (shape 4x4x4)."""
    A, B = aklt_kets(a)
    ket = LabeledTensor(("x", "y", "z", "s"), A if sublattice == "A" else B)
    return double_factor(ket, "s").dense_array()


def aklt_double_factor_closed_form(a: float) -> np.ndarray:
    out = np.zeros((4, 4, 4))
    for z in np.ndindex(2, 2, 2):
        for zp in np.ndindex(2, 2, 2):
            w, wp = sum(z), sum(zp)
            if (w == 0 and wp == 0) or (w == 3 and wp == 3):
                v = a * a
            elif w == wp and w in (1, 2):
                v = 1.0
            else:
                v = 0.0
            out[tuple(2 * zi + zpi for zi, zpi in zip(z, zp))] = v
    return out


def aklt_norm_network(a: float, extents=(3, 3)) -> ModelInstance:
    """Honeycomb torus of ``extents`` two-site cells.

    Bond labels ``("b", k)`` merge ket and bra virtual indices (dimension 4).
    Plaquettes are the hexagons with their six internal bonds.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    lat = honeycomb_lattice(*extents)
    A, B = aklt_kets(a)
    network, kets = [], []
    for i, (cell, b) in enumerate(lat.sites):
        labels = tuple(("b", k) for k in lat.site_bonds[i])
        ket = LabeledTensor(labels + (("s", i),), A if b == 0 else B)
        kets.append(ket)
        network.append(double_factor(ket, ("s", i)))
    geometry = Geometry(info={"lattice": "honeycomb", "extents": tuple(extents)})
    for sites, bonds in minimal_cycles(lat, 6):
        geometry.plaquettes.append(Cell(tuple(("b", k) for k in bonds), sites))
    pair_dims = {("b", k): 2 for k in range(len(lat.bonds))}
    return ModelInstance("aklt", {"a": a, "extents": tuple(extents)}, network, geometry,
                         lat.n_sites, kets=kets, pair_dims=pair_dims, lattice=lat)
