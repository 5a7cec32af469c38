"""Residual-entropy references for ice-type models."""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from .villain import AnalyticFixedPoint

__all__ = [
    "ice_gbp_analytic",
    "square_ice_transfer_log_z",
    "PAULING",
    "LIEB_SQUARE",
    "HEXAGONAL_R1_QUOTED",
]

#: Pauling's estimate, reproduced by plain BP on every four-coordinated lattice.
PAULING = 1.5
#: Exact square-ice value ``(4/3)^(3/2)``.
LIEB_SQUARE = 8 * math.sqrt(3) / 9
#: Quoted plaquette-GBP value for hexagonal ice.
HEXAGONAL_R1_QUOTED = 1.5042627


def _bisect(h, lo=-1.0, hi=1.0) -> float:
    flo = h(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = h(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-17:
            break
    return 0.5 * (lo + hi)


def _square():
    # c_v = c_p^3 substituted into c_p = -(3 c_v^2 + 1)/(3 + c_v^2)
    cp = _bisect(lambda c: c + (3 * c ** 6 + 1) / (3 + c ** 6))
    cv = cp ** 3
    es0 = (1 - cp ** 3) ** 2 * (3 + 2 * cp ** 3 + 3 * cp ** 6) / (2 * (1 + cp ** 4) ** 3)
    resid = max(abs(cv - cp ** 3), abs(cp + (3 * cv ** 2 + 1) / (3 + cv ** 2)))
    return {"c_p": cp, "c_v": cv}, es0, resid


def _diamond():
    cp = _bisect(lambda c: c + (3 * c ** 5 + 1) / (3 + c ** 5))
    es0 = 1.5 * ((1 + cp ** 5) ** 4 * (1 - cp ** 5) ** 8 / (1 + cp ** 6) ** 10)
    resid = abs(cp + (3 * cp ** 5 + 1) / (3 + cp ** 5))
    return {"c_p": cp}, es0, resid


def ice_gbp_analytic(lattice: str) -> AnalyticFixedPoint:
    """Plaquette GBP residual entropy ``e^{s0}`` for ``square``, ``diamond`` or ``hexagonal``."""
    key = {"diamond_cubic": "diamond", "hexagonal_ice": "hexagonal"}.get(lattice, lattice)
    if key == "square":
        sol, es0, resid = _square()
    elif key == "diamond":
        sol, es0, resid = _diamond()
    elif key == "hexagonal":
        sol, es0, resid = {}, HEXAGONAL_R1_QUOTED, 0.0
    else:
        raise ValueError(f"unknown ice lattice {lattice!r}")
    return AnalyticFixedPoint("ice_gbp", {"lattice": key}, sol, True,
                              derived={"exp_s0": es0, "s0": math.log(es0), "bp_exp_s0": PAULING},
                              residual=resid)


def square_ice_transfer_log_z(lx: int, ly: int) -> float:
    """Exact ``log Z`` of square ice on an ``lx`` x ``ly`` torus by a row transfer matrix.

    The state of a row is the tuple of its ``lx`` downward vertical bonds;
    the horizontal bonds of the row are summed inside the matrix element.
    """
    states = list(product((0, 1), repeat=lx))
    index = {s: i for i, s in enumerate(states)}
    T = np.zeros((len(states), len(states)))
    for up in states:
        for down in states:
            # vertex c has legs: h[c-1] (left), h[c] (right), up[c], down[c]
            count = 0
            for h in product((0, 1), repeat=lx):
                if all(h[c - 1] + h[c] + up[c] + down[c] == 2 for c in range(lx)):
                    count += 1
            T[index[up], index[down]] = count
    ev = np.linalg.eigvals(T)
    # trace of T^ly from eigenvalues; T is integer so this is exact to rounding
    z = np.sum(ev ** ly).real
    return math.log(z)
