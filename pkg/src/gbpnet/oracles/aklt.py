"""Plain BP fixed points of the deformed AKLT norm network on the honeycomb lattice.

Messages on every edge are taken equal and real symmetric with unit entry sum,
``m(z, z') = ((1 + (-1)^z mu)(1 + (-1)^z' mu) - c (-1)^[z == z']) / 4``.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import OutsideDomain
from ..models.aklt import aklt_double_factor_closed_form
from .villain import AnalyticFixedPoint

__all__ = [
    "aklt_message",
    "aklt_message_params",
    "aklt_bp_map",
    "aklt_bp_analytic",
    "aklt_correlators",
    "aklt_one_point",
    "xy_anisotropy",
]

SQ3 = math.sqrt(3)


def aklt_message(mu: float, c: float) -> np.ndarray:
    """2x2 message matrix for parameters ``(mu, c)``."""
    sgn = np.array([1.0, -1.0])
    m = np.outer(1 + sgn * mu, 1 + sgn * mu) - c * np.array([[-1.0, 1.0], [1.0, -1.0]])
    return m / 4


def aklt_message_params(m) -> tuple:
    m = np.asarray(m).reshape(2, 2).real
    m = m / m.sum()
    mu = m[0, 0] - m[1, 1]
    c = 2 * (m[0, 0] + m[1, 1]) - 1 - mu * mu
    return mu, c


def aklt_bp_map(params, a: float) -> np.ndarray:
    """One plain-BP update of the uniform message, in ``(mu, c)`` coordinates."""
    t = aklt_double_factor_closed_form(a)
    m = aklt_message(*params).reshape(4)
    new = np.einsum("xyz,y,z->x", t, m, m)
    return np.array(aklt_message_params(new))


def _jacobian(a, x, h=1e-7):
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(2):
        d = np.zeros(2)
        d[k] = h
        cols.append((aklt_bp_map(x + d, a) - aklt_bp_map(x - d, a)) / (2 * h))
    return np.stack(cols, axis=1)


def _fixed_points(a: float) -> dict:
    fps = {"symmetric": (0.0, 1.0)}
    if a < 1:
        fps["xy"] = (0.0, (3 - a * a - 2 * math.sqrt(2 * (1 - a * a))) / (1 + a * a))
    if a > math.sqrt(5):
        fps["neel"] = (math.sqrt((a * a - 5) / (a * a - 1)), 4 / (a * a - 1))
    return fps


def aklt_bp_analytic(a: float) -> AnalyticFixedPoint:
    """The stable BP fixed point for deformation ``a`` with its observables."""
    if not a > 0:
        raise OutsideDomain("the deformation parameter must be positive")
    fps = _fixed_points(a)
    regime = "xy" if a < 1 else ("neel" if a > math.sqrt(5) else "symmetric")
    mu, c = fps[regime]
    jac = _jacobian(a, (mu, c))
    eig = np.linalg.eigvals(jac)
    eig = eig[np.argsort(-np.abs(eig))]
    resid = float(np.max(np.abs(aklt_bp_map((mu, c), a) - np.array([mu, c]))))
    corr = aklt_correlators(a)
    derived = dict(corr)
    derived.update({f"one_point_{k}": v for k, v in aklt_one_point(a).items()})
    derived["xx_minus_yy"] = xy_anisotropy(a)
    return AnalyticFixedPoint("aklt_bp", {"a": a}, {"mu": mu, "c": c, "regime": regime},
                              bool(np.max(np.abs(eig)) < 1), derived=derived,
                              eigenvalues=eig, residual=resid)


def aklt_correlators(a: float) -> dict:
    """Nearest-neighbour ``<S^x S^x>``, ``<S^y S^y>``, ``<S^z S^z>`` at the stable fixed point."""
    if not a > 0:
        raise OutsideDomain("the deformation parameter must be positive")
    a2 = a * a
    if a <= 1:
        # negative, and continuous with the symmetric branch at a = 1
        xx = -(81 + 60 * a * SQ3 - a2 * (38 + 44 * a * SQ3 + 15 * a2)) / (32 * (3 - a2))
        yy = -(25 + a * (20 * SQ3 + a * (2 - 4 * a * SQ3 + a2))) / (32 * (3 - a2))
        zz = -(1 + a2) ** 2 / (8 * (3 - a2))
    elif a < math.sqrt(5):
        xx = -(4 + 4 * SQ3 * a + 3 * a2) / (3 + a2) ** 2
        yy = xx
        zz = -((1 + 3 * a2) / (2 * (3 + a2))) ** 2
    else:
        xx = -(16 + a * (a2 - 3) * (8 * SQ3 - 9 * a + 3 * a2 * a)) / (2 * (a2 - 3) * (a2 - 1) ** 3)
        yy = xx
        zz = -(9 * a2 ** 3 - 45 * a2 ** 2 + 31 * a2 - 27) / (4 * (a2 - 3) * (a2 - 1) ** 2)
    return {"xx": xx, "yy": yy, "zz": zz}


def aklt_one_point(a: float) -> dict:
    """Sublattice-A magnetization magnitude; sublattice B carries the opposite sign.

    The sign of the nonzero component depends on which of the degenerate
    symmetry-broken fixed points is selected and is reported as positive.
    The z component tends to the saturation value 3/2 as ``a`` grows.
    """
    a2 = a * a
    x = abs(3 * (a2 - 2 * a * SQ3 - 5) * math.sqrt(2 * (1 - a2)) / (8 * (a2 - 3))) if a < 1 else 0.0
    z = abs(3 * math.sqrt((a2 - 5) * (a2 - 1)) / (2 * (a2 - 3))) if a > math.sqrt(5) else 0.0
    return {"x": x, "y": 0.0, "z": z}


def xy_anisotropy(a: float) -> float:
    """Magnitude of ``<S^x S^x - S^y S^y>`` at the BP fixed point (zero for a >= 1).

    With real messages the order forms along x, so the signed value equals
    ``xx - yy`` from :func:`aklt_correlators`, which is minus this magnitude.
    """
    if a >= 1:
        return 0.0
    a2 = a * a
    return (1 - a2) * (2 * a2 + 5 * a * SQ3 + 7) / (4 * (3 - a2))
