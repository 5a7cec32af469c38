"""Reference values for the fully frustrated square-lattice Ising model.

``villain_exact_f`` evaluates the known double integral for the free energy
density. The inner angular integral is done in closed form,
``int_0^pi ln(A - B cos t) dt = pi ln((A + sqrt(A^2 - B^2)) / 2)``, leaving a
one-dimensional adaptive quadrature. The plain BP and plaquette GBP fixed
points are solved from their reduced message equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from ..errors import QuadratureNonConvergence

__all__ = [
    "AnalyticFixedPoint",
    "villain_exact_f",
    "villain_exact_fes",
    "villain_exact_s0",
    "villain_bp_analytic",
    "villain_gbp_analytic",
    "bp_update",
    "gbp_update",
    "g_map",
    "BETA_C_BP",
    "FD_STEP",
    "S0_GBP",
]

#: Step of the five-point derivative used for energies.
FD_STEP = 1e-4
#: Inverse temperature where the paramagnetic BP fixed point loses stability.
BETA_C_BP = math.atanh(1 / math.sqrt(3))
#: Zero-temperature entropy of the plaquette GBP fixed point.
S0_GBP = math.log(3 * math.sqrt(3) / 4)


@dataclass
class AnalyticFixedPoint:
    """Closed-form or reduced-equation solution of a message-passing fixed point."""

    model: str
    params: dict
    solution: dict
    stable: bool
    derived: dict = field(default_factory=dict)
    eigenvalues: np.ndarray | None = None
    residual: float = 0.0


def _inner(phi: float, z: float) -> float:
    z2 = z * z
    a = (1 + z2) ** 2 - 2 * z2 * math.cos(phi)
    b = 2 * z2
    return math.log((a + math.sqrt(max(a * a - b * b, 0.0))) / 2)


def _integral(z: float, tol: float) -> tuple:
    if z == 0.0:
        return 0.0, 0.0
    val, err, info = integrate.quad(_inner, 0.0, math.pi, args=(z,), epsabs=tol, epsrel=0.0,
                                    limit=200, full_output=True)[:3]
    if err > max(tol, 1e-15) * 10:
        raise QuadratureNonConvergence(f"quadrature error {err:.3g} above {tol:.3g}")
    return val, err


def villain_exact_f(beta: float, tol: float = 1e-13) -> float:
    """Free energy density ``-lim log(Z)/N`` per spin (in units of temperature)."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    z = math.tanh(beta)
    val, _ = _integral(z, tol)
    # ln(2 cosh beta) written to stay finite at large beta
    log2cosh = beta + math.log1p(math.exp(-2 * beta))
    return -(log2cosh + val / (4 * math.pi))


def villain_exact_fes(beta: float, h: float = FD_STEP) -> tuple:
    """``(f, e, s)`` per spin: ``e = df/dbeta`` by a five-point stencil, ``s = beta e - f``."""
    f = villain_exact_f(beta)
    if beta < 2 * h:
        # one-sided at the boundary: f is even in beta, so reflect
        pts = [villain_exact_f(abs(beta + k * h)) for k in (-2, -1, 1, 2)]
    else:
        pts = [villain_exact_f(beta + k * h) for k in (-2, -1, 1, 2)]
    e = (pts[0] - 8 * pts[1] + 8 * pts[2] - pts[3]) / (12 * h)
    return f, e, beta * e - f


def villain_exact_s0(tol: float = 1e-13) -> float:
    """Zero-temperature entropy per spin, the ``z -> 1`` limit of the integral term."""
    val, _ = _integral(1.0, tol)
    return val / (4 * math.pi)


# -- plain BP --------------------------------------------------------------

def _f(x, y):
    return (2 * x + y + x * x * y) / (1 + 2 * x * y + x * x)


def bp_update(mu, beta: float) -> np.ndarray:
    """Reduced BP map on ``(mu_pp, mu_mp, mu_pm, mu_mm)``."""
    pp, mp, pm, mm = mu
    t = math.tanh(beta)
    return np.array([t * _f(mp, pp), t * _f(mm, pm), t * _f(pp, mp), -t * _f(pm, mm)])


def _jacobian(fun, x, h=1e-7) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(len(x)):
        d = np.zeros_like(x)
        d[k] = h
        cols.append((fun(x + d) - fun(x - d)) / (2 * h))
    return np.stack(cols, axis=1)


def villain_bp_analytic(beta: float, n_starts: int = 64, seed: int = 0) -> AnalyticFixedPoint:
    """Paramagnetic BP fixed point, its spectrum and a multi-start uniqueness check."""
    zero = np.zeros(4)
    jac = _jacobian(lambda m: bp_update(m, beta), zero)
    eig = np.linalg.eigvals(jac)
    eig = eig[np.argsort(-np.abs(eig))]
    rng = np.random.default_rng(seed)
    others = []
    for _ in range(n_starts):
        x0 = rng.uniform(-1, 1, 4)
        sol = optimize.root(lambda m: bp_update(m, beta) - m, x0, tol=1e-14)
        if sol.success and np.all(np.abs(sol.x) <= 1 + 1e-9) and \
                np.max(np.abs(bp_update(sol.x, beta) - sol.x)) < 1e-10 and \
                np.max(np.abs(sol.x)) > 1e-6:
            others.append(sol.x)
    t = math.tanh(beta)
    return AnalyticFixedPoint(
        "villain_bp", {"beta": beta}, {"mu": zero}, bool(np.max(np.abs(eig)) < 1),
        derived={"energy_per_spin": -2 * t, "beta_c": BETA_C_BP,
                 "other_physical_fixed_points": len(others)},
        eigenvalues=eig, residual=float(np.max(np.abs(bp_update(zero, beta)))))


# -- plaquette GBP ---------------------------------------------------------

def g_map(x, beta: float):
    t = math.tanh(beta)
    return (x + t) / (1 + x * t)


def gbp_update(c, beta: float) -> np.ndarray:
    """Reduced plaquette GBP map on ``(c_pp, c_pm, c_mm)``."""
    pp, pm, mm = c
    g = g_map
    return np.array([-g(-mm, beta) * g(pm, beta) ** 2,
                     -g(pp, beta) * g(pm, beta) * g(-mm, beta),
                     g(pp, beta) * g(pm, beta) ** 2])


def _c_star(beta: float) -> float:
    if beta == 0:
        return 0.0
    lo, hi = -1.0, 1.0
    h = lambda c: c + g_map(c, beta) ** 3  # noqa: E731
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-17:
            break
    return 0.5 * (lo + hi)


def _plaquette_logz(c: float, beta: float) -> float:
    """``log`` of the plaquette normalizer with messages at the symmetric point.

    Plaquette corners are enumerated in the order (top-left, top-right,
    bottom-left, bottom-right): the top bond is ferromagnetic (c), the
    bottom bond antiferromagnetic (-c), the verticals ferromagnetic (c).
    """
    total = 0.0
    for x in np.ndindex(2, 2, 2, 2):
        s = [1 - 2 * v for v in x]
        w = 1.0
        for (i, j, J, ce) in ((0, 1, 1, c), (2, 3, -1, -c), (0, 2, 1, c), (1, 3, 1, c)):
            w *= math.exp(beta * J * s[i] * s[j]) * (1 + ce * s[i] * s[j]) / 4
        total += w * (0.5 ** 4)
    return math.log(total)


def villain_gbp_analytic(beta: float) -> AnalyticFixedPoint:
    """Symmetric plaquette fixed point ``(c*, c*, -c*)`` with Kikuchi ``f, e, s`` per spin."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    c = _c_star(beta)
    sol = np.array([c, c, -c])
    resid = float(np.max(np.abs(gbp_update(sol, beta) - sol)))
    ep, em = math.exp(beta), math.exp(-beta)
    z_edge = (2 * ep * (1 + c) ** 2 + 2 * em * (1 - c) ** 2) / 16
    z_vertex = 32.0
    f = -_plaquette_logz(c, beta) + 2 * math.log(z_edge) - math.log(z_vertex)
    rho = (ep * (1 + c) ** 2 - em * (1 - c) ** 2) / (ep * (1 + c) ** 2 + em * (1 - c) ** 2)
    e = -2 * rho
    jac = _jacobian(lambda x: gbp_update(x, beta), sol)
    eig = np.linalg.eigvals(jac)
    eig = eig[np.argsort(-np.abs(eig))]
    return AnalyticFixedPoint(
        "villain_gbp", {"beta": beta}, {"c_pp": c, "c_pm": c, "c_mm": -c},
        bool(np.max(np.abs(eig)) < 1),
        derived={"f": f, "e": e, "s": beta * e - f, "edge_correlation": rho},
        eigenvalues=eig, residual=resid)
