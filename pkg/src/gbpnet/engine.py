"""The generalized belief propagation fixed-point iteration.

Messages live on (parent, child) links and are stored as plain complex arrays
over the child's labels in canonical order. Each parent keeps a cached
product ``F_a * prod_b m_ab`` so that the marginals needed by an update cost a
single reduction. Children are visited in sorted order and all messages into
one child are replaced together from the pre-update state.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateNormalizer,
    DegenerateRegionGraph,
    LabelMismatch,
    NonFiniteEntry,
    NotAFixedPoint,
)
from .regions import RegionGraph
from .tensor import ZERO_TOL, LabeledTensor

__all__ = [
    "DEFAULT_DAMPING",
    "DEFAULT_EPSILON",
    "DEFAULT_MAX_ITERS",
    "UpdateCoefficients",
    "GbpState",
    "Converged",
    "NotConverged",
    "StabilitySummary",
    "init_messages",
    "update_coefficients",
    "parent_belief",
    "child_belief",
    "update_child_group",
    "sweep",
    "run",
    "kikuchi_free_energy",
    "linear_stability",
    "uniform_message_basis",
    "marginal_crossing",
    "write_trace_csv",
    "make_rng",
    "message_metric",
]

DEFAULT_DAMPING = 0.3
DEFAULT_EPSILON = 1e-10
DEFAULT_MAX_ITERS = 50_000
NONPHYSICAL_IMAG = 1e-6


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Philox4x64 generator keyed by ``seed``; ``stream`` selects a counter block.

    Stream ``k`` starts the counter at ``k * 2**64`` so replicate streams
    never overlap.
    """
    counter = np.zeros(4, dtype=np.uint64)
    counter[1] = np.uint64(stream)
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))


def message_metric(old: np.ndarray, new: np.ndarray) -> float:
    """``1 - |<old, new>|^2 / (|old|^2 |new|^2)``, the squared sine of the angle.

    Evaluated as the squared norm of the part of ``new`` orthogonal to
    ``old`` over ``|new|^2``, which has no cancellation floor near zero.
    """
    oo = np.vdot(old, old).real
    nn = np.vdot(new, new).real
    if not (oo > 0 and nn > 0):
        return 1.0
    rej = new - (np.vdot(old, new) / oo) * old
    return float(min(np.vdot(rej, rej).real / nn, 1.0))


@dataclass(frozen=True)
class UpdateCoefficients:
    """Exponents of the message update for one child region."""

    child: tuple
    parents: tuple
    d_b: float
    kappa: float

    @property
    def A(self) -> dict:
        return {(a, a2): self.kappa - (1.0 if a == a2 else 0.0)
                for a in self.parents for a2 in self.parents}


def update_coefficients(g: RegionGraph, b) -> UpdateCoefficients:
    c = g.regions[b].counting_number
    n = len(g.parent_links[b])
    if c + n == 0:
        raise DegenerateRegionGraph(f"child {b!r} has c_b + |P(b)| = 0")
    return UpdateCoefficients(b, g.parent_links[b], c / (c + n), 1.0 / (c + n))


@dataclass(frozen=True)
class Converged:
    iterations: int
    metric: float
    converged: bool = True


@dataclass(frozen=True)
class NotConverged:
    best_metric: float
    iterations: int
    reason: str = "max_iters"
    converged: bool = False


@dataclass
class StabilitySummary:
    eigenvalues: np.ndarray
    spectral_radius: float
    unstable: bool
    residual: float

    @property
    def stable(self) -> bool:
        return not self.unstable


def _safe_div(num, den):
    """``num / den`` with entries where ``den`` is a structural zero set to 0."""
    zero = np.abs(den) < ZERO_TOL
    if zero.any():
        den = np.where(zero, 1.0, den)
        out = num / den
        out[np.broadcast_to(zero, out.shape)] = 0.0
        return out
    return num / den


def _safe_pow(x, p):
    """Principal power with structural zeros mapped to zero for any sign of ``p``."""
    if p == 1.0:
        return x
    zero = np.abs(x) < ZERO_TOL
    if zero.any():
        out = np.power(np.where(zero, 1.0, x), p)
        out[zero] = 0.0
        return out
    return np.power(x, p)


@dataclass
class _ChildPlan:
    key: tuple
    links: list  # [(parent position, message key, summed axes, broadcast shape)]
    kappa: float
    d_b: float
    fd: np.ndarray | None  # F_b ** d_b, None when it is identically one


class GbpState:
    """Network, region graph, messages and iteration bookkeeping.

    Parameters
    ----------
    graph : RegionGraph
    messages : dict, optional
        (parent key, child key) -> array over the child's canonical labels.
        Defaults to all-ones messages.
    damping : float
        Weight of the new message in the linear mixing step.
    epsilon, max_iters : float, int
        Defaults for :func:`run`.
    schedule : {"sequential", "jacobi"}
    pair_dims : mapping, optional
        Label -> chi for labels that merge a ket and a bra index of
        dimension chi each; enables the per-sweep minimum-eigenvalue
        diagnostic on messages viewed as matrices.
    """

    def __init__(self, graph: RegionGraph, messages: Mapping | None = None, *,
                 damping: float = DEFAULT_DAMPING, epsilon: float = DEFAULT_EPSILON,
                 max_iters: int = DEFAULT_MAX_ITERS, schedule: str = "sequential",
                 pair_dims: Mapping | None = None):
        if not 0.0 < damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if schedule not in ("sequential", "jacobi"):
            raise ValueError(f"unknown schedule {schedule!r}")
        self.graph = graph
        self.damping = float(damping)
        self.epsilon = float(epsilon)
        self.max_iters = int(max_iters)
        self.schedule = schedule
        self.pair_dims = dict(pair_dims) if pair_dims else None
        self.history: list = []
        self.min_eig_history: list = []
        self.iteration = 0
        self._compile()
        self.messages = dict(messages) if messages is not None else init_messages(graph)
        self._refresh()

    # -- compiled plan ---------------------------------------------------
    def _compile(self):
        g = self.graph
        self.message_keys = tuple((a, b) for b in g.children for a in g.parent_links[b])
        self._ppos = {a: i for i, a in enumerate(g.parents)}
        self._F = []
        self._pmsgs = []
        for a in g.parents:
            self._F.append(g.factor(a).data)
            pos = {l: i for i, l in enumerate(a)}
            lst = []
            for b in g.child_links[a]:
                shape = [1] * len(a)
                for l in b:
                    shape[pos[l]] = g.dims[l]
                lst.append(((a, b), tuple(shape)))
            self._pmsgs.append(lst)
        self._plans = []
        for b in g.children:
            co = update_coefficients(g, b)
            links = []
            for a in co.parents:
                bset = set(b)
                axes = tuple(i for i, l in enumerate(a) if l not in bset)
                links.append((self._ppos[a], (a, b), axes))
            fb = g.factor(b).data
            fd = None
            if co.d_b != 0 and not np.all(fb == 1.0):
                fd = _safe_pow(fb, co.d_b)
            self._plans.append(_ChildPlan(b, links, co.kappa, co.d_b, fd))

    def _parent_product(self, i):
        out = self._F[i]
        for key, shape in self._pmsgs[i]:
            out = out * self.messages[key].reshape(shape)
        if out is self._F[i]:
            out = out.copy()
        return out

    def _refresh(self):
        self._P = []
        for i in range(len(self.graph.parents)):
            p = self._parent_product(i)
            peak = np.max(np.abs(p)) if p.size else 0.0
            if peak > 0 and np.isfinite(peak):
                p = p / peak
            self._P.append(p)

    # -- public helpers ---------------------------------------------------
    @property
    def n_messages(self) -> int:
        return len(self.message_keys)

    def copy_messages(self) -> dict:
        return {k: v.copy() for k, v in self.messages.items()}

    def set_messages(self, messages: Mapping):
        self.messages = {k: np.array(v, dtype=np.complex128) for k, v in messages.items()}
        self._refresh()

    def message_tensor(self, a, b) -> LabeledTensor:
        return LabeledTensor(b, self.messages[(a, b)])

    def coefficients(self, b) -> UpdateCoefficients:
        return update_coefficients(self.graph, b)

    # -- core update ------------------------------------------------------
    def _compute_group(self, plan: _ChildPlan):
        """Undamped, normalized new messages for one child from the current caches."""
        rs = []
        for i, key, axes in plan.links:
            marg = self._P[i].sum(axis=axes) if axes else self._P[i]
            rs.append(marg / self.messages[key])
        news = self._combine(plan, rs)
        if news is None:
            rs = []
            for i, key, axes in plan.links:
                marg = self._P[i].sum(axis=axes) if axes else self._P[i]
                rs.append(_safe_div(marg, self.messages[key]))
            news = self._combine(plan, rs, safe=True)
        return news

    def _combine(self, plan, rs, safe=False):
        k = plan.kappa
        pw = _safe_pow if safe else (lambda x, p: x if p == 1.0 else np.power(x, p))
        s = pw(rs[0], k)
        for r in rs[1:]:
            s = s * pw(r, k)
        if plan.fd is not None:
            s = s * plan.fd
        out = []
        for r in rs:
            new = _safe_div(s, r) if safe else s / r
            tot = new.sum()
            if not cmath.isfinite(tot):
                if not safe:
                    return None
                raise NonFiniteEntry(f"non-finite message into child {plan.key!r}")
            if not abs(tot) > ZERO_TOL:
                raise DegenerateNormalizer(f"message into child {plan.key!r} sums to {tot!r}")
            out.append(new / tot)
        return out

    def _accept(self, plan: _ChildPlan, news, metric_acc: list):
        lam = self.damping
        for (i, key, _), new in zip(plan.links, news):
            old = self.messages[key]
            metric_acc.append(message_metric(old, new))
            mixed = new if lam == 1.0 else (1.0 - lam) * old + lam * new
            tot = mixed.sum()
            if not abs(tot) > ZERO_TOL or not cmath.isfinite(tot):
                raise DegenerateNormalizer(f"damped message into {plan.key!r} sums to {tot!r}")
            self.messages[key] = mixed / tot

    def _update_caches(self, plan: _ChildPlan, olds):
        for (i, key, _), old in zip(plan.links, olds):
            new = self.messages[key]
            shape = self._bshape(i, key)
            ok = np.all(np.abs(old) > 1e-200)
            if ok:
                self._P[i] = self._P[i] * (new / old).reshape(shape)
            else:
                self._P[i] = self._parent_product(i)

    def _bshape(self, i, key):
        cache = self.__dict__.setdefault("_bshape_cache", {})
        s = cache.get(key)
        if s is None:
            for k2, shape in self._pmsgs[i]:
                cache[k2] = shape
            s = cache[key]
        return s

    def group_update(self, b, *, apply: bool = True):
        """New messages into child ``b``; optionally accept them (with damping)."""
        plan = self._plans[self.graph.children.index(b)]
        with np.errstate(all="ignore"):
            news = self._compute_group(plan)
        result = {key: new for (_, key, _), new in zip(plan.links, news)}
        if apply:
            olds = [self.messages[key] for _, key, _ in plan.links]
            self._accept(plan, news, [])
            self._update_caches(plan, olds)
        return result

    def sweep(self) -> float:
        """One pass over all children; returns the convergence metric."""
        acc: list = []
        with np.errstate(all="ignore"):
            if self.schedule == "sequential":
                for plan in self._plans:
                    news = self._compute_group(plan)
                    olds = [self.messages[key] for _, key, _ in plan.links]
                    self._accept(plan, news, acc)
                    self._update_caches(plan, olds)
            else:
                allnews = [self._compute_group(plan) for plan in self._plans]
                for plan, news in zip(self._plans, allnews):
                    self._accept(plan, news, acc)
            self._refresh()
        metric = float(np.mean(acc)) if acc else 0.0
        if not math.isfinite(metric):
            raise NonFiniteEntry("non-finite convergence metric")
        self.iteration += 1
        self.history.append(metric)
        if self.pair_dims is not None:
            self.min_eig_history.append(min_message_eigenvalue(self))
        return metric

    def residual_metric(self) -> float:
        """Metric of a synchronous update without changing the state."""
        acc = []
        with np.errstate(all="ignore"):
            for plan in self._plans:
                news = self._compute_group(plan)
                for (_, key, _), new in zip(plan.links, news):
                    acc.append(message_metric(self.messages[key], new))
        return float(np.mean(acc)) if acc else 0.0

    def synchronous_map(self, messages: Mapping, damping: float = 1.0) -> dict:
        """Messages after one Jacobi sweep from ``messages`` (state restored after)."""
        saved = self.messages
        self.messages = dict(messages)
        self._refresh()
        try:
            out = {}
            with np.errstate(all="ignore"):
                for plan in self._plans:
                    news = self._compute_group(plan)
                    for (_, key, _), new in zip(plan.links, news):
                        old = self.messages[key]
                        mixed = new if damping == 1.0 else (1.0 - damping) * old + damping * new
                        out[key] = mixed / mixed.sum()
        finally:
            self.messages = saved
            self._refresh()
        return out


# -- module-level API ---------------------------------------------------------

def init_messages(g: RegionGraph, strategy: str = "uniform", *, c: float = 0.1, seed: int = 0,
                  explicit: Mapping | None = None, pair_dims: Mapping | None = None) -> dict:
    """Initial messages for every (parent, child) link.

    ``uniform`` gives all-ones; ``noisy`` gives ``1 + c*r`` with ``r ~ U(0,1)``
    drawn from :func:`make_rng` in sorted link order, entries row-major;
    ``explicit`` takes tensors (or arrays in canonical child order) from
    ``explicit`` keyed by (parent key, child key).

    With ``pair_dims`` (merged ket-bra label -> chi) noisy messages whose
    labels are all merged pairs are replaced by their Hermitian part viewed
    as ket-by-bra matrices, so norm-network messages start Hermitian.
    """
    keys = sorted(((a, b) for b in g.children for a in g.parent_links[b]),
                  key=lambda k: (tuple(map(repr, k[0])), tuple(map(repr, k[1]))))
    out = {}
    if strategy == "uniform" or (strategy == "noisy" and c == 0):
        for a, b in keys:
            out[(a, b)] = np.ones(g.shape(b), dtype=np.complex128)
        return out
    if strategy == "noisy":
        rng = make_rng(seed)
        for a, b in keys:
            shape = g.shape(b)
            m = (1.0 + c * rng.random(int(np.prod(shape)))).reshape(shape) + 0j
            if pair_dims and all(l in pair_dims for l in b):
                m = _hermitian_part(m, [pair_dims[l] for l in b])
            out[(a, b)] = m
        return out
    if strategy == "explicit":
        if explicit is None:
            raise ValueError("explicit initialization needs a message map")
        for a, b in keys:
            m = explicit[(a, b)]
            if isinstance(m, LabeledTensor):
                if set(m.labels) != set(b) or m.ndim != len(b):
                    raise LabelMismatch(f"message for {(a, b)!r} has labels {m.labels!r}")
                arr = m.dense_array(b)
            else:
                arr = np.asarray(m, dtype=np.complex128)
                if arr.shape != g.shape(b):
                    raise LabelMismatch(f"message for {(a, b)!r} has shape {arr.shape}")
            out[(a, b)] = np.array(arr, dtype=np.complex128)
        return out
    raise ValueError(f"unknown initialization strategy {strategy!r}")


def parent_belief(state: GbpState, a):
    """Normalized belief on parent ``a`` and its log normalizer ``log Z_a``."""
    g = state.graph
    i = state._ppos[a]
    p = state._parent_product(i)
    tot = p.sum()
    if not abs(tot) > ZERO_TOL or not cmath.isfinite(tot):
        raise DegenerateNormalizer(f"parent {a!r} belief sums to {tot!r}")
    return LabeledTensor(a, p / tot), cmath.log(tot) + g.factor(a).log_scale


def _child_product(state: GbpState, b):
    g = state.graph
    c = g.regions[b].counting_number
    prod = g.factor(b).data.copy()
    for a in g.parent_links[b]:
        prod = prod * _safe_pow(state.messages[(a, b)], -1.0 / c)
    return prod


def child_belief(state: GbpState, b):
    """Normalized belief on child ``b`` and ``log Z_b``.

    Children with counting number zero have no belief of their own in the
    update equations; their belief is taken as the marginal of the first
    parent's belief, and ``log Z_b`` is reported as zero.
    """
    g = state.graph
    c = g.regions[b].counting_number
    if c == 0:
        a = g.parent_links[b][0]
        pa, _ = parent_belief(state, a)
        drop = [l for l in a if l not in set(b)]
        from .tensor import sum_over
        return sum_over(pa, drop).transpose(b), 0j
    with np.errstate(all="ignore"):
        p = _child_product(state, b)
    tot = p.sum()
    if not abs(tot) > ZERO_TOL or not cmath.isfinite(tot):
        raise DegenerateNormalizer(f"child {b!r} belief sums to {tot!r}")
    return LabeledTensor(b, p / tot), cmath.log(tot) + g.factor(b).log_scale


def belief(state: GbpState, key):
    if key in state._ppos:
        return parent_belief(state, key)
    return child_belief(state, key)


def update_child_group(b, state: GbpState, *, apply: bool = True) -> dict:
    """Update every message into child ``b`` at once (damped, normalized)."""
    return state.group_update(b, apply=apply)


def sweep(state: GbpState) -> float:
    return state.sweep()


def run(state: GbpState, epsilon: float | None = None, max_iters: int | None = None, *,
        callback: Callable | None = None):
    """Sweep until the metric drops to ``epsilon`` or ``max_iters`` sweeps pass."""
    eps = state.epsilon if epsilon is None else float(epsilon)
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    limit = state.max_iters if max_iters is None else int(max_iters)
    if limit <= 0:
        try:
            m = state.residual_metric()
        except (DegenerateNormalizer, NonFiniteEntry):
            m = float("inf")
        return NotConverged(m, 0, "max_iters")
    best = float("inf")
    for k in range(1, limit + 1):
        try:
            metric = state.sweep()
        except DegenerateNormalizer:
            return NotConverged(best, k, "degenerate_normalizer")
        except NonFiniteEntry:
            return NotConverged(best, k, "non_finite")
        best = min(best, metric)
        if callback is not None:
            callback(state, metric)
        if metric <= eps:
            return Converged(k, metric)
    return NotConverged(best, limit, "max_iters")


def log_partition_functions(state: GbpState) -> dict:
    """Region key -> log Z_r (log scales included)."""
    out = {}
    for a in state.graph.parents:
        out[a] = parent_belief(state, a)[1]
    for b in state.graph.children:
        out[b] = child_belief(state, b)[1]
    return out


def kikuchi_free_energy(state: GbpState) -> complex:
    """``-sum_r c_r log Z_r``; approximates ``-log Z`` at a fixed point.

    For a child with counting number zero the message terms of its parents'
    beliefs have no counterpart to cancel against, so
    ``sum_a <log m_ab>`` under the child's belief is added back.
    """
    g = state.graph
    total = 0j
    for a in g.parents:
        total -= parent_belief(state, a)[1]
    for b in g.children:
        c = g.regions[b].counting_number
        if c:
            total -= c * child_belief(state, b)[1]
        else:
            pb = child_belief(state, b)[0].data
            for a in g.parent_links[b]:
                m = state.messages[(a, b)]
                mask = pb != 0
                with np.errstate(all="ignore"):
                    total += np.sum(pb[mask] * np.log(m[mask]))
    return total


def is_nonphysical(free_energy: complex) -> bool:
    return abs(complex(free_energy).imag) > NONPHYSICAL_IMAG


def _as_matrix(m: np.ndarray, chis) -> np.ndarray:
    k = len(chis)
    arr = m.reshape([x for chi in chis for x in (chi, chi)])
    arr = np.transpose(arr, list(range(0, 2 * k, 2)) + list(range(1, 2 * k, 2)))
    n = int(np.prod(chis))
    return arr.reshape(n, n)


def _hermitian_part(m: np.ndarray, chis) -> np.ndarray:
    k = len(chis)
    mat = _as_matrix(m, chis)
    herm = 0.5 * (mat + mat.conj().T)
    arr = herm.reshape(list(chis) + list(chis))
    order = [x for i in range(k) for x in (i, k + i)]
    return np.transpose(arr, order).reshape(m.shape)


def min_message_eigenvalue(state: GbpState) -> float:
    """Smallest eigenvalue of the Hermitian part of each message viewed as a
    ket-by-bra matrix, minimized over messages (needs ``pair_dims``)."""
    pd = state.pair_dims
    groups: dict = {}
    for (a, b), m in state.messages.items():
        chis = tuple(pd[l] for l in b)
        groups.setdefault(chis, []).append(_as_matrix(m, chis))
    worst = float("inf")
    for mats in groups.values():
        stack = np.stack(mats)
        herm = 0.5 * (stack + np.conj(np.swapaxes(stack, 1, 2)))
        worst = min(worst, float(np.min(np.linalg.eigvalsh(herm)[:, 0])))
    return worst


def _flatten(messages: Mapping, keys) -> np.ndarray:
    return np.concatenate([messages[k].ravel() for k in keys])


def _unflatten(vec: np.ndarray, like: Mapping, keys) -> dict:
    out = {}
    pos = 0
    for k in keys:
        n = like[k].size
        out[k] = vec[pos:pos + n].reshape(like[k].shape)
        pos += n
    return out


def linear_stability(state: GbpState, fixed_point: Mapping | None = None, *,
                     basis: Sequence[Mapping] | None = None, damping: float = 1.0,
                     step: float = 1e-6, top: int = 8, tol: float = 1e-6) -> StabilitySummary:
    """Eigenvalues of one synchronous sweep linearized around a fixed point.

    Central finite differences are taken along real directions; the map is
    holomorphic, so these columns determine the complex Jacobian. With
    ``basis`` (a list of message-shaped perturbations) the Jacobian is
    projected onto their span, which is exact for invariant subspaces.
    """
    fp = dict(state.messages if fixed_point is None else fixed_point)
    keys = state.message_keys
    fp = {k: np.asarray(fp[k], dtype=np.complex128) / np.asarray(fp[k]).sum() for k in keys}
    image = state.synchronous_map(fp, damping)
    x0 = _flatten(fp, keys)
    resid = float(np.max(np.abs(_flatten(image, keys) - x0)))
    if resid > tol:
        raise NotAFixedPoint(f"messages move by {resid:.3g} under one sweep")

    if basis is None:
        dirs = None
        n = x0.size
    else:
        dirs = np.stack([_flatten({k: np.asarray(v[k], dtype=np.complex128) for k in keys}, keys)
                         for v in basis], axis=1)
        n = dirs.shape[1]
    cols = []
    for j in range(n):
        if dirs is None:
            d = np.zeros_like(x0)
            d[j] = 1.0
        else:
            d = dirs[:, j]
        plus = state.synchronous_map(_unflatten(x0 + step * d, fp, keys), damping)
        minus = state.synchronous_map(_unflatten(x0 - step * d, fp, keys), damping)
        cols.append((_flatten(plus, keys) - _flatten(minus, keys)) / (2 * step))
    jac = np.stack(cols, axis=1)
    if dirs is not None:
        jac = np.linalg.lstsq(dirs, jac, rcond=None)[0]
    eig = np.linalg.eigvals(jac)
    eig = eig[np.argsort(-np.abs(eig))]
    radius = float(np.abs(eig[0])) if eig.size else 0.0
    return StabilitySummary(eig[:top], radius, radius > 1.0 + 1e-8, resid)


def uniform_message_basis(state: GbpState, patterns: Sequence) -> list:
    """Perturbations that add the same array to every message, one per pattern.

    Spans a subspace that is invariant under the update whenever the model
    and the fixed point are translation invariant, which removes modes that
    break that invariance from :func:`linear_stability`.
    """
    out = []
    for p in patterns:
        p = np.asarray(p, dtype=np.complex128)
        out.append({k: p.reshape(state.messages[k].shape) for k in state.message_keys})
    return out


def marginal_crossing(left: Sequence, right: Sequence) -> tuple:
    """Where straight-line fits of the spectral radius from both sides meet.

    ``left`` and ``right`` are ``(parameter, radius)`` pairs sampled below and
    above a suspected marginal point, at least two per side. Returns the
    parameter at the intersection of the two least-squares lines and the
    radius there.
    """
    if len(left) < 2 or len(right) < 2:
        raise ValueError("need at least two samples on each side")
    kl, ql = np.polyfit(*np.asarray(left, dtype=float).T, 1)
    kr, qr = np.polyfit(*np.asarray(right, dtype=float).T, 1)
    if kl == kr:
        raise ValueError("parallel fits have no crossing")
    x = (qr - ql) / (kl - kr)
    return float(x), float(kl * x + ql)


def write_trace_csv(path, state: GbpState, free_energies: Sequence[complex] | None = None):
    """Write per-sweep rows: iteration, metric, F real/imag, min eigenvalue."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "metric", "free_energy_real", "free_energy_imag", "min_eigenvalue"])
        for i, m in enumerate(state.history, start=1):
            f = free_energies[i - 1] if free_energies is not None and i - 1 < len(free_energies) else None
            e = state.min_eig_history[i - 1] if i - 1 < len(state.min_eig_history) else None
            w.writerow([i, repr(m), "" if f is None else repr(complex(f).real),
                        "" if f is None else repr(complex(f).imag), "" if e is None else repr(e)])
