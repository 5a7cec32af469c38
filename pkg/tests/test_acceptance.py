"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time
from types import SimpleNamespace

import numpy as np
import pytest
from conftest import bp_message_gap, graph_network, grid_network

from gbpnet.engine import (
    GbpState,
    child_belief,
    init_messages,
    kikuchi_free_energy,
    linear_stability,
    marginal_crossing,
    parent_belief,
    run,
    uniform_message_basis,
)
from gbpnet.models.aklt import aklt_norm_network, spin_matrices
from gbpnet.models.ice import ice_network
from gbpnet.models.random_norm import random_norm_network
from gbpnet.models.villain import villain_network
from gbpnet.observables import ObservableSpec, energy_entropy_densities, expectation, \
    network_derivative
from gbpnet.oracles.aklt import aklt_correlators, xy_anisotropy
from gbpnet.oracles.exact import brute_force_log_z, exact_contract
from gbpnet.oracles.ice import PAULING, ice_gbp_analytic
from gbpnet.oracles.villain import (
    BETA_C_BP,
    S0_GBP,
    villain_exact_f,
    villain_exact_s0,
    villain_gbp_analytic,
)
from gbpnet.regions import build_regions, counting_numbers, preset_regions
from gbpnet.simple_bp import SimpleBP
from gbpnet.tensor import sum_over

CATALAN = 0.915965594177219015054603514932
S = spin_matrices()


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def graph(net, preset="simple_bp", geo=None):
    return build_regions(preset_regions(net, preset, geo), net)


def bond_correlators(m, state, method="auto"):
    i, j, _ = m.lattice.bonds[0]
    return {k: expectation(ObservableSpec({i: S[op], j: S[op]}), state, m.kets,
                           method=method).real
            for k, op in (("xx", "Sx"), ("yy", "Sy"), ("zz", "Sz"))}


def aklt_state(a, preset="simple_bp", eps=1e-24, damping=1.0, max_iters=20_000):
    m = aklt_norm_network(a, (3, 3))
    g = graph(m.network, preset, m.geometry)
    msgs = init_messages(g, "noisy", c=0.1, seed=1, pair_dims=m.pair_dims)
    state = GbpState(g, msgs, damping=damping, pair_dims=m.pair_dims)
    res = run(state, eps, max_iters)
    return m, state, res


# -- 1 ---------------------------------------------------------------------------

def test_criterion_1_simple_bp_equivalence(capsys):
    t0 = time.perf_counter()
    worst, sweeps = 0.0, 0
    for seed in range(30):
        net = graph_network(4 + seed % 6, extra_edges=seed % 4, seed=seed, dangling=1.0)
        state = GbpState(graph(net), damping=0.3)
        ref = SimpleBP(net, damping=0.3)
        for _ in range(40):
            m1, m2 = state.sweep(), ref.sweep()
            worst = max(worst, bp_message_gap(state, ref))
            sweeps += 1
            if max(m1, m2) < 1e-20:
                break
    tree_gap = 0.0
    for seed in range(10):
        net = graph_network(8, extra_edges=0, seed=100 + seed)
        state = GbpState(graph(net), damping=1.0)
        assert run(state, 1e-28, 200).converged
        tree_gap = max(tree_gap, abs(kikuchi_free_energy(state) + brute_force_log_z(net)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and tree_gap <= 1e-10 and dt < 10
    report(capsys, 1, ok, f"max message gap {worst:.2e} over {sweeps} sweeps on 30 networks, "
                          f"tree |F + log Z| {tree_gap:.2e}, {dt:.1f} s")
    assert ok


# -- 2 ---------------------------------------------------------------------------

def test_criterion_2_villain_bp_instability(capsys):
    t0 = time.perf_counter()
    radii = {}
    for beta in (BETA_C_BP - 1e-3, BETA_C_BP + 1e-3):
        m = villain_network(beta, (4, 4), "vertex_tensor")
        # all-ones messages are the paramagnetic fixed point
        radii[beta] = linear_stability(GbpState(graph(m.network)))
    lo, hi = radii.values()
    dt = time.perf_counter() - t0
    ok = lo.stable and hi.unstable and dt < 30
    report(capsys, 2, ok, f"spectral radius {lo.spectral_radius:.6f} at beta_c - 1e-3, "
                          f"{hi.spectral_radius:.6f} at beta_c + 1e-3, {dt:.1f} s")
    assert ok


# -- 3 ---------------------------------------------------------------------------

def test_criterion_3_villain_gbp_accuracy(capsys):
    t0 = time.perf_counter()
    betas = np.round(np.arange(0.1, 5.0 + 1e-9, 0.1), 10)
    worst = {"f": 0.0, "e": 0.0, "s": 0.0}
    all_converged = True
    low = None
    for beta in betas:
        m = villain_network(float(beta), (4, 4))
        state = GbpState(graph(m.network, "factor_graph_plaquettes", m.geometry))
        res = run(state, 1e-16, 20_000)
        all_converged &= res.converged
        f, e, s = energy_entropy_densities(m, state, float(beta))
        ref = villain_gbp_analytic(float(beta)).derived
        for k, v in (("f", f), ("e", e), ("s", s)):
            worst[k] = max(worst[k], abs(v - ref[k]))
        if beta == 5.0:
            low = (e, s)
    dt = time.perf_counter() - t0
    ok = (all_converged and max(worst.values()) <= 1e-6 and abs(low[1] - S0_GBP) <= 2e-2
          and abs(low[0] + 1) <= 1e-2 and dt < 180)
    report(capsys, 3, ok, f"{len(betas)} betas converged={all_converged}, max |df| {worst['f']:.1e} "
                          f"|de| {worst['e']:.1e} |ds| {worst['s']:.1e}; beta=5 s={low[1]:.4f} "
                          f"e={low[0]:.5f}, {dt:.1f} s")
    assert ok


# -- 4 ---------------------------------------------------------------------------

def test_criterion_4_villain_exact_cross_check(capsys):
    t0 = time.perf_counter()
    beta = 0.3
    exact = villain_exact_f(beta)
    m = villain_network(beta, (4, 4))
    gbp = GbpState(graph(m.network, "factor_graph_plaquettes", m.geometry))
    assert run(gbp, 1e-16, 20_000).converged
    f_gbp = kikuchi_free_energy(gbp).real / m.n_sites
    mv = villain_network(beta, (4, 4), "vertex_tensor")
    bp = GbpState(graph(mv.network))
    assert run(bp, 1e-16, 20_000).converged
    f_bp = kikuchi_free_energy(bp).real / mv.n_sites
    s0 = villain_exact_s0()
    dt = time.perf_counter() - t0
    err_gbp, err_bp = abs(f_gbp - exact), abs(f_bp - exact)
    ok = err_gbp < err_bp and abs(s0 - CATALAN / math.pi) <= 1e-6 and abs(s0 - 0.29156) <= 1e-5 \
        and dt < 60
    report(capsys, 4, ok, f"beta=0.3 |f_GBP - f_exact| {err_gbp:.2e} < |f_BP - f_exact| "
                          f"{err_bp:.2e}; s0 quadrature {s0:.8f}, {dt:.1f} s")
    assert ok


# -- 5 ---------------------------------------------------------------------------

def test_criterion_5_ice_entropies(capsys):
    t0 = time.perf_counter()
    targets = {"square": (1.518609, 1e-5), "diamond": (1.503989, 1e-5),
               "hexagonal": (1.50426, 5e-5)}
    extents = {"square": (4, 4), "diamond": (3, 3, 3), "hexagonal": (3, 3, 2)}
    lines, ok = [], True
    for lattice, (want, tol) in targets.items():
        m = ice_network(lattice, extents[lattice])
        for preset in ("simple_bp", "r1_plaquettes"):
            state = GbpState(graph(m.network, preset, m.geometry))
            converged = run(state, 1e-16, 20_000).converged
            es0 = math.exp(-kikuchi_free_energy(state).real / m.n_sites)
            if preset == "simple_bp":
                good = converged and abs(es0 - PAULING) <= 1e-9
            else:
                oracle = ice_gbp_analytic(lattice).derived["exp_s0"]
                good = converged and abs(es0 - want) <= tol and abs(es0 - oracle) <= tol
            ok &= good
            lines.append(f"{lattice}/{preset} {es0:.7f}")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    report(capsys, 5, ok, ", ".join(lines) + f", {dt:.1f} s")
    assert ok


# -- 6 ---------------------------------------------------------------------------

def _symmetric_radius(a):
    _, state, res = aklt_state(a, eps=1e-20)
    assert res.converged
    # uniform real symmetric perturbations: entries (0,0), (1,1) and (0,1)+(1,0)
    basis = uniform_message_basis(state, [[1, 0, 0, 0], [0, 0, 0, 1], [0, 1, 1, 0]])
    return linear_stability(state, basis=basis).spectral_radius


def test_criterion_6_aklt_bp_analytics(capsys):
    t0 = time.perf_counter()
    worst, ok = 0.0, True
    su2 = None
    for a in (0.5, 1.5, math.sqrt(3), 2.0, 3.0):
        m, state, res = aklt_state(a)
        ok &= res.converged
        got = bond_correlators(m, state)
        want = aklt_correlators(a)
        worst = max(worst, max(abs(got[k] - want[k]) for k in got))
        if a == math.sqrt(3):
            su2 = max(abs(v + 25 / 36) for v in got.values())
    crossings = []
    for point in (1.0, math.sqrt(5)):
        left = [(point + d, _symmetric_radius(point + d)) for d in (-0.04, -0.02)]
        right = [(point + d, _symmetric_radius(point + d)) for d in (0.02, 0.04)]
        x, r = marginal_crossing(left, right)
        crossings.append((point, x, r))
        ok &= abs(x - point) <= 1e-2 and abs(r - 1) <= 1e-2
    dt = time.perf_counter() - t0
    ok &= worst <= 1e-6 and su2 <= 1e-8 and dt < 120
    detail = ", ".join(f"marginal near {p:.4f} at a={x:.4f} (radius {r:.4f})" for p, x, r in crossings)
    report(capsys, 6, ok, f"max correlator error {worst:.1e}, SU(2) point error {su2:.1e}; "
                          f"{detail}; {dt:.1f} s")
    assert ok


# -- 7 ---------------------------------------------------------------------------

def test_criterion_7_aklt_gbp_symmetry(capsys):
    t0 = time.perf_counter()
    gbp_worst, bp_worst, sign_worst, ok = 0.0, 0.0, 0.0, True
    for a in (0.2, 0.5, 0.8):
        m, state, res = aklt_state(a, "r1_plaquettes", eps=1e-16, damping=0.3)
        ok &= res.converged
        c = bond_correlators(m, state)
        gbp_worst = max(gbp_worst, abs(c["xx"] - c["yy"]))
        m, state, res = aklt_state(a)
        ok &= res.converged
        c = bond_correlators(m, state)
        bp_worst = max(bp_worst, abs(abs(c["xx"] - c["yy"]) - xy_anisotropy(a)))
        sign_worst = max(sign_worst, abs((c["xx"] - c["yy"]) + xy_anisotropy(a)))
    dt = time.perf_counter() - t0
    ok &= gbp_worst <= 1e-6 and bp_worst <= 1e-5 and sign_worst <= 1e-5 and dt < 180
    report(capsys, 7, ok, f"GBP max |xx - yy| {gbp_worst:.1e}; BP anisotropy error "
                          f"{bp_worst:.1e} (signed {sign_worst:.1e}); {dt:.1f} s")
    assert ok


# -- 8 ---------------------------------------------------------------------------

N, CHI, N_SEEDS = 6, 3, 40
CENTRE = (N // 2) * N + N // 2


def _env_error(derivative, exact_env):
    d = derivative.dense_array(exact_env.labels).ravel()
    e = exact_env.dense_array(scaled=False).ravel()
    d, e = d / np.linalg.norm(d), e / np.linalg.norm(e)
    phase = np.vdot(d, e)
    return float(np.linalg.norm(d * phase / abs(phase) - e))


def _random_run(m, preset, seed, max_iters):
    g = graph(m.network, preset, m.geometry)
    msgs = init_messages(g, "noisy", c=0.1, seed=seed, pair_dims=m.pair_dims)
    state = GbpState(g, msgs, damping=0.3)
    return state, run(state, 1e-10, max_iters)


def test_criterion_8_random_norm_networks(capsys):
    t0 = time.perf_counter()
    fractions = {}
    f_better, env_better, compared = 0, 0, 0
    for alpha in (0.0, 0.1, 0.2, 0.4, 0.5, 0.6):
        converged = 0
        for seed in range(N_SEEDS):
            m = random_norm_network(N, CHI, alpha, seed)
            gbp, res = _random_run(m, "r1_plaquettes", seed, 100)
            if not res.converged:
                continue
            converged += 1
            logz, env = exact_contract(m.network, subset=[CENTRE])
            bp, _ = _random_run(m, "simple_bp", seed, 1000)
            errs = []
            for state in (gbp, bp):
                f_err = abs(kikuchi_free_energy(state).real + logz.real) / m.n_sites
                e_err = _env_error(network_derivative([CENTRE], state).tensor, env)
                errs.append((f_err, e_err))
            compared += 1
            f_better += errs[0][0] <= errs[1][0]
            env_better += errs[0][1] < errs[1][1]
        fractions[alpha] = converged / N_SEEDS
    dt = time.perf_counter() - t0
    ok = (all(fractions[a] >= 0.9 for a in (0.0, 0.1, 0.2))
          and all(fractions[a] <= 0.1 for a in (0.4, 0.5, 0.6))
          and f_better >= 0.8 * compared and env_better >= 0.8 * compared and dt < 900)
    shown = " ".join(f"{a}:{v:.2f}" for a, v in fractions.items())
    report(capsys, 8, ok, f"convergence fraction by alpha {shown}; GBP free energy better in "
                          f"{f_better}/{compared}, environment better in {env_better}/{compared}; "
                          f"{dt:.0f} s")
    assert ok


# -- 9 ---------------------------------------------------------------------------

PROPERTY_MODELS = [
    (lambda: villain_network(0.7, (2, 2)), ["simple_bp", "factor_graph_plaquettes"]),
    (lambda: villain_network(0.7, (2, 2), "vertex_tensor"), ["simple_bp", "r1_plaquettes"]),
    (lambda: ice_network("square", (4, 4)), ["simple_bp", "r1_plaquettes"]),
    (lambda: aklt_norm_network(1.2, (3, 3)), ["simple_bp", "r1_plaquettes"]),
    (lambda: random_norm_network(4, 2, 0.1, seed=3), ["simple_bp", "r1_plaquettes"]),
    (lambda: _open_grid(seed=8), ["r2_plaquettes"]),
]


def _open_grid(seed):
    net, geo = grid_network(4, 4, chi=2, seed=seed, periodic=False)
    return SimpleNamespace(kind="grid", network=net, geometry=geo, kets=None, pair_dims=None)


def _telescoping_gap(net, g, rng, samples=10):
    cn = counting_numbers(g)
    gap = 0.0
    for _ in range(samples):
        x = {l: int(rng.integers(d)) for l, d in g.dims.items()}
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs = sum(c * np.log(complex(g.factor(k).entry({l: x[l] for l in k})))
                      for k, c in cn.items() if c)
            rhs = sum(np.log(complex(t.entry({l: x[l] for l in t.labels}))) for t in net)
        if np.isfinite(rhs):
            d = lhs - rhs
            # logs of signed entries agree modulo 2 pi i
            gap = max(gap, abs(d.real), abs((d.imag + np.pi) % (2 * np.pi) - np.pi))
    return gap


def _l1_marginal_gap(state):
    g = state.graph
    gap = 0.0
    for b in g.children:
        pb = child_belief(state, b)[0].dense_array(b)
        for a in g.parent_links[b]:
            pa = parent_belief(state, a)[0]
            marg = sum_over(pa, [l for l in a if l not in set(b)]).dense_array(b)
            gap = max(gap, float(np.sum(np.abs(marg - pb))))
    return gap


def test_criterion_9_property_suite(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    identity_ok, tele, marg_ratio, psd, ident = True, 0.0, 0.0, np.inf, 0.0
    eps = 1e-10
    for make, presets in PROPERTY_MODELS:
        m = make()
        for preset in presets:
            g = graph(m.network, preset, m.geometry)
            identity_ok &= g.check_counting_numbers()
            tele = max(tele, _telescoping_gap(m.network, g, rng))
            msgs = init_messages(g, "noisy" if m.kind != "ice" else "uniform", c=0.1, seed=0,
                                 pair_dims=m.pair_dims)
            state = GbpState(g, msgs)
            if run(state, eps, 5000).converged:
                marg_ratio = max(marg_ratio, _l1_marginal_gap(state) / eps)
            if m.kets is not None:
                for sites in ([0], [0, 1]):
                    obs = ObservableSpec({v: np.eye(m.kets[v].shape[-1]) for v in sites})
                    ident = max(ident, abs(expectation(obs, state, m.kets) - 1))
    for seed in range(4):
        m = random_norm_network(4, 2, 0.3, seed=seed)
        state = GbpState(graph(m.network), pair_dims=m.pair_dims)
        run(state, 1e-12, 300)
        psd = min(psd, min(state.min_eig_history))
    dt = time.perf_counter() - t0
    parts = {"counting identity": identity_ok, "telescoping": tele <= 1e-10,
             "marginal consistency <= 10 eps": marg_ratio <= 10,
             "PSD messages": psd >= -1e-12, "identity expectation": ident <= 1e-12,
             "runtime": dt < 120}
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    report(capsys, 9, ok, f"telescoping gap {tele:.1e}, max L1 marginal gap / eps "
                          f"{marg_ratio:.2e}, min message eigenvalue {psd:.1e}, "
                          f"|<1> - 1| {ident:.1e}, {dt:.1f} s"
                          + (f"; failing: {', '.join(failed)}" if failed else ""))
    assert ok
