import math

import numpy as np
import pytest
from conftest import graph_network, grid_network

from gbpnet.engine import GbpState, init_messages, kikuchi_free_energy, run
from gbpnet.errors import UncoveredIndex
from gbpnet.models.aklt import aklt_norm_network, spin_matrices
from gbpnet.models.base import double_factor
from gbpnet.models.random_norm import random_norm_network
from gbpnet.models.villain import villain_network
from gbpnet.observables import (
    ObservableSpec,
    energy_entropy_densities,
    expectation,
    label_belief,
    network_derivative,
    stitched_belief,
    stitching_counting_numbers,
    tensor_subset,
)
from gbpnet.oracles.exact import environment, exact_log_z
from gbpnet.regions import build_regions, preset_regions
from gbpnet.tensor import LabeledTensor


def converged(net, preset="simple_bp", geo=None, eps=1e-24, **kw):
    g = build_regions(preset_regions(net, preset, geo), net)
    state = GbpState(g, **kw)
    assert run(state, eps, 5000).converged
    return state


def exact_marginal(net, labels):
    """Brute-force marginal by fixing each assignment of ``labels``."""
    dims = {l: t.shape[k] for t in net for k, l in enumerate(t.labels)}
    out = np.zeros([dims[l] for l in labels])
    for idx in np.ndindex(*out.shape):
        fixed = []
        for t in net:
            arr = t.dense_array()
            sl = tuple(idx[labels.index(l)] if l in labels else slice(None) for l in t.labels)
            kept = [l for l in t.labels if l not in labels]
            fixed.append(LabeledTensor(kept, np.asarray(arr[sl])) if kept
                         else LabeledTensor([("one", id(t))], np.asarray([arr[sl]])))
        out[idx] = math.exp(exact_log_z(fixed).real)
    return out / out.sum()


def chain_norm_network(n=5, chi=2, d=2, seed=0):
    rng = np.random.default_rng(seed)
    kets, net = [], []
    for i in range(n):
        labels = [("b", k) for k in (i - 1, i) if 0 <= k < n - 1]
        shape = [chi] * len(labels) + [d]
        ket = LabeledTensor(labels + [("s", i)], rng.normal(size=shape))
        kets.append(ket)
        net.append(double_factor(ket, ("s", i)))
    return net, kets


def test_tensor_subset_splits_labels():
    net, _ = grid_network(3, 3, seed=0)
    sub = tensor_subset(net, [4])
    assert sub.interior == () and len(sub.boundary) == 4
    sub = tensor_subset(net, [0, 1, 3, 4])
    assert len(sub.interior) == 4 and len(sub.boundary) == 4
    with pytest.raises(ValueError):
        tensor_subset(net, [])


def test_stitching_prefers_single_covering_region():
    net, geo = grid_network(3, 3, seed=1)
    state = GbpState(build_regions(preset_regions(net, "r1_plaquettes", geo), net))
    cn = stitching_counting_numbers(state, net[4].labels)
    assert list(cn.values()) == [1]
    labels = set(net[3].labels) | set(net[4].labels) | set(net[5].labels)
    cn = stitching_counting_numbers(state, labels)
    assert sum(cn.values()) == 1
    # the corner tensor is absorbed by its plaquette, which reaches outside
    with pytest.raises(UncoveredIndex):
        stitching_counting_numbers(state, set(net[0].labels) | set(net[1].labels))
    with pytest.raises(UncoveredIndex):
        stitching_counting_numbers(state, [("b", 0), ("nowhere", 1)])


def test_beliefs_are_exact_on_trees():
    net = graph_network(6, seed=4, dangling=1.0)
    state = converged(net)
    for labels in (list(net[2].labels), list(net[1].labels) + list(net[2].labels)):
        labels = list(dict.fromkeys(labels))
        got = label_belief(state, labels).dense_array(labels).real
        np.testing.assert_allclose(got, exact_marginal(net, labels), atol=1e-10)


def test_stitched_belief_is_normalized():
    net, geo = grid_network(3, 3, seed=2)
    state = converged(net, "r1_plaquettes", geo)
    b = stitched_belief([0, 1, 3, 4], state)
    assert b.dense_array().sum() == pytest.approx(1.0, abs=1e-12)


def test_corner_pair_belief_is_marginal_of_enlarged_stitch():
    net, geo = grid_network(3, 3, seed=2)
    state = converged(net, "r1_plaquettes", geo)
    labels = sorted(set(net[0].labels) | set(net[1].labels))
    pair = label_belief(state, labels)
    assert pair.dense_array().sum() == pytest.approx(1.0, abs=1e-12)
    big = label_belief(state, set(labels) | set(net[3].labels) | set(net[4].labels))
    drop = [l for l in big.labels if l not in set(labels)]
    from gbpnet.tensor import sum_over
    np.testing.assert_allclose(sum_over(big, drop).dense_array(pair.labels), pair.dense_array(),
                               atol=1e-6)


@pytest.mark.parametrize("method", ["structural", "belief"])
def test_derivative_is_exact_environment_on_trees(method):
    net = graph_network(7, seed=6, dangling=1.0)
    state = converged(net)
    d = network_derivative([3], state, method=method)
    env = environment(net, [3])
    got = d.tensor.dense_array(env.labels)
    want = env.dense_array(scaled=False)
    np.testing.assert_allclose(got / np.abs(got).max(), want / np.abs(want).max(), atol=1e-10)
    assert d.division_degeneracies == 0


def test_derivative_keeps_interior_when_asked():
    net, geo = grid_network(3, 3, seed=3)
    state = converged(net, "r1_plaquettes", geo)
    d = network_derivative([0, 1], state, sum_interior=False)
    assert set(d.tensor.labels) == set(d.subset.labels)
    with pytest.raises(ValueError):
        network_derivative([0], state, method="magic")


def test_expectation_on_chain_is_exact():
    net, kets = chain_norm_network(5, seed=1)
    state = converged(net)
    Z = np.array([[1.0, 0.0], [0.0, -1.0]])
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    obs = ObservableSpec({1: Z, 2: X})
    got = expectation(obs, state, kets)
    sandwiched = list(net)
    for v, op in obs.operators.items():
        sandwiched[v] = double_factor(kets[v], ("s", v), operator=op)
    want = np.exp(exact_log_z(sandwiched) - exact_log_z(net))
    assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("preset", ["simple_bp", "r1_plaquettes"])
def test_identity_expectation_is_one(preset):
    m = random_norm_network(3, 2, 0.1, seed=3)
    state = converged(m.network, preset, m.geometry, eps=1e-16)
    for sites in ([4], [0, 1], [3, 4]):
        obs = ObservableSpec({v: np.eye(2) for v in sites})
        assert expectation(obs, state, m.kets) == pytest.approx(1.0, abs=1e-12)


def test_observable_spec_validation():
    with pytest.raises(ValueError):
        ObservableSpec({0: np.ones((2, 3))})
    with pytest.raises(ValueError):
        ObservableSpec({0: np.array([[0.0, 1.0], [0.0, 0.0]])})
    assert ObservableSpec({3: np.eye(2), 1: np.eye(2)}).sites == (1, 3)


def test_aklt_sublattice_magnetizations_are_opposite():
    m = aklt_norm_network(0.5, (3, 3))
    g = build_regions(preset_regions(m.network, "simple_bp"), m.network)
    msgs = init_messages(g, "noisy", c=0.1, seed=1, pair_dims=m.pair_dims)
    state = GbpState(g, msgs, damping=1.0)
    assert run(state, 1e-24, 5000).converged
    S = spin_matrices()
    i, j, _ = m.lattice.bonds[0]
    assert m.lattice.sites[i][1] != m.lattice.sites[j][1]
    mi = [expectation(ObservableSpec({i: S[k]}), state, m.kets).real for k in ("Sx", "Sy", "Sz")]
    mj = [expectation(ObservableSpec({j: S[k]}), state, m.kets).real for k in ("Sx", "Sy", "Sz")]
    np.testing.assert_allclose(mi, -np.array(mj), atol=1e-8)
    assert np.linalg.norm(mi) > 0.5


def test_villain_energy_is_derivative_of_free_energy():
    beta, h = 0.8, 1e-5
    fs = []
    for b in (beta - h, beta + h):
        m = villain_network(b, (2, 2))
        fs.append(kikuchi_free_energy(converged(m.network, "factor_graph_plaquettes",
                                                m.geometry)).real / m.n_sites)
    m = villain_network(beta, (2, 2))
    state = converged(m.network, "factor_graph_plaquettes", m.geometry)
    f, e, s = energy_entropy_densities(m, state, beta)
    assert e == pytest.approx((fs[1] - fs[0]) / (2 * h), abs=1e-7)
    assert s == pytest.approx(beta * e - f, abs=1e-14)
    with pytest.raises(ValueError):
        energy_entropy_densities(random_norm_network(2, 2), state, beta)
