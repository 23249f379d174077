import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_energy_min
from rfimlab.lattice import Box, VertexSet, edge_boundary, is_connected
from rfimlab.rfim import (ModelError, ModelParams, SpinConfiguration, brute_force_ground_energy,
                          calibrate_tail_constant, component_certificates, constant_field, energy,
                          estimate_order_parameter, estimate_zeta2, flip_energy, ground_state,
                          ground_state_pair, planted_field, psi_of, sample_field, sum_tail_frequencies,
                          tail_bound)

seeds = st.integers(0, 2 ** 64 - 1)
TAIL_KS = [1, 2, 4, 8, 16, 32]
TAIL_RATIOS = [1.0, 1.5, 2.0, 3.0, 4.0]
TAIL_C = 0.5739  # calibrate_tail_constant(TAIL_KS, TAIL_RATIOS), frozen to 4 digits


def _random_connected(rng, box: Box, size: int) -> VertexSet:
    start = tuple(int(v) for v in rng.integers(-box.L, box.L + 1, size=2))
    cells = {start}
    while len(cells) < size:
        x, y = list(cells)[rng.integers(len(cells))]
        dx, dy = [(1, 0), (-1, 0), (0, 1), (0, -1)][rng.integers(4)]
        if box.contains(x + dx, y + dy):
            cells.add((x + dx, y + dy))
    return VertexSet.from_points(cells)


# -- fields ------------------------------------------------------------------

def test_field_determinism_and_tags():
    a = sample_field(5, "gaussian", 11, 3)
    b = sample_field(5, "gaussian", 11, 3)
    assert np.array_equal(a.values, b.values)
    assert a.psi == 1.0
    assert not np.array_equal(a.values, sample_field(5, "gaussian", 11, 4).values)
    with pytest.raises(ModelError):
        sample_field(2, "cauchy", 0)
    with pytest.raises(ModelError):
        sample_field(-1)


@given(seeds, st.integers(0, 100))
def test_rademacher_and_uniform_ranges(seed, r):
    assert set(np.unique(sample_field(3, "rademacher", seed, r).values)) <= {-1.0, 1.0}
    u = sample_field(3, "uniform", seed, r).values
    assert np.all(np.abs(u) <= np.sqrt(3.0))


def test_field_is_keyed_by_coordinate():
    # the value at a vertex does not depend on the box it is sampled in
    small = sample_field(2, "gaussian", 5, 1)
    big = sample_field(6, "gaussian", 5, 1)
    assert np.array_equal(small.values, big.values[4:9, 4:9])


def test_gaussian_moments():
    vals = np.concatenate([sample_field(32, "gaussian", 2024, r).values.ravel() for r in range(50)])
    N = vals.size
    assert abs(vals.mean()) <= 4.0 / np.sqrt(N)
    assert abs(vals.var() - 1.0) <= 0.1


@pytest.mark.parametrize("dist", ["rademacher", "uniform"])
def test_unit_variance_distributions(dist):
    vals = np.concatenate([sample_field(16, dist, 7, r).values.ravel() for r in range(20)])
    assert abs(vals.mean()) <= 4.0 / np.sqrt(vals.size)
    assert abs(vals.var() - 1.0) <= 0.05


# -- energy --------------------------------------------------------------------

def test_energy_hand_value():
    h = constant_field(1)
    plus = SpinConfiguration(1, np.ones((3, 3), dtype=np.int8), "plus")
    assert energy(plus, h, ModelParams(1.0, 0.0)) == -24.0
    assert energy(plus, h, ModelParams(2.5, 0.0)) == -60.0


@given(seeds)
def test_ferromagnetic_minimum(seed):
    rng = np.random.default_rng(seed % 2 ** 32)
    h = constant_field(2)
    p = ModelParams(1.0, 0.0)
    plus = SpinConfiguration(2, np.ones((5, 5), dtype=np.int8))
    sigma = SpinConfiguration(2, rng.choice([-1, 1], size=(5, 5)).astype(np.int8))
    assert energy(plus, h, p) <= energy(sigma, h, p)


@given(seeds, st.sampled_from(["aligned", "opposed"]), st.sampled_from(["plus", "minus"]))
def test_flip_energy_matches_recomputation(seed, conv, bc):
    rng = np.random.default_rng(seed % 2 ** 32)
    L = 3
    h = sample_field(L, "gaussian", seed, 0)
    p = ModelParams(1.3, 0.7, 0.2, conv)
    sigma = SpinConfiguration(L, rng.choice([-1, 1], size=(7, 7)).astype(np.int8), bc)
    G = _random_connected(rng, Box(L), int(rng.integers(1, 10)))
    d = flip_energy(sigma, G, h, p)
    assert d == pytest.approx(energy(sigma.flipped(G), h, p) - energy(sigma, h, p), abs=1e-9)
    # flipping twice is the identity
    assert d + flip_energy(sigma.flipped(G), G, h, p) == pytest.approx(0.0, abs=1e-9)


def test_flip_whole_box():
    for L in range(4):
        h = constant_field(L)
        plus = SpinConfiguration(L, np.ones(Box(L).shape, dtype=np.int8))
        assert flip_energy(plus, Box(L).vertex_set(), h, ModelParams(1.0, 0.0)) == 2.0 * 4 * (2 * L + 1)


def test_flip_outside_box_rejected():
    h = constant_field(1)
    sigma = SpinConfiguration(1, np.ones((3, 3), dtype=np.int8))
    with pytest.raises(ModelError):
        flip_energy(sigma, VertexSet.from_points([(2, 0)]), h, ModelParams())


# -- ground states -------------------------------------------------------------

def test_zero_disorder_ground_states():
    h = sample_field(4, "gaussian", 1)
    p = ModelParams(1.0, 0.0)
    assert np.all(ground_state(h, p, "plus").spins == 1)
    assert np.all(ground_state(h, p, "minus").spins == -1)


@given(seeds)
def test_single_site_dominance(seed):
    h = sample_field(3, "gaussian", seed)
    eps = 1.0
    f = eps * h.values
    vals = np.where(np.abs(f) > 4.0, f, np.sign(f) * 4.5 + (f == 0) * 4.5)
    h2 = planted_field(3, vals)
    p = ModelParams(1.0, eps)
    for bc in ("plus", "minus"):
        assert np.array_equal(ground_state(h2, p, bc).spins, np.sign(vals).astype(np.int8))


@pytest.mark.parametrize("eps", [0.5, 2.0])
@pytest.mark.parametrize("conv", ["aligned", "opposed"])
def test_ground_state_matches_one_at_a_time_oracle(eps, conv):
    sign = 1 if conv == "aligned" else -1
    for r in range(3):
        h = sample_field(1, "gaussian", 99, r)
        for eta, bc in ((0.0, 1), (0.3, -1)):
            p = ModelParams(1.0, eps, eta, conv)
            gs = ground_state(h, p, "plus" if bc == 1 else "minus")
            assert energy(gs, h, p) == pytest.approx(brute_energy_min(h.values, 1.0, eps, eta, sign, bc), abs=1e-9)


@given(seeds, st.sampled_from(["gaussian", "rademacher", "uniform"]), st.floats(0.1, 3.0),
       st.floats(-0.5, 0.5), st.sampled_from(["aligned", "opposed"]), st.sampled_from(["plus", "minus"]))
def test_ground_state_is_pointwise_max_minimiser(seed, dist, eps, eta, conv, bc):
    h = sample_field(1, dist, seed)
    p = ModelParams(1.0, eps, eta, conv)
    gs = ground_state(h, p, bc)
    emin, minimisers = brute_force_ground_energy(h, p, bc)
    assert energy(gs, h, p) == pytest.approx(emin, abs=1e-9)
    top = np.max(np.stack(minimisers), axis=0)
    assert np.array_equal(gs.spins, top)


@given(seeds, st.floats(0.2, 3.0))
def test_monotone_coupling(seed, eps):
    plus, minus = ground_state_pair(sample_field(6, "gaussian", seed), ModelParams(1.0, eps))
    assert np.all(minus.spins <= plus.spins)


@given(seeds, st.integers(1, 12))
def test_ground_state_optimal_against_flips(seed, size):
    rng = np.random.default_rng(seed % 2 ** 32)
    L = 4
    h = sample_field(L, "gaussian", seed)
    p = ModelParams(1.0, 1.2)
    for bc in ("plus", "minus"):
        gs = ground_state(h, p, bc)
        G = _random_connected(rng, Box(L), size)
        assert is_connected(G)
        assert flip_energy(gs, G, h, p) > 0.0


@given(seeds, st.floats(0.3, 2.5))
def test_component_certificates(seed, eps):
    h = sample_field(6, "gaussian", seed)
    p = ModelParams(1.0, eps, 0.0, "opposed")
    for sigma in ground_state_pair(h, p):
        for cert in component_certificates(sigma, h, p):
            assert cert.holds
            # the box-internal part of the boundary is a subset of the full boundary
            box = sigma.box
            internal = sum(1 for (a, b) in edge_boundary(cert.component)
                           if box.contains(*a) and box.contains(*b))
            assert abs(cert.field_sum) >= p.J / (2 * p.eps) * internal


def test_certificates_need_eta_zero():
    h = sample_field(2, "gaussian", 0)
    sigma = ground_state(h, ModelParams(1.0, 1.0))
    with pytest.raises(ModelError):
        component_certificates(sigma, h, ModelParams(1.0, 1.0, 0.1))


# -- estimators ------------------------------------------------------------------

def test_order_parameter_examples():
    est = estimate_order_parameter(4, ModelParams(1.0, 0.0), 20, 5)
    assert est.m_hat == 1.0 and est.half_width == 0.0
    a = estimate_order_parameter(4, ModelParams(1.0, 1.0), 30, 5)
    b = estimate_order_parameter(4, ModelParams(1.0, 1.0), 30, 5)
    assert a == b
    assert 0.0 <= a.m_hat <= 1.0 and a.half_width >= 0.0
    assert estimate_order_parameter(8, ModelParams(1.0, 100.0), 200, 1).m_hat < 0.05
    with pytest.raises(ModelError):
        estimate_order_parameter(4, ModelParams(), 0, 1)


def test_order_parameter_threads_agree():
    a = estimate_order_parameter(4, ModelParams(1.0, 1.0), 12, 3, threads=1)
    b = estimate_order_parameter(4, ModelParams(1.0, 1.0), 12, 3, threads=2)
    assert a == b


def test_order_parameter_nonincreasing_in_L():
    p = ModelParams(1.0, 1.0)
    ests = [estimate_order_parameter(L, p, 60, 8) for L in (2, 4, 8, 16)]
    for small, big in zip(ests, ests[1:]):
        # CI-overlap test: the larger box is never significantly above the smaller one
        assert big.ci[0] <= small.ci[1]


def test_zeta2_examples():
    sched = [1, 2, 4]
    z = estimate_zeta2(ModelParams(1.0, 0.0), 0.5, sched, 10, 1)
    assert not z.reached and z.zeta2 is None
    z = estimate_zeta2(ModelParams(1.0, 100.0), 0.5, sched, 30, 1)
    assert z.zeta2 == 1
    with pytest.raises(ModelError):
        estimate_zeta2(ModelParams(), 0.5, [4, 2], 5, 1)
    with pytest.raises(ModelError):
        estimate_zeta2(ModelParams(), 1.5, [1], 5, 1)


def test_zeta2_is_least_scheduled_L_below_threshold():
    p = ModelParams(1.0, 1.0)
    sched = [1, 2, 4, 8, 16]
    z = estimate_zeta2(p, 0.6, sched, 40, 4)
    below = [e.L for e in z.estimates if e.m_hat < 0.6]
    assert z.zeta2 == (below[0] if below else None)
    # raising the threshold never increases zeta2
    prev = None
    for t in (0.2, 0.4, 0.6, 0.8, 0.95):
        zt = estimate_zeta2(p, t, sched, 40, 4).zeta2
        zt = np.inf if zt is None else zt
        if prev is not None:
            assert zt <= prev
        prev = zt


# -- sub-gaussian tail -------------------------------------------------------------

def test_tail_constant_calibration():
    assert calibrate_tail_constant(TAIL_KS, TAIL_RATIOS) == pytest.approx(TAIL_C, abs=1e-4)


@pytest.mark.parametrize("dist", ["gaussian", "rademacher", "uniform"])
def test_sum_tails_below_bound(dist):
    psi = psi_of(dist)
    ts = [[r * np.sqrt(k) for r in TAIL_RATIOS] for k in TAIL_KS]
    freq = sum_tail_frequencies(TAIL_KS, ts, 20000, 3, dist)
    for i, k in enumerate(TAIL_KS):
        assert np.all(freq[i] <= tail_bound(ts[i], k, psi, TAIL_C))
