import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import coarse_grain_recount, corridor_violations_brute, perimeter_of, simply_connected_containing_origin
from rfimlab.coarsegrain import (boundary_component_count, coarse_grain, coarse_sequence, corridor_constants,
                                 corridor_event_frequencies, corridor_violations, count_coarse_images,
                                 key_lemma1_check, q_event_restricted, random_cluster_shapes, scan_q_event)
from rfimlab.lattice import Box, LatticeError, VertexSet, enumerate_simply_connected, perimeter
from rfimlab.rfim import ModelError, ModelParams, constant_field, planted_field, sample_field

cells = st.sets(st.tuples(st.integers(-9, 9), st.integers(-9, 9)), min_size=1, max_size=60)

# distinct level-k images over simply connected sets containing the origin with
# perimeter exactly ell: (images, starting sets), from the recount oracle, frozen
IMAGE_COUNTS = {(8, 1): (6, 22), (8, 2): (1, 22), (10, 1): (10, 124), (10, 2): (1, 124),
                (12, 1): (36, 726), (12, 2): (2, 726)}
IMAGE_CONSTANT = 0.172  # max of log(images) 2^k / (ell k + ell log ell) over the grid, rounded up


def _square(x0, y0, side):
    return VertexSet.from_points([(x0 + i, y0 + j) for i in range(side) for j in range(side)])


# -- coarse graining ----------------------------------------------------------------

@pytest.mark.parametrize("k", [1, 2, 3])
def test_aligned_tile_is_fixed(k):
    t = 2 ** k
    G = _square(-t, 2 * t, t)
    assert coarse_grain(G, k) == G


def test_singleton_vanishes():
    assert coarse_grain(VertexSet.from_points([(3, -1)]), 1).area == 0
    assert coarse_grain(VertexSet.from_points([(3, -1)]), 0) == VertexSet.from_points([(3, -1)])
    with pytest.raises(LatticeError):
        coarse_grain(VertexSet.from_points([(0, 0)]), -1)


def test_threshold_is_inclusive():
    # exactly 2^(2k-1) = 2 cells of a 2x2 tile is admissible
    assert coarse_grain(VertexSet.from_points([(0, 0), (1, 1)]), 1) == _square(0, 0, 2)
    assert coarse_grain(VertexSet.from_points([(-1, 0), (0, 0)]), 1).area == 0


@given(cells, st.integers(0, 4))
def test_matches_per_tile_recount(pts, k):
    assert set(coarse_grain(VertexSet.from_points(pts), k).points()) == coarse_grain_recount(pts, k)


@given(cells, cells, st.integers(0, 4))
def test_monotone(a, b, k):
    small = VertexSet.from_points(a)
    big = VertexSet.from_points(a | b)
    assert set(coarse_grain(small, k).points()) <= set(coarse_grain(big, k).points())


def test_sequence_examples():
    G = _square(0, 0, 8)
    seq = coarse_sequence(G, 3)
    assert seq[0] == G and all(lv == G for lv in seq.levels)
    H = VertexSet.from_points([(0, 0), (1, 0), (5, 5)])
    assert coarse_sequence(H, 2)[0] == H


@given(cells, st.integers(0, 4), st.integers(1, 6))
def test_sequence_levels_and_confinement(pts, kmax, L):
    G = VertexSet.from_points(pts)
    free = coarse_sequence(G, kmax)
    boxed = coarse_sequence(G, kmax, Box(L))
    for k in range(kmax + 1):
        # each level comes from G directly
        assert free[k] == coarse_grain(G, k)
        assert set(boxed[k].points()) == {p for p in free[k].points() if max(map(abs, p)) <= L}
        assert boxed[k].area <= free[k].area


# -- coarse-graining inequalities ---------------------------------------------------

def test_key_lemma1_singleton_and_square():
    for k in range(7):
        rep = key_lemma1_check(VertexSet.from_points([(0, 0)]), k)
        assert rep.holds
    rep = key_lemma1_check(_square(0, 0, 64), 3)
    assert rep.holds and rep.in_domain
    assert rep.ratios["boundary"] == 1.0 and rep.gain == rep.loss == 0


def test_key_lemma1_domain_flag():
    G = VertexSet.from_points([(0, 0), (1, 0)])
    assert not key_lemma1_check(G, 1).in_domain
    assert key_lemma1_check(G, 2).in_domain


def test_key_lemma1_corpus():
    checks = 0
    worst = {"boundary": 0.0, "difference": 0.0, "area_excess": 0.0}
    for G in enumerate_simply_connected(14):
        for k in range(2, 7):
            rep = key_lemma1_check(G, k)
            assert rep.holds, (G.points(), k)
            for name, v in rep.ratios.items():
                worst[name] = max(worst[name], v)
            checks += 1
    assert checks > 0
    assert worst["boundary"] < 8 and worst["difference"] < 16 and worst["area_excess"] < 32


def test_key_lemma1_against_recount():
    for G in list(enumerate_simply_connected(10))[::7]:
        pts = set(G.points())
        for k in range(1, 4):
            rep = key_lemma1_check(G, k)
            prev, cur = coarse_grain_recount(pts, k - 1), coarse_grain_recount(pts, k)
            assert rep.gain == len(cur - prev) and rep.loss == len(prev - cur)
            assert rep.area_k == len(cur)
            assert rep.boundary_k == (perimeter_of(cur) if cur else 0)


def test_key_lemma1_on_cluster_shapes():
    for G in random_cluster_shapes(200, 5, L=12):
        for k in range(2, 5):
            assert key_lemma1_check(G, k).holds


def test_boundary_components():
    assert boundary_component_count(_square(0, 0, 4), 1) == 1
    ring = [(x, y) for x in range(6) for y in range(6) if not (2 <= x <= 3 and 2 <= y <= 3)]
    assert boundary_component_count(VertexSet.from_points(ring), 1) == 2
    assert boundary_component_count(VertexSet.from_points([(0, 0)]), 1) == 0
    for G in enumerate_simply_connected(14):
        ell = perimeter(G)
        for k in range(1, 5):
            assert boundary_component_count(G, k) <= 8 * ell / 2 ** k


# -- coarse image counts -----------------------------------------------------------

def test_image_count_singleton():
    ic = count_coarse_images(4, 1)
    assert (ic.images, ic.starting_sets) == (1, 1)
    with pytest.raises(LatticeError):
        count_coarse_images(2, 1)


@pytest.mark.parametrize("ell,k", sorted(IMAGE_COUNTS))
def test_image_counts_against_oracle(ell, k):
    ic = count_coarse_images(ell, k)
    starts = [S for S in simply_connected_containing_origin(ell) if perimeter_of(S) == ell]
    images = {frozenset(coarse_grain_recount(S, k)) for S in starts}
    assert (ic.images, ic.starting_sets) == (len(images), len(starts)) == IMAGE_COUNTS[(ell, k)]
    assert ic.images <= ic.starting_sets
    assert ic.normalized_log <= IMAGE_CONSTANT
    expected = math.log(ic.images) * 2 ** k / (ell * k + ell * math.log(ell))
    assert ic.normalized_log == pytest.approx(expected)


# -- corridor events --------------------------------------------------------------------

def test_corridor_constants():
    spec = corridor_constants(8, ModelParams(1.0, 0.5))
    assert spec.N == 3 and spec.c == pytest.approx(2 / 3) and spec.levels == (1, 2, 3)
    spec = corridor_constants(2, ModelParams(1.0, 0.7))
    assert spec.N == 1 and spec.c == pytest.approx(1 / (4 * 0.7))
    base = corridor_constants(12, ModelParams(1.0, 1.0)).c
    assert corridor_constants(12, ModelParams(3.0, 1.0)).c == pytest.approx(3 * base)
    assert corridor_constants(12, ModelParams(1.0, 4.0)).c == pytest.approx(base / 4)
    with pytest.raises(LatticeError):
        corridor_constants(1, ModelParams())
    with pytest.raises(ModelError):
        corridor_constants(8, ModelParams(1.0, 0.0))


@pytest.mark.parametrize("ell,L", [(8, 3), (10, 3), (6, 4)])
def test_corridor_violations_match_brute(ell, L):
    for r in range(4):
        h = sample_field(L, "gaussian", 41, r)
        for eps in (0.5, 2.0, 8.0):
            spec = corridor_constants(ell, ModelParams(1.0, eps))
            for k in spec.levels:
                got = corridor_violations(h, spec, k)
                assert got == corridor_violations_brute(h.values, L, ell, k, spec.N, spec.c), (r, eps, k)


def test_corridor_limits():
    tiny = corridor_event_frequencies(ModelParams(1.0, 1e-6), 6, 8, 20, 3)
    assert np.all(tiny.frequencies == 0.0)
    weak = corridor_event_frequencies(ModelParams(1e-9, 1.0), 6, 8, 20, 3)
    # level 1 has nonempty corridor parts, so a continuous field breaks it almost surely;
    # at levels 2 and 3 every part is empty (area <= 4 < 2^(2k-1)) and the sums are exactly 0
    assert weak.frequencies.tolist() == [1.0, 0.0, 0.0]
    zero = np.ones((13, 13))
    assert [corridor_violations_brute(zero, 6, 8, k, 3, 0.0) > 0 for k in (1, 2, 3)] == [True, False, False]


def test_corridor_nondecreasing_in_eps():
    freqs = [corridor_event_frequencies(ModelParams(1.0, e), 8, 8, 40, 9).frequencies for e in (0.5, 1.0, 2.0)]
    for a, b in zip(freqs, freqs[1:]):
        assert np.all(a <= b)


def test_union_bound_consistency():
    budget, L, n = 8, 5, 60
    for eps in (0.5, 1.0, 2.0):
        p = ModelParams(1.0, eps)
        q = np.mean([q_event_restricted(sample_field(L, "gaussian", 13, r), p, budget) for r in range(n)])
        total = sum(corridor_event_frequencies(p, L, ell, n, 13).frequencies.sum() for ell in range(4, budget + 1, 2))
        assert q <= total, (eps, q, total)


# -- Q-event scan ----------------------------------------------------------------------------

def test_q_scan_zero_field():
    rep = scan_q_event(constant_field(4), ModelParams(1.0, 1.0), 10)
    assert not rep.found and rep.exhaustive and not rep.complete and rep.sets_tested > 0


def test_q_scan_small_eps():
    h = sample_field(4, "gaussian", 2)
    assert not scan_q_event(h, ModelParams(1.0, 1e-4), 12).found


def test_q_scan_planted_block():
    p = ModelParams(1.0, 0.5)
    M = (p.J / (2 * p.eps)) * 8 / 4 + 0.5  # 4M >= (J / 2 eps) * 8
    vals = np.zeros((9, 9))
    vals[4:6, 4:6] = M
    h = planted_field(4, vals)
    rep = scan_q_event(h, p, 8)
    block = VertexSet.from_points([(0, 0), (1, 0), (0, 1), (1, 1)])
    assert block in [v.gamma for v in rep.violators]
    assert all(v.reverify(h, p) for v in rep.violators)


@settings(max_examples=15)
@given(st.integers(0, 2 ** 64 - 1), st.floats(0.5, 3.0))
def test_q_scan_soundness(seed, eps):
    h = sample_field(4, "gaussian", seed)
    p = ModelParams(1.0, eps)
    rep = scan_q_event(h, p, 10)
    for v in rep.violators:
        assert v.reverify(h, p)
        assert abs(v.field_sum) >= v.threshold
    assert q_event_restricted(h, p, 10) == any(v.source == "enumerated" for v in rep.violators)
