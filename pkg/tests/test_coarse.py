import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergosim.coarse import (approx_error_check, bowen_ratio, bowen_ratio_estimate, cehyp_scan, coarse_grain,
                            density_ratio, greedy_bisep, read_cover, read_scan, write_cover, write_scan)
from ergosim.errors import EmptyBall, EmptyCandidates, Unassigned
from ergosim.measure import DensitySpec, ParticleMeasure, TestFunction, condition, integrate, sample_density
from ergosim.systems import bowen_context, bowen_distance, evolve, get_system

IDENT = get_system("identity")
DOUBLING = get_system("doubling")


def line_ctx():
    return bowen_context(IDENT, 0)


# --- greedy cover ------------------------------------------------------------------

def test_greedy_example():
    cover = greedy_bisep(line_ctx(), [[0.0], [0.5], [0.9], [2.0]], 0.3)
    assert cover.centers[:, 0].tolist() == [0.0, 0.9, 2.0]


def test_single_candidate_and_cluster():
    assert greedy_bisep(line_ctx(), [[0.4]], 0.1).centers.tolist() == [[0.4]]
    cluster = np.array([[0.0], [0.05], [0.1], [0.15]])
    cover = greedy_bisep(line_ctx(), cluster, 0.1)
    assert len(cover) == 1 and np.all(cover.assign(cluster) == 0)


def test_empty_candidates():
    with pytest.raises(EmptyCandidates):
        greedy_bisep(line_ctx(), np.empty((0, 1)), 0.1)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["doubling", "cat", "doubling_contract", "rotation"]), st.integers(0, 10_000),
       st.floats(0.03, 0.2))
def test_cover_invariants(sid, seed, delta):
    sys_ = get_system(sid)
    rng = np.random.default_rng(seed)
    ctx = bowen_context(sys_, 2 if sys_.discrete else 0.5, delta)
    cand = sys_.attractor.sample(rng, 40)
    cover = greedy_bisep(ctx, cand, delta)
    k = len(cover)
    if k > 1:
        i, j = np.triu_indices(k, 1)
        assert np.all(np.atleast_1d(bowen_distance(ctx, cover.centers[i], cover.centers[j])) >= 2 * delta)
    # maximality: every candidate is within 2 delta of some center
    assert np.all(cover.distances(cand).min(axis=1) < 2 * delta)
    # cells: one index per point, inside the 3 delta ball of their center
    pts = sys_.space.wrap(cand + rng.uniform(-delta, delta, cand.shape) / 4)
    cells = cover.assign(pts)
    d = cover.distances(pts)
    inside = cells >= 0
    assert np.all(d[np.arange(len(pts))[inside], cells[inside]] < 3 * delta)
    assert np.all(d[inside].argmin(axis=1) == cells[inside])


# --- coarse graining -------------------------------------------------------------------

def test_single_cell_is_conditioning():
    sp = IDENT.space
    mu = ParticleMeasure.uniform(np.linspace(0, 1, 101)[:, None], sp)
    cover = greedy_bisep(line_ctx(), [[0.5]], 0.2)
    nu = ParticleMeasure([[0.45], [0.6]], [0.3, 0.7], sp)
    P = coarse_grain(nu, mu, cover)
    ref = condition(mu, lambda x: np.abs(x[:, 0] - 0.5) < 0.2)
    assert np.allclose(P.points, ref.points) and np.allclose(P.weights, ref.weights)


def test_nu_is_restriction_of_mu():
    sp = IDENT.space
    mu = ParticleMeasure.uniform(np.linspace(0, 1, 201)[:, None], sp)
    cover = greedy_bisep(line_ctx(), [[0.2], [0.8]], 0.1)
    nu = condition(mu, lambda x: np.abs(x[:, 0] - 0.8) < 0.1)
    P = coarse_grain(nu, mu, cover)
    assert np.allclose(P.points, nu.points) and np.allclose(P.weights, nu.weights)


def test_unassigned_and_empty_ball():
    sp = IDENT.space
    cover = greedy_bisep(line_ctx(), [[0.5]], 0.1)
    mu = ParticleMeasure.uniform([[0.5]], sp)
    with pytest.raises(Unassigned):
        coarse_grain(ParticleMeasure.dirac([0.95], sp), mu, cover)
    with pytest.raises(EmptyBall):
        coarse_grain(ParticleMeasure.dirac([0.5], sp), ParticleMeasure.dirac([0.9], sp), cover)


@pytest.fixture(scope="module")
def contract_pipeline():
    sys_ = get_system("doubling_contract")
    tau, delta = 5, 0.05
    ctx = bowen_context(sys_, tau)
    rng = np.random.default_rng(0)
    cand = np.column_stack([np.arange(0, 1, 1e-3), np.ones(1000)])
    cover = greedy_bisep(ctx, cand[rng.permutation(1000)], delta)
    nu0 = sample_density(sys_.neighbourhood, 3000, seed=1)
    nu = ParticleMeasure(evolve(sys_, 10, nu0.points), nu0.weights, sys_.space)
    mu = sample_density(sys_.measure, 20_000, seed=2)
    return sys_, cover, nu, mu


def test_coarse_grain_mass_and_support(contract_pipeline):
    _, cover, nu, mu = contract_pipeline
    P = coarse_grain(nu, mu, cover)
    assert P.total_mass == pytest.approx(1.0, abs=1e-12)
    # supported on mu's particles and inside the union of delta-balls
    mu_rows = {tuple(r) for r in mu.points.tolist()}
    assert all(tuple(r) in mu_rows for r in P.points.tolist())
    assert np.all(cover.distances(P.points).min(axis=1) < cover.delta)
    assert np.isfinite(density_ratio(nu, mu, cover))


def test_approx_error_bound(contract_pipeline):
    sys_, cover, nu, mu = contract_pipeline
    g = TestFunction(lambda x: np.sin(2 * np.pi * x[:, 0]) / (2 * np.pi), 1 / (2 * np.pi), 1.0)
    P = coarse_grain(nu, mu, cover)
    for t in (0, 2, 5):
        lhs, ok = approx_error_check(nu, mu, cover, g, t, P)
        assert ok and lhs < 6 * cover.delta
    const = TestFunction(lambda x: np.full(x.shape[0], 0.3), 0.3, 0.0)
    assert approx_error_check(nu, mu, cover, const, 3, P)[0] == pytest.approx(0.0, abs=1e-15)
    assert approx_error_check(P, mu, cover, g, 3, P)[0] == 0.0


@pytest.mark.parametrize("seed", range(20))
def test_approx_error_random_t0(seed):
    """t = 0, delta = 0.05, 1-Lipschitz g: lhs < 0.3."""
    rng = np.random.default_rng(seed)
    sp = DOUBLING.space
    ctx = bowen_context(DOUBLING, int(rng.integers(0, 4)))
    cover = greedy_bisep(ctx, np.arange(0, 1, 1e-3)[rng.permutation(1000)][:, None], 0.05)
    nu = sample_density(DensitySpec(sp, (0.0,), (1.0,), density=lambda x: 1 + np.sin(6 * x[:, 0]),
                                    density_max=2.0), 2000, seed)
    mu = sample_density(DOUBLING.measure, 20_000, seed + 100)
    p = rng.uniform()
    g = TestFunction(lambda x: np.clip(0.2 - sp.distance(x, [p]), -1, 1), 1.0, 1.0)
    lhs, ok = approx_error_check(nu, mu, cover, g, 0)
    assert ok and lhs < 0.3


# --- Bowen ratios ----------------------------------------------------------------------

def test_ratio_interval_third():
    est = bowen_ratio_estimate(IDENT, IDENT.measure, IDENT.measure, [0.4], 0.02, 0, 100_000, seed=1)
    assert abs(est.value - 1 / 3) <= 3 * est.stderr


@pytest.mark.parametrize("tau", [0, 3, 6])
def test_ratio_doubling_third(tau):
    est = bowen_ratio_estimate(DOUBLING, DOUBLING.measure, DOUBLING.measure, [0.3], 0.02, tau, 100_000, seed=tau)
    assert abs(est.value - 1 / 3) <= 3 * est.stderr


def test_ratio_consistent_across_sample_sizes():
    a = bowen_ratio_estimate(DOUBLING, DOUBLING.measure, DOUBLING.measure, [0.6], 0.02, 2, 10_000, seed=3)
    b = bowen_ratio_estimate(DOUBLING, DOUBLING.measure, DOUBLING.measure, [0.6], 0.02, 2, 100_000, seed=4)
    assert abs(a.value - b.value) <= 3 * np.hypot(a.stderr, b.stderr)
    assert bowen_ratio(DOUBLING, DOUBLING.measure, DOUBLING.measure, [0.6], 0.02, 2, 10_000, 3) == a.value


def test_ratio_needs_samples():
    with pytest.raises(ValueError):
        bowen_ratio_estimate(DOUBLING, DOUBLING.measure, DOUBLING.measure, [0.6], 0.02, 2, 10, seed=3)


@pytest.mark.parametrize("sid", ["identity", "rotation"])
def test_scan_tau_independent(sid):
    """d_tau = d for the identity and for isometric rotations."""
    sys_ = get_system(sid)
    taus = [0, 1, 2] if sys_.discrete else [0.0, 0.25, 0.5]
    rows = cehyp_scan(sys_, sys_.measure, sys_.measure, DensitySpec(sys_.space, (0.2,), (0.8,)), 0.02, taus,
                      n_x=1, n_mc=20_000, seed=5)
    vals = [r.min_ratio for r in rows]
    assert np.allclose(vals, 1 / 3, atol=0.03)


def test_scan_workers_and_round_trip(tmp_path):
    a = cehyp_scan(DOUBLING, DOUBLING.measure, DOUBLING.measure, DOUBLING.attractor, 0.02, [1, 2], 3, 5000, 9)
    b = cehyp_scan(DOUBLING, DOUBLING.measure, DOUBLING.measure, DOUBLING.attractor, 0.02, [1, 2], 3, 5000, 9,
                   workers=2)
    assert a == b
    write_scan(a, tmp_path / "scan.csv")
    assert read_scan(tmp_path / "scan.csv") == a


def test_cover_round_trip(tmp_path):
    sys_ = get_system("cat")
    ctx = bowen_context(sys_, 2)
    cover = greedy_bisep(ctx, sys_.attractor.sample(np.random.default_rng(3), 200), 0.1)
    write_cover(cover, tmp_path / "cover.csv")
    back = read_cover(tmp_path / "cover.csv", sys_)
    assert np.array_equal(back.centers, cover.centers)
    assert back.delta == cover.delta and back.multiplier == cover.multiplier
    assert np.array_equal(back.ctx.grid, ctx.grid)


def test_integrals_match_cells(contract_pipeline):
    _, cover, nu, mu = contract_pipeline
    P = coarse_grain(nu, mu, cover)
    cells = cover.assign(nu.points)
    for i in np.unique(cells)[:5]:
        ball = cover.in_ball(P.points, i)
        # P gives M_i at least nu(N_i); overlaps are excluded by bi-separation
        assert P.weights[ball].sum() == pytest.approx(nu.weights[cells == i].sum(), abs=1e-12)
    assert integrate(P, lambda x: np.ones(x.shape[0])) == pytest.approx(1.0)
