import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ergosim import classify as cl
from ergosim import counterexample as cx
from ergosim.errors import DomainError
from ergosim.measure import (DensitySpec, ParticleMeasure, TestFunction, bl_distance, grid_measure, integrate,
                             sample_density)
from ergosim.systems import evolve, get_system

COS = TestFunction(lambda x: np.cos(2 * np.pi * x[:, 0]), 1.0, 2 * np.pi, "cos")
ONE = TestFunction(lambda x: np.ones(x.shape[0]), 1.0, 0.0, "one")


# --- Birkhoff measures and basins ------------------------------------------------

def test_birkhoff_fixed_point():
    sys_ = get_system("identity")
    mu = cl.birkhoff_measure(sys_, [0.3], 50)
    assert np.all(mu.points == 0.3) and mu.total_mass == pytest.approx(1.0)


def test_birkhoff_rotation_equidistributes():
    sys_ = get_system("rotation")
    ref = grid_measure(sys_.measure, 20_000)
    assert bl_distance(cl.birkhoff_measure(sys_, [0.0], 1000), ref) <= 0.01


def test_birkhoff_exact_period_two():
    sys_ = get_system("doubling")
    mu = cl.birkhoff_measure(sys_, np.array([Fraction(1, 3)], dtype=object), 1000)
    third = np.isclose(mu.points[:, 0], 1 / 3)
    assert np.all(third | np.isclose(mu.points[:, 0], 2 / 3))
    assert abs(mu.weights[third].sum() - 0.5) <= 1e-3


def test_birkhoff_particles_lie_on_orbit():
    sys_ = get_system("cat")
    x = np.array([0.123, 0.456])
    mu = cl.birkhoff_measure(sys_, x, 30)
    for k, p in enumerate(mu.points):
        assert np.allclose(p, evolve(sys_, k, x))
    assert mu.total_mass == pytest.approx(1.0)


def test_basin_fixed_point_zero():
    sys_ = get_system("identity")
    rec = cl.basin_test(sys_, [0.4], ParticleMeasure.dirac([0.4], sys_.space), [10, 100])
    assert np.all(rec.values == 0)


def test_basin_rotation():
    sys_ = get_system("rotation")
    rec = cl.basin_test(sys_, [0.17], grid_measure(sys_.measure, 20_000), [1e2, 1e4])
    assert rec.values[-1] < 0.02


def test_basin_counterexample_bounded_away():
    """Time averages from (x, 0.2) stay far from the fiber measure at y = 0."""
    sys_ = get_system("counterexample")
    mu = sample_density(sys_.measure, 5000, seed=1)
    rec = cl.basin_test(sys_, [0.0, 0.0, 0.2], mu, [1e2, 1e3], n_samples=2001)
    assert np.all(rec.values > 0.1)


# --- attracting -------------------------------------------------------------------

def test_attracting_identity_self():
    sys_ = get_system("identity")
    init = sys_.measure
    nu = sample_density(init, 500, seed=2)
    rec = cl.attracting_test(sys_, init, nu, [0, 1, 2], 500, seed=2)
    assert np.all(rec.values == 0)


def test_attracting_self_distance_at_t():
    sys_ = get_system("doubling")
    nu = sample_density(sys_.measure, 1000, seed=3)
    pushed = ParticleMeasure(evolve(sys_, 4, nu.points), nu.weights, sys_.space)
    rec = cl.attracting_test(sys_, sys_.measure, pushed, [4], 1000, seed=3)
    assert rec.values[0] == 0.0


def test_attracting_doubling_contract():
    sys_ = get_system("doubling_contract")
    rec = cl.attracting_test(sys_, sys_.neighbourhood, grid_measure(sys_.measure, 20_000), [20], 100_000, seed=0)
    assert rec.values[0] <= 0.05


def test_rotation_arc_not_attracted():
    sys_ = get_system("rotation")
    arc = DensitySpec(sys_.space, (0.0,), (0.1,))
    rec = cl.attracting_test(sys_, arc, grid_measure(sys_.measure, 20_000), np.arange(0, 3, 0.1), 20_000, 0)
    assert np.min(rec.values) >= 0.2
    assert not cl.verdict(rec)["converged"]


# --- correlations -------------------------------------------------------------------

def test_classical_identity_constant():
    sys_ = get_system("identity")
    mu = sample_density(sys_.measure, 2000, seed=4)
    rec = cl.classical_correlation(sys_, mu, COS, COS, range(6))
    assert np.all(rec.values == rec.values[0])


def test_classical_constant_g2_is_zero():
    sys_ = get_system("cat")
    mu = sample_density(sys_.measure, 2000, seed=5)
    rec = cl.classical_correlation(sys_, mu, COS, ONE, range(6))
    assert np.allclose(rec.values, 0.0, atol=1e-14)


def test_classical_t0_is_plain_covariance():
    sys_ = get_system("cat")
    mu = sample_density(sys_.measure, 3000, seed=6)
    g2 = TestFunction(lambda x: np.sin(2 * np.pi * (x[:, 0] + x[:, 1])), 1.0, 2 * np.pi * np.sqrt(2))
    rec = cl.classical_correlation(sys_, mu, COS, g2, [0])
    a, b = COS(mu.points), g2(mu.points)
    direct = np.sum(mu.weights * a * b) - np.sum(mu.weights * a) * np.sum(mu.weights * b)
    assert rec.values[0] == pytest.approx(direct, abs=1e-15)


def test_cat_character_orthogonality_oracle():
    """Brute-force lattice check: cos(2 pi x1) against cos(2 pi (A^t x)_2)
    integrates to 0 because the pulled-back frequency never equals +-(1, 0)."""
    A = np.array([[2, 1], [1, 1]])
    At = np.eye(2, dtype=int)
    for _ in range(16):
        k = At[1]
        assert not (k[1] == 0 and abs(k[0]) == 1)
        At = A @ At


def test_operational_constant_g2_is_zero():
    sys_ = get_system("cat")
    c = TestFunction(lambda x: np.full(x.shape[0], 0.7), 1.0, 0.0)
    rec = cl.operational_correlation(sys_, sys_.measure, sample_density(sys_.measure, 100, 0), COS, c, range(4),
                                     1000, 0)
    assert np.allclose(rec.values, 0.0, atol=1e-12)


def test_operational_doubling_contract():
    sys_ = get_system("doubling_contract")
    ref = grid_measure(sys_.measure, 20_000)
    rec = cl.operational_correlation(sys_, sys_.neighbourhood, ref, ONE, COS, [0, 10, 20], 50_000, 1)
    assert abs(rec.values[-1]) <= 3 * rec.stderr[-1]


def test_operational_rotation_oscillates():
    sys_ = get_system("rotation")
    ref = grid_measure(sys_.measure, 20_000)
    rec = cl.operational_correlation(sys_, sys_.measure, ref, COS, COS, np.linspace(0, 1, 21), 20_000, 2)
    assert np.max(rec.values) >= 0.2
    # exact value: cos(2 pi t) / 2
    assert np.allclose(rec.values, 0.5 * np.cos(2 * np.pi * rec.times), atol=5 * np.max(rec.stderr) + 0.02)


# --- orbit tracking -------------------------------------------------------------------

def test_track_on_attractor():
    sys_ = get_system("doubling_contract")
    res = cl.orbit_track_search(sys_, [0.3, 1.0], None, 1e-3, 10, 0, seed=0)
    assert res.settle_time == 0.0 and res.sup_distance == 0.0
    assert np.allclose(res.partner, [0.3, 1.0])


def test_track_contracting():
    sys_ = get_system("doubling_contract")
    res = cl.orbit_track_search(sys_, [0.3, 1.8], sys_.attractor, 1e-3, 20, 32, seed=0)
    assert res.tracked and res.settle_time == math.ceil(math.log2(0.8 / 1e-3))
    assert np.allclose(res.partner, [0.3, 1.0]) and res.sup_distance < 1e-3


def test_track_planar_rotation_fails():
    sys_ = get_system("planar_rotation")
    res = cl.orbit_track_search(sys_, [1.5, 0.0], sys_.attractor, 0.1, 10, 64, seed=0)
    assert not res.tracked and res.settle_time == math.inf


def test_track_reproducible():
    sys_ = get_system("doubling_contract")
    a = cl.orbit_track_search(sys_, [0.7, 0.6], sys_.attractor, 1e-2, 15, 16, seed=5)
    b = cl.orbit_track_search(sys_, [0.7, 0.6], sys_.attractor, 1e-2, 15, 16, seed=5)
    assert a.sup_distance == b.sup_distance and np.array_equal(a.partner, b.partner)


# --- concentration -------------------------------------------------------------------

def test_concentration_bound_example():
    v = cl.concentration_bound_closed(2.0, 1.0, 1e6)
    assert v == pytest.approx((1 + 2e-6) ** math.exp(-1) * 1e6 ** (math.exp(-1) - 1) - 2e-6, rel=1e-12)
    assert v == pytest.approx(1.6e-4, rel=0.01)


@pytest.mark.parametrize("eps_over_M", [0.05, 0.1, 0.3, 1.0])
def test_profile_dominated_by_bound(eps_over_M):
    base = get_system("linear_torus")
    p = cx.CounterexampleParams(0.2, base)
    M = cx.field_bound(base)
    T = [1e2, 1e3, 1e4]
    qn = 20_000
    prof = cl.concentration_profile(p, eps_over_M * M, T, quadrature_n=qn).values
    bound = cl.concentration_bound(p, eps_over_M * M, T, M=M)
    assert np.all((prof >= 0) & (prof <= 1))
    assert np.all(prof <= bound + 2.0 / qn)


def test_profile_eventually_decreasing():
    base = get_system("linear_torus")
    p = cx.CounterexampleParams(0.2, base)
    eps = 0.05 * cx.field_bound(base)
    prof = cl.concentration_profile(p, eps, [1e3, 1e4, 1e5, 1e6], quadrature_n=20_000).values
    assert np.all(np.diff(prof) <= 2.0 / 20_000)


def test_concentration_needs_offset():
    with pytest.raises(DomainError):
        cl.concentration_profile(cx.CounterexampleParams(0.0, get_system("linear_torus")), 0.1, [10])


# --- records ---------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(vals=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=20), with_err=st.booleans())
def test_series_round_trip(vals, with_err, tmp_path_factory):
    t = np.arange(len(vals), dtype=float) * 0.5
    err = np.abs(np.asarray(vals)) * 0.1 if with_err else None
    rec = cl.SeriesRecord(t, vals, "a label", err)
    path = tmp_path_factory.mktemp("s") / "s.csv"
    cl.write_series(rec, path)
    back = cl.read_series(path)
    assert back.label == "a label" and np.array_equal(back.values, rec.values)
    assert np.array_equal(back.times, rec.times)
    assert (back.stderr is None) == (err is None)


def test_verdict_rule():
    rec = cl.SeriesRecord(range(8), [1, 1, 1, 1, 1, 1, 0.01, 0.02])
    assert cl.verdict(rec)["converged"]
    assert not cl.verdict(rec, theta=0.01)["converged"]


def test_integrate_matches_correlation_means():
    sys_ = get_system("cat")
    mu = sample_density(sys_.measure, 500, seed=7)
    rec = cl.classical_correlation(sys_, mu, ONE, COS, [0, 1])
    assert rec.values[0] == pytest.approx(0.0, abs=1e-14)
    assert rec.values[1] == pytest.approx(integrate(mu, lambda x: COS(evolve(sys_, 1, x))) - integrate(mu, COS),
                                          abs=1e-14)
