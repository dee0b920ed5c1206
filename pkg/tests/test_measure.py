import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anonlearn.measure import (
    EUCLIDEAN,
    TOTAL_VARIATION,
    DiscreteMeasure,
    IntegrationError,
    MeasureError,
    SupportTooLarge,
    dirac,
    integrate,
    mix,
    pushforward,
    to_record,
    wasserstein1,
)

from oracles import euclid_matrix, w1_line, w1_lp


def line(points, weights=None):
    points = np.asarray(points, dtype=float)[:, None]
    if weights is None:
        weights = np.full(len(points), 1.0 / len(points))
    return DiscreteMeasure(points, weights, EUCLIDEAN)


def random_measure(rng, n, d=2):
    return DiscreteMeasure(rng.normal(size=(n, d)), rng.uniform(0.1, 1.0, n), EUCLIDEAN)


# -- construction and pushforward --------------------------------------------------


def test_single_action_is_dirac():
    mu = pushforward([(np.array([1.0, 2.0]), 1.0)], EUCLIDEAN)
    assert len(mu) == 1
    assert mu.weights[0] == 1.0
    assert mu.same_as(dirac([1.0, 2.0], EUCLIDEAN))


def test_identical_points_merge():
    a = np.array([0.3])
    mu = pushforward([(a, 0.5), (a, 0.5)], EUCLIDEAN)
    assert len(mu) == 1 and mu.weights[0] == pytest.approx(1.0, abs=1e-15)


def test_uniform_empirical_measure():
    K = 7
    mu = pushforward([(np.array([float(k)]), 1.0 / K) for k in range(K)], EUCLIDEAN)
    assert len(mu) == K
    np.testing.assert_allclose(mu.weights, 1.0 / K, atol=1e-15)


def test_points_within_tolerance_merge():
    mu = line([0.0, 1e-13, 1.0], [0.25, 0.25, 0.5])
    assert len(mu) == 2
    assert sorted(mu.weights) == pytest.approx([0.5, 0.5])


@pytest.mark.parametrize(
    "profile,msg",
    [([], "empty profile"), ([(np.zeros(1), 0.0), (np.ones(1), 1.0)], "invalid weight"), ([(np.zeros(1), -1.0)], "invalid weight")],
)
def test_pushforward_errors(profile, msg):
    with pytest.raises(MeasureError, match=msg):
        pushforward(profile, EUCLIDEAN)


def test_pushforward_rejects_unnormalised():
    with pytest.raises(MeasureError):
        pushforward([(np.zeros(1), 0.4), (np.ones(1), 0.4)], EUCLIDEAN)


def test_measure_is_immutable():
    mu = line([0.0, 1.0])
    with pytest.raises(ValueError):
        mu.weights[0] = 1.0


def test_light_atoms_are_pruned():
    mu = line([0.0, 1.0], [1.0, 1e-16])
    assert len(mu) == 1


def test_record_layout():
    rec = to_record(line([0.0, 2.0]))
    assert rec == {"atoms": [{"point": [0.0], "weight": 0.5}, {"point": [2.0], "weight": 0.5}]}


# -- mix ----------------------------------------------------------------------------


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0])
def test_mix_fixed_point(t):
    mu = line([0.0, 1.0, 5.0], [0.2, 0.3, 0.5])
    assert mix(mu, mu, t).same_as(mu)


def test_mix_two_diracs():
    m = mix(dirac([0.0], EUCLIDEAN), dirac([1.0], EUCLIDEAN), 0.5)
    assert m.same_as(line([0.0, 1.0]))


@pytest.mark.parametrize("t", [-0.1, 1.5])
def test_mix_range_error(t):
    with pytest.raises(MeasureError, match="outside"):
        mix(dirac([0.0], EUCLIDEAN), dirac([1.0], EUCLIDEAN), t)


def test_mix_needs_same_metric():
    with pytest.raises(MeasureError):
        mix(dirac([0.0], EUCLIDEAN), dirac([1.0], TOTAL_VARIATION), 0.5)


def test_running_average_matches_arithmetic_mean():
    rng = np.random.default_rng(3)
    etas = [line(rng.integers(0, 6, size=4).astype(float)) for _ in range(40)]
    bar = etas[0]
    for n, eta in enumerate(etas[1:], start=1):
        bar = mix(bar, eta, 1.0 / (n + 1))
    # direct arithmetic mean over all atoms of all rounds
    pts = np.concatenate([e.points for e in etas])
    wts = np.concatenate([e.weights for e in etas]) / len(etas)
    direct = DiscreteMeasure(pts, wts, EUCLIDEAN)
    assert bar.same_as(direct, atol=1e-14)


def test_mix_is_associative_in_distribution():
    rng = np.random.default_rng(5)
    mu, nu, rho = (random_measure(rng, 4) for _ in range(3))
    lhs = mix(mix(mu, nu, 0.5), rho, 1.0 / 3.0)
    uniform = DiscreteMeasure(
        np.concatenate([mu.points, nu.points, rho.points]),
        np.concatenate([mu.weights, nu.weights, rho.weights]) / 3.0,
        EUCLIDEAN,
    )
    assert lhs.same_as(uniform, atol=1e-14)


def test_mix_atom_count_bound():
    rng = np.random.default_rng(1)
    mu, nu = random_measure(rng, 5), random_measure(rng, 6)
    assert len(mix(mu, nu, 0.4)) <= len(mu) + len(nu)


# -- integrate ----------------------------------------------------------------------


def test_integrate_constant():
    assert integrate(line([0.0, 3.0, 4.0], [0.2, 0.3, 0.5]), lambda p: 2.5) == pytest.approx(2.5)


def test_integrate_indicator():
    mu = line([0.0, 3.0, 4.0], [0.2, 0.3, 0.5])
    assert integrate(mu, lambda p: float(p[0] == 3.0)) == pytest.approx(0.3)


def test_signed_integral_matches_direct_sum():
    mu = line([0.0, 1.0, 2.0], [0.5, 0.25, 0.25])
    nu = line([1.0, 2.0, 7.0], [0.1, 0.6, 0.3])
    f = lambda p: float(np.sin(p[0]) + p[0] ** 2)  # noqa: E731
    direct = sum(w * f([x]) for x, w in [(0, 0.5), (1, 0.25), (2, 0.25)]) - sum(
        w * f([x]) for x, w in [(1, 0.1), (2, 0.6), (7, 0.3)]
    )
    assert integrate(mu, f) - integrate(nu, f) == pytest.approx(direct, abs=1e-14)


def test_integrate_reports_offending_atom():
    mu = line([0.0, 1.0, 2.0])
    with pytest.raises(IntegrationError) as err:
        integrate(mu, lambda p: np.inf if p[0] == 1.0 else 0.0)
    assert err.value.index == 1


def test_pushforward_then_integrate_equals_weighted_sum():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(6, 2))
    w = rng.uniform(0.1, 1, 6)
    w /= w.sum()
    f = lambda p: float(p @ [1.0, -2.0] + np.cos(p[0]))  # noqa: E731
    mu = pushforward(list(zip(pts, w)), EUCLIDEAN)
    assert integrate(mu, f) == pytest.approx(sum(wi * f(p) for p, wi in zip(pts, w)), abs=1e-14)


# -- wasserstein ---------------------------------------------------------------------


def test_w1_between_diracs_is_ground_distance():
    assert wasserstein1(dirac([0.0, 0.0], EUCLIDEAN), dirac([3.0, 4.0], EUCLIDEAN)) == pytest.approx(5.0)


def test_w1_self_is_zero():
    mu = line([0.0, 1.0, 4.0])
    assert wasserstein1(mu, mu) == 0.0


def test_w1_half_split_on_line():
    # DERIVED via the 1-D CDF oracle: W1 = 0.5
    mu, nu = line([0.0, 1.0]), line([0.0])
    assert w1_line([0, 1], [0.5, 0.5], [0], [1]) == pytest.approx(0.5)
    assert wasserstein1(mu, nu) == pytest.approx(0.5, abs=1e-15)


def test_w1_matches_lp_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        mu, nu = random_measure(rng, rng.integers(1, 12)), random_measure(rng, rng.integers(1, 12))
        ref = w1_lp(mu.weights, nu.weights, euclid_matrix(mu.points, nu.points))
        assert wasserstein1(mu, nu) == pytest.approx(ref, abs=1e-9)


def test_w1_matches_cdf_oracle_on_line():
    rng = np.random.default_rng(12)
    for _ in range(20):
        x, y = rng.normal(size=9), rng.normal(size=5)
        a, b = rng.uniform(0.1, 1, 9), rng.uniform(0.1, 1, 5)
        a, b = a / a.sum(), b / b.sum()
        assert wasserstein1(line(x, a), line(y, b)) == pytest.approx(w1_line(x, a, y, b), abs=1e-9)


def test_w1_cap():
    rng = np.random.default_rng(0)
    mu, nu = random_measure(rng, 20), random_measure(rng, 20)
    with pytest.raises(SupportTooLarge, match="subsample"):
        wasserstein1(mu, nu, cap=16)
    assert wasserstein1(mu, nu, cap=None) > 0


def test_w1_cap_counts_only_unshared_mass():
    pts = np.arange(30.0)
    mu = line(pts)
    nu = line(np.r_[pts[:-1], 100.0])
    # 29 atoms cancel exactly; only two remain
    assert wasserstein1(mu, nu, cap=4) == pytest.approx((100.0 - 29.0) / 30.0)


small_measures = st.integers(min_value=1, max_value=16).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-5, 5, allow_nan=False), min_size=n, max_size=n),
        st.lists(st.floats(0.05, 1.0), min_size=n, max_size=n),
    )
)


def _from(draw):
    x, w = draw
    w = np.asarray(w) / np.sum(w)
    return line(x, w)


@settings(max_examples=60, deadline=None)
@given(small_measures, small_measures, small_measures)
def test_w1_metric_axioms(a, b, c):
    mu, nu, rho = _from(a), _from(b), _from(c)
    dmn = wasserstein1(mu, nu)
    assert dmn == pytest.approx(wasserstein1(nu, mu), abs=1e-9)
    assert dmn <= wasserstein1(mu, rho) + wasserstein1(rho, nu) + 1e-9


@settings(max_examples=60, deadline=None)
@given(small_measures, small_measures, st.lists(st.floats(-5, 5), min_size=1, max_size=4))
def test_kantorovich_dual_bound(a, b, centres):
    mu, nu = _from(a), _from(b)
    # min of distance functions is 1-Lipschitz
    f = lambda p: min(abs(p[0] - c) for c in centres)  # noqa: E731
    assert integrate(mu, f) - integrate(nu, f) <= wasserstein1(mu, nu) + 1e-9


def test_w1_zero_iff_equal_up_to_dedup():
    mu = line([0.0, 1.0])
    nu = line([1e-13, 1.0])
    assert wasserstein1(mu, nu) < 1e-12
    assert wasserstein1(mu, line([0.0, 1.0 + 1e-6])) > 0
