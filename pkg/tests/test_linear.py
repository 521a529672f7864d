import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from relayqos.channel import decompose, generate_channel
from relayqos.convex import SeparableObjective
from relayqos.linear import (FeasibilityError, CONVEX_SUM, QosVector, ab_from_lambda,
                             allocation_from_lambda, check_convexity_condition,
                             exact_objective, hyperbola_coeffs, inflection_alpha,
                             linear_constraints, lower_bound_linear, mse_from_ab,
                             per_stream_power, power_derivative, solve_hyperbola,
                             stream_profile, tangent_beta, total_power)
from relayqos.oracles import convex_solve

from oracle_helpers import (alpha_by_roots, beta_by_bisection, power_curve,
                            second_difference)

gains = st.floats(0.05, 20.0)
lams = st.floats(1e-4, 1.0)
gammas = st.floats(2.0, 100.0)


def _qos(draw_vals):
    return QosVector(np.sort(np.asarray(draw_vals)))


# per-stream power -----------------------------------------------------


def test_power_zero_at_unit_mse():
    assert per_stream_power(1.0, 0.3, 2.0, 1.7) == 0.0


def test_power_balanced_half():
    assert per_stream_power(0.5, 1.0, 1.0, 1.0) == pytest.approx(2 + 2 * np.sqrt(2), rel=1e-14)


def test_power_matches_ab_reconstruction():
    a, b = ab_from_lambda(0.5, 1.0, 1.0)
    assert 1.0 * (a / 1.0 + b / 1.0) == pytest.approx(2 + 2 * np.sqrt(2), rel=1e-14)


@pytest.mark.parametrize("lam", [0.0, -0.1, 1.0 + 1e-9, np.nan])
def test_power_domain_error(lam):
    with pytest.raises(ValueError):
        per_stream_power(lam, 1.0, 1.0, 1.0)


def test_power_small_lambda_asymptote():
    l1, l2, rho = 0.7, 2.5, 1.3
    w, _ = hyperbola_coeffs(l1, l2, rho)
    lam = 1e-9
    assert per_stream_power(lam, l1, l2, rho) * lam == pytest.approx(w, rel=1e-8)


@given(lam=lams, l1=gains, l2=gains, rho=st.floats(1e-3, 1e3))
def test_power_matches_direct_formula(lam, l1, l2, rho):
    g = (l1 + l2) / np.sqrt(l1 * l2)
    ref = power_curve(lam, g, rho / np.sqrt(l1 * l2))
    assert per_stream_power(lam, l1, l2, rho) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@given(gamma=gammas)
def test_power_strictly_decreasing(gamma):
    x = np.linspace(1e-3, 1.0, 2000)
    assert np.all(np.diff(power_curve(x, gamma)) < 0)


# A/B pair --------------------------------------------------------------


def test_ab_at_unit_mse():
    assert ab_from_lambda(1.0, 0.4, 3.0) == (0.0, 0.0)


def test_ab_balanced_half():
    a, b = ab_from_lambda(0.5, 2.0, 2.0)
    assert a == pytest.approx(1 + np.sqrt(2), rel=1e-14)
    assert b == pytest.approx(a, rel=1e-14)


@given(lam=lams, l1=gains, l2=gains)
def test_ab_inversion_identity(lam, l1, l2):
    a, b = ab_from_lambda(lam, l1, l2)
    assert a >= 0 and b >= 0
    assert abs(float(mse_from_ab(a, b)) - lam) < 1e-12


def test_minus_branch_never_admissible(rng):
    lam = rng.uniform(1e-3, 1 - 1e-6, 1000)
    l1 = rng.uniform(0.01, 10, 1000)
    l2 = rng.uniform(0.01, 10, 1000)
    r = np.sqrt(1 - lam)
    ratio = np.sqrt(l1 / l2)
    a = (1 - lam) / lam - ratio * r / lam
    b = (1 - lam) / lam - r / (ratio * lam)
    assert np.all((a < 0) | (b < 0))


@given(lam=st.floats(1e-3, 0.999), l1=gains, l2=gains)
def test_ab_is_power_minimising_split(lam, l1, l2):
    # any other admissible A on the same MSE level costs at least as much
    a, b = ab_from_lambda(lam, l1, l2)
    p = a / l1 + b / l2
    for scale in (0.7, 0.95, 1.05, 1.5):
        a2 = a * scale
        # solve mse_from_ab(a2, b2) = lam for b2
        b2 = (a2 + 1 - lam * (a2 + 1)) / (lam * (1 + a2) - 1)
        if not b2 > 0 or not np.isfinite(b2):
            continue
        assert a2 / l1 + b2 / l2 >= p * (1 - 1e-12)


# breakpoints ------------------------------------------------------------


def test_alpha_balanced():
    assert abs(inflection_alpha(2.0) - 8.0 / 9.0) <= 1e-12


def test_alpha_gamma3_oracle():
    a = inflection_alpha(3.0)
    assert 8.0 / 9.0 < a < 1.0
    g2 = 9.0
    res = 9 * a ** 4 - 8 * (9 - 2 * g2) * a ** 3 + (4 - g2) * (48 * a * a - 48 * a + 16)
    assert abs(res) < 1e-9
    assert a == pytest.approx(alpha_by_roots(3.0), abs=1e-10)


@given(gamma=st.floats(2.0 + 1e-6, 100.0))
def test_alpha_matches_quartic_root(gamma):
    assert inflection_alpha(gamma) == pytest.approx(alpha_by_roots(gamma), abs=1e-8)


def test_alpha_monotone_to_one():
    g = np.geomspace(2.0 + 1e-6, 1e4, 200)
    a = np.array([inflection_alpha(x) for x in g])
    assert np.all(np.diff(a) >= -1e-12) and 1 - a[-1] < 1e-3 and np.all(a < 1)


def test_alpha_continuous_at_singular_branch():
    below = inflection_alpha(np.sqrt(4 + 0.5e-9))
    above = inflection_alpha(np.sqrt(4 + 1e-6))
    assert abs(below - 8 / 9) <= 1e-12
    assert abs(above - 8 / 9) < 1e-3


@pytest.mark.parametrize("fn", [inflection_alpha, tangent_beta])
def test_breakpoint_domain(fn):
    with pytest.raises(ValueError):
        fn(1.99)


@given(gamma=st.floats(2.0, 50.0))
def test_convex_then_concave(gamma):
    alpha = inflection_alpha(gamma)
    f = lambda x: power_curve(x, gamma)  # noqa: E731
    h = 1e-4
    left = np.linspace(0.05, alpha - 5e-3, 50)
    right = np.linspace(alpha + 5e-3, 1 - 2e-3, 20)
    assume(right.size and right[0] < right[-1])
    assert np.all(second_difference(f, left, h) >= -1e-8)
    assert np.all(second_difference(f, right, h) <= 1e-8)


def test_beta_balanced():
    b = tangent_beta(2.0)
    assert b == pytest.approx(0.75, abs=1e-15)
    assert abs(3 * b - 2 - 2 * (1 - b) ** 1.5) < 1e-12


def test_beta_tangency_balanced():
    b = tangent_beta(2.0)
    p = per_stream_power(b, 1.0, 1.0, 1.0)
    dp = power_derivative(b, 1.0, 1.0, 1.0)
    assert abs(dp * (b - 1) - p) < 1e-9


def test_beta_gamma5_bisection():
    b = tangent_beta(5.0)
    assert abs(3 * b - 2 - 5 * (1 - b) ** 1.5) < 1e-10
    assert b == pytest.approx(beta_by_bisection(5.0), abs=1e-12)


@given(gamma=gammas)
def test_beta_below_alpha(gamma):
    b, a = tangent_beta(gamma), inflection_alpha(gamma)
    assert 0 < b < a < 1 or (gamma == 2.0 and b < a <= 1)
    assert a >= 8 / 9 - 1e-15


# hyperbola --------------------------------------------------------------


def test_hyperbola_balanced():
    w, z = hyperbola_coeffs(1.0, 1.0, 1.0)
    assert w == pytest.approx(4.0) and z == pytest.approx(-3.5)


@pytest.mark.parametrize("gamma", [2.0, 3.0, 10.0])
def test_hyperbola_minimax_spot_check(gamma):
    s = 1.0
    # pick gains with the requested imbalance and unit scale
    r = (gamma + np.sqrt(gamma ** 2 - 4)) / 2  # l1/l2 ratio root
    l2 = 1.0 / np.sqrt(r)
    l1 = r * l2
    w, z = hyperbola_coeffs(l1, l2, s * np.sqrt(l1 * l2))
    x = np.linspace(1e-4, 1.0, 10_000)
    p = power_curve(x, (l1 + l2) / np.sqrt(l1 * l2), 1.0)

    def sup(ww, zz):
        return np.max(np.abs(p - (ww / x + zz)))

    base = sup(w, z)
    for dw, dz in ((1e-3, 0), (-1e-3, 0), (0, 1e-3), (0, -1e-3)):
        assert sup(w + dw, z + dz) >= base


@given(l1=gains, l2=gains, rho=st.floats(1e-3, 1e3))
def test_profile_invariants(l1, l2, rho):
    prof = stream_profile([l1], [l2], rho)
    assert prof.gamma[0] >= 2.0
    w_ref = rho * (l1 ** -0.5 + l2 ** -0.5) ** 2
    assert prof.w[0] == pytest.approx(w_ref, rel=1e-12)
    assert 8 / 9 - 1e-15 <= prof.alpha[0] <= 1.0
    assert 0 < prof.beta[0] < prof.alpha[0]


def test_gamma_two_iff_balanced():
    assert stream_profile([1.3], [1.3], 1.0).gamma[0] == 2.0
    assert stream_profile([1.3], [1.31], 1.0).gamma[0] > 2.0


@given(seed=st.integers(0, 5000), k=st.integers(1, 5))
def test_weights_nondecreasing_on_channels(seed, k):
    e = decompose(generate_channel(k, k, 1.0, seed), k)
    assert np.all(np.diff(stream_profile(e.lam_h1, e.lam_h2, 1.0).w) >= 0)


# backward waterfilling, additive caps -----------------------------------------------------------


def test_single_stream():
    np.testing.assert_allclose(solve_hyperbola([3.0], [0.7]), [0.7])


def test_equal_weights_equal_targets():
    np.testing.assert_allclose(solve_hyperbola([1, 1, 1, 1], [0.3] * 4), 0.3, rtol=1e-14)


def test_hand_executed_example():
    lam = solve_hyperbola([1.0, 4.0], [0.5, 0.5])
    np.testing.assert_allclose(lam, [1 / 3, 2 / 3], rtol=1e-14)
    assert np.sum(np.array([1.0, 4.0]) / lam) == pytest.approx(9.0, rel=1e-14)


def test_clipping_at_one():
    lam = solve_hyperbola([1.0, 100.0], [0.9, 1.0])
    assert lam[1] == 1.0 and lam[0] == pytest.approx(0.9)


def _hyp_objective(w):
    return SeparableObjective(lambda x: w / x, lambda x: -w / x ** 2,
                              lambda x: 2 * w / x ** 3)


@st.composite
def instances(draw, kmax=8):
    k = draw(st.integers(1, kmax))
    w = np.sort(np.array(draw(st.lists(st.floats(0.01, 100.0), min_size=k, max_size=k))))
    eta = np.sort(np.array(draw(st.lists(st.floats(0.005, 1.0), min_size=k, max_size=k))))
    return w, QosVector(eta)


@given(inst=instances())
def test_algorithm1_matches_convex_oracle(inst):
    w, qos = inst
    lam = solve_hyperbola(w, qos)
    # no ordering constraint in the oracle: ordering must emerge by itself
    cons = linear_constraints(qos)
    cons = type(cons)(caps=cons.caps, lower=cons.lower, upper=cons.upper, ordered=False)
    ref = convex_solve(_hyp_objective(w), cons)
    assert ref.converged
    assert np.sum(w / lam) == pytest.approx(ref.value, rel=1e-6)
    assert np.all(np.diff(lam) >= -1e-12)
    assert np.all(np.cumsum(lam) <= qos.prefix + 1e-9) and np.all(lam <= 1)


def test_weights_must_be_sorted_and_match():
    with pytest.raises(ValueError):
        solve_hyperbola([2.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        solve_hyperbola([1.0, 2.0], [0.5])
    with pytest.raises(ValueError):
        QosVector([0.6, 0.5])
    with pytest.raises(ValueError):
        QosVector([0.0, 0.5])


# lower bound ------------------------------------------------------------


@given(seed=st.integers(0, 2000), k=st.integers(1, 4), data=st.data())
def test_bound_sandwich(seed, k, data):
    e = decompose(generate_channel(k, k, 1.0, seed), k)
    eta = _qos(data.draw(st.lists(st.floats(0.01, 1.0), min_size=k, max_size=k)))
    prof = stream_profile(e.lam_h1, e.lam_h2, 1.0)
    lam = solve_hyperbola(prof.w, eta)
    _, lb = lower_bound_linear(prof, eta)
    assert lb <= total_power(lam, prof) * (1 + 1e-9)
    ex = convex_solve(exact_objective(prof), linear_constraints(eta))
    # the bound cannot exceed any feasible value of the exact objective
    assert lb <= ex.value * (1 + 1e-9)


@given(seed=st.integers(0, 2000), k=st.integers(1, 3))
def test_bound_exact_below_tangent_points(seed, k):
    e = decompose(generate_channel(k, k, 1.0, seed), k)
    prof = stream_profile(e.lam_h1, e.lam_h2, 1.0)
    # targets small enough that every feasible lam sits below min beta
    cap = 0.95 * prof.beta.min() / k
    eta = QosVector(np.linspace(0.5, 1.0, k) * cap)
    lam_lb, lb = lower_bound_linear(prof, eta)
    assert np.all(lam_lb <= prof.beta + 1e-12)
    ex = convex_solve(exact_objective(prof), linear_constraints(eta))
    assert ex.converged
    assert lb == pytest.approx(ex.value, rel=1e-6)


@given(rho=st.floats(1e-2, 1e2), seed=st.integers(0, 500))
def test_rho_linearity(rho, seed):
    e = decompose(generate_channel(3, 3, 1.0, seed), 3)
    eta = QosVector([0.1, 0.2, 0.4])
    p1, p2 = stream_profile(e.lam_h1, e.lam_h2, 1.0), stream_profile(e.lam_h1, e.lam_h2, rho)
    np.testing.assert_allclose(p2.w, rho * p1.w, rtol=1e-12)
    l1, l2 = solve_hyperbola(p1.w, eta), solve_hyperbola(p2.w, eta)
    np.testing.assert_allclose(l1, l2, rtol=1e-12)
    a1 = allocation_from_lambda(l1, e, 1.0, eta)
    a2 = allocation_from_lambda(l2, e, rho, eta)
    np.testing.assert_allclose(a1.a, a2.a, rtol=1e-12)
    np.testing.assert_allclose(a1.b, a2.b, rtol=1e-12)
    assert a2.total_power == pytest.approx(rho * a1.total_power, rel=1e-12)
    _, b1 = lower_bound_linear(p1, eta)
    _, b2 = lower_bound_linear(p2, eta)
    assert b2 == pytest.approx(rho * b1, rel=1e-9)


# allocation -------------------------------------------------------------


def test_unit_mse_zero_power():
    e = decompose(generate_channel(3, 3, 1.0, 0), 3)
    al = allocation_from_lambda(np.ones(3), e, 1.0)
    assert al.total_power == 0.0


def test_infeasible_lambda_named_constraint():
    e = decompose(generate_channel(2, 2, 1.0, 0), 2)
    with pytest.raises(FeasibilityError, match="j=1"):
        allocation_from_lambda([0.3, 0.3], e, 1.0, QosVector([0.2, 0.5]))


@given(seed=st.integers(0, 2000), k=st.integers(1, 4), rho=st.floats(0.01, 10))
def test_allocation_invariants(seed, k, rho):
    e = decompose(generate_channel(k, k, rho, seed), k)
    eta = QosVector(np.linspace(0.05, 0.6, k))
    prof = stream_profile(e.lam_h1, e.lam_h2, rho)
    lam = solve_hyperbola(prof.w, eta)
    al = allocation_from_lambda(lam, e, rho, eta)
    for v in (al.a, al.b, al.lam_u, al.lam_f):
        assert np.all(v >= 0)
    ref = np.sum(rho * (al.a / e.lam_h1 + al.b / e.lam_h2))
    assert al.total_power == pytest.approx(ref, rel=1e-9)
    assert al.total_power == pytest.approx(total_power(lam, prof), rel=1e-9)


@pytest.mark.parametrize("eta,expected", [((0.2, 0.3), True), ((0.5, 0.5), False),
                                          ((8 / 9,), True)])
def test_convexity_condition(eta, expected):
    assert check_convexity_condition(QosVector(eta)) is expected
    assert CONVEX_SUM == 8 / 9
