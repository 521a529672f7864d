import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relayqos.channel import decompose, generate_channel
from relayqos.convex import ChainConstraints, SeparableObjective, SolverConfig
from relayqos.linear import (QosVector, ab_from_lambda, exact_objective, linear_constraints,
                             lower_bound_linear, solve_hyperbola, stream_profile,
                             total_power)
from relayqos.dfe import lower_bound_nonlinear
from relayqos.oracles import CapabilityError, alternating_ab, convex_solve, grid_search

from oracle_helpers import waterfill_single_cap


def _hyp(w):
    w = np.asarray(w, float)
    return SeparableObjective(lambda x: w / x, lambda x: -w / x ** 2,
                              lambda x: 2 * w / x ** 3)


def test_single_cap_waterfilling():
    w = [1.0, 4.0]
    cons = ChainConstraints(caps=[np.inf, 1.0], lower=0.0, upper=1.0, ordered=False)
    res = convex_solve(_hyp(w), cons)
    assert res.converged and res.kkt_residual <= SolverConfig().tol_kkt
    np.testing.assert_allclose(res.minimizer, waterfill_single_cap(w, 1.0), atol=1e-9)
    np.testing.assert_allclose(res.minimizer, [1 / 3, 2 / 3], atol=1e-9)


def test_box_corner():
    cons = ChainConstraints(caps=[1e6, 1e6, 1e6], lower=0.0, upper=1.0)
    res = convex_solve(_hyp([1.0, 2.0, 3.0]), cons)
    assert res.converged
    np.testing.assert_allclose(res.minimizer, 1.0, atol=1e-9)


def test_non_convergence_is_reported():
    cons = linear_constraints(QosVector([0.1, 0.2, 0.3]))
    res = convex_solve(_hyp([1.0, 2.0, 5.0]), cons, SolverConfig(max_iters=1))
    assert not res.converged
    assert res.kkt_residual > SolverConfig().tol_kkt


@given(seed=st.integers(0, 3000), k=st.integers(1, 6))
def test_converged_implies_certified(seed, k):
    e = decompose(generate_channel(k, k, 1.0, seed), k)
    prof = stream_profile(e.lam_h1, e.lam_h2, 1.0)
    qos = QosVector(np.linspace(0.02, 0.5, k))
    cfg = SolverConfig()
    res = convex_solve(_hyp(prof.w), linear_constraints(qos), cfg)
    assert not res.converged or res.kkt_residual <= cfg.tol_kkt
    assert linear_constraints(qos).violation(res.minimizer) <= 1e-12


def test_degenerate_instance_certifies():
    # several prefix caps active at once; used to stall before certification
    w = [0.125, 1, 1, 1, 1, 3, 3, 4]
    eta = [0.25, 0.5, 0.546875, 0.75, 0.875, 0.875, 0.9375, 1.0]
    qos = QosVector(np.asarray(eta) / sum(eta))
    res = convex_solve(_hyp(w), linear_constraints(qos))
    assert res.converged
    np.testing.assert_allclose(res.minimizer, solve_hyperbola(w, qos), rtol=1e-6)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol_kkt=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iters=0)


# alternating -----------------------------------------------------------


@given(seed=st.integers(0, 3000), k=st.integers(1, 4), rho=st.floats(0.05, 5.0))
def test_alternating_monotone_and_bounded(seed, k, rho):
    e = decompose(generate_channel(k, k, rho, seed), k)
    rng = np.random.default_rng(seed)
    qos = QosVector(np.sort(rng.uniform(0.02, 1.0, k)))
    cfg = SolverConfig()
    alt = alternating_ab(e, qos, rho, cfg)
    h = np.asarray(alt.history)
    assert np.all(np.diff(h) <= 0)
    prof = stream_profile(e.lam_h1, e.lam_h2, rho)
    start = total_power(solve_hyperbola(prof.w, qos), prof)
    assert alt.total_power <= start * (1 + 1e-12)
    _, lb = lower_bound_linear(prof, qos, cfg)
    assert alt.total_power >= lb * (1 - cfg.tol_kkt)
    assert np.all(np.cumsum(alt.lam) <= qos.prefix + 1e-9)
    assert np.all(alt.a >= 0) and np.all(alt.b >= 0)


def test_alternating_fixed_point_single_stream():
    # one stream: the hyperbola start lam = eta with the optimal (A, B) split
    # is already the global optimum
    e = decompose(generate_channel(1, 1, 1.0, 4), 1)
    alt = alternating_ab(e, QosVector([0.7]), 1.0)
    a0, b0 = ab_from_lambda(0.7, e.lam_h1[0], e.lam_h2[0])
    assert alt.a[0] == pytest.approx(a0, rel=1e-9)
    assert alt.b[0] == pytest.approx(b0, rel=1e-9)
    assert alt.history[-1] == pytest.approx(alt.history[0], rel=1e-9)


# grid ------------------------------------------------------------------


def test_grid_single_stream_binds():
    e = decompose(generate_channel(1, 1, 1.0, 0), 1)
    g = grid_search("linear", e, QosVector([0.7]), 1.0)
    assert abs(g.minimizer[0] - 0.7) <= g.step + 1e-12
    assert g.converged and g.kkt_residual == 0.0


def test_grid_capability_limit():
    e = decompose(generate_channel(4, 4, 1.0, 0), 4)
    with pytest.raises(CapabilityError):
        grid_search("linear", e, QosVector([0.5] * 4), 1.0)


def test_grid_unknown_problem():
    e = decompose(generate_channel(1, 1, 1.0, 0), 1)
    with pytest.raises(ValueError):
        grid_search("cubic", e, QosVector([0.5]), 1.0)


@settings(max_examples=25)
@given(seed=st.integers(0, 3000), k=st.integers(1, 3), data=st.data())
def test_grid_above_bounds(seed, k, data):
    e = decompose(generate_channel(k, k, 1.0, seed), k)
    qos = QosVector(np.sort(data.draw(st.lists(st.floats(0.02, 1.0), min_size=k,
                                               max_size=k))))
    cfg = SolverConfig(grid_points_per_dim=120)
    prof = stream_profile(e.lam_h1, e.lam_h2, 1.0)
    # certificate floor: relative to the derivative scale, ~sum(w)
    floor = cfg.tol_kkt * prof.w.sum()
    g = grid_search("linear", e, qos, 1.0, cfg)
    _, lb = lower_bound_linear(prof, qos)
    assert g.value >= lb * (1 - 1e-9) - floor
    assert np.all(np.cumsum(g.minimizer) <= qos.prefix + 1e-12)
    gn = grid_search("nonlinear", e, qos, 1.0, cfg)
    _, lbn = lower_bound_nonlinear(prof, qos)
    assert gn.value >= lbn * (1 - 1e-9) - floor
    assert np.all(np.cumsum(gn.minimizer) <= np.cumsum(qos.kappa) + 1e-12)


def test_grid_close_to_exact_convex_optimum():
    # targets small enough that the exact problem is convex and the bound tight
    e = decompose(generate_channel(2, 2, 1.0, 8), 2)
    qos = QosVector([0.1, 0.2])
    prof = stream_profile(e.lam_h1, e.lam_h2, 1.0)
    ex = convex_solve(exact_objective(prof), linear_constraints(qos))
    g = grid_search("linear", e, qos, 1.0)
    assert ex.value * (1 - 1e-9) <= g.value <= ex.value + g.resolution_bound
