"""Power allocation for the decision-feedback (DFE) receiver.

With a DFE the per-stream MSE eigenvalues only need to satisfy prefix-product
caps.  Working with ``theta = ln lam`` turns these into prefix-sum caps on
``theta <= 0`` and the per-stream power becomes ``Q_n(theta) = P_n(e^theta)``.
``Q_n`` is convex for ``theta <= ln phi_n`` and concave above, so the exact
problem is again approximated (exponential surrogate ``w_n e^{-theta}``,
:func:`solve_exponential`) and lower-bounded (tangent through the origin,
:func:`lower_bound_nonlinear`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEigen
from .convex import (ChainConstraints, ConvergenceError, SeparableObjective,
                     SolverConfig, solve_separable)
from .linear import (Allocation, FeasibilityError, GAMMA_SINGULAR, QosVector,
                     StreamProfile, _allocation_fields, _as_qos, _check_gamma,
                     _sorted_weights)

__all__ = [
    "ThetaAllocation",
    "q_function",
    "q_derivative",
    "inflection_phi",
    "psi_equation",
    "tangent_psi",
    "solve_exponential",
    "origin_tangent_minorant",
    "lower_bound_nonlinear",
    "allocation_from_theta",
    "total_power_theta",
]

PHI_MIN = 2.0 * (np.sqrt(2.0) - 1.0)
PSI_BRACKET = (1e-12, 1.0 - 1e-9)


def _q(theta, gamma, scale):
    lam = np.exp(theta)
    return scale * (gamma * (1.0 / lam - 1.0)
                    + 2.0 * np.sqrt(np.maximum(1.0 - lam, 0.0)) / lam)


def _q_d1(theta, gamma, scale):
    lam = np.minimum(np.exp(theta), 1.0 - 1e-12)
    return -scale * (gamma + (2.0 - lam) / np.sqrt(1.0 - lam)) / lam


def _q_d2(theta, gamma, scale):
    lam = np.minimum(np.exp(theta), 1.0 - 1e-12)
    return scale * (gamma + (lam * lam - 6.0 * lam + 4.0)
                    / (2.0 * (1.0 - lam) ** 1.5)) / lam


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta > 0) or np.any(np.isnan(theta)):
        raise ValueError(f"theta must be <= 0, got {theta}")
    return theta


def q_function(theta, gamma, scale):
    """Per-stream power as a function of the log MSE eigenvalue."""
    theta = _check_theta(theta)
    out = _q(theta, gamma, scale)
    return float(out) if np.ndim(out) == 0 else out


def q_derivative(theta, gamma, scale):
    theta = _check_theta(theta)
    out = _q_d1(theta, gamma, scale)
    return float(out) if np.ndim(out) == 0 else out


def inflection_phi(gamma: float) -> float:
    """``e^theta`` at which ``Q_n`` turns from convex to concave."""
    gamma = _check_gamma(gamma)
    g2 = gamma * gamma
    if g2 - 4.0 < GAMMA_SINGULAR:
        return float(PHI_MIN)
    a = 27.0 * g2 - 104.0
    r = np.sqrt(max(a * a - 16.0, 0.0))
    c2 = np.cbrt(2.0) / 3.0
    chi = 8.0 / 3.0 + c2 * np.cbrt(a + r) + c2 * np.cbrt(a - r)
    sc = np.sqrt(chi)
    return float(1.0 - 1.0 / (2.0 + gamma / sc + np.sqrt(gamma * sc + 5.0 - g2 / chi)))


def psi_equation(psi, gamma):
    """Left-hand side of the tangency condition for the origin tangent."""
    om = np.sqrt(1.0 - psi)
    return gamma * om + 2.0 + np.log(psi) / om * (gamma + (2.0 - psi) / om)


def tangent_psi(gamma: float) -> float:
    """``e^theta`` where the tangent through the origin touches ``Q_n``.

    Found by bisection on ``[1e-12, 1 - 1e-9]``; the bracket is first scanned
    to make sure the equation changes sign exactly once.
    """
    gamma = _check_gamma(gamma)
    lo, hi = PSI_BRACKET
    probe = np.concatenate([np.geomspace(lo, 0.5, 60),
                            1.0 - np.geomspace(0.5, 1.0 - hi, 60)[1:]])
    signs = np.sign(psi_equation(probe, gamma))
    changes = int(np.count_nonzero(np.diff(signs)))
    if changes != 1 or signs[0] >= 0:
        raise ArithmeticError(
            f"tangency equation has {changes} sign changes for gamma={gamma}")
    flo = psi_equation(lo, gamma)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = psi_equation(mid, gamma)
        if fm == 0:
            return float(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return float(0.5 * (lo + hi))


def solve_exponential(w, kappa) -> np.ndarray:
    """Closed-form minimiser of ``sum w_n e^{-theta_n}`` over the log-domain set.

    Parameters
    ----------
    w : array_like
        Positive, non-decreasing weights.
    kappa : array_like
        Logarithms of the MSE targets (non-decreasing, ``<= 0``).
    """
    w = _sorted_weights(w)
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    k = kappa.size
    if w.size != k:
        raise ValueError(f"length mismatch: {w.size} weights, {k} targets")
    if np.any(kappa > 0) or np.any(np.diff(kappa) < 0):
        raise ValueError("kappa must be non-positive and non-decreasing")
    lw = np.log(w)
    delta = np.concatenate([[0.0], np.cumsum(kappa)])
    theta = np.empty(k)
    for i in range(k):
        top = k - i
        tails = np.cumsum(lw[:top][::-1])[::-1]
        counts = top - np.arange(top)
        ratios = (delta[top] - delta[:top] - tails) / counts
        best = int(np.argmax(ratios))
        theta_hat = lw[top - 1] + ratios[best]
        theta[top - 1] = min(0.0, theta_hat)
        delta[top - 1] = delta[top] - theta[top - 1]
    return theta


def origin_tangent_minorant(profile: StreamProfile) -> SeparableObjective:
    """``Q_n`` up to ``ln psi_n``, then the tangent line through the origin."""
    g, s = profile.gamma, profile.scale
    t0 = np.log(profile.psi)
    # the tangent passes through the origin; this form is exactly 0 there
    d0 = _q(t0, g, s) / t0

    def value(theta):
        theta = np.asarray(theta, dtype=float)
        return np.where(theta <= t0, _q(np.minimum(theta, t0), g, s), d0 * theta)

    def deriv(theta):
        return np.where(theta <= t0, _q_d1(np.minimum(theta, t0), g, s), d0)

    def deriv2(theta):
        return np.where(theta <= t0, _q_d2(np.minimum(theta, t0), g, s), 0.0)

    return SeparableObjective(value, deriv, deriv2)


def exact_objective_theta(profile: StreamProfile) -> SeparableObjective:
    g, s = profile.gamma, profile.scale
    return SeparableObjective(lambda t: _q(t, g, s), lambda t: _q_d1(t, g, s),
                              lambda t: _q_d2(t, g, s))


def log_constraints(kappa) -> ChainConstraints:
    kappa = np.asarray(kappa, dtype=float)
    return ChainConstraints(caps=np.cumsum(kappa), lower=-np.inf, upper=0.0,
                            ordered=True)


def _as_kappa(kappa):
    if isinstance(kappa, QosVector):
        return kappa.kappa
    return np.atleast_1d(np.asarray(kappa, dtype=float))


def lower_bound_nonlinear(profile: StreamProfile, kappa,
                          cfg: SolverConfig = SolverConfig()):
    """Tightest convex lower bound on the minimum DFE power.

    ``kappa`` may be the log targets or a :class:`QosVector`.
    Returns ``(theta_lb, value)``; raises :class:`ConvergenceError` when the
    KKT certificate misses ``cfg.tol_kkt``.
    """
    kappa = _as_kappa(kappa)
    if kappa.size != profile.k:
        raise ValueError("profile and kappa lengths differ")
    res = solve_separable(origin_tangent_minorant(profile),
                          log_constraints(kappa), cfg)
    if not res.converged:
        raise ConvergenceError("DFE lower bound did not converge",
                               res.minimizer, res.kkt_residual)
    return res.minimizer, res.value


@dataclass(frozen=True)
class ThetaAllocation(Allocation):
    theta: np.ndarray = None


def allocation_from_theta(theta_star, eigen: ChannelEigen, rho,
                          eta=None) -> ThetaAllocation:
    """Same mapping as the linear case, applied to ``exp(theta_star)``.

    When ``eta`` is given, the prefix-product caps (prefix sums in the log
    domain) are checked first.
    """
    theta = _check_theta(np.atleast_1d(theta_star))
    if theta.size != eigen.k:
        raise ValueError("theta length differs from the number of streams")
    if eta is not None:
        kappa = _as_qos(eta).kappa
        excess = np.cumsum(theta) - np.cumsum(kappa)
        bad = np.flatnonzero(excess > 1e-9)
        if bad.size:
            j = int(bad[0])
            raise FeasibilityError(
                f"prefix-product constraint j={j + 1} violated: "
                f"prod lam = {np.exp(np.cumsum(theta)[j]):.12g} > "
                f"{np.exp(np.cumsum(kappa)[j]):.12g}")
    lam = np.exp(theta)
    return ThetaAllocation(lam=lam, theta=theta,
                           **_allocation_fields(lam, eigen, rho))


def total_power_theta(theta, profile: StreamProfile) -> float:
    theta = _check_theta(np.atleast_1d(theta))
    return float(np.sum(_q(theta, profile.gamma, profile.scale)))
