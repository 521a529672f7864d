"""Power allocation for the linear (Wiener) receiver.

For a fixed MSE eigenvalue ``lam`` of stream ``n`` the cheapest split of power
between source and relay gives the per-stream curve

    P_n(lam) = s_n * (gamma_n (1 - lam) / lam + 2 sqrt(1 - lam) / lam),

with ``s_n = rho / sqrt(lam_h1 lam_h2)`` and ``gamma_n >= 2`` the hop
imbalance.  ``P_n`` is convex up to ``alpha_n`` and concave after it, so the
exact problem is non-convex.  It is approximated by the hyperbola
``w_n / lam + z_n`` (solved in closed form by :func:`solve_hyperbola`) and
bounded from below by the tangent-line minorant ``L_n`` (:func:`lower_bound_linear`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEigen
from .convex import (ChainConstraints, ConvergenceError, SeparableObjective,
                     SolverConfig, solve_separable)

__all__ = [
    "QosVector",
    "StreamProfile",
    "Allocation",
    "FeasibilityError",
    "gamma_factor",
    "per_stream_power",
    "power_derivative",
    "power_second_derivative",
    "ab_from_lambda",
    "mse_from_ab",
    "inflection_alpha",
    "tangent_beta",
    "hyperbola_coeffs",
    "stream_profile",
    "solve_hyperbola",
    "tangent_minorant",
    "lower_bound_linear",
    "allocation_from_lambda",
    "check_convexity_condition",
    "total_power",
]

CONVEX_SUM = 8.0 / 9.0
# below this gamma^2 - 4 the closed forms lose too many digits to cancellation
GAMMA_SINGULAR = 1e-9
# derivative evaluations never get closer to lam = 1 than this
LAM_EDGE = 1.0 - 1e-12


class FeasibilityError(ValueError):
    """An MSE profile violates the prefix-sum (or prefix-product) caps."""


@dataclass(frozen=True)
class QosVector:
    """Per-stream MSE targets, non-decreasing in ``(0, 1]``."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        if eta.ndim != 1 or eta.size == 0:
            raise ValueError("eta must be a non-empty vector")
        if np.any(eta <= 0) or np.any(eta > 1):
            raise ValueError(f"eta entries must lie in (0, 1], got {eta}")
        if np.any(np.diff(eta) < 0):
            raise ValueError(f"eta must be non-decreasing, got {eta}")
        object.__setattr__(self, "eta", eta)

    @property
    def kappa(self) -> np.ndarray:
        return np.log(self.eta)

    @property
    def k(self) -> int:
        return self.eta.size

    @property
    def prefix(self) -> np.ndarray:
        return np.cumsum(self.eta)


def _as_qos(eta) -> QosVector:
    return eta if isinstance(eta, QosVector) else QosVector(eta)


def gamma_factor(lam_h1, lam_h2):
    lam_h1 = np.asarray(lam_h1, dtype=float)
    lam_h2 = np.asarray(lam_h2, dtype=float)
    return (lam_h1 + lam_h2) / np.sqrt(lam_h1 * lam_h2)


def _check_lam(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(~(lam > 0)) or np.any(lam > 1):
        raise ValueError(f"MSE eigenvalue must lie in (0, 1], got {lam}")
    return lam


def _curve(lam, gamma, scale):
    r = np.sqrt(np.maximum(1.0 - lam, 0.0))
    return scale * (gamma * (1.0 - lam) + 2.0 * r) / lam


def _curve_d1(lam, gamma, scale):
    lam = np.minimum(lam, LAM_EDGE)
    return -scale / lam ** 2 * (gamma + (2.0 - lam) / np.sqrt(1.0 - lam))


def _curve_d2(lam, gamma, scale):
    lam = np.minimum(lam, LAM_EDGE)
    om = 1.0 - lam
    return scale / (2.0 * lam ** 3) * (
        (3.0 * lam ** 2 - 12.0 * lam + 8.0) / om ** 1.5 + 4.0 * gamma)


def per_stream_power(lam, lam_h1, lam_h2, rho):
    """Minimum power needed to reach MSE eigenvalue ``lam`` on one stream."""
    lam = _check_lam(lam)
    gamma = gamma_factor(lam_h1, lam_h2)
    scale = rho / np.sqrt(np.asarray(lam_h1, float) * np.asarray(lam_h2, float))
    out = _curve(lam, gamma, scale)
    return float(out) if np.ndim(out) == 0 else out


def power_derivative(lam, lam_h1, lam_h2, rho):
    lam = _check_lam(lam)
    scale = rho / np.sqrt(np.asarray(lam_h1, float) * np.asarray(lam_h2, float))
    return _curve_d1(lam, gamma_factor(lam_h1, lam_h2), scale)


def power_second_derivative(lam, lam_h1, lam_h2, rho):
    lam = _check_lam(lam)
    scale = rho / np.sqrt(np.asarray(lam_h1, float) * np.asarray(lam_h2, float))
    return _curve_d2(lam, gamma_factor(lam_h1, lam_h2), scale)


def ab_from_lambda(lam, lam_h1, lam_h2):
    """Source/relay SNR pair ``(A, B)`` reaching ``lam`` at least power."""
    lam = _check_lam(lam)
    r = np.sqrt(1.0 - lam)
    ratio = np.sqrt(np.asarray(lam_h1, float) / np.asarray(lam_h2, float))
    base = (1.0 - lam) / lam
    a = base + ratio * r / lam
    b = base + r / (ratio * lam)
    if np.ndim(a) == 0:
        return float(a), float(b)
    return a, b


def mse_from_ab(a, b):
    """MSE eigenvalue produced by a diagonal link with SNR pair ``(A, B)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (a + b + 1.0) / (a + b + a * b + 1.0)


def _check_gamma(gamma):
    if not gamma >= 2.0:
        raise ValueError(f"gamma must be >= 2, got {gamma}")
    return float(gamma)


def inflection_alpha(gamma: float) -> float:
    """Point in (0, 1] where ``P_n`` switches from convex to concave."""
    gamma = _check_gamma(gamma)
    d = gamma * gamma - 4.0
    if d < GAMMA_SINGULAR:
        return 8.0 / 9.0
    xi = 0.25 - 1.0 / np.cbrt(16.0 * d) + 1.0 / np.cbrt(4.0 * d * d)
    sx = np.sqrt(xi)
    inner = 0.75 - xi + gamma * gamma / (4.0 * d * sx)
    return float(1.0 / (0.75 - sx / 2.0 + 0.5 * np.sqrt(inner)))


def tangent_beta(gamma: float) -> float:
    """Abscissa where the tangent through ``(1, 0)`` touches ``P_n``.

    Solves ``3 beta - 2 = gamma (1 - beta)^{3/2}``.
    """
    gamma = _check_gamma(gamma)
    d = max(gamma * gamma - 4.0, 0.0)
    eps = np.cbrt((gamma * gamma - 2.0 + gamma * np.sqrt(d)) / 2.0)
    return float(1.0 - eps / (eps + 1.0) ** 2)


def hyperbola_coeffs(lam_h1, lam_h2, rho):
    """``(w, z)`` of the minimax hyperbola ``w / lam + z`` fitted to ``P_n``."""
    lam_h1 = np.asarray(lam_h1, dtype=float)
    lam_h2 = np.asarray(lam_h2, dtype=float)
    if np.any(lam_h1 <= 0) or np.any(lam_h2 <= 0) or not rho > 0:
        raise ValueError("channel gains and rho must be positive")
    gamma = gamma_factor(lam_h1, lam_h2)
    scale = rho / np.sqrt(lam_h1 * lam_h2)
    w = scale * (gamma + 2.0)
    z = -scale * (2.0 * gamma + 3.0) / 2.0
    if np.ndim(w) == 0:
        return float(w), float(z)
    return w, z


@dataclass(frozen=True)
class StreamProfile:
    """Channel-derived per-stream constants shared by both receivers."""

    gamma: np.ndarray
    scale: np.ndarray
    w: np.ndarray
    z: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray

    @property
    def k(self) -> int:
        return self.gamma.size


def stream_profile(lam_h1, lam_h2, rho) -> StreamProfile:
    # imported here: the DFE module depends on this one
    from .dfe import inflection_phi, tangent_psi

    lam_h1 = np.atleast_1d(np.asarray(lam_h1, dtype=float))
    lam_h2 = np.atleast_1d(np.asarray(lam_h2, dtype=float))
    gamma = np.maximum(gamma_factor(lam_h1, lam_h2), 2.0)
    scale = rho / np.sqrt(lam_h1 * lam_h2)
    w, z = hyperbola_coeffs(lam_h1, lam_h2, rho)
    return StreamProfile(
        gamma=gamma, scale=scale,
        w=np.atleast_1d(w), z=np.atleast_1d(z),
        alpha=np.array([inflection_alpha(g) for g in gamma]),
        beta=np.array([tangent_beta(g) for g in gamma]),
        phi=np.array([inflection_phi(g) for g in gamma]),
        psi=np.array([tangent_psi(g) for g in gamma]),
    )


def _sorted_weights(w):
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    drop = np.diff(w)
    if np.any(drop < -1e-12 * np.abs(w[1:])):
        raise ValueError(f"weights must be non-decreasing, got {w}")
    return np.sort(w, kind="stable")


def solve_hyperbola(w, eta) -> np.ndarray:
    """Closed-form minimiser of ``sum w_n / lam_n`` over the weak-majorisation set.

    Streams are fixed from the last one backwards.  At each step the largest
    unconstrained waterfilling level compatible with every prefix cap is
    clipped at 1, and the remaining budget is folded into the preceding cap.

    Parameters
    ----------
    w : array_like
        Positive, non-decreasing weights.
    eta : array_like or QosVector
        MSE targets.

    Returns
    -------
    numpy.ndarray
        Optimal, non-decreasing MSE eigenvalues.
    """
    qos = _as_qos(eta)
    w = _sorted_weights(w)
    k = qos.k
    if w.size != k:
        raise ValueError(f"length mismatch: {w.size} weights, {k} targets")
    sw = np.sqrt(w)
    delta = np.concatenate([[0.0], qos.prefix])
    lam = np.empty(k)
    for i in range(k):
        top = k - i  # 1-based index of the stream being fixed
        # tail sums of sqrt(w) over l+1..top for l = 0..top-1
        tails = np.cumsum(sw[:top][::-1])[::-1]
        ratios = (delta[top] - delta[:top]) / tails
        best = int(np.argmax(ratios))
        lam_hat = ratios[best] * sw[top - 1]
        lam[top - 1] = min(1.0, lam_hat)
        delta[top - 1] = delta[top] - lam[top - 1]
    return lam


def tangent_minorant(profile: StreamProfile) -> SeparableObjective:
    """Convex minorant ``L_n``: ``P_n`` up to ``beta_n``, its tangent beyond."""
    g, s, b = profile.gamma, profile.scale, profile.beta
    pb = _curve(b, g, s)
    # the tangent passes through (1, 0); this form is exactly 0 there
    db = -pb / (1.0 - b)

    def value(lam):
        lam = np.asarray(lam, dtype=float)
        lin = db * (lam - 1.0)
        return np.where(lam <= b, _curve(np.minimum(lam, b), g, s), lin)

    def deriv(lam):
        return np.where(lam <= b, _curve_d1(np.minimum(lam, b), g, s), db)

    def deriv2(lam):
        return np.where(lam <= b, _curve_d2(np.minimum(lam, b), g, s), 0.0)

    return SeparableObjective(value, deriv, deriv2)


def exact_objective(profile: StreamProfile) -> SeparableObjective:
    """The per-stream power curves themselves (convex only below ``alpha_n``)."""
    g, s = profile.gamma, profile.scale
    return SeparableObjective(lambda x: _curve(x, g, s),
                              lambda x: _curve_d1(x, g, s),
                              lambda x: _curve_d2(x, g, s))


def linear_constraints(eta) -> ChainConstraints:
    qos = _as_qos(eta)
    return ChainConstraints(caps=qos.prefix, lower=0.0, upper=1.0, ordered=True)


def lower_bound_linear(profile: StreamProfile, eta,
                       cfg: SolverConfig = SolverConfig()):
    """Tightest convex lower bound on the minimum linear-receiver power.

    Returns
    -------
    lam_lb : numpy.ndarray
        Minimiser of ``sum L_n`` over the feasible set.
    value : float
        The bound itself.

    Raises
    ------
    ConvergenceError
        If the KKT certificate misses ``cfg.tol_kkt``.
    """
    qos = _as_qos(eta)
    if qos.k != profile.k:
        raise ValueError("profile and eta lengths differ")
    res = solve_separable(tangent_minorant(profile), linear_constraints(qos), cfg)
    if not res.converged:
        raise ConvergenceError("linear lower bound did not converge",
                               res.minimizer, res.kkt_residual)
    return res.minimizer, res.value


def _check_prefix(lam, eta, tol=1e-9):
    lam = np.asarray(lam, dtype=float)
    qos = _as_qos(eta)
    if lam.shape != qos.eta.shape:
        raise ValueError("lam and eta lengths differ")
    excess = np.cumsum(lam) - qos.prefix
    bad = np.flatnonzero(excess > tol)
    if bad.size:
        j = int(bad[0])
        raise FeasibilityError(
            f"prefix constraint j={j + 1} violated: sum lam = "
            f"{np.cumsum(lam)[j]:.12g} > {qos.prefix[j]:.12g}")


@dataclass(frozen=True)
class Allocation:
    """Per-stream MSE eigenvalues with the matching source/relay settings."""

    lam: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lam_u: np.ndarray
    lam_f: np.ndarray
    stream_power: np.ndarray
    total_power: float


def _allocation_fields(lam, eigen: ChannelEigen, rho):
    a, b = ab_from_lambda(lam, eigen.lam_h1, eigen.lam_h2)
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    lam_u = rho * a / eigen.lam_h1
    lam_f = b / (eigen.lam_h2 * (a + 1.0))
    stream = rho * (a / eigen.lam_h1 + b / eigen.lam_h2)
    return dict(a=a, b=b, lam_u=lam_u, lam_f=lam_f, stream_power=stream,
                total_power=float(np.sum(stream)))


def allocation_from_lambda(lam_star, eigen: ChannelEigen, rho,
                           eta=None) -> Allocation:
    """Source powers, relay gains and total power for MSE eigenvalues ``lam_star``.

    When ``eta`` is given the prefix-sum caps are checked first.
    """
    lam_star = _check_lam(np.atleast_1d(lam_star))
    if lam_star.size != eigen.k:
        raise ValueError("lam_star length differs from the number of streams")
    if eta is not None:
        _check_prefix(lam_star, eta)
    return Allocation(lam=lam_star, **_allocation_fields(lam_star, eigen, rho))


def total_power(lam, profile: StreamProfile) -> float:
    """``sum_n P_n(lam_n)`` for a profile."""
    lam = _check_lam(np.atleast_1d(lam))
    return float(np.sum(_curve(lam, profile.gamma, profile.scale)))


def check_convexity_condition(eta) -> bool:
    """True when the targets sum to at most 8/9, which makes the exact problem convex."""
    qos = _as_qos(eta)
    return bool(np.sum(qos.eta) <= CONVEX_SUM + 1e-15)
