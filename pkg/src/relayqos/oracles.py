"""Independent baselines for certifying the closed-form solvers.

Three oracles are provided:

* :func:`convex_solve`, a generic KKT-certified solver for separable convex
  objectives over the prefix-capped, ordered box (see :mod:`relayqos.convex`);
* :func:`alternating_ab`, the block-coordinate baseline that alternates exact
  updates of the source gains ``A`` and the relay gains ``B``;
* :func:`grid_search`, brute-force enumeration of the exact (nonconvex)
  problems for ``K <= 3``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelEigen
from .convex import (ChainConstraints, OracleResult,
                     SeparableObjective, SolverConfig, solve_separable)
from .dfe import _q
from .linear import (Allocation, QosVector, _as_qos, _curve,
                     ab_from_lambda, hyperbola_coeffs, linear_constraints,
                     mse_from_ab, solve_hyperbola, stream_profile)

__all__ = [
    "SolverConfig",
    "OracleResult",
    "CapabilityError",
    "AlternatingAllocation",
    "GridResult",
    "convex_solve",
    "alternating_ab",
    "grid_search",
    "GRID_MAX_K",
]

GRID_MAX_K = 3


class CapabilityError(ValueError):
    """The requested oracle does not scale to this problem size."""


def convex_solve(objective: SeparableObjective, feasible: ChainConstraints,
                 cfg: SolverConfig = SolverConfig()) -> OracleResult:
    """Generic KKT-certified minimiser of a separable convex objective.

    Thin wrapper around :func:`relayqos.convex.solve_separable`; failures to
    reach ``cfg.tol_kkt`` come back as ``converged=False``, never silently.
    """
    return solve_separable(objective, feasible, cfg)


# ----------------------------------------------------------------------
# alternating optimisation of (A, B)


@dataclass(frozen=True)
class AlternatingAllocation(Allocation):
    """Allocation plus the objective value after every accepted half-step."""

    history: tuple = field(default=(), repr=False)
    rounds: int = 0


def _ab_power(a, b, eigen, rho):
    return rho * (a / eigen.lam_h1 + b / eigen.lam_h2)


def _half_step(fixed, lam_fixed_hop, lam_free_hop, cons, rho, cfg, x0):
    """Best free gains with the other hop's gains held at ``fixed``.

    With ``B`` fixed, ``lam = 1 - c A/(A+1)`` where ``c = B/(B+1)``, so
    ``A = (1-lam)/(lam-1+c)`` is convex and decreasing on ``(1-c, 1]``.  The
    update is therefore a separable convex problem in ``lam``.
    """
    c = fixed / (fixed + 1.0)
    lo = 1.0 - c
    coef = rho / lam_free_hop

    def value(lam):
        lam = np.asarray(lam, dtype=float)
        d = lam - lo
        with np.errstate(divide="ignore", invalid="ignore"):
            out = coef * (1.0 - lam) / d
        return np.where(d > 0, out, np.inf)

    def deriv(lam):
        d = np.maximum(np.asarray(lam, dtype=float) - lo, 1e-300)
        with np.errstate(divide="ignore", over="ignore"):
            return -coef * c / (d * d)

    def deriv2(lam):
        d = np.maximum(np.asarray(lam, dtype=float) - lo, 1e-300)
        with np.errstate(divide="ignore", over="ignore"):
            return 2.0 * coef * c / (d * d * d)

    sub = ChainConstraints(caps=cons.caps, lower=lo, upper=1.0, ordered=cons.ordered)
    try:
        res = solve_separable(SeparableObjective(value, deriv, deriv2), sub, cfg,
                              x0=x0)
    except ValueError:
        # start on the boundary: let the solver pick its own interior point
        try:
            res = solve_separable(SeparableObjective(value, deriv, deriv2), sub, cfg)
        except ValueError:
            return None
    lam = res.minimizer
    free = np.maximum((1.0 - lam) / (lam - lo), 0.0)
    return free


def alternating_ab(eigen: ChannelEigen, eta, rho,
                   cfg: SolverConfig = SolverConfig(),
                   max_rounds: int = 200) -> AlternatingAllocation:
    """Alternate exact ``A``- and ``B``-updates from the hyperbola solution.

    Parameters
    ----------
    eigen : ChannelEigen
        Hop eigenvalues.
    eta : array_like or QosVector
        MSE targets.
    rho : float
        Noise level.
    cfg : SolverConfig
        ``tol_kkt`` doubles as the relative-decrease stopping tolerance.
    max_rounds : int
        Cap on the number of (A, B) round trips.

    Returns
    -------
    AlternatingAllocation
        The last accepted iterate.  A half-step that would raise the total
        power (possible only through solver round-off) is rejected, so
        ``history`` is non-increasing by construction.
    """
    qos = _as_qos(eta)
    if qos.k != eigen.k:
        raise ValueError("eta length differs from the number of streams")
    w, _ = hyperbola_coeffs(eigen.lam_h1, eigen.lam_h2, rho)
    lam0 = solve_hyperbola(np.atleast_1d(w), qos)
    a, b = (np.atleast_1d(v).astype(float) for v in ab_from_lambda(lam0, eigen.lam_h1,
                                                                    eigen.lam_h2))
    cons = linear_constraints(qos)
    power = float(np.sum(_ab_power(a, b, eigen, rho)))
    history = [power]
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        start = power
        for hop in ("a", "b"):
            lam = mse_from_ab(a, b)
            if hop == "a":
                new = _half_step(b, eigen.lam_h2, eigen.lam_h1, cons, rho, cfg, lam)
                trial = (new, b) if new is not None else None
            else:
                new = _half_step(a, eigen.lam_h1, eigen.lam_h2, cons, rho, cfg, lam)
                trial = (a, new) if new is not None else None
            if trial is None:
                continue
            lam_t = mse_from_ab(*trial)
            feasible = (np.all(np.cumsum(lam_t) <= qos.prefix + 1e-12)
                        and np.all(np.diff(lam_t) >= -1e-12))
            p_t = float(np.sum(_ab_power(*trial, eigen, rho)))
            if feasible and p_t <= power:
                a, b = trial
                power = p_t
                history.append(power)
        if start - power <= cfg.tol_kkt * abs(start):
            break

    lam = np.atleast_1d(mse_from_ab(a, b))
    stream = _ab_power(a, b, eigen, rho)
    return AlternatingAllocation(
        lam=lam, a=a, b=b, lam_u=rho * a / eigen.lam_h1,
        lam_f=b / (eigen.lam_h2 * (a + 1.0)), stream_power=stream,
        total_power=float(np.sum(stream)), history=tuple(history), rounds=rounds)


# ----------------------------------------------------------------------
# brute-force grid


@dataclass
class GridResult(OracleResult):
    """Grid optimum; ``resolution_bound`` estimates the cost of discretisation."""

    resolution_bound: float = float("nan")
    step: float = float("nan")


def _grid_axis(problem, qos: QosVector, points):
    delta = qos.prefix if problem == "linear" else np.cumsum(qos.kappa)
    if problem == "linear":
        top = min(1.0, float(delta[-1]))
        step = top / points
        axis = step * np.arange(1, points + 1)
    else:
        # at the optimum every theta_n >= sum(kappa): the total cap binds
        # unless the last stream already sits at theta = 0
        lo = float(delta[-1]) - 1.0
        step = -lo / (points - 1)
        axis = lo + step * np.arange(points)
        axis[-1] = 0.0
    return axis, step, delta


def _tables(problem, profile, axis):
    g = profile.gamma[:, None]
    s = profile.scale[:, None]
    if problem == "linear":
        return _curve(axis[None, :], g, s)
    return _q(axis[None, :], g, s)


def _values(problem, profile, x):
    if problem == "linear":
        return _curve(x, profile.gamma, profile.scale)
    return _q(x, profile.gamma, profile.scale)


def grid_search(problem: str, eigen: ChannelEigen, eta, rho,
                cfg: SolverConfig = SolverConfig()) -> GridResult:
    """Exhaustive search of the exact objective over a feasible grid.

    The linear problem is gridded uniformly in ``lam`` on
    ``(0, min(1, sum eta)]`` and the DFE problem uniformly in ``theta`` on
    ``[sum kappa - 1, 0]``; every coordinate shares the same axis so that
    rounding a feasible point down along it stays feasible.  Ordering and
    prefix caps are enforced exactly.

    Parameters
    ----------
    problem : {'linear', 'nonlinear'}
    eigen, eta, rho
        The instance.
    cfg : SolverConfig
        ``grid_points_per_dim`` sets the axis length.

    Returns
    -------
    GridResult
        ``iterations`` counts feasible grid points.  ``kkt_residual`` is 0:
        the enumeration is exact on its grid and carries no KKT certificate.
        ``resolution_bound`` is ``sum_n`` of the largest change of ``f_n``
        over one grid step either side of the optimum.

    Raises
    ------
    CapabilityError
        For more than ``GRID_MAX_K`` streams.
    """
    if problem not in ("linear", "nonlinear"):
        raise ValueError(f"unknown problem {problem!r}")
    qos = _as_qos(eta)
    k = qos.k
    if k != eigen.k:
        raise ValueError("eta length differs from the number of streams")
    if k > GRID_MAX_K:
        raise CapabilityError(f"grid search supports K <= {GRID_MAX_K}, got {k}")
    profile = stream_profile(eigen.lam_h1, eigen.lam_h2, rho)
    axis, step, delta = _grid_axis(problem, qos, cfg.grid_points_per_dim)
    tab = _tables(problem, profile, axis)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(delta))))
    ok1 = axis <= delta[0] + tol

    best_val, best_idx, count = np.inf, None, 0
    if k == 1:
        vals = np.where(ok1, tab[0], np.inf)
        i = int(np.argmin(vals))
        best_val, best_idx, count = float(vals[i]), (i,), int(ok1.sum())
    elif k == 2:
        s2 = axis[:, None] + axis[None, :]
        ok = ok1[:, None] & (s2 <= delta[1] + tol) & np.triu(np.ones((axis.size,) * 2, bool))
        vals = np.where(ok, tab[0][:, None] + tab[1][None, :], np.inf)
        flat = int(np.argmin(vals))
        best_val, best_idx, count = float(vals.flat[flat]), np.unravel_index(flat, vals.shape), int(ok.sum())
    else:
        upper = np.triu(np.ones((axis.size,) * 2, bool))
        s23 = axis[:, None] + axis[None, :]
        pair = tab[1][:, None] + tab[2][None, :]
        for i in np.flatnonzero(ok1):
            x1 = axis[i]
            ok = (upper & (axis[:, None] >= x1)
                  & (x1 + axis[:, None] <= delta[1] + tol)
                  & (x1 + s23 <= delta[2] + tol))
            if not ok.any():
                continue
            vals = np.where(ok, pair, np.inf)
            flat = int(np.argmin(vals))
            v = float(tab[0][i] + vals.flat[flat])
            count += int(ok.sum())
            if v < best_val:
                best_val = v
                best_idx = (i,) + tuple(int(t) for t in np.unravel_index(flat, vals.shape))

    if best_idx is None or not np.isfinite(best_val):
        raise ValueError("no feasible grid point; increase grid_points_per_dim")
    x = axis[np.asarray(best_idx)]
    top = 1.0 if problem == "linear" else 0.0
    bottom = step if problem == "linear" else axis[0]
    here = _values(problem, profile, x)
    below = _values(problem, profile, np.maximum(x - step, bottom))
    above = _values(problem, profile, np.minimum(x + step, top))
    change = np.maximum(np.abs(here - below), np.abs(above - here))
    return GridResult(minimizer=x, value=best_val, iterations=count,
                      kkt_residual=0.0, converged=True,
                      resolution_bound=float(np.sum(change)), step=step)
