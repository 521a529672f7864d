"""Separable convex minimisation over ordered, prefix-capped boxes.

Every power allocation problem handled by this package has the form

    minimise    sum_n f_n(x_n)
    subject to  sum_{n<=j} x_n <= caps[j]       (j = 1..K)
                lower[n] < x_n <= upper[n]
                x_n <= x_{n+1}                   (optional)

with each ``f_n`` convex and twice differentiable on its domain.  The solver
here is a primal-dual interior-point method started from the Chebyshev centre
of the polyhedron, followed by an active-set Newton polish of the KKT system.  Its
output carries a KKT certificate so callers never have to trust it blindly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog, nnls

__all__ = [
    "SeparableObjective",
    "ChainConstraints",
    "SolverConfig",
    "OracleResult",
    "ConvergenceError",
    "solve_separable",
]

Vec = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SeparableObjective:
    """Per-coordinate curves, each callable maps a K-vector to K values."""

    value: Vec
    deriv: Vec
    deriv2: Vec

    def total(self, x):
        return float(np.sum(self.value(x)))


@dataclass(frozen=True)
class ChainConstraints:
    caps: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    ordered: bool = True

    def __post_init__(self):
        caps = np.asarray(self.caps, dtype=float)
        k = caps.size
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (k,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (k,)).copy()
        object.__setattr__(self, "caps", caps)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def k(self) -> int:
        return self.caps.size

    def matrix(self):
        """Rows ``G`` and right-hand side ``h`` of ``G x <= h`` (finite rows only)."""
        k = self.k
        rows, rhs = [], []
        tri = np.tril(np.ones((k, k)))
        for j in range(k):
            if np.isfinite(self.caps[j]):
                rows.append(tri[j])
                rhs.append(self.caps[j])
        eye = np.eye(k)
        for n in range(k):
            if np.isfinite(self.upper[n]):
                rows.append(eye[n])
                rhs.append(self.upper[n])
            if np.isfinite(self.lower[n]):
                rows.append(-eye[n])
                rhs.append(-self.lower[n])
        if self.ordered:
            for n in range(k - 1):
                r = np.zeros(k)
                r[n], r[n + 1] = 1.0, -1.0
                rows.append(r)
                rhs.append(0.0)
        return np.array(rows).reshape(-1, k), np.array(rhs)

    def violation(self, x) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        g, h = self.matrix()
        if h.size == 0:
            return 0.0
        return float(max(0.0, np.max(g @ x - h)))


@dataclass(frozen=True)
class SolverConfig:
    tol_kkt: float = 1e-9
    max_iters: int = 100_000
    grid_points_per_dim: int = 400

    def __post_init__(self):
        if not self.tol_kkt > 0:
            raise ValueError("tol_kkt must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.grid_points_per_dim < 2:
            raise ValueError("grid_points_per_dim must be >= 2")


@dataclass
class OracleResult:
    minimizer: np.ndarray
    value: float
    iterations: int
    kkt_residual: float
    converged: bool
    multipliers: Optional[np.ndarray] = field(default=None, repr=False)


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_iterate=None, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.last_iterate = last_iterate
        self.residual = residual


def _chebyshev_centre(g, h):
    norms = np.linalg.norm(g, axis=1)
    k = g.shape[1]
    c = np.zeros(k + 1)
    c[-1] = -1.0
    a = np.hstack([g, norms[:, None]])
    bounds = [(None, None)] * k + [(0.0, 1.0)]
    res = linprog(c, A_ub=a, b_ub=h, bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= 1e-14:
        raise ValueError("constraint set has an empty interior")
    return res.x[:k]


def _objective_scale(obj, x):
    # |f| alone degenerates when the optimum sits at f = 0
    return max(abs(obj.total(x)), float(np.abs(obj.deriv(x)) @ np.abs(x)), 1e-300)


def _kkt_residual(grad, g, h, x, nu, scale):
    stat = grad + g.T @ nu
    denom = max(np.max(np.abs(grad)), np.max(np.abs(g.T @ nu)), 1e-300)
    slack = h - g @ x
    primal = max(0.0, float(np.max(-slack))) if slack.size else 0.0
    comp = float(np.max(np.abs(nu * slack))) if slack.size else 0.0
    dual = max(0.0, float(np.max(-nu))) if nu.size else 0.0
    return max(float(np.max(np.abs(stat))) / denom,
               comp / scale, primal, dual / max(np.max(np.abs(nu)), 1e-300))


def _polish(obj, g, h, x, nu, scale, tol):
    """Newton iterations on the KKT system of the active constraints."""
    slack = h - g @ x
    active = nu * np.maximum(np.abs(g) @ np.abs(x) + np.abs(h), 1.0) > slack * scale
    if not np.any(active):
        active = np.zeros_like(nu, dtype=bool)
    ga, ha = g[active], h[active]
    k, na = x.size, int(active.sum())
    xp = x.copy()
    nua = nu[active].copy()
    for _ in range(8):
        grad = obj.deriv(xp)
        hess = obj.deriv2(xp)
        kkt = np.zeros((k + na, k + na))
        kkt[:k, :k] = np.diag(hess)
        kkt[:k, k:] = ga.T
        kkt[k:, :k] = ga
        rhs = np.concatenate([-grad, ha - ga @ xp])
        # LAPACK least squares can hang on non-finite input
        if not (np.all(np.isfinite(kkt)) and np.all(np.isfinite(rhs))):
            return None
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        xn = xp + sol[:k]
        if not np.all(np.isfinite(obj.value(xn))):
            return None
        # lstsq leaves ~1e-13 residue on badly scaled systems; project it out
        if na:
            xn = xn + np.linalg.lstsq(ga, ha - ga @ xn, rcond=None)[0]
        xp, nua = xn, sol[k:]
        if np.max(np.abs(sol[:k])) <= 1e-15 * max(1.0, np.max(np.abs(xp))):
            break
    if na and np.any(nua < 0):
        # degenerate active sets make the multipliers non-unique; pick a
        # non-negative set by NNLS on the stationarity condition
        grad = obj.deriv(xp)
        if np.all(np.isfinite(grad)):
            nua = nnls(ga.T, -grad)[0]
    nu_full = np.zeros_like(nu)
    nu_full[active] = nua
    # inactive constraints must stay strictly satisfied
    if np.any(g @ xp - h > 1e-12 * np.maximum(1.0, np.abs(h))):
        return None
    return xp, nu_full


def solve_separable(obj: SeparableObjective, cons: ChainConstraints,
                    cfg: SolverConfig = SolverConfig(),
                    x0=None) -> OracleResult:
    """Minimise a separable convex objective over ``cons``.

    Parameters
    ----------
    obj : SeparableObjective
        Values, first and second derivatives of the per-coordinate curves.
    cons : ChainConstraints
        Feasible polyhedron; it must have a non-empty interior.
    cfg : SolverConfig
        ``tol_kkt`` is the relative KKT residual required for ``converged``;
        ``max_iters`` caps the number of Newton steps.
    x0 : array, optional
        Strictly feasible start.  The Chebyshev centre is used otherwise.

    Returns
    -------
    OracleResult
        ``converged`` is False (never an exception) when the residual target
        is missed; the last iterate is still reported.
    """
    g, h = cons.matrix()
    m = h.size
    x = _chebyshev_centre(g, h) if x0 is None else np.array(x0, dtype=float)
    s = h - g @ x
    if np.any(s <= 0):
        raise ValueError("starting point is not strictly feasible")

    # all stopping thresholds are relative to the objective's own scale so
    # that multiplying the objective by a constant leaves the iterates alone
    grad = obj.deriv(x)
    scale = max(abs(obj.total(x)), float(np.max(np.abs(grad))), 1e-300)
    nu = np.full(m, scale / m) / np.maximum(s, 1e-300) * 1e-2
    tol = 1e-2 * cfg.tol_kkt
    iters = 0
    mu = 10.0
    best_resid, stalled, idle = np.inf, 0, 0

    def residuals(xv, nuv, t):
        sv = h - g @ xv
        rd = obj.deriv(xv) + g.T @ nuv
        rc = nuv * sv - 1.0 / t
        return rd, rc, sv

    while iters < cfg.max_iters:
        iters += 1
        gap = float(nu @ s)
        t = mu * m / max(gap, 1e-300)
        rd, rc, s = residuals(x, nu, t)
        fscale = _objective_scale(obj, x)
        resid = _kkt_residual(obj.deriv(x), g, h, x, nu, fscale)
        if resid <= tol:
            break
        # rounding floor: once the duality gap is negligible, stop when the
        # residual no longer improves
        if resid < 0.5 * best_resid:
            best_resid, stalled, idle = resid, 0, 0
        else:
            idle += 1
            if idle >= 500:
                break
            if gap <= tol * fscale:
                stalled += 1
                if stalled >= 30:
                    break
        hess = obj.deriv2(x)
        w = nu / s
        lhs = np.diag(hess) + (g.T * w) @ g
        rhs = -rd + g.T @ (rc / s)
        if not (np.all(np.isfinite(lhs)) and np.all(np.isfinite(rhs))):
            break
        try:
            dx = np.linalg.solve(lhs, rhs)
        except np.linalg.LinAlgError:
            dx = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
        dnu = (-rc + nu * (g @ dx)) / s
        a = 1.0
        neg = dnu < 0
        if np.any(neg):
            a = min(a, 0.99 * float(np.min(-nu[neg] / dnu[neg])))
        gd = g @ dx
        pos = gd > 0
        if np.any(pos):
            a = min(a, 0.99 * float(np.min(s[pos] / gd[pos])))
        rnorm = np.sqrt(rd @ rd + rc @ rc)
        while a > 1e-16:
            xn, nun = x + a * dx, nu + a * dnu
            if np.all(np.isfinite(obj.value(xn))):
                rdn, rcn, sn = residuals(xn, nun, t)
                if np.all(sn > 0) and np.sqrt(rdn @ rdn + rcn @ rcn) <= (1 - 0.01 * a) * rnorm:
                    break
            a *= 0.5
        else:
            break
        x, nu = xn, nun
        s = h - g @ x

    fval = obj.total(x)
    fscale = _objective_scale(obj, x)
    resid = _kkt_residual(obj.deriv(x), g, h, x, nu, fscale)
    best = (x, fval, nu, resid)
    polished = _polish(obj, g, h, x, nu, fscale, cfg.tol_kkt)
    if polished is not None:
        xp, nup = polished
        fp = obj.total(xp)
        rp = _kkt_residual(obj.deriv(xp), g, h, xp, nup, fscale)
        # the polish lands exactly on the active set, so prefer it whenever it
        # is certified and no worse
        if (rp < resid or rp <= 1e-2 * cfg.tol_kkt) and fp <= fval + 1e-12 * fscale:
            best = (xp, fp, nup, rp)
    x, fval, nu, resid = best
    return OracleResult(minimizer=x, value=fval, iterations=iters,
                        kkt_residual=float(resid), converged=bool(resid <= cfg.tol_kkt),
                        multipliers=nu)
