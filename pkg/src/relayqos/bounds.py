"""One-call pipelines: closed-form allocation plus its certified lower bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelEigen
from .convex import SolverConfig
from .dfe import (allocation_from_theta, lower_bound_nonlinear, solve_exponential,
                  total_power_theta)
from .linear import (Allocation, _as_qos, allocation_from_lambda, lower_bound_linear,
                     solve_hyperbola, stream_profile, total_power)

__all__ = ["BoundsReport", "solve_linear", "solve_dfe", "solve_mode"]


@dataclass(frozen=True)
class BoundsReport:
    """Approximate-solution power next to the lower bound it is judged by.

    ``gap`` is ``(approx_power - lower_bound) / lower_bound``.
    """

    mode: str
    allocation: Allocation
    approx_power: float
    lower_bound: float
    bound_point: np.ndarray

    @property
    def gap(self) -> float:
        if self.lower_bound == 0:
            return 0.0 if self.approx_power == 0 else float("inf")
        return (self.approx_power - self.lower_bound) / self.lower_bound


def solve_linear(eigen: ChannelEigen, eta, rho,
                 cfg: SolverConfig = SolverConfig()) -> BoundsReport:
    """Hyperbola allocation for the linear receiver and its tangent bound."""
    qos = _as_qos(eta)
    prof = stream_profile(eigen.lam_h1, eigen.lam_h2, rho)
    lam = solve_hyperbola(prof.w, qos)
    alloc = allocation_from_lambda(lam, eigen, rho, qos)
    lam_lb, lb = lower_bound_linear(prof, qos, cfg)
    return BoundsReport("linear", alloc, total_power(lam, prof), lb, lam_lb)


def solve_dfe(eigen: ChannelEigen, eta, rho,
              cfg: SolverConfig = SolverConfig()) -> BoundsReport:
    """Exponential allocation for the DFE receiver and its tangent bound."""
    qos = _as_qos(eta)
    prof = stream_profile(eigen.lam_h1, eigen.lam_h2, rho)
    theta = solve_exponential(prof.w, qos.kappa)
    alloc = allocation_from_theta(theta, eigen, rho, qos)
    th_lb, lb = lower_bound_nonlinear(prof, qos, cfg)
    return BoundsReport("dfe", alloc, total_power_theta(theta, prof), lb, th_lb)


def solve_mode(mode: str, eigen: ChannelEigen, eta, rho,
               cfg: SolverConfig = SolverConfig()) -> BoundsReport:
    if mode == "linear":
        return solve_linear(eigen, eta, rho, cfg)
    if mode == "dfe":
        return solve_dfe(eigen, eta, rho, cfg)
    raise ValueError(f"mode must be 'linear' or 'dfe', got {mode!r}")
