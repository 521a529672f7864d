"""Monte Carlo sweeps over noise levels and QoS targets.

Every trial draws one channel pair (keyed by ``(seed, trial)``) and runs all
requested methods on it for every ``(rho, eta)`` cell, so method comparisons
are paired.  Per-trial results are stored by trial index and reduced with
``math.fsum`` in trial order, which makes the output independent of how
trials were distributed over worker processes.
"""

from __future__ import annotations

import configparser
import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .channel import decompose, generate_channel
from .convex import ConvergenceError, SolverConfig
from .dfe import lower_bound_nonlinear, solve_exponential, total_power_theta
from .linear import (FeasibilityError, QosVector, hyperbola_coeffs, lower_bound_linear, solve_hyperbola,
                     stream_profile, total_power)
from .oracles import CapabilityError, alternating_ab, grid_search

__all__ = [
    "METHODS",
    "PRESETS",
    "SweepConfig",
    "SweepRow",
    "SandwichViolation",
    "run_sweep",
    "emit_csv",
    "load_config",
    "preset",
    "pattern_of",
    "eta_pattern",
    "CSV_HEADER",
]

log = logging.getLogger(__name__)

METHODS = ("L-HA", "L-LB", "NL-EA", "NL-LB", "ALT", "GRID")
# which lower bound each method is measured against
BOUND_OF = {"L-HA": "L-LB", "L-LB": "L-LB", "ALT": "L-LB", "GRID": "L-LB",
            "NL-EA": "NL-LB", "NL-LB": "NL-LB"}
CSV_HEADER = ("method", "rho", "eta", "mean_power", "mean_power_db", "std_error",
              "gap_to_lb", "trials")
SANDWICH_RTOL = 1e-9
DOMINANCE_SLACK = 1e-9
DOMINANCE_RATE = 0.01


class SandwichViolation(AssertionError):
    """A method reported less power than its own lower bound."""


def eta_pattern(eta: float, k: int, pattern: str = "equal") -> QosVector:
    """Target vector for one sweep point.

    ``'equal'`` repeats ``eta``; ``'quarter-half'`` is
    ``(eta/4, eta/2, ..., eta/2, eta)``.
    """
    if pattern == "equal":
        return QosVector(np.full(k, float(eta)))
    if pattern == "quarter-half":
        if k < 2:
            raise ValueError("quarter-half pattern needs k >= 2")
        v = np.full(k, eta / 2.0)
        v[0], v[-1] = eta / 4.0, eta
        return QosVector(v)
    raise ValueError(f"unknown eta pattern {pattern!r}")


def _describe(q: QosVector) -> str:
    e = q.eta
    if np.all(e == e[0]):
        return repr(float(e[0]))
    return ";".join(repr(float(x)) for x in e)


@dataclass(frozen=True)
class SweepConfig:
    n_antennas: int
    k_streams: int
    rho_list: tuple
    eta_grid: tuple
    trials: int = 1000
    seed: int = 0
    methods: tuple = ("L-HA", "L-LB", "NL-EA", "NL-LB")
    out_path: Optional[str] = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "rho_list", tuple(float(r) for r in self.rho_list))
        grid = tuple(q if isinstance(q, QosVector) else QosVector(q)
                     for q in self.eta_grid)
        object.__setattr__(self, "eta_grid", grid)
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 1 <= self.k_streams <= self.n_antennas:
            raise ValueError("need 1 <= k_streams <= n_antennas")
        if not self.rho_list or any(not r > 0 for r in self.rho_list):
            raise ValueError("rho_list must hold positive values")
        if not grid:
            raise ValueError("eta_grid is empty")
        if any(q.k != self.k_streams for q in grid):
            raise ValueError("every eta vector must have k_streams entries")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"unknown methods {bad}; choose from {METHODS}")


@dataclass(frozen=True)
class SweepRow:
    method: str
    rho: float
    eta_descriptor: str
    mean_power: float
    std_error: float
    mean_gap_to_lb: float
    trials_used: int
    diagnostic: str = ""

    @property
    def mean_power_db(self) -> float:
        if not self.mean_power > 0:
            return float("nan") if math.isnan(self.mean_power) else float("-inf")
        return 10.0 * math.log10(self.mean_power)


# ----------------------------------------------------------------------
# per-trial work


def _method_powers(eigen, qos, rho, methods, cfg):
    """Power of each requested method (or the exception it raised)."""
    prof = stream_profile(eigen.lam_h1, eigen.lam_h2, rho)
    need = set(methods) | {BOUND_OF[m] for m in methods}
    out = {}

    def attempt(name, fn):
        try:
            out[name] = float(fn())
        except (ConvergenceError, CapabilityError, FeasibilityError,
                ArithmeticError, ValueError) as exc:
            out[name] = exc

    if "L-HA" in need:
        attempt("L-HA", lambda: total_power(solve_hyperbola(prof.w, qos), prof))
    if "L-LB" in need:
        attempt("L-LB", lambda: lower_bound_linear(prof, qos, cfg)[1])
    if "NL-EA" in need:
        attempt("NL-EA", lambda: total_power_theta(solve_exponential(prof.w, qos.kappa), prof))
    if "NL-LB" in need:
        attempt("NL-LB", lambda: lower_bound_nonlinear(prof, qos, cfg)[1])
    if "ALT" in need:
        attempt("ALT", lambda: alternating_ab(eigen, qos, rho, cfg).total_power)
    if "GRID" in need:
        attempt("GRID", lambda: grid_search("linear", eigen, qos, rho, cfg).value)
    return out


def _run_trial(args):
    cfg, trial = args
    ch = generate_channel(cfg.n_antennas, cfg.n_antennas, 1.0, cfg.seed, trial)
    eigen = decompose(ch, cfg.k_streams)
    res = {}
    for ri, rho in enumerate(cfg.rho_list):
        for ei, qos in enumerate(cfg.eta_grid):
            powers = _method_powers(eigen, qos, rho, cfg.methods, cfg.solver)
            # the bound's certificate is relative to the derivative scale,
            # which stays of order sum(w) even where the power tends to 0
            w, _ = hyperbola_coeffs(eigen.lam_h1, eigen.lam_h2, rho)
            floor = SANDWICH_RTOL * float(np.sum(w))
            for m, p in powers.items():
                lb = powers.get(BOUND_OF[m])
                if isinstance(p, float) and isinstance(lb, float):
                    if p < lb - SANDWICH_RTOL * abs(lb) - floor:
                        raise SandwichViolation(
                            f"trial {trial}, rho={rho}, eta={_describe(qos)}: "
                            f"{m} power {p!r} below {BOUND_OF[m]} {lb!r}")
            res[ri, ei] = powers
    return res


def _workers(trials):
    env = os.environ.get("RELAYQOS_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer RELAYQOS_THREADS=%r", env)
    return max(1, min(cap, trials // 8))


def _collect(cfg):
    jobs = [(cfg, t) for t in range(cfg.trials)]
    n = _workers(cfg.trials)
    if n == 1:
        return [_run_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(_run_trial, jobs, chunksize=max(1, cfg.trials // (4 * n))))


def _mean_se(values):
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def run_sweep(cfg: SweepConfig) -> list:
    """Run every ``(method, rho, eta)`` cell over ``cfg.trials`` paired trials.

    Returns
    -------
    list of SweepRow
        Ordered by method (canonical order), then ``rho``, then ``eta`` as
        listed in the config.  A cell in which any trial failed carries NaN
        statistics, ``trials_used=0`` and the first error in ``diagnostic``.

    Raises
    ------
    SandwichViolation
        If any method beats its own lower bound on some trial.
    """
    per_trial = _collect(cfg)
    rows = []
    methods = [m for m in METHODS if m in cfg.methods]
    for ri, rho in enumerate(cfg.rho_list):
        for ei, qos in enumerate(cfg.eta_grid):
            _dominance_check(per_trial, ri, ei, rho, qos)
    for m in methods:
        for ri, rho in enumerate(cfg.rho_list):
            for ei, qos in enumerate(cfg.eta_grid):
                rows.append(_cell_row(per_trial, m, ri, ei, rho, qos))
    return rows


def _cell_row(per_trial, m, ri, ei, rho, qos):
    desc = _describe(qos)
    vals, gaps = [], []
    for t, res in enumerate(per_trial):
        p = res[ri, ei][m]
        lb = res[ri, ei][BOUND_OF[m]]
        err = p if isinstance(p, Exception) else lb if isinstance(lb, Exception) else None
        if err is not None:
            msg = f"trial {t}: {type(err).__name__}: {err}"
            log.warning("%s rho=%s eta=%s aborted: %s", m, rho, desc, msg)
            nan = float("nan")
            return SweepRow(m, rho, desc, nan, nan, nan, 0, msg)
        vals.append(p)
        gaps.append((p - lb) / lb if lb > 0 else 0.0)
    mean, se = _mean_se(vals)
    return SweepRow(m, rho, desc, mean, se, math.fsum(gaps) / len(gaps), len(vals))


def _dominance_check(per_trial, ri, ei, rho, qos):
    if not np.all(qos.eta == qos.eta[0]):
        return
    worse = 0
    seen = 0
    for res in per_trial:
        lin, nl = res[ri, ei].get("L-HA"), res[ri, ei].get("NL-EA")
        if isinstance(lin, float) and isinstance(nl, float):
            seen += 1
            if nl > lin + DOMINANCE_SLACK * max(1.0, abs(lin)):
                worse += 1
    if worse:
        level = logging.WARNING if worse > DOMINANCE_RATE * seen else logging.INFO
        log.log(level, "NL-EA above L-HA on %d of %d trials (rho=%s, eta=%s)",
                worse, seen, rho, _describe(qos))


# ----------------------------------------------------------------------
# output


def _fmt(x) -> str:
    return "%.17e" % x


def emit_csv(rows: Sequence[SweepRow], path) -> None:
    """Write rows with full-precision floats, in the order given.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(rows, path)
        return
    with Path(path).open("w", newline="") as fh:
        _write_rows(rows, fh)


def _write_rows(rows, fh):
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    for r in rows:
        wr.writerow([r.method, _fmt(r.rho), r.eta_descriptor, _fmt(r.mean_power),
                     _fmt(r.mean_power_db), _fmt(r.std_error),
                     _fmt(r.mean_gap_to_lb), r.trials_used])


# ----------------------------------------------------------------------
# presets and config files

ETA_CURVE = (0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9)
TABLE1_ETA = (0.9, 0.5, 0.1, 0.05, 0.01)


def _grid(etas, k, pattern="equal"):
    return tuple(eta_pattern(e, k, pattern) for e in etas)


PRESETS = {
    "table1": dict(n_antennas=3, k_streams=3, rho_list=(1.0,),
                   eta_grid=_grid(TABLE1_ETA, 3)),
    "fig3": dict(n_antennas=3, k_streams=3, rho_list=(1.0, 0.01),
                 eta_grid=_grid(ETA_CURVE, 3)),
    "fig4": dict(n_antennas=4, k_streams=4, rho_list=(1.0,),
                 eta_grid=_grid(ETA_CURVE, 4)),
    "fig5": dict(n_antennas=4, k_streams=4, rho_list=(1.0,),
                 eta_grid=_grid(ETA_CURVE, 4, "quarter-half")),
}


def pattern_of(cfg: Optional[SweepConfig]) -> str:
    """Name of the target pattern shared by every point of ``cfg``'s grid."""
    if cfg is None:
        return "equal"
    for name in ("equal", "quarter-half"):
        try:
            if all(np.array_equal(q.eta, eta_pattern(float(q.eta[-1]), q.k, name).eta)
                   for q in cfg.eta_grid):
                return name
        except ValueError:
            continue
    return "equal"


def preset(name: str, **overrides) -> SweepConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SweepConfig(**{**PRESETS[name], **overrides})


def _floats(text):
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def load_config(path, base: Optional[SweepConfig] = None) -> SweepConfig:
    """Read a ``key = value`` file into a :class:`SweepConfig`.

    Recognised keys: ``preset``, ``n_antennas``, ``k_streams``, ``rho``
    (comma list), ``eta`` (comma list of scalars), ``pattern``
    (``equal`` or ``quarter-half``), ``trials``, ``seed``, ``methods``
    (comma list) and ``out``.  Lines starting with ``#`` are comments.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[sweep]\n" + Path(path).read_text())
    sec = parser["sweep"]
    known = {"preset", "n_antennas", "k_streams", "rho", "eta", "pattern", "trials",
             "seed", "methods", "out"}
    extra = set(sec) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    if "preset" in sec:
        cfg = preset(sec["preset"].strip())
    elif base is not None:
        cfg = base
    else:
        cfg = None
    kw = {}
    if "n_antennas" in sec:
        kw["n_antennas"] = int(sec["n_antennas"])
    if "k_streams" in sec:
        kw["k_streams"] = int(sec["k_streams"])
    if "rho" in sec:
        kw["rho_list"] = tuple(_floats(sec["rho"]))
    if "trials" in sec:
        kw["trials"] = int(sec["trials"])
    if "seed" in sec:
        kw["seed"] = int(sec["seed"])
    if "methods" in sec:
        kw["methods"] = tuple(m.strip() for m in sec["methods"].split(",") if m.strip())
    if "out" in sec:
        kw["out_path"] = sec["out"].strip()
    if "eta" in sec or "pattern" in sec or "k_streams" in sec:
        k = kw.get("k_streams", cfg.k_streams if cfg else None)
        if k is None:
            raise ValueError("k_streams is required without a preset")
        if "eta" in sec:
            etas = _floats(sec["eta"])
        elif cfg is not None:
            etas = [float(q.eta[-1]) for q in cfg.eta_grid]
        else:
            raise ValueError("eta is required without a preset")
        pattern = sec.get("pattern", pattern_of(cfg)).strip()
        kw["eta_grid"] = _grid(etas, k, pattern)
    if cfg is None:
        return SweepConfig(**kw)
    return replace(cfg, **kw)
