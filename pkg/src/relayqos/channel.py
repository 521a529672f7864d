"""Random two-hop MIMO channels and their ordered singular-value structure.

The source has ``N`` antennas, the relay ``M``.  ``h1`` maps source to relay
(``M x N``) and ``h2`` maps relay to destination (``N x M``).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "ChannelRealization",
    "ChannelEigen",
    "InfeasibleDimensionError",
    "generate_channel",
    "decompose",
    "read_channel_file",
    "write_channel_file",
]

RANK_RTOL = 1e-12


class InfeasibleDimensionError(ValueError):
    """Requested stream count exceeds the numerical rank of a hop."""


@dataclass(frozen=True)
class ChannelRealization:
    h1: np.ndarray
    h2: np.ndarray
    rho: float

    def __post_init__(self):
        h1 = np.asarray(self.h1, dtype=complex)
        h2 = np.asarray(self.h2, dtype=complex)
        if h1.ndim != 2 or h2.ndim != 2 or h1.shape != h2.shape[::-1]:
            raise ValueError(
                f"h1 must be M x N and h2 N x M, got {h1.shape} and {h2.shape}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "h1", h1)
        object.__setattr__(self, "h2", h2)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def n_antennas(self) -> int:
        return self.h1.shape[1]

    @property
    def m_antennas(self) -> int:
        return self.h1.shape[0]


@dataclass(frozen=True)
class ChannelEigen:
    """Top-``k`` squared singular values and singular vectors of both hops.

    With ``H_i = Omega_i Lambda_i^{1/2} V_i^H``, ``lam_h*`` hold the diagonal
    of ``Lambda_i`` (non-increasing), ``v_h*`` the right and ``omega_h*`` the
    left singular vectors, restricted to the first ``k`` columns.
    """

    k: int
    lam_h1: np.ndarray
    lam_h2: np.ndarray
    v_h1: np.ndarray
    v_h2: np.ndarray
    omega_h1: np.ndarray
    omega_h2: np.ndarray

    def truncation(self, hop: int) -> np.ndarray:
        """Rank-``k`` reconstruction of hop 1 or 2."""
        if hop == 1:
            omega, lam, v = self.omega_h1, self.lam_h1, self.v_h1
        elif hop == 2:
            omega, lam, v = self.omega_h2, self.lam_h2, self.v_h2
        else:
            raise ValueError("hop must be 1 or 2")
        return (omega * np.sqrt(lam)) @ v.conj().T


def channel_rng(seed: int, trial: int = 0) -> np.random.Generator:
    # keyed by (seed, trial) so trials are independent of evaluation order
    return np.random.default_rng([int(seed), int(trial)])


def generate_channel(n: int, m: int, rho: float, seed: int,
                     trial: int = 0) -> ChannelRealization:
    """Draw i.i.d. CN(0, 1/n) entries for both hops.

    Parameters
    ----------
    n, m : int
        Source/destination and relay antenna counts.
    rho : float
        Noise variance on both hops.
    seed, trial : int
        Together they select an independent stream of the generator.
    """
    if int(n) != n or int(m) != m or n < 1 or m < 1:
        raise ValueError(f"antenna counts must be positive integers, got {n}, {m}")
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    rng = channel_rng(seed, trial)
    std = np.sqrt(0.5 / n)

    def draw(shape):
        return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    h1 = draw((m, n))
    h2 = draw((n, m))
    return ChannelRealization(h1, h2, rho)


def _svd_top(h, k):
    omega, s, vh = np.linalg.svd(h)
    v = vh.conj().T
    if s.size == 0 or s[0] == 0:
        rank = 0
    else:
        rank = int(np.sum(s > RANK_RTOL * s[0]))
    if k > rank:
        raise InfeasibleDimensionError(
            f"k={k} exceeds numerical rank {rank} of a {h.shape[0]}x{h.shape[1]} hop")
    omega, s, v = omega[:, :k], s[:k], v[:, :k]
    idx = np.argmax(np.abs(v), axis=0)
    ref = v[idx, np.arange(k)]
    phase = ref / np.abs(ref)
    # v -> v * conj(phase) makes the reference entry real; omega follows so
    # that omega diag(s) v^H is unchanged
    v = v * phase.conj()
    omega = omega * phase.conj()
    return s ** 2, omega, v


def decompose(ch: ChannelRealization, k: int) -> ChannelEigen:
    """SVD of both hops restricted to the ``k`` strongest modes.

    Raises
    ------
    InfeasibleDimensionError
        If ``k`` exceeds the numerical rank (relative threshold 1e-12) of
        either hop.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    lam1, omega1, v1 = _svd_top(ch.h1, k)
    lam2, omega2, v2 = _svd_top(ch.h2, k)
    return ChannelEigen(k, lam1, lam2, v1, v2, omega1, omega2)


def write_channel_file(path, ch: ChannelRealization) -> None:
    """Write both hops as text blocks: a ``rows cols`` header followed by
    one line per row holding ``re im`` pairs."""
    lines = []
    for h in (ch.h1, ch.h2):
        lines.append(f"{h.shape[0]} {h.shape[1]}")
        for row in h:
            lines.append(" ".join(f"{z.real:.17e} {z.imag:.17e}" for z in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_channel_file(path, rho: float) -> ChannelRealization:
    tokens = [ln.split() for ln in Path(path).read_text().splitlines()
              if ln.strip() and not ln.lstrip().startswith("#")]
    mats = []
    pos = 0
    for _ in range(2):
        if pos >= len(tokens) or len(tokens[pos]) != 2:
            raise ValueError(f"{path}: expected a 'rows cols' header line")
        rows, cols = (int(t) for t in tokens[pos])
        pos += 1
        block = tokens[pos:pos + rows]
        if len(block) != rows or any(len(r) != 2 * cols for r in block):
            raise ValueError(f"{path}: malformed {rows}x{cols} matrix block")
        vals = np.array(block, dtype=float).reshape(rows, cols, 2)
        mats.append(vals[..., 0] + 1j * vals[..., 1])
        pos += rows
    return ChannelRealization(mats[0], mats[1], rho)
