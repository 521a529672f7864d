"""Source precoder, relay matrix and receivers built from an allocation.

The relay link is ``r = H2 F (H1 U s + n1) + n2`` with unit-power symbols and
noise covariance ``rho I`` on both hops, so the noise seen at the destination
has covariance ``rho Rn`` with ``Rn = H2 F F^H H2^H + I``.  Everything here
works on matrices, which makes it an independent check of the scalar
allocation formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .channel import ChannelEigen, ChannelRealization
from .linear import Allocation

__all__ = [
    "TransceiverMatrices",
    "build_linear",
    "build_dfe",
    "mse_matrix",
    "total_power_matrices",
    "rotation_equal_qos",
    "is_unitary",
]

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class TransceiverMatrices:
    """Processing matrices of one design.

    Attributes
    ----------
    u : (N, K) complex
        Source precoder.
    f : (M, M) complex
        Relay matrix, zero outside the top-``K`` singular subspaces.
    g : (K, N) complex
        Destination equaliser (Wiener filter, or DFE feedforward filter).
    b_feedback : (K, K) complex or None
        Strictly upper-triangular DFE feedback matrix.
    rotation : (K, K) complex
        Unitary symbol rotation.
    mse : (K, K) complex
        MSE matrix at the decision point.
    """

    u: np.ndarray
    f: np.ndarray
    g: np.ndarray
    b_feedback: Optional[np.ndarray]
    rotation: np.ndarray
    mse: np.ndarray


def is_unitary(q, tol: float = UNITARY_TOL) -> bool:
    q = np.asarray(q)
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        return False
    return bool(np.max(np.abs(q.conj().T @ q - np.eye(q.shape[0]))) <= tol)


def rotation_equal_qos(k: int, kind: str = "dft") -> np.ndarray:
    """Constant-modulus unitary that spreads MSE evenly across streams.

    ``kind='dft'`` works for any ``k``; ``kind='hadamard'`` needs ``k`` to be
    a power of two.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    k = int(k)
    if kind == "dft":
        return sla.dft(k, scale="sqrtn")
    if kind == "hadamard":
        if k & (k - 1):
            raise ValueError(f"Hadamard rotation needs a power of two, got {k}")
        return sla.hadamard(k).astype(complex) / np.sqrt(k)
    raise ValueError(f"unknown rotation kind {kind!r}")


def _hops(channel):
    if isinstance(channel, ChannelRealization):
        return channel.h1, channel.h2, channel.rho
    if isinstance(channel, ChannelEigen):
        # exact for U and F confined to the top-K subspaces
        return channel.truncation(1), channel.truncation(2), None
    h1, h2 = channel
    return np.asarray(h1, dtype=complex), np.asarray(h2, dtype=complex), None


def _whitened(u, f, h1, h2, rho):
    """``(rho Rn)^{-1/2} H U`` via a Cholesky factor of ``rho Rn``."""
    h2f = h2 @ f
    rn = rho * (h2f @ h2f.conj().T + np.eye(h2.shape[0]))
    c = sla.cho_factor(rn, lower=True)
    hu = h2f @ h1 @ u
    return sla.solve_triangular(c[0], hu, lower=True), c, hu


def _information(u, f, h1, h2, rho):
    """``I + U^H H^H (rho Rn)^{-1} H U`` together with its pieces."""
    w, c, hu = _whitened(u, f, h1, h2, rho)
    k = u.shape[1]
    info = np.eye(k) + w.conj().T @ w
    return 0.5 * (info + info.conj().T), c, hu


def mse_matrix(u, f, channel, rho=None) -> np.ndarray:
    """MSE matrix of the Wiener receiver.

    Parameters
    ----------
    u : (N, K) array
    f : (M, M) array
    channel : ChannelRealization, ChannelEigen or (h1, h2)
    rho : float, optional
        Defaults to ``channel.rho`` for a realization.

    Returns
    -------
    numpy.ndarray
        ``(I + U^H H^H (rho Rn)^{-1} H U)^{-1}``, Hermitian.
    """
    h1, h2, rho0 = _hops(channel)
    rho = rho0 if rho is None else rho
    if rho is None or not rho > 0:
        raise ValueError("a positive rho is required")
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if h1.shape[1] != u.shape[0] or f.shape != (h1.shape[0], h1.shape[0]):
        raise ValueError("dimension mismatch between u, f and the channel")
    info, _, _ = _information(u, f, h1, h2, rho)
    e = sla.solve(info, np.eye(info.shape[0]), assume_a="pos")
    return 0.5 * (e + e.conj().T)


def total_power_matrices(u, f, h1, rho) -> float:
    """``tr(U U^H) + tr(F (H1 U U^H H1^H + rho I) F^H)``."""
    u = np.asarray(u, dtype=complex)
    f = np.asarray(f, dtype=complex)
    h1 = np.asarray(h1, dtype=complex)
    fh1u = f @ h1 @ u
    src = np.sum(np.abs(u) ** 2)
    relay = np.sum(np.abs(fh1u) ** 2) + rho * np.sum(np.abs(f) ** 2)
    return float(src + relay)


def _check(alloc: Allocation, eigen: ChannelEigen, rotation):
    rotation = np.asarray(rotation, dtype=complex)
    if rotation.shape != (eigen.k, eigen.k):
        raise ValueError(f"rotation must be {eigen.k}x{eigen.k}, got {rotation.shape}")
    if not is_unitary(rotation):
        raise ValueError("rotation is not unitary within 1e-10")
    if np.size(alloc.lam_u) != eigen.k:
        raise ValueError("allocation and channel disagree on the stream count")
    return rotation


def _precoders(alloc, eigen, rotation):
    u = (eigen.v_h1 * np.sqrt(alloc.lam_u)) @ rotation.conj().T
    f = (eigen.v_h2 * np.sqrt(alloc.lam_f)) @ eigen.omega_h1.conj().T
    return u, f


def build_linear(alloc: Allocation, eigen: ChannelEigen, rho,
                 rotation=None, channel=None) -> TransceiverMatrices:
    """Precoder, relay matrix and Wiener receiver for a linear design.

    Parameters
    ----------
    alloc : Allocation
    eigen : ChannelEigen
    rho : float
    rotation : (K, K) unitary, optional
        Defaults to the identity.
    channel : ChannelRealization, optional
        Full channel; the rank-``K`` reconstruction from ``eigen`` is used
        otherwise (identical results, since ``U`` and ``F`` live in the top
        subspaces).
    """
    rotation = _check(alloc, eigen, np.eye(eigen.k) if rotation is None else rotation)
    u, f = _precoders(alloc, eigen, rotation)
    h1, h2, _ = _hops(eigen if channel is None else channel)
    info, c, hu = _information(u, f, h1, h2, rho)
    mse = sla.solve(info, np.eye(eigen.k), assume_a="pos")
    mse = 0.5 * (mse + mse.conj().T)
    # Wiener filter: E U^H H^H (rho Rn)^{-1}
    g = mse @ sla.cho_solve(c, hu).conj().T
    return TransceiverMatrices(u=u, f=f, g=g, b_feedback=None,
                               rotation=rotation, mse=mse)


def build_dfe(alloc: Allocation, eigen: ChannelEigen, rho,
              rotation=None, channel=None) -> TransceiverMatrices:
    """Precoder, relay, MMSE-DFE feedforward and feedback matrices.

    The information matrix ``I + U^H H^H (rho Rn)^{-1} H U`` is factored as
    ``L L^H`` with ``L`` lower triangular; ``D = diag(1/L_nn)`` and the
    feedback matrix is ``D L^H - I``.  With correct past decisions the
    error covariance is ``D D^H``, so the per-stream MSEs are ``1/L_nn^2``.
    """
    rotation = _check(alloc, eigen, np.eye(eigen.k) if rotation is None else rotation)
    u, f = _precoders(alloc, eigen, rotation)
    h1, h2, _ = _hops(eigen if channel is None else channel)
    info, c, hu = _information(u, f, h1, h2, rho)
    try:
        low = np.linalg.cholesky(info)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("information matrix is not positive definite") from exc
    d = np.diag(1.0 / np.real(np.diag(low)))
    upper = d @ low.conj().T
    b = np.triu(upper - np.eye(eigen.k), 1)
    # feedforward: D L^{-1} U^H H^H (rho Rn)^{-1}
    g = d @ sla.solve_triangular(low, sla.cho_solve(c, hu).conj().T, lower=True)
    # error covariance (I+B) info^{-1} (I+B)^H evaluated from the matrices
    fb = np.eye(eigen.k) + b
    mse = fb @ sla.solve(info, fb.conj().T, assume_a="pos")
    mse = 0.5 * (mse + mse.conj().T)
    return TransceiverMatrices(u=u, f=f, g=g, b_feedback=b,
                               rotation=rotation, mse=mse)
