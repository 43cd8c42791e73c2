"""Qubit states and the scalar figures of merit tracked during a run.

Basis index 0 is spin up (sigma_z = +1). Entropies are in nats. The metric
functions accept a single density matrix and return a float, or a stack of
them (leading batch axes) and return an array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .linalg import (
    HERMITIAN_ATOL,
    PSD_FAIL_ATOL,
    dagger,
    kron_all,
    n_qubits,
    partial_trace,
    psd_sqrt,
)

TRACE_ATOL = 1e-10
ENTROPY_FLOOR = 1e-14
IMAG_FAIL_ATOL = 1e-8


class InvalidStateError(ValueError):
    """A matrix failed the density-matrix checks."""


@dataclass(frozen=True)
class PureBlochState:
    """cos(theta/2)|up> + exp(i phi) sin(theta/2)|down>."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ValueError("Bloch angles must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2pi)")

    def ket(self) -> np.ndarray:
        return np.array(
            [math.cos(self.theta / 2), np.exp(1j * self.phi) * math.sin(self.theta / 2)],
            dtype=complex,
        )


UP = PureBlochState(0.0)
DOWN = PureBlochState(math.pi)
PLUS = PureBlochState(math.pi / 2)


@dataclass(frozen=True)
class Observable:
    name: str
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"observable {self.name!r} must be a square matrix")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_ATOL:
            raise ValueError(f"observable {self.name!r} is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def validate_density(rho: np.ndarray, n_sites: int | None = None) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; return ``rho`` as complex.

    Raises ``InvalidStateError`` on the first violated condition.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise InvalidStateError(f"density matrix must be square, got shape {rho.shape}")
    try:
        sites = n_qubits(rho.shape[-1])
    except ValueError as exc:
        raise InvalidStateError(str(exc)) from None
    if n_sites is not None and sites != n_sites:
        raise InvalidStateError(f"expected {n_sites} sites, got {sites}")
    herm = np.max(np.abs(rho - dagger(rho)), initial=0.0)
    if herm > HERMITIAN_ATOL:
        raise InvalidStateError(f"not Hermitian (max deviation {herm:.3g})")
    tr = np.trace(rho, axis1=-2, axis2=-1)
    if np.max(np.abs(tr - 1.0), initial=0.0) > TRACE_ATOL:
        raise InvalidStateError(f"trace deviates from 1 by {np.max(np.abs(tr - 1.0)):.3g}")
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    if np.min(w) < -PSD_FAIL_ATOL:
        raise InvalidStateError(f"negative eigenvalue {np.min(w):.3g}")
    return rho


def bloch_pure(state: PureBlochState) -> np.ndarray:
    psi = state.ket()
    return np.outer(psi, psi.conj())


def product_state(factors: Sequence[np.ndarray]) -> np.ndarray:
    if len(factors) == 0:
        raise ValueError("product_state needs at least one factor")
    return kron_all(np.asarray(f, dtype=complex) for f in factors)


def expectation(rho: np.ndarray, obs) -> float:
    """Tr[rho O]; ``obs`` is an ``Observable`` or a Hermitian matrix."""
    m = obs.matrix if isinstance(obs, Observable) else np.asarray(obs)
    rho = np.asarray(rho)
    if rho.shape[-1] != m.shape[-1]:
        raise ValueError(f"dimension mismatch: state {rho.shape[-1]}, observable {m.shape[-1]}")
    val = np.einsum("...ij,ji->...", rho, m)
    if np.max(np.abs(val.imag), initial=0.0) > IMAG_FAIL_ATOL:
        raise InvalidStateError(f"expectation has imaginary part {np.max(np.abs(val.imag)):.3g}")
    return _scalar(val.real)


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity Tr sqrt(sqrt(rho) sigma sqrt(rho)), without squaring."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape[-1] != sigma.shape[-1]:
        raise ValueError(f"dimension mismatch: {rho.shape[-1]} vs {sigma.shape[-1]}")
    s = psd_sqrt(rho)
    inner = s @ sigma @ s
    inner = 0.5 * (inner + dagger(inner))
    f = np.trace(psd_sqrt(inner), axis1=-2, axis2=-1).real
    if np.any(f > 1 + PSD_FAIL_ATOL) or np.any(f < -PSD_FAIL_ATOL):
        raise InvalidStateError(f"fidelity {f} outside [0, 1]; inputs are not valid states")
    return _scalar(np.clip(f, 0.0, 1.0))


def l1_coherence(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    total = np.abs(rho).sum(axis=(-2, -1))
    diag = np.abs(np.diagonal(rho, axis1=-2, axis2=-1)).sum(axis=-1)
    return _scalar(total - diag)


def _entropy_from_spectrum(w: np.ndarray) -> np.ndarray:
    w = np.where(w > ENTROPY_FLOOR, w, 1.0)
    return -(w * np.log(w)).sum(axis=-1)


def von_neumann_entropy(rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    w = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))
    return _scalar(np.clip(_entropy_from_spectrum(w), 0.0, None))


def internal_energy(rho: np.ndarray, h: np.ndarray) -> float:
    return expectation(rho, h)


def mutual_information(rho_joint: np.ndarray, sites_a: Iterable[int], sites_b: Iterable[int]) -> float:
    """S(A) + S(B) - S(AB) in nats; A and B must partition the register."""
    rho_joint = np.asarray(rho_joint)
    n = n_qubits(rho_joint.shape[-1])
    a, b = set(sites_a), set(sites_b)
    if not a or not b:
        raise ValueError("both partitions must be nonempty")
    if a & b:
        raise ValueError(f"partitions overlap on sites {sorted(a & b)}")
    if a | b != set(range(n)):
        raise ValueError(f"partitions do not cover all {n} sites")
    mi = (
        von_neumann_entropy(partial_trace(rho_joint, n, a))
        + von_neumann_entropy(partial_trace(rho_joint, n, b))
        - von_neumann_entropy(rho_joint)
    )
    return _scalar(np.clip(mi, 0.0, None))
