"""Dense complex linear algebra for small qubit registers.

Matrices are plain ``numpy`` arrays. Site 0 is the leftmost Kronecker factor,
i.e. the most significant bit of a computational-basis index. Functions that
act on density matrices also accept stacks with leading batch dimensions.
"""
from __future__ import annotations

import string
from typing import Iterable, NamedTuple

import numpy as np

HERMITIAN_ATOL = 1e-10
PSD_CLAMP_ATOL = 1e-12
PSD_FAIL_ATOL = 1e-9

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# index 0 is |up>, so raising maps |1> -> |0>
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)

for _m in (IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z, SIGMA_PLUS, SIGMA_MINUS):
    _m.setflags(write=False)


class EigenDecomposition(NamedTuple):
    """Ascending real eigenvalues and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _square(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
        raise ValueError(f"{name} must be square, got shape {a.shape}")
    return a


def n_qubits(dim: int) -> int:
    """Register size for a ``dim``-dimensional qubit space."""
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_error(a: np.ndarray) -> float:
    a = _square(a)
    return float(np.max(np.abs(a - dagger(a)), initial=0.0))


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.kron(_square(a, "a"), _square(b, "b"))


def kron_all(factors: Iterable[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def embed(op: np.ndarray, site: int, n_sites: int) -> np.ndarray:
    """Place a single-qubit operator at ``site`` of an ``n_sites`` register."""
    op = _square(op, "op")
    if op.shape != (2, 2):
        raise ValueError(f"op must be 2x2, got {op.shape}")
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} out of range for {n_sites} sites")
    left = np.eye(2**site, dtype=complex)
    right = np.eye(2 ** (n_sites - site - 1), dtype=complex)
    return np.kron(np.kron(left, op), right)


def herm_eig(a: np.ndarray) -> EigenDecomposition:
    a = _square(a)
    err = hermiticity_error(a)
    if err > HERMITIAN_ATOL:
        raise ValueError(f"matrix is not Hermitian (max |A - A^H| = {err:.3g})")
    # LinAlgError from eigh signals failed convergence
    w, v = np.linalg.eigh(a)
    return EigenDecomposition(w, v)


def expm_unitary(h: np.ndarray, t: float) -> np.ndarray:
    """Propagator ``exp(-i h t)`` for a Hermitian generator ``h``."""
    w, v = herm_eig(h)
    return (v * np.exp(-1j * w * t)) @ dagger(v)


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Principal square root of a Hermitian positive semidefinite matrix.

    Eigenvalues down to ``-PSD_FAIL_ATOL`` are treated as round-off and
    clamped to zero; anything more negative raises ``ValueError``.
    Works on stacks of matrices.
    """
    a = _square(a)
    herm = 0.5 * (a + dagger(a))
    if np.max(np.abs(a - herm), initial=0.0) > HERMITIAN_ATOL:
        raise ValueError("psd_sqrt needs a Hermitian matrix")
    w, v = np.linalg.eigh(herm)
    if np.min(w) < -PSD_FAIL_ATOL:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {np.min(w):.3g})")
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w[..., None, :]) @ dagger(v)


def partial_trace(rho: np.ndarray, n_sites: int, keep: Iterable[int]) -> np.ndarray:
    """Trace out every site not in ``keep``.

    Retained sites keep their original relative order. Leading batch
    dimensions of ``rho`` are carried through.
    """
    rho = _square(rho, "rho")
    keep = sorted(set(keep))
    if not keep:
        raise ValueError("keep must name at least one site")
    if rho.shape[-1] != 2**n_sites:
        raise ValueError(f"rho has dim {rho.shape[-1]}, expected {2**n_sites} for {n_sites} sites")
    if keep[0] < 0 or keep[-1] >= n_sites:
        raise ValueError(f"keep {keep} out of range for {n_sites} sites")
    if len(keep) == n_sites:
        return rho.copy()
    if 2 * n_sites > len(string.ascii_letters):
        raise ValueError("register too large for partial_trace")
    batch = rho.shape[:-2]
    tensor = rho.reshape(batch + (2,) * (2 * n_sites))
    rows = list(string.ascii_letters[:n_sites])
    cols = list(string.ascii_letters[n_sites : 2 * n_sites])
    for site in range(n_sites):
        if site not in keep:
            cols[site] = rows[site]
    out = "".join(rows[s] for s in keep) + "".join(cols[s] for s in keep)
    reduced = np.einsum(f"...{''.join(rows)}{''.join(cols)}->...{out}", tensor)
    d = 2 ** len(keep)
    return reduced.reshape(batch + (d, d))
