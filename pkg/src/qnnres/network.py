"""Star-topology network: Hamiltonians, reservoir descriptions, target states.

Register layout: input nodes occupy sites ``0 .. n_inputs-1``, the output
node is site ``n_inputs``, and reservoir units (one per ``ReservoirSpec``)
are appended after it in the order the reservoirs are given. All energies
are in units of the Bohr frequency ``omega`` with hbar = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import SIGMA_MINUS, SIGMA_PLUS, SIGMA_Z, embed
from .states import PureBlochState, bloch_pure


@dataclass(frozen=True)
class QnnTopology:
    n_inputs: int
    couplings: tuple[float, ...]
    omega: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(float(j) for j in self.couplings))
        if self.n_inputs < 1:
            raise ValueError("n_inputs must be at least 1")
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise ValueError(f"omega must be positive and finite, got {self.omega}")
        if len(self.couplings) != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} couplings, got {len(self.couplings)}")
        for j in self.couplings:
            if not math.isfinite(j) or abs(j) > self.omega:
                raise ValueError(f"coupling {j} must be finite with |J| <= omega")

    @property
    def output_site(self) -> int:
        return self.n_inputs

    @property
    def n_sites(self) -> int:
        return self.n_inputs + 1


@dataclass(frozen=True)
class ReservoirSpec:
    node: int
    unit_state: PureBlochState
    j_su: float

    def __post_init__(self):
        if self.node < 0:
            raise ValueError(f"reservoir node {self.node} is negative")
        if not math.isfinite(self.j_su):
            raise ValueError("j_su must be finite")


@dataclass(frozen=True)
class TargetState:
    """A mixture (real weights p_i) or coherent superposition (amplitudes c_i)."""

    kind: str
    components: tuple[tuple[PureBlochState, complex], ...]

    def __post_init__(self):
        comps = tuple((s, w) for s, w in self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("target needs at least one component")
        if self.kind == "mixture":
            ps = [w for _, w in comps]
            if any(abs(complex(p).imag) > 0 or complex(p).real < 0 for p in ps):
                raise ValueError("mixture weights must be non-negative reals")
            if abs(sum(complex(p).real for p in ps) - 1.0) > 1e-12:
                raise ValueError(f"mixture weights sum to {sum(complex(p).real for p in ps)}, not 1")
        elif self.kind == "superposition":
            norm = sum(abs(complex(c)) ** 2 for _, c in comps)
            if abs(norm - 1.0) > 1e-12:
                raise ValueError(f"superposition amplitudes have squared norm {norm}, not 1")
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")


def check_reservoirs(topology: QnnTopology, specs: Sequence[ReservoirSpec]) -> None:
    seen = set()
    for spec in specs:
        if spec.node >= topology.n_inputs:
            raise ValueError(f"reservoir node {spec.node} out of range for {topology.n_inputs} inputs")
        if spec.node in seen:
            raise ValueError(f"duplicate reservoir on node {spec.node}")
        seen.add(spec.node)


def _flip_flop(a: int, b: int, n: int) -> np.ndarray:
    return embed(SIGMA_PLUS, a, n) @ embed(SIGMA_MINUS, b, n) + embed(SIGMA_MINUS, a, n) @ embed(
        SIGMA_PLUS, b, n
    )


def _system_terms(topology: QnnTopology, n: int, free_term: bool) -> np.ndarray:
    h = np.zeros((2**n, 2**n), dtype=complex)
    if free_term:
        for site in range(topology.n_sites):
            h += 0.5 * topology.omega * embed(SIGMA_Z, site, n)
    for i, j in enumerate(topology.couplings):
        if j:
            h += j * _flip_flop(i, topology.output_site, n)
    return h


def build_system_hamiltonian(topology: QnnTopology, *, free_term: bool = True) -> np.ndarray:
    """(omega/2) sum_k sigma_z^k + sum_i J_i (s+_i s-_out + h.c.) over all system sites."""
    return _system_terms(topology, topology.n_sites, free_term)


def build_collision_hamiltonian(
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    *,
    system_free: bool = True,
    unit_free: bool = False,
) -> np.ndarray:
    """Joint generator for one collision of every reservoir unit with its node.

    The system Hamiltonian acts during the collision. By default the units
    carry no free term of their own, so the node-unit exchange is only the
    flip-flop coupling; ``unit_free=True`` adds (omega/2) sigma_z per unit.
    """
    check_reservoirs(topology, specs)
    n = topology.n_sites + len(specs)
    h = _system_terms(topology, n, system_free)
    for k, spec in enumerate(specs):
        unit = topology.n_sites + k
        if unit_free:
            h += 0.5 * topology.omega * embed(SIGMA_Z, unit, n)
        if spec.j_su:
            h += spec.j_su * _flip_flop(spec.node, unit, n)
    return h


def build_unit_unit_hamiltonian(j_uu: float, *, omega: float = 1.0, unit_free: bool = False) -> np.ndarray:
    """Partial-swap generator between a used unit (site 0) and the next unit (site 1)."""
    if not math.isfinite(j_uu):
        raise ValueError("j_uu must be finite")
    h = j_uu * _flip_flop(0, 1, 2)
    if unit_free:
        h = h + 0.5 * omega * (embed(SIGMA_Z, 0, 2) + embed(SIGMA_Z, 1, 2))
    return h


def predict_pointer_steady_state(n_up: int, n_down: int) -> np.ndarray:
    """Output state diag(N_up/N, N_down/N) expected for orthogonal reservoirs."""
    if n_up < 0 or n_down < 0:
        raise ValueError("reservoir counts must be non-negative")
    total = n_up + n_down
    if total == 0:
        raise ValueError("need at least one reservoir")
    return np.diag([n_up / total, n_down / total]).astype(complex)


def target_density(target: TargetState) -> np.ndarray:
    if target.kind == "mixture":
        return sum(complex(p).real * bloch_pure(s) for s, p in target.components)
    psi = sum(complex(c) * s.ket() for s, c in target.components)
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise ValueError("superposition target has vanishing norm")
    psi = psi / norm
    return np.outer(psi, psi.conj())


def mixture_of(states: Sequence[PureBlochState]) -> TargetState:
    """Equal-weight mixture of the given pure states."""
    p = 1.0 / len(states)
    return TargetState("mixture", tuple((s, p) for s in states))
