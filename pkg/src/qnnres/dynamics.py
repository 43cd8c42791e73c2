"""Closed, Markovian and non-Markovian collision dynamics of the network.

A Markovian collision couples every reservoir-bearing input node to a fresh
unit for a time ``tau`` under one joint propagator (system Hamiltonian
included), after which the units are traced out. Collisions follow each
other without idle evolution, so collision ``k`` ends at time ``k * tau``.

Because one collision is a fixed linear map on the system, ``run_markov``
iterates its transfer matrix (built column by column from the literal
compose-propagate-trace step) instead of re-forming the joint register
every step.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from .linalg import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    dagger,
    expm_unitary,
    herm_eig,
    kron_all,
    partial_trace,
)
from .network import (
    QnnTopology,
    ReservoirSpec,
    TargetState,
    build_collision_hamiltonian,
    build_unit_unit_hamiltonian,
    check_reservoirs,
    target_density,
)
from .states import (
    InvalidStateError,
    bloch_pure,
    expectation,
    fidelity,
    l1_coherence,
    mutual_information,
    validate_density,
    von_neumann_entropy,
)

DEFAULT_WINDOW = 50
DEFAULT_TOL = 1e-6
_CHUNK = 2048

UNIT_METRICS = ("mutual_info_out_unit", "entropy_unit", "energy_unit")
SIMPLE_METRICS = ("sigma_x_out", "sigma_y_out", "sigma_z_out", "p_up_out", "coherence_out") + UNIT_METRICS
_NODE_FID = re.compile(r"fidelity_node(\d+):(.+)")


@dataclass(frozen=True)
class CollisionSchedule:
    """Timing of a collision run.

    ``unit_free`` adds a (omega/2) sigma_z term for every unit during its
    collisions; ``system_free=False`` drops the system's free term. Both
    exist for sensitivity checks.
    """

    mode: str
    tau: float
    n_collisions: int
    j_uu: float | None = None
    tau_uu: float | None = None
    unit_free: bool = False
    system_free: bool = True

    def __post_init__(self):
        if self.mode not in ("markov", "non_markov"):
            raise ValueError(f"unknown collision mode {self.mode!r}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive, got {self.tau}")
        if int(self.n_collisions) != self.n_collisions or self.n_collisions < 1:
            raise ValueError(f"n_collisions must be a positive integer, got {self.n_collisions}")
        if self.mode == "non_markov":
            if self.j_uu is None or self.tau_uu is None:
                raise ValueError("non_markov schedule needs j_uu and tau_uu")
            if not math.isfinite(self.j_uu):
                raise ValueError("j_uu must be finite")
            if not (math.isfinite(self.tau_uu) and self.tau_uu > 0):
                raise ValueError(f"tau_uu must be positive, got {self.tau_uu}")
        elif self.j_uu is not None or self.tau_uu is not None:
            raise ValueError("markov schedule does not take j_uu or tau_uu")


@dataclass(frozen=True)
class TraceRecord:
    """Columnar time series: one row per recorded step, one column per label."""

    labels: tuple[str, ...]
    steps: np.ndarray
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        labels = tuple(self.labels)
        for lab in labels:
            if not lab or any(c in lab for c in ',\n\r"'):
                raise ValueError(f"invalid trace label {lab!r}")
        if len(set(labels)) != len(labels):
            raise ValueError("trace labels must be unique")
        steps = np.asarray(self.steps, dtype=np.int64)
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float).reshape(len(steps), len(labels))
        if steps.ndim != 1 or times.shape != steps.shape:
            raise ValueError("steps and times must be 1-D and aligned")
        if np.any(np.diff(steps) <= 0):
            raise ValueError("step indices must be strictly increasing")
        for arr in (steps, times, values):
            arr.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.steps)

    def series(self, label: str) -> np.ndarray:
        try:
            return self.values[:, self.labels.index(label)]
        except ValueError:
            raise KeyError(f"no series {label!r} in trace (have {', '.join(self.labels)})") from None

    def rows(self) -> Iterator[tuple[int, float, tuple[float, ...]]]:
        for s, t, v in zip(self.steps, self.times, self.values):
            yield int(s), float(t), tuple(float(x) for x in v)


@dataclass(frozen=True)
class SteadyReport:
    """Outcome of steady-state detection.

    When not converged, ``steady_values`` holds means over the final window
    and ``steady_step`` is None.
    """

    converged: bool
    steady_step: int | None
    steady_values: dict[str, float] = field(default_factory=dict)
    window: int = DEFAULT_WINDOW
    tol: float = DEFAULT_TOL


def detect_steady_state(trace: TraceRecord, window: int = DEFAULT_WINDOW, tol: float = DEFAULT_TOL) -> SteadyReport:
    """Earliest step whose trailing ``window`` rows vary by at most ``tol`` in every series."""
    if window < 2:
        raise ValueError("window must be at least 2")
    if len(trace) < window:
        raise ValueError(f"trace has {len(trace)} rows, shorter than window {window}")
    vals = trace.values
    spans = np.lib.stride_tricks.sliding_window_view(vals, window, axis=0)
    ok = np.all(np.ptp(spans, axis=-1) <= tol, axis=-1)
    hits = np.flatnonzero(ok)
    if hits.size:
        end = int(hits[0]) + window
        means = vals[end - window : end].mean(axis=0)
        return SteadyReport(
            True, int(trace.steps[end - 1]), dict(zip(trace.labels, map(float, means))), window, tol
        )
    means = vals[-window:].mean(axis=0)
    return SteadyReport(False, None, dict(zip(trace.labels, map(float, means))), window, tol)


def _steady_or_short(trace: TraceRecord, window: int, tol: float) -> SteadyReport:
    # runs shorter than the window cannot converge; report means over what exists
    if len(trace) < window:
        means = trace.values.mean(axis=0)
        return SteadyReport(False, None, dict(zip(trace.labels, map(float, means))), window, tol)
    return detect_steady_state(trace, window, tol)


# --- metrics ---------------------------------------------------------------


class _Batch:
    """Lazily reduced views of a stack of system states."""

    def __init__(self, sys_states, n_sites, joint=None):
        self.sys = sys_states
        self.n_sites = n_sites
        self.joint = joint
        self._nodes = {}

    def node(self, site):
        if site not in self._nodes:
            self._nodes[site] = partial_trace(self.sys, self.n_sites, [site])
        return self._nodes[site]

    @property
    def out(self):
        return self.node(self.n_sites - 1)

    @property
    def unit(self):
        return partial_trace(self.joint, 2, [1])


def _resolve_targets(targets) -> dict[str, np.ndarray]:
    out = {}
    for name, t in (targets or {}).items():
        out[name] = target_density(t) if isinstance(t, TargetState) else validate_density(t, 1)
    return out


def compile_metrics(
    tracked: Sequence[str], targets: Mapping | None, n_sites: int, omega: float = 1.0
) -> list[tuple[str, Callable[[_Batch], np.ndarray]]]:
    """Map metric names to batch evaluators; unknown names raise ``ValueError``."""
    dens = _resolve_targets(targets)
    unit_h = 0.5 * omega * SIGMA_Z
    fixed = {
        "sigma_x_out": lambda b: expectation(b.out, SIGMA_X),
        "sigma_y_out": lambda b: expectation(b.out, SIGMA_Y),
        "sigma_z_out": lambda b: expectation(b.out, SIGMA_Z),
        "p_up_out": lambda b: b.out[..., 0, 0].real,
        "coherence_out": lambda b: l1_coherence(b.out),
        "mutual_info_out_unit": lambda b: mutual_information(b.joint, {0}, {1}),
        "entropy_unit": lambda b: von_neumann_entropy(b.unit),
        "energy_unit": lambda b: expectation(b.unit, unit_h),
    }

    def target(name):
        if name not in dens:
            raise ValueError(f"unknown target {name!r}")
        return dens[name]

    compiled = []
    for name in tracked:
        if name in fixed:
            fn = fixed[name]
        elif name.startswith("fidelity:"):
            tgt = target(name.split(":", 1)[1])
            fn = lambda b, tgt=tgt: fidelity(tgt, b.out)
        elif m := _NODE_FID.fullmatch(name):
            site = int(m.group(1))
            if site >= n_sites - 1:
                raise ValueError(f"{name}: node {site} is not an input node")
            tgt = target(m.group(2))
            fn = lambda b, tgt=tgt, site=site: fidelity(tgt, b.node(site))
        else:
            raise ValueError(f"unknown metric {name!r}")
        compiled.append((name, fn))
    return compiled


def _needs_unit(tracked: Sequence[str]) -> bool:
    return any(name in UNIT_METRICS for name in tracked)


def _evaluate(compiled, batch: _Batch) -> np.ndarray:
    cols = [np.broadcast_to(np.asarray(fn(batch), dtype=float), batch.sys.shape[:1]) for _, fn in compiled]
    return np.stack(cols, axis=-1) if cols else np.zeros((batch.sys.shape[0], 0))


# --- closed evolution ------------------------------------------------------


def evolve_closed(
    rho0: np.ndarray,
    h: np.ndarray,
    times: Sequence[float],
    tracked: Sequence[str] = ("sigma_x_out", "sigma_y_out", "sigma_z_out"),
    targets: Mapping | None = None,
) -> TraceRecord:
    """Unitary evolution rho(t) = U_t rho0 U_t^H on a time grid.

    The output node is the last site of ``rho0``'s register.
    """
    rho0 = validate_density(rho0)
    h = np.asarray(h, dtype=complex)
    if h.shape != rho0.shape:
        raise ValueError(f"Hamiltonian shape {h.shape} does not match state {rho0.shape}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0 or times[0] != 0 or np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly ascending and start at 0")
    if _needs_unit(tracked):
        raise ValueError("unit metrics are undefined for closed evolution")
    n = int(np.log2(rho0.shape[0]))
    compiled = compile_metrics(tracked, targets, n)
    w, v = herm_eig(h)
    rho_eig = dagger(v) @ rho0 @ v
    values = []
    for start in range(0, len(times), _CHUNK):
        ph = np.exp(-1j * np.outer(times[start : start + _CHUNK], w))
        states = v @ (ph[:, :, None] * rho_eig * ph.conj()[:, None, :]) @ dagger(v)
        validate_density(states)
        values.append(_evaluate(compiled, _Batch(states, n)))
    return TraceRecord(tuple(tracked), np.arange(len(times)), times, np.concatenate(values))


# --- Markovian collisions --------------------------------------------------


@lru_cache(maxsize=64)
def _collision_unitary(topology, specs, tau, system_free, unit_free):
    h = build_collision_hamiltonian(topology, specs, system_free=system_free, unit_free=unit_free)
    u = expm_unitary(h, tau)
    u.setflags(write=False)
    return u


def _units(specs) -> np.ndarray:
    return kron_all(bloch_pure(s.unit_state) for s in specs)


def _collide(rho, topology, specs, tau, system_free, unit_free):
    """Joint post-collision state(s) of system plus units; accepts a stack."""
    u = _collision_unitary(topology, tuple(specs), float(tau), system_free, unit_free)
    env = _units(specs)
    d, e = rho.shape[-1], env.shape[0]
    joint = np.einsum("...ij,kl->...ikjl", rho, env).reshape(rho.shape[:-2] + (d * e, d * e))
    return u @ joint @ dagger(u)


def markov_collision_step(
    rho_sys: np.ndarray,
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    tau: float,
    *,
    system_free: bool = True,
    unit_free: bool = False,
) -> np.ndarray:
    """One collision: attach fresh units, propagate for ``tau``, trace units out."""
    check_reservoirs(topology, specs)
    rho_sys = validate_density(rho_sys, topology.n_sites)
    joint = _collide(rho_sys, topology, specs, tau, system_free, unit_free)
    out = partial_trace(joint, topology.n_sites + len(specs), range(topology.n_sites))
    return validate_density(out, topology.n_sites)


def unit_post_state(
    rho_sys: np.ndarray,
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    tau: float,
    *,
    which: int = 0,
    system_free: bool = True,
    unit_free: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """State of unit ``specs[which]`` after a collision, and its joint state with the output node.

    The joint state is ordered (output, unit).
    """
    check_reservoirs(topology, specs)
    if not 0 <= which < len(specs):
        raise ValueError(f"no reservoir with index {which}")
    rho_sys = validate_density(rho_sys, topology.n_sites)
    joint = _collide(rho_sys, topology, specs, tau, system_free, unit_free)
    n = topology.n_sites + len(specs)
    unit_site = topology.n_sites + which
    pair = validate_density(partial_trace(joint, n, [topology.output_site, unit_site]), 2)
    return partial_trace(pair, 2, [1]), pair


def _matrix_units(d: int) -> np.ndarray:
    return np.eye(d * d, dtype=complex).reshape(d * d, d, d)


@lru_cache(maxsize=32)
def _collision_maps(topology, specs, tau, system_free, unit_free, which):
    n_sys = topology.n_sites
    d = 2**n_sys
    n = n_sys + len(specs)
    t_sys = np.empty((d * d, d * d), dtype=complex)
    t_pair = np.empty((16, d * d), dtype=complex) if which is not None else None
    basis = _matrix_units(d)
    for start in range(0, d * d, 64):
        joint = _collide(basis[start : start + 64], topology, specs, tau, system_free, unit_free)
        t_sys[:, start : start + 64] = partial_trace(joint, n, range(n_sys)).reshape(-1, d * d).T
        if which is not None:
            pair = partial_trace(joint, n, [topology.output_site, n_sys + which])
            t_pair[:, start : start + 64] = pair.reshape(-1, 16).T
    # restore exact trace preservation; otherwise O(1e-16) per-step bias accumulates over 1e5 steps
    vec_id = np.eye(d, dtype=complex).reshape(-1)
    t_sys += np.outer(vec_id / d, vec_id - vec_id @ t_sys)
    for m in (t_sys, t_pair):
        if m is not None:
            m.setflags(write=False)
    return t_sys, t_pair


def collision_transfer_matrix(
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    tau: float,
    *,
    system_free: bool = True,
    unit_free: bool = False,
) -> np.ndarray:
    """Matrix T with vec(step(rho)) = T vec(rho), row-major vectorisation."""
    check_reservoirs(topology, specs)
    return _collision_maps(topology, tuple(specs), float(tau), system_free, unit_free, None)[0]


def collision_channel_choi(
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    tau: float,
    *,
    system_free: bool = True,
    unit_free: bool = False,
) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) E(|i><j|) of one collision; input factor first."""
    check_reservoirs(topology, specs)
    d = 2**topology.n_sites
    n = topology.n_sites + len(specs)
    basis = _matrix_units(d)
    images = np.empty_like(basis)
    for start in range(0, d * d, 64):
        joint = _collide(basis[start : start + 64], topology, specs, tau, system_free, unit_free)
        images[start : start + 64] = partial_trace(joint, n, range(topology.n_sites))
    # images[i*d + j] = E(|i><j|); choi[(i,a),(j,b)] = E(|i><j|)[a,b]
    blocks = images.reshape(d, d, d, d)
    return blocks.transpose(0, 2, 1, 3).reshape(d * d, d * d)


def apply_choi(choi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Channel action E(rho) = Tr_in[(rho^T (x) I) C] for a Choi matrix with input factor first."""
    d = rho.shape[-1]
    c = np.asarray(choi).reshape(d, d, d, d)
    return np.einsum("ij,iajb->ab", rho, c)


def choi_cptp_errors(choi: np.ndarray, d: int) -> dict[str, float]:
    """Hermiticity error, most negative eigenvalue and trace-preservation error."""
    choi = np.asarray(choi)
    herm = float(np.max(np.abs(choi - dagger(choi))))
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (choi + dagger(choi)))))
    tp = np.einsum("iaja->ij", choi.reshape(d, d, d, d))
    return {"hermiticity": herm, "min_eigenvalue": min_eig, "trace_preservation": float(np.max(np.abs(tp - np.eye(d))))}


def collision_fixed_point(
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    tau: float,
    *,
    system_free: bool = True,
    unit_free: bool = False,
) -> np.ndarray:
    """Stationary system state of the collision map (eigenvector with eigenvalue 1).

    Raises ``ValueError`` when the fixed point is not unique.
    """
    t = collision_transfer_matrix(topology, specs, tau, system_free=system_free, unit_free=unit_free)
    w, v = np.linalg.eig(t)
    near = np.flatnonzero(np.abs(w - 1) < 1e-9)
    if len(near) != 1:
        raise ValueError(f"collision map has {len(near)} fixed points")
    d = 2**topology.n_sites
    rho = v[:, near[0]].reshape(d, d)
    rho = rho / np.trace(rho)
    return validate_density(0.5 * (rho + dagger(rho)), topology.n_sites)


def _initial_pair(rho0, n_sys, unit_state) -> np.ndarray:
    return np.kron(partial_trace(rho0, n_sys, [n_sys - 1]), bloch_pure(unit_state))


def run_markov(
    topology: QnnTopology,
    specs: Sequence[ReservoirSpec],
    schedule: CollisionSchedule,
    rho0: np.ndarray,
    tracked: Sequence[str],
    *,
    targets: Mapping | None = None,
    window: int = DEFAULT_WINDOW,
    tol: float = DEFAULT_TOL,
    return_state: bool = False,
):
    """Iterate Markovian collisions and record ``tracked`` metrics after each one.

    Row 0 is the initial state. Unit metrics refer to the unit of
    ``specs[0]``; at row 0 that unit is still fresh. Returns
    ``(trace, steady_report)``, plus the final system state when
    ``return_state`` is set.
    """
    if schedule.mode != "markov":
        raise ValueError(f"run_markov needs a markov schedule, got {schedule.mode!r}")
    specs = tuple(specs)
    check_reservoirs(topology, specs)
    n_sys = topology.n_sites
    d = 2**n_sys
    rho0 = validate_density(rho0, n_sys)
    compiled = compile_metrics(tracked, targets, n_sys, topology.omega)
    need_unit = _needs_unit(tracked)
    if need_unit and not specs:
        raise ValueError("unit metrics need at least one reservoir")
    t_sys, t_pair = _collision_maps(
        topology, specs, float(schedule.tau), schedule.system_free, schedule.unit_free, 0 if need_unit else None
    )

    n_rows = schedule.n_collisions + 1
    values = np.empty((n_rows, len(compiled)))
    vec = rho0.reshape(-1).copy()
    buf = np.empty((min(_CHUNK, n_rows) + 1, d * d), dtype=complex)
    row = 0
    while row < n_rows:
        size = min(_CHUNK, n_rows - row)
        buf[0] = vec  # state before this chunk's first row
        for i in range(size):
            if row + i > 0:
                vec = t_sys @ vec
            buf[i + 1] = vec
        states = buf[1 : size + 1].reshape(size, d, d)
        validate_density(states)
        joint = None
        if need_unit:
            prev = buf[0 : size]
            joint = (prev @ t_pair.T).reshape(size, 4, 4)
            if row == 0:
                joint[0] = _initial_pair(rho0, n_sys, specs[0].unit_state)
            validate_density(joint)
        values[row : row + size] = _evaluate(compiled, _Batch(states, n_sys, joint))
        row += size
    steps = np.arange(n_rows)
    trace = TraceRecord(tuple(tracked), steps, steps * float(schedule.tau), values)
    report = _steady_or_short(trace, window, tol)
    if return_state:
        return trace, report, validate_density(vec.reshape(d, d), n_sys)
    return trace, report


# --- non-Markovian collisions ----------------------------------------------


def run_non_markov(
    topology: QnnTopology,
    spec: ReservoirSpec | Sequence[ReservoirSpec],
    schedule: CollisionSchedule,
    rho0: np.ndarray,
    tracked: Sequence[str],
    *,
    targets: Mapping | None = None,
    window: int = DEFAULT_WINDOW,
    tol: float = DEFAULT_TOL,
    return_state: bool = False,
):
    """Collisions with a memory unit passed forward through a unit-unit partial swap.

    Register: system (input, output) + carried unit + forthcoming unit. Each
    cycle the input node collides with the carried unit for ``tau``; that
    unit then exchanges with the forthcoming one for ``tau_uu`` under the
    unit-unit Hamiltonian and is discarded; a fresh unit is appended.
    Metrics are recorded right after the system-unit collision. The return
    value matches ``run_markov``.
    """
    if schedule.mode != "non_markov":
        raise ValueError(f"run_non_markov needs a non_markov schedule, got {schedule.mode!r}")
    if isinstance(spec, ReservoirSpec):
        spec = (spec,)
    specs = tuple(spec)
    if topology.n_inputs != 1 or len(specs) != 1:
        raise ValueError("non-Markovian runs support exactly one input node and one reservoir")
    check_reservoirs(topology, specs)
    n_sys = topology.n_sites
    rho0 = validate_density(rho0, n_sys)
    compiled = compile_metrics(tracked, targets, n_sys, topology.omega)
    unit = bloch_pure(specs[0].unit_state)

    u_su = _collision_unitary(topology, specs, float(schedule.tau), schedule.system_free, schedule.unit_free)
    u_su = np.kron(u_su, np.eye(2))
    h_uu = build_unit_unit_hamiltonian(schedule.j_uu, omega=topology.omega, unit_free=schedule.unit_free)
    u_uu = np.kron(np.eye(2**n_sys), expm_unitary(h_uu, schedule.tau_uu))
    n_reg = n_sys + 2
    keep_after = list(range(n_sys)) + [n_sys + 1]

    n_rows = schedule.n_collisions + 1
    sys_states = np.empty((n_rows, 2**n_sys, 2**n_sys), dtype=complex)
    pairs = np.empty((n_rows, 4, 4), dtype=complex)
    sys_states[0] = rho0
    pairs[0] = _initial_pair(rho0, n_sys, specs[0].unit_state)
    reg = kron_all([rho0, unit, unit])
    for k in range(1, n_rows):
        reg = u_su @ reg @ dagger(u_su)
        validate_density(reg, n_reg)
        sys_states[k] = partial_trace(reg, n_reg, range(n_sys))
        pairs[k] = partial_trace(reg, n_reg, [n_sys - 1, n_sys])
        reg = u_uu @ reg @ dagger(u_uu)
        reg = np.kron(partial_trace(reg, n_reg, keep_after), unit)
    values = np.concatenate(
        [
            _evaluate(compiled, _Batch(sys_states[s : s + _CHUNK], n_sys, pairs[s : s + _CHUNK]))
            for s in range(0, n_rows, _CHUNK)
        ]
    )
    steps = np.arange(n_rows)
    trace = TraceRecord(tuple(tracked), steps, steps * float(schedule.tau), values)
    report = _steady_or_short(trace, window, tol)
    if return_state:
        return trace, report, sys_states[-1].copy()
    return trace, report


__all__ = [
    "CollisionSchedule",
    "InvalidStateError",
    "SteadyReport",
    "TraceRecord",
    "apply_choi",
    "choi_cptp_errors",
    "collision_channel_choi",
    "collision_fixed_point",
    "collision_transfer_matrix",
    "compile_metrics",
    "detect_steady_state",
    "evolve_closed",
    "markov_collision_step",
    "run_markov",
    "run_non_markov",
    "unit_post_state",
]
