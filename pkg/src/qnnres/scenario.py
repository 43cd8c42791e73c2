"""Scenario files, built-in presets, single runs and parameter sweeps.

Scenario grammar (UTF-8, line oriented)::

    # comment                    anything after '#' is ignored
    [section]                    sections: scenario, topology, state, schedule,
                                 observe, reservoir.<k>, target.<name>
    key = value                  whitespace around '=' is ignored

Numbers accept plain literals or arithmetic on literals and ``pi``
(``tau = 0.1*pi/0.05``). Qubit states are written ``bloch <theta> <phi>``
with angles in radians. Target components are
``component.<i> = bloch <theta> <phi> weight <w>``, where ``w`` is a real
weight for a mixture or a (possibly complex) amplitude for a superposition.
See ``serialize_scenario`` for the full key list; its output is the
canonical form.
"""
from __future__ import annotations

import ast
import json
import math
import operator
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .dynamics import (
    DEFAULT_TOL,
    DEFAULT_WINDOW,
    UNIT_METRICS,
    CollisionSchedule,
    SteadyReport,
    TraceRecord,
    _steady_or_short,
    compile_metrics,
    evolve_closed,
    run_markov,
    run_non_markov,
)
from .linalg import partial_trace
from .network import (
    QnnTopology,
    ReservoirSpec,
    TargetState,
    build_system_hamiltonian,
    check_reservoirs,
    mixture_of,
    target_density,
)
from .output import emit_csv, emit_svg, fmt, write_text_atomic
from .states import DOWN, PLUS, UP, PureBlochState, bloch_pure, fidelity, product_state


class ScenarioError(ValueError):
    """Invalid scenario text or configuration; carries a line number or key path."""

    def __init__(self, message: str, *, line: int | None = None, key: str | None = None):
        self.line, self.key, self.detail = line, key, message
        where = f"line {line}: " if line is not None else f"{key}: " if key else ""
        super().__init__(where + message)


class SweepError(RuntimeError):
    """Every value of a sweep failed."""


@dataclass(frozen=True)
class ClosedGrid:
    """Sample times 0, dt, 2 dt, ..., t_max for closed evolution."""

    t_max: float
    dt: float

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (math.isfinite(self.t_max) and self.t_max >= 0):
            raise ValueError(f"t_max must be non-negative, got {self.t_max}")

    def times(self) -> np.ndarray:
        return self.dt * np.arange(int(math.floor(self.t_max / self.dt + 1e-9)) + 1)


def default_tracked(mode: str, targets: Mapping) -> tuple[str, ...]:
    if mode == "closed":
        return ("sigma_x_out", "sigma_y_out", "sigma_z_out")
    return ("sigma_z_out", "p_up_out", "coherence_out") + tuple(f"fidelity:{t}" for t in targets)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topology: QnnTopology
    initial_states: tuple[PureBlochState, ...]
    schedule: CollisionSchedule | ClosedGrid
    reservoirs: tuple[ReservoirSpec, ...] = ()
    targets: Mapping[str, TargetState] = field(default_factory=dict)
    tracked: tuple[str, ...] = ()
    window: int = DEFAULT_WINDOW
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "initial_states", tuple(self.initial_states))
        object.__setattr__(self, "reservoirs", tuple(self.reservoirs))
        object.__setattr__(self, "targets", dict(self.targets))
        if not self.tracked:
            object.__setattr__(self, "tracked", default_tracked(self.mode, self.targets))
        object.__setattr__(self, "tracked", tuple(self.tracked))
        if not re.fullmatch(r"[A-Za-z0-9_.+-]+", self.name):
            raise ValueError(f"scenario name {self.name!r} may only use letters, digits and _.+-")
        if len(self.initial_states) != self.topology.n_sites:
            raise ValueError(
                f"need {self.topology.n_sites} initial states (inputs then output), got {len(self.initial_states)}"
            )
        check_reservoirs(self.topology, self.reservoirs)
        if self.mode == "closed":
            if self.reservoirs:
                raise ValueError("closed evolution takes no reservoirs")
        elif self.mode == "non_markov":
            if self.topology.n_inputs != 1 or len(self.reservoirs) != 1:
                raise ValueError("non_markov scenarios need exactly one input and one reservoir")
        for name in self.targets:
            if not re.fullmatch(r"[A-Za-z0-9_+-]+", name):
                raise ValueError(f"target name {name!r} may only use letters, digits and _+-")
        if len(set(self.tracked)) != len(self.tracked):
            raise ValueError("tracked metrics must be unique")
        compile_metrics(self.tracked, self.targets, self.topology.n_sites, self.topology.omega)
        if any(m in UNIT_METRICS for m in self.tracked) and not self.reservoirs:
            raise ValueError("unit metrics need a reservoir")
        if int(self.window) != self.window or self.window < 2:
            raise ValueError(f"window must be an integer >= 2, got {self.window}")
        if not (math.isfinite(self.tol) and self.tol > 0):
            raise ValueError(f"tol must be positive, got {self.tol}")

    @property
    def mode(self) -> str:
        return "closed" if isinstance(self.schedule, ClosedGrid) else self.schedule.mode

    def initial_density(self) -> np.ndarray:
        return product_state([bloch_pure(s) for s in self.initial_states])


# --- number and state parsing -----------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_node(node):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and type(node.value) in (int, float, complex):
        return node.value
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval_node(node.operand))
    raise ValueError("unsupported expression")


def _number(text: str, key: str, *, allow_complex: bool = False):
    text = text.strip()
    try:
        val = complex(text) if allow_complex and text.startswith("(") else None
    except ValueError:
        val = None
    if val is None:
        try:
            val = float(text)
        except ValueError:
            try:
                val = _eval_node(ast.parse(text, mode="eval"))
            except (ValueError, SyntaxError, ZeroDivisionError, TypeError):
                raise ScenarioError(f"cannot read number {text!r}", key=key) from None
    if isinstance(val, complex):
        if not allow_complex:
            raise ScenarioError(f"expected a real number, got {text!r}", key=key)
        if val.imag == 0:
            val = val.real
    else:
        val = float(val)
    if not all(math.isfinite(x) for x in (complex(val).real, complex(val).imag)):
        raise ScenarioError(f"number {text!r} is not finite", key=key)
    return val


def _integer(text: str, key: str) -> int:
    text = text.strip()
    if not re.fullmatch(r"[+-]?\d+", text):
        raise ScenarioError(f"expected an integer, got {text!r}", key=key)
    return int(text)


def _boolean(text: str, key: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ScenarioError(f"expected true or false, got {text!r}", key=key)


def _bloch(text: str, key: str) -> PureBlochState:
    parts = text.split()
    if len(parts) not in (2, 3) or parts[0] != "bloch":
        raise ScenarioError(f"expected 'bloch <theta> [<phi>]', got {text!r}", key=key)
    theta = _number(parts[1], key)
    phi = _number(parts[2], key) if len(parts) == 3 else 0.0
    try:
        return PureBlochState(theta, phi)
    except ValueError as exc:
        raise ScenarioError(str(exc), key=key) from None


def _component(text: str, key: str) -> tuple[PureBlochState, complex]:
    m = re.fullmatch(r"(.*?)\s+weight\s+(\S+)", text.strip())
    if not m:
        raise ScenarioError(f"expected 'bloch <theta> <phi> weight <w>', got {text!r}", key=key)
    return _bloch(m.group(1), key), _number(m.group(2), key, allow_complex=True)


# --- scenario text ---------------------------------------------------------

_SECTION = re.compile(r"\[\s*([A-Za-z0-9_.+-]+)\s*\]")
_SECTION_KEYS = {
    "scenario": {"name"},
    "topology": {"n_inputs", "omega", "couplings"},
    "schedule": {"mode", "tau", "n_collisions", "j_uu", "tau_uu", "unit_free", "system_free", "t_max", "dt"},
    "observe": {"tracked", "window", "tol"},
    "reservoir": {"node", "state", "j_su"},
}


def _lex(text: str) -> dict[str, tuple[int, dict[str, tuple[str, int]]]]:
    sections: dict[str, tuple[int, dict[str, tuple[str, int]]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            m = _SECTION.fullmatch(line)
            if not m:
                raise ScenarioError(f"malformed section header {raw.strip()!r}", line=lineno)
            current = m.group(1)
            if current in sections:
                raise ScenarioError(f"section [{current}] appears twice", line=lineno)
            sections[current] = (lineno, {})
            continue
        if "=" not in line:
            raise ScenarioError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        if current is None:
            raise ScenarioError("key outside of any section", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z0-9_.]+", key):
            raise ScenarioError(f"malformed key {key!r}", line=lineno)
        if not value:
            raise ScenarioError(f"key {key!r} has no value", line=lineno)
        entries = sections[current][1]
        if key in entries:
            raise ScenarioError(f"key {key!r} repeated in [{current}]", line=lineno)
        entries[key] = (value, lineno)
    return sections


def parse_scenario(text: str | bytes) -> ScenarioConfig:
    """Parse scenario text into a validated ``ScenarioConfig`` with defaults applied."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ScenarioError(f"not UTF-8 ({exc.reason} at byte {exc.start})") from None
    sections = _lex(text)

    reservoir_secs, target_secs = {}, {}
    for sec, (lineno, entries) in sections.items():
        head, _, tail = sec.partition(".")
        if head == "reservoir" and tail:
            if not tail.isdigit():
                raise ScenarioError(f"reservoir index {tail!r} is not a non-negative integer", key=sec)
            reservoir_secs[int(tail)] = (sec, entries)
        elif head == "target" and tail:
            target_secs[tail] = (sec, entries)
        elif sec == "state":
            continue
        elif sec not in _SECTION_KEYS or sec == "reservoir":
            raise ScenarioError(f"unknown section [{sec}]", line=lineno)
        allowed = _SECTION_KEYS.get(head)
        if allowed is not None:
            for key, (_, kl) in entries.items():
                if key not in allowed:
                    raise ScenarioError(f"unknown key {sec}.{key}", line=kl)

    def get(sec, key, conv, default=None, required=False):
        entries = sections.get(sec, (0, {}))[1]
        if key not in entries:
            if required:
                raise ScenarioError("required key missing", key=f"{sec}.{key}")
            return default
        return conv(entries[key][0], f"{sec}.{key}")

    name = get("scenario", "name", lambda v, k: v, default="scenario")

    n_inputs = get("topology", "n_inputs", _integer, required=True)
    omega = get("topology", "omega", _number, default=1.0)
    couplings = get(
        "topology", "couplings", lambda v, k: tuple(_number(x, k) for x in v.split(",")), required=True
    )
    topology = _build("topology", lambda: QnnTopology(n_inputs, couplings, omega))

    states = [PLUS] * topology.n_sites
    for key, (value, kl) in sections.get("state", (0, {}))[1].items():
        if key == "output":
            site = topology.output_site
        elif (m := re.fullmatch(r"node(\d+)", key)) and int(m.group(1)) < topology.n_inputs:
            site = int(m.group(1))
        else:
            raise ScenarioError(f"unknown key state.{key}", line=kl)
        states[site] = _bloch(value, f"state.{key}")

    reservoirs, seen = [], {}
    for k in sorted(reservoir_secs):
        sec, entries = reservoir_secs[k]
        node = get(sec, "node", _integer, required=True)
        if not 0 <= node < topology.n_inputs:
            raise ScenarioError(f"node {node} is not an input node (have {topology.n_inputs})", key=f"{sec}.node")
        if node in seen:
            raise ScenarioError(f"duplicate reservoir on node {node} (also in {seen[node]})", key=f"{sec}.node")
        seen[node] = sec
        state = get(sec, "state", _bloch, required=True)
        j_su = get(sec, "j_su", _number, required=True)
        reservoirs.append(_build(sec, lambda: ReservoirSpec(node, state, j_su)))

    mode = get("schedule", "mode", lambda v, k: v, required=True)
    if mode == "closed":
        for key in ("tau", "n_collisions", "j_uu", "tau_uu", "unit_free", "system_free"):
            if key in sections["schedule"][1]:
                raise ScenarioError("not allowed for closed evolution", key=f"schedule.{key}")
        t_max = get("schedule", "t_max", _number, required=True)
        dt = get("schedule", "dt", _number, required=True)
        schedule = _build("schedule", lambda: ClosedGrid(t_max, dt))
    elif mode in ("markov", "non_markov"):
        for key in ("t_max", "dt"):
            if key in sections["schedule"][1]:
                raise ScenarioError(f"not allowed for {mode} runs", key=f"schedule.{key}")
        kw = dict(
            tau=get("schedule", "tau", _number, required=True),
            n_collisions=get("schedule", "n_collisions", _integer, required=True),
            j_uu=get("schedule", "j_uu", _number),
            tau_uu=get("schedule", "tau_uu", _number),
            unit_free=get("schedule", "unit_free", _boolean, default=False),
            system_free=get("schedule", "system_free", _boolean, default=True),
        )
        schedule = _build("schedule", lambda: CollisionSchedule(mode, **kw))
    else:
        raise ScenarioError(f"mode must be closed, markov or non_markov, got {mode!r}", key="schedule.mode")

    targets = {}
    for tname, (sec, entries) in target_secs.items():
        kind = get(sec, "kind", lambda v, k: v, required=True)
        comps = []
        for key, (value, kl) in entries.items():
            if key == "kind":
                continue
            m = re.fullmatch(r"component\.(\d+)", key)
            if not m:
                raise ScenarioError(f"unknown key {sec}.{key}", line=kl)
            comps.append((int(m.group(1)), _component(value, f"{sec}.{key}")))
        comps = tuple(c for _, c in sorted(comps, key=lambda x: x[0]))
        if kind == "mixture":
            comps = tuple((s, float(complex(w).real)) if complex(w).imag == 0 else (s, w) for s, w in comps)
        targets[tname] = _build(sec, lambda: TargetState(kind, comps))

    tracked = get("observe", "tracked", lambda v, k: tuple(x.strip() for x in v.split(",") if x.strip()), default=())
    window = get("observe", "window", _integer, default=DEFAULT_WINDOW)
    tol = get("observe", "tol", _number, default=DEFAULT_TOL)
    return _build(
        "scenario",
        lambda: ScenarioConfig(name, topology, tuple(states), schedule, tuple(reservoirs), targets, tracked, window, tol),
    )


def _build(key: str, make: Callable):
    try:
        return make()
    except ScenarioError:
        raise
    except (ValueError, TypeError) as exc:
        raise ScenarioError(str(exc), key=key) from None


def load_scenario(path) -> ScenarioConfig:
    return parse_scenario(Path(path).read_bytes())


def _num(x) -> str:
    if isinstance(x, complex):
        return repr(x.real) if x.imag == 0 else repr(x)
    return repr(float(x))


def _state(s: PureBlochState) -> str:
    return f"bloch {_num(s.theta)} {_num(s.phi)}"


def serialize_scenario(config: ScenarioConfig) -> str:
    """Canonical scenario text; ``parse_scenario`` inverts it exactly."""
    t = config.topology
    out = [
        "[scenario]",
        f"name = {config.name}",
        "",
        "[topology]",
        f"n_inputs = {t.n_inputs}",
        f"omega = {_num(t.omega)}",
        "couplings = " + ", ".join(_num(j) for j in t.couplings),
        "",
        "[state]",
    ]
    for i in range(t.n_inputs):
        out.append(f"node{i} = {_state(config.initial_states[i])}")
    out += [f"output = {_state(config.initial_states[t.output_site])}", ""]
    for k, spec in enumerate(config.reservoirs):
        out += [f"[reservoir.{k}]", f"node = {spec.node}", f"state = {_state(spec.unit_state)}", f"j_su = {_num(spec.j_su)}", ""]
    s = config.schedule
    out.append("[schedule]")
    if isinstance(s, ClosedGrid):
        out += ["mode = closed", f"t_max = {_num(s.t_max)}", f"dt = {_num(s.dt)}"]
    else:
        out += [f"mode = {s.mode}", f"tau = {_num(s.tau)}", f"n_collisions = {int(s.n_collisions)}"]
        if s.j_uu is not None:
            out.append(f"j_uu = {_num(s.j_uu)}")
        if s.tau_uu is not None:
            out.append(f"tau_uu = {_num(s.tau_uu)}")
        out += [f"unit_free = {str(s.unit_free).lower()}", f"system_free = {str(s.system_free).lower()}"]
    out.append("")
    for name, target in config.targets.items():
        out += [f"[target.{name}]", f"kind = {target.kind}"]
        for i, (st, w) in enumerate(target.components):
            out.append(f"component.{i} = {_state(st)} weight {_num(w)}")
        out.append("")
    out += [
        "[observe]",
        "tracked = " + ", ".join(config.tracked),
        f"window = {int(config.window)}",
        f"tol = {_num(config.tol)}",
    ]
    return "\n".join(out) + "\n"


# --- presets ---------------------------------------------------------------

_J_COLLISION = 0.05
_TAU = 0.1 * math.pi / _J_COLLISION
_J_FIG2 = 0.06
NE = PureBlochState(math.pi / 6)


def _fig1(name, inputs):
    j = 0.05
    return ScenarioConfig(
        name,
        QnnTopology(2, (j, j)),
        tuple(inputs) + (PLUS,),
        ClosedGrid(300.0, 0.5),
        tracked=("sigma_x_out", "sigma_y_out", "sigma_z_out", "p_up_out"),
    )


def _fig3(name, unit_states, init, n_collisions=120_000):
    j = _J_COLLISION
    res = tuple(ReservoirSpec(i, s, j) for i, s in enumerate(unit_states))
    return ScenarioConfig(
        name,
        QnnTopology(3, (j, j, j)),
        (init,) * 4,
        CollisionSchedule("markov", _TAU, n_collisions),
        res,
        {"m": mixture_of(unit_states)},
        ("p_up_out", "sigma_z_out", "coherence_out", "fidelity:m"),
    )


def _fig2_pair(name, j_su2):
    j = _J_FIG2
    return ScenarioConfig(
        name,
        QnnTopology(2, (j, j)),
        (PLUS,) * 3,
        CollisionSchedule("markov", 0.1 * math.pi / j, 120_000),
        (ReservoirSpec(0, UP, j), ReservoirSpec(1, DOWN, j_su2)),
        {"up": mixture_of([UP]), "down": mixture_of([DOWN])},
        ("p_up_out", "sigma_z_out", "coherence_out"),
    )


def _fig2b():
    j = _J_COLLISION
    return ScenarioConfig(
        "fig2b",
        QnnTopology(1, (j,)),
        (PLUS, PLUS),
        CollisionSchedule("markov", _TAU, 300_000),
        (ReservoirSpec(0, UP, j),),
        {"up": mixture_of([UP])},
        ("fidelity:up", "sigma_x_out", "sigma_y_out", "sigma_z_out", "mutual_info_out_unit", "entropy_unit", "energy_unit"),
    )


def _fig4():
    j, j_uu = 0.5, 0.25
    return ScenarioConfig(
        "fig4",
        QnnTopology(1, (j,)),
        (PLUS, PLUS),
        CollisionSchedule("non_markov", 0.05 / j, 2000, j_uu=j_uu, tau_uu=(math.pi / 4) / j_uu),
        (ReservoirSpec(0, UP, j),),
        {"unit": mixture_of([UP])},
        ("mutual_info_out_unit", "fidelity:unit", "sigma_z_out", "entropy_unit", "energy_unit"),
    )


_PRESETS: dict[str, Callable[[], ScenarioConfig]] = {
    "fig1a": lambda: _fig1("fig1a", (UP, UP)),
    "fig1c": lambda: _fig1("fig1c", (UP, DOWN)),
    "fig2b": _fig2b,
    # r = 0.5 by default; sweep reservoir.1.ratio for the full curve
    "fig2e": lambda: _fig2_pair("fig2e", 0.5 * _J_FIG2),
    # epsilon = 0; sweep topology.offset.1 (J_2 = J - eps) or topology.offset.0 (J_1 = J - eps)
    "fig2fg": lambda: _fig2_pair("fig2fg", _J_FIG2),
    "fig3b": lambda: _fig3("fig3b", (UP, UP, DOWN), PLUS),
    "fig3d": lambda: _fig3("fig3d", (UP, DOWN, DOWN), PLUS),
    "fig3e": lambda: _fig3("fig3e", (UP, NE, DOWN), UP),
    "fig4": _fig4,
}
PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> ScenarioConfig:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise ScenarioError(f"unknown preset {name!r}; valid names: {', '.join(PRESET_NAMES)}") from None


# --- running ---------------------------------------------------------------


def execute(config: ScenarioConfig) -> tuple[TraceRecord, SteadyReport, np.ndarray]:
    """Run the engine for ``config``; returns trace, steady report and final system state."""
    rho0 = config.initial_density()
    kw = dict(targets=config.targets, window=config.window, tol=config.tol, return_state=True)
    if config.mode == "closed":
        times = config.schedule.times()
        h = build_system_hamiltonian(config.topology)
        trace = evolve_closed(rho0, h, times, config.tracked, config.targets)
        w, v = np.linalg.eigh(h)
        u = (v * np.exp(-1j * w * times[-1])) @ v.conj().T
        return trace, _steady_or_short(trace, config.window, config.tol), u @ rho0 @ u.conj().T
    if config.mode == "markov":
        return run_markov(config.topology, config.reservoirs, config.schedule, rho0, config.tracked, **kw)
    return run_non_markov(config.topology, config.reservoirs, config.schedule, rho0, config.tracked, **kw)


def final_fidelities(config: ScenarioConfig, final_state: np.ndarray) -> dict[str, float]:
    n = config.topology.n_sites
    out = partial_trace(final_state, n, [n - 1])
    return {name: float(fidelity(target_density(t), out)) for name, t in config.targets.items()}


@dataclass(frozen=True)
class RunReport:
    scenario: str
    steady: SteadyReport
    final_fidelities: dict[str, float]
    wall_time: float
    files: tuple[Path, ...]
    trace: TraceRecord


def _json_float(x):
    return x if x is None or math.isfinite(x) else str(x)


def _steady_json(s: SteadyReport) -> dict:
    return {
        "converged": s.converged,
        "steady_step": s.steady_step,
        "window": s.window,
        "tol": s.tol,
        "values": {k: _json_float(v) for k, v in s.steady_values.items()},
    }


def _svg_name(metric: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", metric)


class _FileSet:
    """Tracks files written in one run so a failure can remove them all."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.paths: list[Path] = []

    def write(self, name: str, fn) -> Path:
        path = self.out_dir / name
        fn(path)
        self.paths.append(path)
        return path

    def rollback(self):
        for p in self.paths:
            p.unlink(missing_ok=True)


def run_scenario(config: ScenarioConfig, out_dir, emit: Sequence[str] = ("csv",)) -> RunReport:
    """Run ``config`` and write ``<name>.csv``, optional SVGs and ``<name>_summary.json``.

    The CSV and summary are always written; ``"svg"`` in ``emit`` adds one
    plot per tracked metric.
    """
    unknown = set(emit) - {"csv", "svg"}
    if unknown:
        raise ValueError(f"unknown emit kinds {sorted(unknown)}")
    start = time.perf_counter()
    trace, steady, final = execute(config)
    fids = final_fidelities(config, final)
    wall = time.perf_counter() - start

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _FileSet(out_dir)
    try:
        files.write(f"{config.name}.csv", lambda p: emit_csv(trace, p))
        if "svg" in emit:
            for metric in trace.labels:
                files.write(f"{config.name}__{_svg_name(metric)}.svg", lambda p, m=metric: emit_svg(trace, m, p))
        summary = {
            "scenario": config.name,
            "mode": config.mode,
            "rows": len(trace),
            "steady": _steady_json(steady),
            "final_fidelities": {k: _json_float(v) for k, v in fids.items()},
            "wall_time_s": wall,
            "files": [p.name for p in files.paths] + [f"{config.name}_summary.json"],
        }
        files.write(
            f"{config.name}_summary.json",
            lambda p: write_text_atomic(p, json.dumps(summary, indent=2) + "\n"),
        )
    except BaseException:
        files.rollback()
        raise
    return RunReport(config.name, steady, fids, wall, tuple(files.paths), trace)


# --- sweeps ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    """Parameter path, values to visit, and steady-value names to collect.

    Paths: ``topology.omega``, ``topology.couplings.<i>``,
    ``topology.offset.<i>`` (J_i = base J_i - value), ``reservoir.<k>.j_su``,
    ``reservoir.<k>.ratio`` (j_su = value * J of the reservoir's node),
    ``reservoir.<k>.theta``, ``reservoir.<k>.phi``, ``schedule.tau``,
    ``schedule.n_collisions``, ``schedule.j_uu``, ``schedule.tau_uu``.
    An empty ``reduce`` collects every tracked metric.
    """

    param: str
    values: tuple[float, ...]
    reduce: tuple[str, ...] = ()

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if not all(math.isfinite(v) for v in values):
            raise ValueError("sweep values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "reduce", tuple(self.reduce))


def _setter(config: ScenarioConfig, param: str) -> Callable[[float], ScenarioConfig]:
    """Resolve a sweep path to a function value -> modified config."""
    parts = param.split(".")
    t = config.topology

    def index(text, bound, what):
        if not text.isdigit() or int(text) >= bound:
            raise ScenarioError(f"{what} index {text!r} out of range (have {bound})", key=param)
        return int(text)

    if parts == ["topology", "omega"]:
        return lambda v: replace(config, topology=replace(t, omega=v))
    if len(parts) == 3 and parts[:2] in (["topology", "couplings"], ["topology", "offset"]):
        i = index(parts[2], t.n_inputs, "coupling")
        offset = parts[1] == "offset"

        def set_coupling(v):
            js = list(t.couplings)
            js[i] = js[i] - v if offset else v
            return replace(config, topology=replace(t, couplings=tuple(js)))

        return set_coupling
    if len(parts) == 3 and parts[0] == "reservoir":
        k = index(parts[1], len(config.reservoirs), "reservoir")
        spec = config.reservoirs[k]

        def with_spec(new):
            res = list(config.reservoirs)
            res[k] = new
            return replace(config, reservoirs=tuple(res))

        field_name = parts[2]
        if field_name == "j_su":
            return lambda v: with_spec(replace(spec, j_su=v))
        if field_name == "ratio":
            return lambda v: with_spec(replace(spec, j_su=v * t.couplings[spec.node]))
        if field_name == "theta":
            return lambda v: with_spec(replace(spec, unit_state=PureBlochState(v, spec.unit_state.phi)))
        if field_name == "phi":
            return lambda v: with_spec(replace(spec, unit_state=PureBlochState(spec.unit_state.theta, v)))
    if len(parts) == 2 and parts[0] == "schedule" and config.mode != "closed":
        if parts[1] in ("tau", "j_uu", "tau_uu"):
            return lambda v: replace(config, schedule=replace(config.schedule, **{parts[1]: v}))
        if parts[1] == "n_collisions":

            def set_n(v):
                if v != int(v):
                    raise ValueError(f"n_collisions must be an integer, got {v}")
                return replace(config, schedule=replace(config.schedule, n_collisions=int(v)))

            return set_n
    raise ScenarioError(f"unknown or inapplicable sweep parameter {param!r}", key=param)


@dataclass(frozen=True)
class SweepRow:
    value: float
    converged: bool | None
    steady_step: int | None
    values: dict[str, float]
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass(frozen=True)
class SweepReport:
    scenario: str
    param: str
    rows: tuple[SweepRow, ...]
    linearity: dict[str, dict]
    wall_time: float
    files: tuple[Path, ...]


def _sweep_point(args) -> SweepRow:
    config, param, value, reduce = args
    try:
        cfg = _setter(config, param)(value)
        _, steady, _ = execute(cfg)
        return SweepRow(value, steady.converged, steady.steady_step, {m: steady.steady_values[m] for m in reduce})
    except (ValueError, TypeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return SweepRow(value, None, None, {m: math.nan for m in reduce}, f"{type(exc).__name__}: {exc}")


def linearity_diagnostics(xs, ys) -> dict:
    """Endpoint chord deviation and monotonicity of y(x) over ascending x."""
    order = np.argsort(xs, kind="stable")
    x, y = np.asarray(xs, float)[order], np.asarray(ys, float)[order]
    if len(x) < 2 or x[-1] == x[0]:
        return {"max_chord_deviation": None, "monotone": None, "endpoints": None}
    chord = y[0] + (y[-1] - y[0]) * (x - x[0]) / (x[-1] - x[0])
    d = np.diff(y)
    mono = "increasing" if np.all(d >= 0) else "decreasing" if np.all(d <= 0) else "none"
    return {
        "max_chord_deviation": float(np.max(np.abs(y - chord))),
        "monotone": mono,
        "endpoints": [[float(x[0]), float(y[0])], [float(x[-1]), float(y[-1])]],
    }


def run_sweep(config: ScenarioConfig, sweep: SweepSpec, out_dir, workers: int = 1) -> SweepReport:
    """One independent run per value; writes an aggregate CSV and a summary.

    Per-value failures are recorded in their row. ``SweepError`` is raised
    only when every value fails.
    """
    reduce = sweep.reduce or config.tracked
    missing = [m for m in reduce if m not in config.tracked]
    if missing:
        raise ScenarioError(f"reduce names {missing} are not tracked metrics", key="reduce")
    _setter(config, sweep.param)  # fail fast on a bad path
    start = time.perf_counter()
    jobs = [(config, sweep.param, v, tuple(reduce)) for v in sweep.values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = tuple(pool.map(_sweep_point, jobs))
    else:
        rows = tuple(map(_sweep_point, jobs))
    wall = time.perf_counter() - start
    ok = [r for r in rows if r.ok]
    if not ok:
        raise SweepError("every sweep value failed: " + "; ".join(f"{r.value}: {r.error}" for r in rows))
    linearity = {m: linearity_diagnostics([r.value for r in ok], [r.values[m] for r in ok]) for m in reduce}

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{config.name}_sweep_{_svg_name(sweep.param)}"
    lines = [",".join(("value", "converged", "steady_step") + tuple(reduce))]
    for r in rows:
        conv = "" if r.converged is None else str(r.converged).lower()
        step = "" if r.steady_step is None else str(r.steady_step)
        lines.append(",".join([fmt(r.value), conv, step] + [fmt(r.values[m]) for m in reduce]))
    summary = {
        "scenario": config.name,
        "param": sweep.param,
        "values": list(sweep.values),
        "rows": [
            {
                "value": r.value,
                "converged": r.converged,
                "steady_step": r.steady_step,
                "values": {k: _json_float(v) for k, v in r.values.items()},
                "error": r.error,
            }
            for r in rows
        ],
        "linearity": linearity,
        "wall_time_s": wall,
    }
    files = _FileSet(out_dir)
    try:
        files.write(f"{stem}.csv", lambda p: write_text_atomic(p, "\n".join(lines) + "\n"))
        files.write(f"{stem}_summary.json", lambda p: write_text_atomic(p, json.dumps(summary, indent=2) + "\n"))
    except BaseException:
        files.rollback()
        raise
    return SweepReport(config.name, sweep.param, rows, linearity, wall, tuple(files.paths))
