"""Scenario files, trace serialization, trace comparison, and report emission.

A scenario is a single JSON document with sections graph / frequencies /
controller / afm / run. Loading applies documented defaults, validates every
invariant with the offending field named, and yields the graph, the
frame-exact scenario, and the controller gains. Traces are delimited text
tables (one header row, full float precision) so any plotting tool can
consume them; event logs go to a companion table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .afm import AfmScenario, AfmTrace
from .graph import OrientedGraph, complete, mesh, path
from .ode import Gains, OdeTrace


class ScenarioError(Exception):
    """Base for scenario loading problems."""


class ParseError(ScenarioError):
    """Scenario file is not a well-formed document."""


class ValidationError(ScenarioError):
    """A scenario field violates an invariant; names the field path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class MissingFieldError(ValidationError):
    def __init__(self, field: str):
        super().__init__(field, "required field is missing")


class GridMismatchError(ValueError):
    """Trace comparison windows do not overlap."""


_DEFAULTS = {
    "afm.p": 1000.0,
    "afm.d": 0.0,
    "afm.latency": 0.0,
    "afm.beta_max": 128,
    "afm.theta0": 0.1,
    "afm.omega_min": 0.5,
    "afm.omega_max": 2.0,
    "run.t_end": 100000.0,
}


def _section(doc: dict, name: str, required: bool = True) -> dict:
    sec = doc.get(name)
    if sec is None:
        if required:
            raise MissingFieldError(name)
        return {}
    if not isinstance(sec, dict):
        raise ValidationError(name, f"expected a mapping, got {type(sec).__name__}")
    return sec


def _build_graph(spec: dict) -> OrientedGraph:
    try:
        if "generator" in spec:
            kind = spec["generator"]
            if kind == "complete":
                return complete(int(spec["n"]))
            if kind == "path":
                return path(int(spec["n"]))
            if kind == "mesh":
                return mesh(int(spec["rows"]), int(spec["cols"]))
            raise ValidationError("graph.generator", f"unknown generator {kind!r}")
        if "edges" in spec:
            return OrientedGraph(int(spec["n"]), tuple(tuple(e) for e in spec["edges"]))
    except KeyError as exc:
        raise MissingFieldError(f"graph.{exc.args[0]}") from exc
    except (TypeError, ValueError) as exc:
        raise ValidationError("graph", str(exc)) from exc
    raise ValidationError("graph", "need either a generator spec or an edge list")


def _per_node(value, n: int, field: str) -> tuple:
    if isinstance(value, (int, float)):
        return (float(value),) * n
    seq = tuple(float(v) for v in value)
    if len(seq) != n:
        raise ValidationError(field, f"expected {n} entries, got {len(seq)}")
    return seq


def _per_link(value, n_links: int, field: str, cast=float) -> tuple:
    if isinstance(value, (int, float)):
        return (cast(value),) * n_links
    seq = tuple(cast(v) for v in value)
    if len(seq) != n_links:
        raise ValidationError(field, f"expected {n_links} entries, got {len(seq)}")
    return seq


def _build_frequencies(spec: dict, n: int) -> tuple:
    if "omega_u" in spec:
        return _per_node(spec["omega_u"], n, "frequencies.omega_u")
    if "two_node" in spec:
        tn = spec["two_node"]
        for key in ("i", "j", "alpha"):
            if key not in tn:
                raise MissingFieldError(f"frequencies.two_node.{key}")
        i, j = int(tn["i"]), int(tn["j"])
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValidationError("frequencies.two_node",
                                  f"need two distinct node indices in [0,{n}), got ({i},{j})")
        base = float(tn.get("base", 1.0))
        alpha = float(tn["alpha"])
        freqs = [base] * n
        freqs[i] += alpha
        freqs[j] -= alpha
        return tuple(freqs)
    raise MissingFieldError("frequencies.omega_u")


def load_scenario_dict(doc: dict):
    """Validate a scenario document and build (graph, AfmScenario, Gains)."""
    graph = _build_graph(_section(doc, "graph"))
    n = graph.n
    n_links = 2 * graph.m

    omega_u = _build_frequencies(_section(doc, "frequencies"), n)

    ctrl = _section(doc, "controller")
    for key in ("k_p", "k_i"):
        if key not in ctrl:
            raise MissingFieldError(f"controller.{key}")
    try:
        gains = Gains(
            k_p=float(ctrl["k_p"]),
            k_i=float(ctrl["k_i"]),
            omega_c=float(ctrl.get("omega_c", 1.0)),
        )
    except ValueError as exc:
        raise ValidationError("controller", str(exc)) from exc

    afm = _section(doc, "afm", required=False)
    run = _section(doc, "run", required=False)

    omega_min = float(afm.get("omega_min", _DEFAULTS["afm.omega_min"]))
    d = float(afm.get("d", _DEFAULTS["afm.d"]))
    latency = _per_link(afm.get("latency", _DEFAULTS["afm.latency"]),
                        n_links, "afm.latency")
    beta_max = int(afm.get("beta_max", _DEFAULTS["afm.beta_max"]))
    beta0 = _per_link(afm.get("beta0", beta_max // 2), n_links, "afm.beta0", cast=int)
    delay_s = d / omega_min if omega_min > 0 else 0.0
    epoch_default = -(max(latency, default=0.0) + delay_s) - 1.0
    t_end = float(run.get("t_end", _DEFAULTS["run.t_end"]))
    output_dt = float(run.get("output_dt", t_end / 400.0))

    try:
        scenario = AfmScenario(
            graph=graph,
            uncorrected_freq=omega_u,
            initial_phase=_per_node(afm.get("theta0", _DEFAULTS["afm.theta0"]),
                                    n, "afm.theta0"),
            startup_freq=_per_node(afm.get("omega_m1", list(omega_u)), n, "afm.omega_m1"),
            prehistory_freq=_per_node(afm.get("omega_m2", list(omega_u)), n, "afm.omega_m2"),
            initial_occupancy=beta0,
            buffer_capacity=beta_max,
            latency=latency,
            meas_period=float(afm.get("p", _DEFAULTS["afm.p"])),
            actuation_delay=d,
            gains=gains,
            omega_min=omega_min,
            omega_max=float(afm.get("omega_max", _DEFAULTS["afm.omega_max"])),
            t_end=t_end,
            output_dt=output_dt,
            epoch=float(afm.get("epoch", epoch_default)),
        )
    except ValueError as exc:
        raise ValidationError("afm", str(exc)) from exc
    return graph, scenario, gains


def load_scenario(path_like):
    """Load and validate a scenario file; returns (graph, AfmScenario, Gains)."""
    p = Path(path_like)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {p}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{p}: top level must be a mapping")
    return load_scenario_dict(doc)


def scenario_to_dict(graph: OrientedGraph, scenario: AfmScenario, gains: Gains) -> dict:
    """Fully-resolved scenario document (all defaults materialized)."""
    return {
        "graph": {"n": graph.n, "edges": [list(e) for e in graph.edges]},
        "frequencies": {"omega_u": list(scenario.uncorrected_freq)},
        "controller": {"k_p": gains.k_p, "k_i": gains.k_i, "omega_c": gains.omega_c},
        "afm": {
            "p": scenario.meas_period,
            "d": scenario.actuation_delay,
            "latency": list(scenario.latency),
            "beta_max": scenario.buffer_capacity,
            "beta0": list(scenario.initial_occupancy),
            "theta0": list(scenario.initial_phase),
            "omega_m1": list(scenario.startup_freq),
            "omega_m2": list(scenario.prehistory_freq),
            "epoch": scenario.epoch,
            "omega_min": scenario.omega_min,
            "omega_max": scenario.omega_max,
        },
        "run": {"t_end": scenario.t_end, "output_dt": scenario.output_dt},
    }


def save_scenario(graph: OrientedGraph, scenario: AfmScenario, gains: Gains,
                  path_like) -> None:
    doc = scenario_to_dict(graph, scenario, gains)
    Path(path_like).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def apply_overrides(doc: dict, assignments) -> dict:
    """Apply key=value overrides onto a scenario document (dotted paths).

    Values parse as JSON when possible, else are kept as strings. The result
    passes through the same validation as a file would.
    """
    for item in assignments:
        if "=" not in item:
            raise ValidationError(item, "override must look like section.key=value")
        key_path, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key_path.split(".")
        node = doc
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ValidationError(key_path, f"{part} is not a section")
        node[parts[-1]] = value
    return doc


# ---------------------------------------------------------------------------
# Trace tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceTable:
    """Generic delimited trace: time column plus named signal columns."""

    columns: tuple
    times: np.ndarray
    values: np.ndarray


def _trace_table(trace) -> TraceTable:
    if isinstance(trace, TraceTable):
        return trace
    if isinstance(trace, AfmTrace):
        n = trace.freq.shape[1]
        n_links = trace.occupancy.shape[1]
        cols = tuple(f"omega_{i}" for i in range(n)) + tuple(
            f"beta_link{q}" for q in range(n_links)
        )
        values = np.hstack([trace.freq, trace.occupancy.astype(float)])
        return TraceTable(cols, trace.times, values)
    if isinstance(trace, OdeTrace):
        n = trace.omega.shape[1]
        m = trace.delta.shape[1]
        cols = tuple(f"omega_{i}" for i in range(n)) + tuple(
            f"delta_edge{l}" for l in range(m)
        )
        values = np.hstack([trace.omega, trace.delta])
        return TraceTable(cols, trace.times, values)
    raise TypeError(f"cannot serialize trace of type {type(trace).__name__}")


def events_path_for(path_like) -> Path:
    p = Path(path_like)
    return p.with_name(p.stem + "_events" + (p.suffix or ".csv"))


def write_trace(trace, path_like) -> None:
    """Write a trace as a delimited text table; events go to a companion file.

    Floats are written in shortest exact decimal form, so reading the file
    back reproduces every sample bit-for-bit.
    """
    table = _trace_table(trace)
    p = Path(path_like)
    with p.open("w") as fh:
        fh.write(",".join(("t",) + table.columns) + "\n")
        for k in range(table.times.shape[0]):
            row = [repr(float(table.times[k]))]
            row.extend(repr(float(v)) for v in table.values[k])
            fh.write(",".join(row) + "\n")
    if isinstance(trace, AfmTrace) and trace.events:
        with events_path_for(p).open("w") as fh:
            fh.write("time,node,kind,value\n")
            for ev in trace.events:
                fh.write(f"{ev.time!r},{ev.node},{ev.kind},{ev.value!r}\n")


def read_trace(path_like) -> TraceTable:
    p = Path(path_like)
    with p.open() as fh:
        header = fh.readline().strip()
        if not header:
            raise ValueError(f"{p}: empty trace file")
        cols = header.split(",")
        if cols[0] != "t":
            raise ValueError(f"{p}: first column must be t, got {cols[0]!r}")
        times = []
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            times.append(float(parts[0]))
            rows.append([float(v) for v in parts[1:]])
    values = np.array(rows) if rows else np.zeros((0, len(cols) - 1))
    return TraceTable(tuple(cols[1:]), np.array(times), values)


# ---------------------------------------------------------------------------
# Trace comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Deviation of a frame-exact run from the fluid prediction.

    Occupancy comparison maps each edge's fluid offset onto the two directed
    links through the edge orientation: the buffer at the edge source gets
    beta0 + delta, the buffer at the target gets beta0 - delta.
    """

    freq_max_dev: np.ndarray
    freq_max_time: np.ndarray
    occ_max_dev: np.ndarray
    occ_max_time: np.ndarray
    freq_steady_dev: np.ndarray
    occ_steady_dev: np.ndarray
    max_freq_dev: float
    max_occ_dev: float
    n_samples: int
    freq_pass: bool | None = None
    occ_pass: bool | None = None


def compare_traces(afm_trace: AfmTrace, ode_trace: OdeTrace, beta0,
                   freq_tol: float | None = None,
                   occ_tol: float | None = None) -> ComparisonReport:
    """Compare a frame-exact trace with a fluid-model trace of the same scenario.

    The fluid trace is resampled onto the frame-exact output grid by linear
    interpolation over the overlapping time window.
    """
    t0 = max(afm_trace.times[0], ode_trace.times[0])
    t1 = min(afm_trace.times[-1], ode_trace.times[-1])
    if t1 <= t0:
        raise GridMismatchError(
            f"trace windows do not overlap: [{afm_trace.times[0]}, {afm_trace.times[-1]}]"
            f" vs [{ode_trace.times[0]}, {ode_trace.times[-1]}]"
        )
    mask = (afm_trace.times >= t0) & (afm_trace.times <= t1)
    times = afm_trace.times[mask]
    n = afm_trace.freq.shape[1]
    m = ode_trace.delta.shape[1]
    n_links = afm_trace.occupancy.shape[1]
    if n_links != 2 * m:
        raise GridMismatchError(
            f"traces disagree on topology: {n_links} directed links vs {m} edges"
        )
    beta0 = np.asarray(beta0, dtype=float)
    if beta0.ndim == 0:
        beta0 = np.full(n_links, float(beta0))

    omega_i = np.column_stack([
        np.interp(times, ode_trace.times, ode_trace.omega[:, i]) for i in range(n)
    ])
    delta_i = np.column_stack([
        np.interp(times, ode_trace.times, ode_trace.delta[:, l]) for l in range(m)
    ])
    freq_dev = afm_trace.freq[mask] - omega_i

    # directed link 2l runs source->target (buffer at target: beta0 - delta),
    # link 2l+1 runs target->source (buffer at source: beta0 + delta)
    predicted = np.empty((times.shape[0], n_links))
    for l in range(m):
        predicted[:, 2 * l] = beta0[2 * l] - delta_i[:, l]
        predicted[:, 2 * l + 1] = beta0[2 * l + 1] + delta_i[:, l]
    occ_dev = afm_trace.occupancy[mask].astype(float) - predicted

    abs_freq = np.abs(freq_dev)
    abs_occ = np.abs(occ_dev)
    freq_arg = np.argmax(abs_freq, axis=0)
    occ_arg = np.argmax(abs_occ, axis=0)
    report = ComparisonReport(
        freq_max_dev=abs_freq.max(axis=0),
        freq_max_time=times[freq_arg],
        occ_max_dev=abs_occ.max(axis=0),
        occ_max_time=times[occ_arg],
        freq_steady_dev=abs_freq[-1],
        occ_steady_dev=abs_occ[-1],
        max_freq_dev=float(abs_freq.max()),
        max_occ_dev=float(abs_occ.max()),
        n_samples=int(times.shape[0]),
        freq_pass=None if freq_tol is None else bool(abs_freq.max() <= freq_tol),
        occ_pass=None if occ_tol is None else bool(abs_occ.max() <= occ_tol),
    )
    return report


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _report_tree(report) -> dict:
    from .analysis import (HurwitzResult, LyapunovCertificate, PerformanceReport,
                           WorstCaseResult)

    if isinstance(report, PerformanceReport):
        return {
            "type": "performance",
            "freq_dev_norm_sq": report.freq_dev_norm_sq,
            "occupancy_norm_sq": report.occupancy_norm_sq,
            "quadratic_form": report.quadratic_form,
            "k_p": report.k_p,
            "integral_gain_scaled": report.integral_gain_scaled,
        }
    if isinstance(report, LyapunovCertificate):
        return {
            "type": "lyapunov_certificate",
            "residual1": report.residual1,
            "residual2": report.residual2,
            "residual_sum": report.residual_sum,
            "min_eig_x1": report.min_eig_x1,
            "min_eig_x2": report.min_eig_x2,
        }
    if isinstance(report, HurwitzResult):
        return {
            "type": "hurwitz",
            "is_hurwitz": report.is_hurwitz,
            "spectral_abscissa": report.spectral_abscissa,
        }
    if isinstance(report, WorstCaseResult):
        return {
            "type": "worst_case",
            "omega_u": [float(v) for v in report.omega_u],
            "attained_quadratic_form": report.attained_quadratic_form,
            "degenerate": report.degenerate,
        }
    if isinstance(report, ComparisonReport):
        return {
            "type": "comparison",
            "max_freq_dev": report.max_freq_dev,
            "max_occ_dev": report.max_occ_dev,
            "freq_steady_dev": [float(v) for v in report.freq_steady_dev],
            "occ_steady_dev": [float(v) for v in report.occ_steady_dev],
            "n_samples": report.n_samples,
            "freq_pass": report.freq_pass,
            "occ_pass": report.occ_pass,
        }
    if isinstance(report, dict):
        return report
    raise TypeError(f"cannot render report of type {type(report).__name__}")


def render_reports(reports) -> tuple:
    """Render reports to (text summary, structured tree).

    The tree preserves input order and serializes with sorted keys, so the
    structured file is stable and diffable across runs.
    """
    trees = [_report_tree(r) for r in reports]
    lines = []
    for tree in trees:
        kind = tree.get("type", "report")
        lines.append(f"[{kind}]")
        for key in sorted(k for k in tree if k != "type"):
            lines.append(f"  {key} = {tree[key]}")
    text = "\n".join(lines) + ("\n" if lines else "")
    return text, {"reports": trees}


def emit_report(reports, text_path=None, json_path=None) -> dict:
    """Emit reports as a human-readable summary and a structured JSON tree."""
    text, tree = render_reports(list(reports))
    if text_path is not None:
        Path(text_path).write_text(text)
    if json_path is not None:
        Path(json_path).write_text(json.dumps(tree, indent=2, sort_keys=True) + "\n")
    return tree
