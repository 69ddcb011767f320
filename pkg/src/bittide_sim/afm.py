"""Event-driven simulation of the frame-exact synchronization model.

Each node runs a free oscillator whose phase advances piecewise-linearly;
a frame is sent on every outgoing link at each integer phase crossing, so
buffer occupancies are exact integer functions of two floored phases. The
controller samples its local buffers every meas_period local ticks and the
resulting correction takes effect actuation_delay local ticks later.

Measurement and actuation instants are defined by phase crossings, which on
linear segments invert in closed form; no numeric root-finding is involved,
so two runs of the same scenario produce identical event logs.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .graph import OrientedGraph
from .ode import Gains


class InadmissibleControlError(RuntimeError):
    """A correction pushed an oscillator outside its physical frequency range."""


class HistoryGapError(LookupError):
    """Phase queried at a time older than the recorded (or pruned) history."""


class TargetInPastError(ValueError):
    """Phase-crossing target lies before the start of the recorded history."""


class PhaseHistory:
    """Piecewise-linear clock phase record supporting delayed lookups.

    Breakpoints are (time, phase, slope) with the last segment extending
    forward indefinitely at its slope. Phase is continuous and strictly
    increasing; every slope exceeds the oscillator minimum by admissibility.
    """

    __slots__ = ("times", "phases", "slopes")

    def __init__(self, times, phases, slopes):
        self.times = list(times)
        self.phases = list(phases)
        self.slopes = list(slopes)

    @classmethod
    def initial(cls, theta0: float, prehistory_freq: float, startup_freq: float,
                epoch: float) -> "PhaseHistory":
        """History covering [epoch, 0] at the pre-history rate, then the startup rate."""
        return cls(
            times=[epoch, 0.0],
            phases=[theta0 + prehistory_freq * epoch, theta0],
            slopes=[prehistory_freq, startup_freq],
        )

    def _segment(self, t: float) -> int:
        if t < self.times[0]:
            raise HistoryGapError(
                f"time {t} precedes recorded history (starts at {self.times[0]})"
            )
        return bisect_right(self.times, t) - 1

    def phase_at(self, t: float) -> float:
        k = self._segment(t)
        return self.phases[k] + self.slopes[k] * (t - self.times[k])

    def slope_at(self, t: float) -> float:
        """Right-continuous slope: at a breakpoint, the new segment's rate."""
        return self.slopes[self._segment(t)]

    def next_crossing(self, target_phase: float) -> float:
        """Exact time at which the phase reaches target_phase.

        Linear inversion within the containing segment; phases at breakpoints
        are strictly increasing so the crossing is unique.
        """
        if target_phase < self.phases[0]:
            raise TargetInPastError(
                f"target phase {target_phase} precedes history start {self.phases[0]}"
            )
        k = bisect_right(self.phases, target_phase) - 1
        return self.times[k] + (target_phase - self.phases[k]) / self.slopes[k]

    def append_breakpoint(self, t: float, phase: float, slope: float) -> None:
        if t < self.times[-1]:
            raise ValueError(f"breakpoint time {t} precedes last segment {self.times[-1]}")
        self.times.append(t)
        self.phases.append(phase)
        self.slopes.append(slope)

    def prune(self, cutoff: float) -> None:
        """Drop breakpoints older than the segment active at cutoff."""
        k = bisect_right(self.times, cutoff) - 1
        if k > 0:
            del self.times[:k]
            del self.phases[:k]
            del self.slopes[:k]


@dataclass(frozen=True)
class AfmScenario:
    """Complete parameter set for a frame-exact run.

    Per-node sequences are ordered by node index; per-directed-link sequences
    follow OrientedGraph.directed_links() order (edge l forward at slot 2l,
    reverse at 2l+1). Phases are in ticks, time in seconds, frequencies in
    ticks/second; meas_period and actuation_delay are in local ticks.
    """

    graph: OrientedGraph
    uncorrected_freq: tuple
    initial_phase: tuple
    startup_freq: tuple
    prehistory_freq: tuple
    initial_occupancy: tuple
    buffer_capacity: int
    latency: tuple
    meas_period: float
    actuation_delay: float
    gains: Gains
    omega_min: float
    omega_max: float
    t_end: float
    output_dt: float
    epoch: float

    def __post_init__(self):
        n = self.graph.n
        n_links = 2 * self.graph.m
        for name, want in (
            ("uncorrected_freq", n), ("initial_phase", n),
            ("startup_freq", n), ("prehistory_freq", n),
            ("initial_occupancy", n_links), ("latency", n_links),
        ):
            got = len(getattr(self, name))
            if got != want:
                raise ValueError(f"{name}: expected {want} entries, got {got}")
        if self.omega_min <= 0:
            raise ValueError(f"omega_min must be > 0, got {self.omega_min}")
        if self.omega_max <= self.omega_min:
            raise ValueError("omega_max must exceed omega_min")
        for i, th in enumerate(self.initial_phase):
            if th <= 0 or th == math.floor(th):
                raise ValueError(
                    f"initial_phase[{i}] must be positive and non-integer, got {th}"
                )
        for name in ("startup_freq", "prehistory_freq"):
            for i, w in enumerate(getattr(self, name)):
                if w <= self.omega_min:
                    raise ValueError(f"{name}[{i}]={w} must exceed omega_min={self.omega_min}")
        if self.buffer_capacity <= 0 or self.buffer_capacity % 2 != 0:
            raise ValueError(f"buffer_capacity must be a positive even integer, got "
                             f"{self.buffer_capacity}")
        for q, b0 in enumerate(self.initial_occupancy):
            if not (0 <= b0 <= self.buffer_capacity):
                raise ValueError(f"initial_occupancy[{q}]={b0} outside "
                                 f"[0, {self.buffer_capacity}]")
        for q, l in enumerate(self.latency):
            if l < 0:
                raise ValueError(f"latency[{q}] must be >= 0, got {l}")
        if self.meas_period <= 0:
            raise ValueError(f"meas_period must be > 0, got {self.meas_period}")
        if self.actuation_delay < 0:
            raise ValueError(f"actuation_delay must be >= 0, got {self.actuation_delay}")
        if self.t_end <= 0 or self.output_dt <= 0:
            raise ValueError("t_end and output_dt must be > 0")
        bound = -(max(self.latency, default=0.0) + self.actuation_delay / self.omega_min)
        if self.epoch >= 0 or self.epoch > bound:
            raise ValueError(
                f"epoch={self.epoch} violates epoch <= "
                f"-(max latency + actuation_delay/omega_min) = {bound}"
            )


@dataclass
class DiscreteControllerState:
    """Per-node controller memory between measurement events."""

    node: int
    integ: float = 0.0
    next_k: int = 0
    pending: list = field(default_factory=list)  # (k, correction), k ascending


@dataclass(frozen=True)
class AfmEvent:
    """One logged event: a measurement, a correction taking hold, or a buffer bound hit."""

    time: float
    node: int
    kind: str  # "measure" | "hold" | "overflow" | "underflow"
    k: int     # measurement index, or link index for buffer events
    value: float  # r for measure, correction for hold, occupancy for buffer events


@dataclass(frozen=True)
class AfmTrace:
    """Sampled run output: the uniform output grid plus every event instant.

    occupancy columns follow directed_links() order and are exact integers;
    freq is the active oscillator rate (right-continuous at events).
    """

    times: np.ndarray
    freq: np.ndarray
    occupancy: np.ndarray
    phase: np.ndarray
    events: tuple
    frame_offsets: tuple
    scenario: AfmScenario
    histories: tuple = ()  # populated only when keep_histories=True


def frame_offsets(scenario: AfmScenario) -> tuple:
    """Integer constants aligning floored phases with the initial occupancies.

    For link (j -> i): offset = beta0 - floor(theta_j(-latency)) + floor(theta_i(0)),
    which makes the occupancy at t=0 equal beta0 exactly.
    """
    offs = []
    links = scenario.graph.directed_links()
    for q, (src, dst) in enumerate(links):
        th_src = (scenario.initial_phase[src]
                  - scenario.prehistory_freq[src] * scenario.latency[q])
        offs.append(
            int(scenario.initial_occupancy[q])
            - math.floor(th_src)
            + math.floor(scenario.initial_phase[dst])
        )
    return tuple(offs)


def occupancy(hist_src: PhaseHistory, hist_dst: PhaseHistory, latency: float,
              frame_offset: int, t: float) -> int:
    """Exact integer buffer occupancy of a directed link at time t."""
    return (math.floor(hist_src.phase_at(t - latency))
            - math.floor(hist_dst.phase_at(t))
            + frame_offset)


def next_phase_crossing(hist: PhaseHistory, target_phase: float) -> float:
    """Time at which a history reaches a phase target (closed-form inversion)."""
    return hist.next_crossing(target_phase)


def pi_controller_step(state: DiscreteControllerState, r: float,
                       scenario: AfmScenario) -> float:
    """One sampled PI update in the local-tick domain.

    The correction uses the pre-update integral state; the accumulator then
    advances by meas_period * r (rectangle rule over the p local ticks
    between measurements). Raises if the corrected rate leaves the
    oscillator's physical range.
    """
    g = scenario.gains
    c = g.k_p * r + g.k_i * g.omega_c * state.integ
    state.integ += scenario.meas_period * r
    w = c + scenario.uncorrected_freq[state.node]
    if w <= scenario.omega_min or w >= scenario.omega_max:
        raise InadmissibleControlError(
            f"node {state.node}: corrected rate {w} outside "
            f"({scenario.omega_min}, {scenario.omega_max}) after correction {c}"
        )
    return c


_MEASURE, _HOLD = 0, 1
_PRUNE_TRIGGER = 4096


def simulate_afm(scenario: AfmScenario, keep_histories: bool = False) -> AfmTrace:
    """Run the frame-exact model to t_end.

    Events (measurements and correction holds) are processed in global time
    order; ties break by node index, measurements before holds. The trace is
    sampled on the uniform output grid and at each event instant. Buffer
    bound violations are logged and the run continues.
    """
    g = scenario.graph
    n = g.n
    links = g.directed_links()
    offsets = frame_offsets(scenario)
    in_links = [[] for _ in range(n)]
    for q, (_, dst) in enumerate(links):
        in_links[dst].append(q)

    hists = [
        PhaseHistory.initial(
            scenario.initial_phase[i], scenario.prehistory_freq[i],
            scenario.startup_freq[i], scenario.epoch,
        )
        for i in range(n)
    ]
    ctrl = [DiscreteControllerState(node=i) for i in range(n)]
    p = scenario.meas_period
    d = scenario.actuation_delay
    max_latency = max(scenario.latency, default=0.0)
    horizon = max_latency + 2.0 * d / scenario.omega_min + p / scenario.omega_min

    # next-event candidates per node: (measurement time, hold time or inf)
    meas_time = [hists[i].next_crossing(scenario.initial_phase[i]) for i in range(n)]
    hold_time = [math.inf] * n

    sample_times: list[float] = []
    sample_freq: list[list[float]] = []
    sample_beta: list[list[int]] = []
    sample_phase: list[list[float]] = []
    events: list[AfmEvent] = []
    # first overflow and first underflow are each recorded once per link
    overflow_flagged = [False] * len(links)
    underflow_flagged = [False] * len(links)

    def link_occupancy(q: int, t: float) -> int:
        src, dst = links[q]
        return occupancy(hists[src], hists[dst], scenario.latency[q], offsets[q], t)

    def check_bounds(q: int, t: float, beta: int) -> None:
        if beta > scenario.buffer_capacity and not overflow_flagged[q]:
            overflow_flagged[q] = True
            events.append(AfmEvent(t, links[q][1], "overflow", q, float(beta)))
        elif beta < 0 and not underflow_flagged[q]:
            underflow_flagged[q] = True
            events.append(AfmEvent(t, links[q][1], "underflow", q, float(beta)))

    def emit_sample(t: float) -> None:
        if sample_times and sample_times[-1] == t:
            return
        betas = []
        for q in range(len(links)):
            b = link_occupancy(q, t)
            check_bounds(q, t, b)
            betas.append(b)
        sample_times.append(t)
        sample_freq.append([hists[i].slope_at(t) for i in range(n)])
        sample_beta.append(betas)
        sample_phase.append([hists[i].phase_at(t) for i in range(n)])

    def next_event():
        """Earliest candidate as (time, node, kind), or None past t_end."""
        best = None
        for i in range(n):
            for kind, t in ((_MEASURE, meas_time[i]), (_HOLD, hold_time[i])):
                if t > scenario.t_end:
                    continue
                key = (t, i, kind)
                if best is None or key < best:
                    best = key
        return best

    grid_idx = 0

    def grid_time(j: int) -> float:
        return j * scenario.output_dt

    while True:
        evt = next_event()
        if evt is None:
            break
        t_evt, i, kind = evt
        while grid_time(grid_idx) < t_evt and grid_time(grid_idx) <= scenario.t_end:
            emit_sample(grid_time(grid_idx))
            grid_idx += 1

        if kind == _MEASURE:
            k = ctrl[i].next_k
            r = 0
            for q in in_links[i]:
                b = link_occupancy(q, t_evt)
                check_bounds(q, t_evt, b)
                r += b - scenario.initial_occupancy[q]
            try:
                c = pi_controller_step(ctrl[i], float(r), scenario)
            except InadmissibleControlError as exc:
                raise InadmissibleControlError(
                    f"t={t_evt}, measurement {k}: {exc}"
                ) from exc
            ctrl[i].pending.append((k, c))
            ctrl[i].next_k = k + 1
            events.append(AfmEvent(t_evt, i, "measure", k, float(r)))
            meas_time[i] = hists[i].next_crossing(
                scenario.initial_phase[i] + ctrl[i].next_k * p
            )
            if len(ctrl[i].pending) == 1:
                hold_time[i] = hists[i].next_crossing(
                    scenario.initial_phase[i] + k * p + d
                )
        else:
            k, c = ctrl[i].pending.pop(0)
            target = scenario.initial_phase[i] + k * p + d
            hists[i].append_breakpoint(t_evt, target, c + scenario.uncorrected_freq[i])
            events.append(AfmEvent(t_evt, i, "hold", k, float(c)))
            # the slope changed: recompute this node's crossings
            meas_time[i] = hists[i].next_crossing(
                scenario.initial_phase[i] + ctrl[i].next_k * p
            )
            if ctrl[i].pending:
                hold_time[i] = hists[i].next_crossing(
                    scenario.initial_phase[i] + ctrl[i].pending[0][0] * p + d
                )
            else:
                hold_time[i] = math.inf

        peek = next_event()
        if peek is None or peek[0] > t_evt:
            if grid_time(grid_idx) == t_evt:
                grid_idx += 1
            emit_sample(t_evt)

        if not keep_histories and len(hists[i].times) > _PRUNE_TRIGGER:
            cutoff = min(t_evt, grid_time(grid_idx)) - horizon
            hists[i].prune(cutoff)

    while grid_time(grid_idx) <= scenario.t_end:
        emit_sample(grid_time(grid_idx))
        grid_idx += 1
    emit_sample(scenario.t_end)

    return AfmTrace(
        times=np.array(sample_times),
        freq=np.array(sample_freq),
        occupancy=np.array(sample_beta, dtype=np.int64),
        phase=np.array(sample_phase),
        events=tuple(events),
        frame_offsets=offsets,
        scenario=scenario,
        histories=tuple(hists) if keep_histories else (),
    )
