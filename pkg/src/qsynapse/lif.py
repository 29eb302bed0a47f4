"""Leaky integrate-and-fire dynamics with gap-junction coupling.

Units are mV, ms, mS/cm² and μF/cm² throughout, so the membrane time
constant cm/g_leak comes out in ms with no conversion factors.

A neuron integrates

    cm * dv/dt = -g_leak*(v - v_rest) + sum_j gs_j*(e_syn - v)
                 + sum_k g_elec*(v_k - v) + drive

between spike events.  Incoming spikes are instantaneous state jumps
(v += spike_jump, gs_j += delta_g, clamped to gs_max) applied at step
boundaries; synaptic conductances decay exponentially with tau_syn, which
is integrated in closed form.  Crossing v_thres resets v to v_rest and
counts one output spike.  Network updates are synchronous: every neuron
reads its neighbours' potentials as frozen at the start of the step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import NumericalDivergenceError

INTEGRATORS = ("rk4", "euler")


@dataclass(frozen=True)
class LifParams:
    """Membrane and synapse constants for one homogeneous population."""

    cm: float = 1.0            # μF/cm²
    g_leak: float = 0.0551     # mS/cm²
    v_rest: float = -65.0      # mV
    v_thres: float = -50.0     # mV
    v_init: float = -70.6837   # mV
    e_syn: float = 0.0225      # mV (synaptic reversal)
    tau_syn: float = 5.0       # ms
    gs_max: float = 0.5        # mS/cm²
    g_elec: float = 0.0        # mS/cm² (default gap-junction conductance)
    spike_jump: float = 5.0    # mV per incoming spike
    delta_g: float = 0.01      # mS/cm² conductance bump per incoming spike
    g_elec_warn_bound: float = 0.025
    literal_multilink_leak: bool = False

    def __post_init__(self):
        for name in ("cm", "g_leak", "tau_syn", "gs_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.v_thres <= self.v_rest:
            raise ValueError(
                f"v_thres ({self.v_thres}) must exceed v_rest ({self.v_rest}); "
                "otherwise the neuron fires perpetually"
            )
        if not 0.0 <= self.g_elec <= self.g_elec_warn_bound:
            warnings.warn(
                f"g_elec = {self.g_elec} outside the expected range "
                f"[0, {self.g_elec_warn_bound}] mS/cm²",
                stacklevel=2,
            )

    @property
    def tau_m(self) -> float:
        """Passive membrane time constant cm/g_leak in ms."""
        return self.cm / self.g_leak


@dataclass
class NeuronState:
    """Evolving state of a single neuron."""

    v: float
    gs: np.ndarray                       # per-upstream-link conductance
    last_reset_time: float = -math.inf   # ms; -inf until the first reset
    spike_count: int = 0

    def validate(self, params: LifParams) -> None:
        if not math.isfinite(self.v):
            raise ValueError(f"non-finite membrane potential {self.v}")
        gs = np.asarray(self.gs, dtype=float)
        if gs.ndim != 1:
            raise ValueError("gs must be a 1-d conductance vector")
        if (gs < 0).any() or (gs > params.gs_max).any():
            raise ValueError(f"gs outside [0, {params.gs_max}]: {gs}")


@dataclass(frozen=True)
class NetworkTopology:
    """Wiring of a network: inbound links per neuron plus gap junctions.

    ``upstream_links[i]`` lists the global link ids feeding neuron i; ids
    must be exactly 0..M-1 with each id owned by one neuron.  Gap junctions
    are unordered (i, j, g_elec) triples; every pair couples both neurons
    symmetrically with the same conductance.
    """

    neuron_count: int
    upstream_links: tuple[tuple[int, ...], ...]
    elec_pairs: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.neuron_count < 1:
            raise ValueError("neuron_count must be >= 1")
        if len(self.upstream_links) != self.neuron_count:
            raise ValueError("upstream_links length must equal neuron_count")
        seen: list[int] = []
        for links in self.upstream_links:
            seen.extend(links)
        if sorted(seen) != list(range(len(seen))):
            raise ValueError("global link ids must be exactly 0..M-1, each owned once")
        for i, j, g in self.elec_pairs:
            if i == j:
                raise ValueError(f"self gap-junction on neuron {i}")
            if not (0 <= i < self.neuron_count and 0 <= j < self.neuron_count):
                raise ValueError(f"gap-junction references unknown neuron: ({i}, {j})")
            if g < 0:
                raise ValueError(f"gap-junction conductance must be >= 0, got {g}")

    @classmethod
    def build(
        cls,
        neuron_count: int,
        upstream_links: Sequence[Sequence[int]],
        elec_pairs: Iterable[Sequence[float]] = (),
        default_g_elec: float = 0.0,
    ) -> "NetworkTopology":
        pairs = []
        for pair in elec_pairs:
            if len(pair) == 2:
                pairs.append((int(pair[0]), int(pair[1]), float(default_g_elec)))
            else:
                pairs.append((int(pair[0]), int(pair[1]), float(pair[2])))
        return cls(
            neuron_count=neuron_count,
            upstream_links=tuple(tuple(int(l) for l in links) for links in upstream_links),
            elec_pairs=tuple(pairs),
        )

    @cached_property
    def n_links(self) -> int:
        return sum(len(links) for links in self.upstream_links)

    @cached_property
    def link_owner(self) -> np.ndarray:
        """Owning neuron index per global link id."""
        owner = np.empty(self.n_links, dtype=np.intp)
        for i, links in enumerate(self.upstream_links):
            for l in links:
                owner[l] = i
        return owner

    @cached_property
    def gap_conductance_sum(self) -> np.ndarray:
        """Per-neuron total gap-junction conductance."""
        total = np.zeros(self.neuron_count)
        for i, j, g in self.elec_pairs:
            total[i] += g
            total[j] += g
        return total

    @cached_property
    def links_per_neuron(self) -> np.ndarray:
        return np.array([float(len(links)) for links in self.upstream_links])


def decay_conductance(gs, tau_syn: float, dt: float):
    """Exact exponential decay of a synaptic conductance over one step."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if tau_syn <= 0:
        raise ValueError("tau_syn must be > 0")
    if np.any(np.asarray(gs) < 0):
        raise ValueError("gs must be >= 0")
    return gs * math.exp(-dt / tau_syn)


def _make_rhs(tot_gs, gap_const, gap_g, drives, n_links, p: LifParams):
    """Stage derivative dv/dt = f(v, decay) with per-step constants hoisted."""
    if p.literal_multilink_leak:
        # every upstream link contributes its synaptic current minus the rest
        # potential plus the full external/gap input, all behind the leak factor
        def rhs(v, decay):
            syn = tot_gs * decay * (p.e_syn - v)
            gap = gap_const - gap_g * v
            return -p.g_leak * (syn - n_links * p.v_rest + n_links * (drives + gap)) / p.cm

        return rhs
    base = p.g_leak * p.v_rest + gap_const + drives
    v_coef = p.g_leak + gap_g
    if tot_gs.any():
        def rhs(v, decay):
            s = tot_gs * decay
            return (base + s * p.e_syn - (v_coef + s) * v) / p.cm
    else:
        def rhs(v, decay):
            return (base - v_coef * v) / p.cm

    return rhs


def _advance(
    v: np.ndarray,
    gs: np.ndarray,
    owner: np.ndarray,
    n_links: np.ndarray,
    params: LifParams,
    drives: np.ndarray,
    spike_counts: np.ndarray,
    gap_const: np.ndarray,
    gap_g: np.ndarray,
    dt: float,
    t: float,
    integrator: str,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One synchronous step for N neurons sharing one parameter set.

    Returns (v_next, gs_next, crossed).  Raises on non-finite potentials.
    """
    n = v.shape[0]
    # instantaneous spike jumps at the step boundary
    if spike_counts.any():
        gs = np.minimum(gs + params.delta_g * spike_counts, params.gs_max)
        per_neuron = np.bincount(owner, weights=spike_counts, minlength=n)
        v = v + params.spike_jump * per_neuron
    tot_gs = np.bincount(owner, weights=gs, minlength=n)

    half = math.exp(-0.5 * dt / params.tau_syn)
    full = math.exp(-dt / params.tau_syn)
    rhs = _make_rhs(tot_gs, gap_const, gap_g, drives, n_links, params)
    # divergence is diagnosed explicitly below; let inf/nan flow through
    with np.errstate(invalid="ignore", over="ignore"):
        if integrator == "rk4":
            k1 = rhs(v, 1.0)
            k2 = rhs(v + 0.5 * dt * k1, half)
            k3 = rhs(v + 0.5 * dt * k2, half)
            k4 = rhs(v + dt * k3, full)
            v1 = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        elif integrator == "euler":
            v1 = v + dt * rhs(v, 1.0)
        else:
            raise ValueError(f"unknown integrator {integrator!r}; expected one of {INTEGRATORS}")

    gs1 = np.clip(gs * full, 0.0, params.gs_max) if gs.shape[0] else gs
    bad = ~np.isfinite(v1)
    if bad.any():
        raise NumericalDivergenceError(int(np.flatnonzero(bad)[0]), t)
    crossed = v1 > params.v_thres
    if crossed.any():
        v1 = np.where(crossed, params.v_rest, v1)
    return v1, gs1, crossed


def step_neuron(
    state: NeuronState,
    params: LifParams,
    drive: float,
    neighbor_potentials: Sequence[tuple[float, float]],
    spikes_now: Sequence[float],
    dt: float,
    *,
    t: float = 0.0,
    integrator: str = "rk4",
) -> NeuronState:
    """Advance a single neuron one step of ``dt`` ms.

    ``neighbor_potentials`` holds (potential, conductance) pairs for coupled
    neighbours, frozen for the whole step; ``spikes_now`` is the per-link
    spike count arriving at the step boundary.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    spikes = np.asarray(spikes_now, dtype=float)
    gs = np.asarray(state.gs, dtype=float)
    if spikes.shape != gs.shape:
        raise ValueError("spikes_now length must match the per-link gs vector")
    gap_const = 0.0
    gap_g = 0.0
    for vk, g in neighbor_potentials:
        gap_const += g * vk
        gap_g += g
    owner = np.zeros(gs.shape[0], dtype=np.intp)
    v1, gs1, crossed = _advance(
        np.array([state.v]),
        gs,
        owner,
        np.array([float(gs.shape[0])]),
        params,
        np.array([float(drive)]),
        spikes,
        np.array([gap_const]),
        np.array([gap_g]),
        dt,
        t,
        integrator,
    )
    fired = bool(crossed[0])
    return NeuronState(
        v=float(v1[0]),
        gs=gs1,
        last_reset_time=t if fired else state.last_reset_time,
        spike_count=state.spike_count + int(fired),
    )


def step_network(
    states: Sequence[NeuronState],
    topology: NetworkTopology,
    params: LifParams,
    spike_inputs: Sequence[float],
    dt: float,
    *,
    drives: Sequence[float] | None = None,
    t: float = 0.0,
    integrator: str = "rk4",
) -> tuple[list[NeuronState], list[tuple[int, float]]]:
    """Advance every neuron one synchronous step; returns (states, events).

    ``spike_inputs`` is indexed by global link id.  Output events carry
    (neuron id, step start time).
    """
    if len(states) != topology.neuron_count:
        raise ValueError("states length must match topology.neuron_count")
    v = np.array([s.v for s in states])
    gs = np.concatenate([np.zeros(0)] + [np.asarray(s.gs, dtype=float) for s in states])
    # per-neuron gs vectors are stored against that neuron's link-id order
    order = np.concatenate(
        [np.zeros(0, dtype=np.intp)]
        + [np.asarray(links, dtype=np.intp) for links in topology.upstream_links]
    )
    gs_global = np.empty(topology.n_links)
    gs_global[order] = gs
    spikes = np.asarray(spike_inputs, dtype=float)
    if spikes.shape[0] != topology.n_links:
        raise ValueError("spike_inputs length must equal the number of links")
    gap_const = np.zeros(topology.neuron_count)
    for i, j, g in topology.elec_pairs:
        gap_const[i] += g * v[j]
        gap_const[j] += g * v[i]
    dr = np.zeros(topology.neuron_count) if drives is None else np.asarray(drives, dtype=float)
    v1, gs1, crossed = _advance(
        v, gs_global, topology.link_owner, topology.links_per_neuron, params,
        dr, spikes, gap_const, topology.gap_conductance_sum, dt, t, integrator,
    )
    new_states = []
    events = []
    for i, s in enumerate(states):
        fired = bool(crossed[i])
        new_states.append(
            NeuronState(
                v=float(v1[i]),
                gs=gs1[list(topology.upstream_links[i])],
                last_reset_time=t if fired else s.last_reset_time,
                spike_count=s.spike_count + int(fired),
            )
        )
        if fired:
            events.append((i, t))
    return new_states, events


@dataclass
class Trajectory:
    """Recorded run: potentials, conductances and spike events per step.

    Row i of ``v``/``gs`` is the state at ``times[i]``; spike events are
    stamped with the start time of the step in which the crossing happened.
    """

    dt_ms: float
    times: np.ndarray                    # (n_steps+1,)
    v: np.ndarray                        # (n_steps+1, N)
    gs: np.ndarray                       # (n_steps+1, M)
    spike_times: np.ndarray              # (n_events,)
    spike_neurons: np.ndarray            # (n_events,)
    params: LifParams
    topology: NetworkTopology

    @property
    def duration_ms(self) -> float:
        return float(self.times[-1]) if self.times.size else 0.0

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    def spike_indicator(self) -> np.ndarray:
        """(n_steps+1, N) count of crossings recorded at each step start."""
        ind = np.zeros(self.v.shape, dtype=np.int64)
        if self.spike_times.size:
            steps = np.rint(self.spike_times / self.dt_ms).astype(np.intp)
            np.add.at(ind, (steps, self.spike_neurons.astype(np.intp)), 1)
        return ind


def bin_spike_events(
    events: Iterable[tuple[float, int]], n_steps: int, n_links: int, dt: float
) -> np.ndarray:
    """Per-step, per-link spike counts from a merged (time, link) stream."""
    counts = np.zeros((n_steps, n_links))
    for time_ms, link in events:
        step = int(time_ms // dt)
        if 0 <= step < n_steps:
            counts[step, link] += 1.0
    return counts


def simulate_network(
    params: LifParams,
    topology: NetworkTopology,
    spike_events: Iterable[tuple[float, int]],
    t_end_ms: float,
    dt_ms: float,
    *,
    drives: Sequence[float] | None = None,
    integrator: str = "rk4",
    v_init: Sequence[float] | None = None,
) -> Trajectory:
    """Run the network to ``t_end_ms`` and record the full trajectory.

    On numerical divergence the raised error carries the truncated recording
    in its ``partial`` attribute.
    """
    if dt_ms <= 0 or t_end_ms <= 0:
        raise ValueError("dt_ms and t_end_ms must be > 0")
    n_steps = int(round(t_end_ms / dt_ms))
    n = topology.neuron_count
    m = topology.n_links
    counts = bin_spike_events(spike_events, n_steps, m, dt_ms)
    dr = np.zeros(n) if drives is None else np.asarray(drives, dtype=float)

    v = np.full(n, params.v_init) if v_init is None else np.asarray(v_init, dtype=float).copy()
    gs = np.zeros(m)
    times = np.arange(n_steps + 1) * dt_ms
    v_rec = np.empty((n_steps + 1, n))
    gs_rec = np.empty((n_steps + 1, m))
    v_rec[0] = v
    gs_rec[0] = gs
    ev_times: list[float] = []
    ev_neurons: list[int] = []
    gap_g = topology.gap_conductance_sum
    pairs = topology.elec_pairs
    owner = topology.link_owner
    n_links = topology.links_per_neuron

    for i in range(n_steps):
        t = float(times[i])
        gap_const = np.zeros(n)
        for a, b, g in pairs:
            gap_const[a] += g * v[b]
            gap_const[b] += g * v[a]
        try:
            v, gs, crossed = _advance(
                v, gs, owner, n_links, params, dr, counts[i], gap_const, gap_g,
                dt_ms, t, integrator,
            )
        except NumericalDivergenceError as err:
            err.partial = Trajectory(
                dt_ms=dt_ms,
                times=times[: i + 1],
                v=v_rec[: i + 1].copy(),
                gs=gs_rec[: i + 1].copy(),
                spike_times=np.array(ev_times),
                spike_neurons=np.array(ev_neurons, dtype=np.intp),
                params=params,
                topology=topology,
            )
            raise
        v_rec[i + 1] = v
        gs_rec[i + 1] = gs
        for idx in np.flatnonzero(crossed):
            ev_times.append(t)
            ev_neurons.append(int(idx))

    return Trajectory(
        dt_ms=dt_ms,
        times=times,
        v=v_rec,
        gs=gs_rec,
        spike_times=np.array(ev_times),
        spike_neurons=np.array(ev_neurons, dtype=np.intp),
        params=params,
        topology=topology,
    )


def _window_count(duration_ms: float, window_ms: float) -> int:
    # small nudge so exact multiples survive float rounding in times[-1]
    return int(math.floor(duration_ms / window_ms + 1e-9))


def measure_firing_probability(traj: Trajectory, window_ms: float, neuron: int) -> float:
    """Fraction of non-overlapping windows with at least one crossing."""
    if window_ms <= 0:
        raise ValueError("window_ms must be > 0")
    if traj.times.size <= 1:
        raise ValueError("empty trajectory")
    n_windows = _window_count(traj.duration_ms, window_ms)
    if n_windows < 1:
        raise ValueError("trajectory shorter than one window")
    if not 0 <= neuron < traj.topology.neuron_count:
        raise ValueError(f"unknown neuron {neuron}")
    mask = traj.spike_neurons == neuron
    if not mask.any():
        return 0.0
    w_idx = np.floor(traj.spike_times[mask] / window_ms).astype(np.intp)
    w_idx = w_idx[w_idx < n_windows]
    return float(np.unique(w_idx).size / n_windows)


def window_crossings(traj: Trajectory, window_ms: float) -> np.ndarray:
    """(n_windows, N) boolean matrix: neuron crossed within the window."""
    if traj.times.size <= 1:
        raise ValueError("empty trajectory")
    n_windows = _window_count(traj.duration_ms, window_ms)
    if n_windows < 1:
        raise ValueError("trajectory shorter than one window")
    crossed = np.zeros((n_windows, traj.topology.neuron_count), dtype=bool)
    if traj.spike_times.size:
        w_idx = np.floor(traj.spike_times / window_ms).astype(np.intp)
        keep = w_idx < n_windows
        crossed[w_idx[keep], traj.spike_neurons[keep].astype(np.intp)] = True
    return crossed
