"""Classical-vs-quantum distribution matching.

The procedure characterizes how well the synapse circuit reproduces the
classical threshold-crossing statistics: estimate per-link crossing
probabilities from a recorded run, encode them upstream, let the circuit
settle for one window, measure, and compare the normalized classical
vector against the empirical quantum frequencies.  Total variation is the
pass criterion (exact for finite supports); a two-sample KS statistic is
reported alongside.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .engine import QuantumState, measure
from .lif import Trajectory, measure_firing_probability
from .synapse import SynapseCircuit, bidirectional_step, encode_up, evolve_down, shutdown_link

MIN_WINDOWS = 100
MIN_SHOTS = 10_000


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    """Half the L1 distance between two discrete distributions."""
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise ValueError(f"distributions differ in length: {pa.shape} vs {qa.shape}")
    return float(0.5 * np.abs(pa - qa).sum())


def ks_statistic(p: Sequence[float], q: Sequence[float]) -> float:
    """Max CDF gap between two distributions on the same ordered support."""
    pa = np.asarray(p, dtype=float)
    qa = np.asarray(q, dtype=float)
    if pa.shape != qa.shape:
        raise ValueError(f"distributions differ in length: {pa.shape} vs {qa.shape}")
    return float(np.abs(np.cumsum(pa) - np.cumsum(qa)).max())


@dataclass
class CalibrationReport:
    classical_probs: np.ndarray     # raw per-link crossing probabilities
    quantum_freqs: np.ndarray       # empirical measurement frequencies
    tv_distance: float
    ks_stat: float
    windows: int
    shots: int
    epsilon: float
    passed: bool
    degenerate: bool = False
    seeds: tuple[int, int] = (0, 0)

    def to_kv_rows(self) -> list[tuple[str, str]]:
        """Flat key-value rows for the CSV block."""
        rows: list[tuple[str, str]] = []
        for k, p in enumerate(self.classical_probs):
            rows.append((f"classical_p_{k}", repr(float(p))))
        for k, f in enumerate(self.quantum_freqs):
            rows.append((f"quantum_freq_{k}", repr(float(f))))
        rows.append(("tv_distance", repr(float(self.tv_distance))))
        rows.append(("ks_statistic", repr(float(self.ks_stat))))
        rows.append(("windows", str(self.windows)))
        rows.append(("shots", str(self.shots)))
        rows.append(("epsilon", repr(float(self.epsilon))))
        rows.append(("seed_classical", str(self.seeds[0])))
        rows.append(("seed_quantum", str(self.seeds[1])))
        rows.append(("degenerate", str(int(self.degenerate))))
        rows.append(("passed", str(int(self.passed))))
        return rows


def settle_circuit(
    circuit: SynapseCircuit,
    psi_up: QuantumState,
    window_ms: float,
    dt: float,
    params,
    v_now: float | None = None,
    psi_down: QuantumState | None = None,
) -> QuantumState:
    """Run the downstream evolution for one window from a uniform start."""
    if psi_down is None:
        psi_down = QuantumState.uniform(circuit.down_dim)
    v = params.v_rest if v_now is None else v_now
    if circuit.coupling is None:
        drive = psi_up
    else:
        drive = QuantumState.from_amplitudes(
            circuit.coupling @ psi_up.amplitudes, psi_down.basis_labels, normalize=True
        )
    steps = max(1, int(round(window_ms / dt)))
    for _ in range(steps):
        psi_down = evolve_down(psi_down, drive, v, params, circuit.drive_scale, dt)
        if circuit.mode == "bidirectional":
            _, psi_down = bidirectional_step(circuit, psi_up, psi_down, v, params, dt)
    return psi_down


def calibrate(
    trajectory: Trajectory,
    circuit: SynapseCircuit,
    window_ms: float,
    shots: int,
    seeds: tuple[int, int],
    epsilon: float = 0.02,
    *,
    dt: float = 0.1,
    link_neurons: Sequence[int] | None = None,
    phases: Sequence[float] | None = None,
) -> CalibrationReport:
    """Compare classical crossing statistics against circuit measurement.

    A degenerate encoding (no link ever crossed) is reported as a failed
    calibration rather than raised.
    """
    if circuit.up_dim != circuit.down_dim:
        raise ValueError(
            "calibration compares upstream probabilities to downstream "
            "frequencies and requires equal circuit dimensions"
        )
    if shots < MIN_SHOTS:
        raise ValueError(f"shots must be >= {MIN_SHOTS}")
    n_windows = int(trajectory.duration_ms / window_ms + 1e-9)
    if n_windows < MIN_WINDOWS:
        raise ValueError(
            f"trajectory spans {n_windows} windows of {window_ms} ms; "
            f"calibration needs at least {MIN_WINDOWS}"
        )
    neurons = list(range(circuit.up_dim)) if link_neurons is None else list(link_neurons)
    if len(neurons) != circuit.up_dim:
        raise ValueError("link_neurons length must equal the upstream dimension")

    p = np.array(
        [measure_firing_probability(trajectory, window_ms, n) for n in neurons]
    )
    if p.sum() == 0.0:
        return CalibrationReport(
            classical_probs=p,
            quantum_freqs=np.zeros(circuit.down_dim),
            tv_distance=1.0,
            ks_stat=1.0,
            windows=n_windows,
            shots=shots,
            epsilon=epsilon,
            passed=False,
            degenerate=True,
            seeds=tuple(seeds),
        )

    circuit.check_up_probabilities(p)
    psi_up = encode_up(p, phases)
    psi_down = settle_circuit(circuit, psi_up, window_ms, dt, trajectory.params)
    for link in circuit.shutdown_links:
        psi_down = shutdown_link(psi_down, link)
    counts = measure(psi_down, shots, seeds[1])
    freqs = np.array([counts[label] for label in psi_down.basis_labels]) / shots

    classical = p / p.sum()
    tv = total_variation(classical, freqs)
    ks = ks_statistic(classical, freqs)
    return CalibrationReport(
        classical_probs=p,
        quantum_freqs=freqs,
        tv_distance=tv,
        ks_stat=ks,
        windows=n_windows,
        shots=shots,
        epsilon=epsilon,
        passed=tv < epsilon,
        seeds=tuple(seeds),
    )
