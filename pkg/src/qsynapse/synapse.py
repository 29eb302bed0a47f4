"""Synapse circuits over the statevector engine.

The upstream state encodes per-link threshold-crossing probabilities as
squared amplitudes.  A classically-controlled NOT gates the upstream state
on the live membrane potential, and the downstream state relaxes toward
the upstream drive through explicit Euler steps of

    d psi_down / dt = i * lam * (g_leak/cm) * (v - v_rest) * e0 + psi_up

with renormalization after every step (the evolution is an open-system
sketch, not norm preserving).  Bidirectional circuits additionally feed a
feedback operator K of the downstream state into the upstream mix and
weight the combined upstream state back into the downstream one.

Feedback combinations that contribute an exactly-zero vector are skipped
bitwise, so a circuit with zero feedback reduces to the one-way pipeline
exactly, not merely approximately.

Signaling is modelled by color tags: per-component labels drawn from a
finite composition table (total, associative, with identity), used to
blank out blocked components.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .engine import (
    QuantumState,
    OperatorMatrix,
    classically_controlled_not,
    normalized_amplitudes,
)
from .errors import (
    ConstraintViolationWarning,
    DegenerateEncodingError,
    DegenerateStateError,
    UnknownTagError,
)
from .lif import LifParams


# ---------------------------------------------------------------------------
# color-tag algebra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompositionTable:
    """Finite tag algebra: total, associative, with an identity element."""

    elements: tuple[str, ...]
    products: Mapping[tuple[str, str], str]

    def __post_init__(self):
        elems = tuple(self.elements)
        if len(set(elems)) != len(elems) or not elems:
            raise ValueError("elements must be nonempty and unique")
        prods = dict(self.products)
        for a in elems:
            for b in elems:
                c = prods.get((a, b))
                if c is None:
                    raise ValueError(f"composition table is not total: missing {a} o {b}")
                if c not in elems:
                    raise ValueError(f"product {a} o {b} = {c!r} is not an element")
        for a in elems:
            for b in elems:
                for c in elems:
                    if prods[(prods[(a, b)], c)] != prods[(a, prods[(b, c)])]:
                        raise ValueError(
                            f"composition table is not associative at ({a}, {b}, {c})"
                        )
        identity = None
        for e in elems:
            if all(prods[(e, x)] == x and prods[(x, e)] == x for x in elems):
                identity = e
                break
        if identity is None:
            raise ValueError("composition table has no identity element")
        object.__setattr__(self, "elements", elems)
        object.__setattr__(self, "products", prods)
        object.__setattr__(self, "_identity", identity)

    @property
    def identity(self) -> str:
        return self._identity

    def compose(self, a: str, b: str) -> str:
        for x in (a, b):
            if x not in self.elements:
                raise UnknownTagError(f"unknown tag {x!r}")
        return self.products[(a, b)]


def default_composition_table() -> CompositionTable:
    """Four-element commutative monoid: neutral identity, absorbing block,
    idempotent excite/inhibit whose mix blocks."""
    e, x, i, b = "neutral", "excite", "inhibit", "block"
    elems = (e, x, i, b)
    prods = {}
    for a in elems:
        prods[(e, a)] = a
        prods[(a, e)] = a
        prods[(b, a)] = b
        prods[(a, b)] = b
    prods[(x, x)] = x
    prods[(i, i)] = i
    prods[(x, i)] = b
    prods[(i, x)] = b
    return CompositionTable(elems, prods)


def load_composition_table(path: str | Path) -> CompositionTable:
    """Read a table file: header row of elements, then the full product grid."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty composition table")
    elems = tuple(lines[0])
    if len(lines) != len(elems) + 1:
        raise ValueError(f"{path}: expected {len(elems)} grid rows, found {len(lines) - 1}")
    prods = {}
    for r, row in enumerate(lines[1:]):
        if len(row) != len(elems):
            raise ValueError(f"{path}: grid row {r} has {len(row)} entries")
        for c, val in enumerate(row):
            prods[(elems[r], elems[c])] = val
    return CompositionTable(elems, prods)


def compose_tags(a: str, b: str, table: CompositionTable) -> str:
    """Table lookup; total and deterministic."""
    return table.compose(a, b)


@dataclass(frozen=True)
class TaggedState:
    """Quantum state with one color tag per basis component."""

    state: QuantumState
    tags: tuple[str, ...]

    def __post_init__(self):
        if len(self.tags) != self.state.dim:
            raise ValueError("tags length must equal the state dimension")
        object.__setattr__(self, "tags", tuple(self.tags))


def gate_by_tag(tagged: TaggedState, blocked: Iterable[str]) -> TaggedState:
    """Zero every component whose tag is blocked, renormalize, keep tags.

    Bitwise idempotent: when no nonzero amplitude is affected the input is
    returned unchanged.
    """
    blocked_set = frozenset(blocked)
    amps = tagged.state.amplitudes
    mask = np.array([tag in blocked_set for tag in tagged.tags])
    if not (mask & (amps != 0)).any():
        return tagged
    out = amps.copy()
    out[mask] = 0.0
    if not out.any():
        raise DegenerateStateError("every component is blocked by tag")
    return TaggedState(
        QuantumState(normalized_amplitudes(out), tagged.state.basis_labels),
        tagged.tags,
    )


# ---------------------------------------------------------------------------
# circuit wiring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynapseCircuit:
    """Composed synapse circuit: dimensions, feedback operator, couplings.

    ``up_dim`` counts presynaptic links, ``down_dim`` postsynaptic ones.
    ``coupling`` maps upstream components into the downstream space (None
    means identity, which requires equal dimensions).  ``k_operator`` feeds
    the downstream state back into the upstream mix in bidirectional mode
    (None means no feedback); it must be declared hermitian or unitary and
    is verified at construction.  ``b_weights`` weight the combined upstream
    state into the next downstream state; when derived from downstream
    threshold probabilities their squared magnitudes equal those
    probabilities.
    """

    up_dim: int
    down_dim: int
    mode: str = "unidirectional"
    k_operator: OperatorMatrix | None = None
    coupling: np.ndarray | None = None
    drive_scale: float = 1.0
    b_weights: np.ndarray | None = None
    shutdown_links: tuple[int, ...] = ()
    up_prob_bound: float | None = None
    down_prob_bound: float | None = None

    def __post_init__(self):
        if self.up_dim < 1 or self.down_dim < 1:
            raise ValueError("up_dim and down_dim must be >= 1")
        if self.mode not in ("unidirectional", "bidirectional"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "bidirectional" and self.up_dim != self.down_dim:
            raise ValueError(
                "bidirectional mode feeds the downstream state into the upstream "
                f"space and requires equal dimensions, got {self.up_dim} != {self.down_dim}"
            )
        if self.k_operator is not None:
            if self.k_operator.kind not in ("hermitian", "unitary"):
                raise ValueError("k_operator must be declared hermitian or unitary")
            if self.k_operator.dim != self.down_dim:
                raise ValueError(
                    f"k_operator dimension {self.k_operator.dim} != down_dim {self.down_dim}"
                )
        if self.coupling is not None:
            w = np.array(self.coupling, dtype=complex)
            if w.shape != (self.down_dim, self.up_dim):
                raise ValueError(
                    f"coupling must be {self.down_dim}x{self.up_dim}, got {w.shape}"
                )
            w.setflags(write=False)
            object.__setattr__(self, "coupling", w)
        if self.b_weights is not None:
            b = np.array(self.b_weights, dtype=complex)
            if b.shape != (self.down_dim,):
                raise ValueError(f"b_weights must have length {self.down_dim}")
            b.setflags(write=False)
            object.__setattr__(self, "b_weights", b)
            if self.down_prob_bound is not None:
                total = float(np.sum(b.real**2 + b.imag**2))
                if total > self.down_prob_bound:
                    warnings.warn(
                        f"total downstream probability {total:.6g} exceeds the "
                        f"configured bound {self.down_prob_bound}",
                        ConstraintViolationWarning,
                        stacklevel=2,
                    )
        for link in self.shutdown_links:
            if not 0 <= link < self.down_dim:
                raise ValueError(f"shutdown link {link} out of range")
        object.__setattr__(self, "shutdown_links", tuple(self.shutdown_links))

    def check_up_probabilities(self, probabilities: Sequence[float]) -> None:
        """Warn (never raise) when the upstream probability sum exceeds its bound."""
        if self.up_prob_bound is not None:
            total = float(np.sum(probabilities))
            if total > self.up_prob_bound:
                warnings.warn(
                    f"total upstream probability {total:.6g} exceeds the "
                    f"configured bound {self.up_prob_bound}",
                    ConstraintViolationWarning,
                    stacklevel=2,
                )


def encode_up(
    probabilities: Sequence[float],
    phases: Sequence[float] | None = None,
    labels: Sequence[str] | None = None,
) -> QuantumState:
    """Encode crossing probabilities as amplitudes sqrt(p_k / sum p) e^{i phase_k}.

    Raw probabilities need not sum to one; callers record the sum so the
    inputs stay recoverable from the normalized state.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise ValueError("probabilities must be a nonempty vector")
    if (p < 0).any() or (p > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    total = p.sum()
    if total == 0.0:
        raise DegenerateEncodingError("all encoding probabilities are zero")
    amps = np.sqrt(p / total).astype(complex)
    if phases is not None:
        ph = np.asarray(phases, dtype=float)
        if ph.shape != p.shape:
            raise ValueError("phases length must match probabilities")
        amps = amps * np.exp(1j * ph)
    return QuantumState.from_amplitudes(amps, labels)


def gate_up(
    state: QuantumState, v_now: float, v_thres: float, link_pair: tuple[int, int]
) -> QuantumState:
    """Controlled NOT on ``link_pair`` gated by a strict threshold comparison."""
    return classically_controlled_not(state, link_pair, v_now > v_thres)


def _drive_delta(
    drive: np.ndarray, v_now: float, params: LifParams, drive_scale: float, dt: float
) -> np.ndarray:
    delta = dt * drive.astype(complex)
    delta[0] += dt * (1j * drive_scale * (params.g_leak / params.cm) * (v_now - params.v_rest))
    return delta


def evolve_down(
    psi_down: QuantumState,
    psi_up: QuantumState | None,
    v_now: float,
    params: LifParams,
    drive_scale: float,
    dt: float,
) -> QuantumState:
    """One explicit Euler step of the downstream evolution, renormalized.

    ``psi_up`` may be None when no upstream drive exists; a step whose whole
    contribution is exactly zero returns the input unchanged.  First order
    by design: the upstream drive changes discontinuously at spike events,
    so higher-order smoothness assumptions do not hold.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if psi_up is None:
        drive = np.zeros(psi_down.dim, dtype=complex)
    else:
        if psi_down.dim != psi_up.dim:
            raise ValueError(
                f"state dimensions differ: {psi_down.dim} != {psi_up.dim}; map the "
                "upstream state through the coupling first"
            )
        drive = psi_up.amplitudes
    delta = _drive_delta(drive, v_now, params, drive_scale, dt)
    if not delta.any():
        return psi_down
    out = psi_down.amplitudes + delta
    try:
        out = normalized_amplitudes(out)
    except DegenerateStateError as err:
        raise DegenerateStateError(f"downstream evolution step collapsed: {err}") from err
    return QuantumState(out, psi_down.basis_labels)


def _combine(base: np.ndarray, contribution: np.ndarray, stage: str) -> np.ndarray | None:
    """base + contribution, renormalized; None signals a bitwise no-op."""
    if not contribution.any():
        return None
    out = base + contribution
    n2 = float(np.sum(out.real**2 + out.imag**2))
    if n2 == 0.0:
        raise DegenerateStateError(f"{stage} collapsed to the zero state")
    return out / np.sqrt(n2)


def bidirectional_step(
    circuit: SynapseCircuit,
    psi_up: QuantumState,
    psi_down: QuantumState,
    v_now: float,
    params: LifParams,
    dt: float,
) -> tuple[QuantumState, QuantumState]:
    """One feedback round trip; returns the combined (upstream, downstream) pair.

    Three stages, each renormalized, each raising with its own name when it
    collapses: the feedback mix adds K applied to the downstream state into
    the upstream one; the upstream drive step advances that mix one Euler
    step driven by the downstream state; the downstream combination adds the
    weighted, coupled upstream result back onto the downstream state.
    """
    if circuit.mode != "bidirectional":
        raise ValueError("circuit is not bidirectional")
    if psi_up.dim != circuit.up_dim or psi_down.dim != circuit.down_dim:
        raise ValueError("state dimensions do not match the circuit")
    if dt <= 0:
        raise ValueError("dt must be > 0")

    if circuit.k_operator is None:
        feedback = np.zeros(circuit.up_dim, dtype=complex)
    else:
        feedback = circuit.k_operator.entries @ psi_down.amplitudes
    mixed = _combine(psi_up.amplitudes, feedback, "feedback mix")
    up2 = psi_up.amplitudes if mixed is None else mixed

    delta = _drive_delta(psi_down.amplitudes, v_now, params, circuit.drive_scale, dt)
    stepped = _combine(up2, delta, "upstream drive step")
    up2 = up2 if stepped is None else stepped
    psi_up2 = QuantumState(up2, psi_up.basis_labels)

    coupled = up2 if circuit.coupling is None else circuit.coupling @ up2
    if circuit.b_weights is None:
        weighted = np.zeros(circuit.down_dim, dtype=complex)
    else:
        weighted = circuit.b_weights * coupled
    combined = _combine(psi_down.amplitudes, weighted, "downstream combination")
    if combined is None:
        return psi_up2, psi_down
    return psi_up2, QuantumState(combined, psi_down.basis_labels)


def shutdown_link(state: QuantumState, link: int) -> QuantumState:
    """Force one component to exactly zero and renormalize the rest."""
    if not 0 <= link < state.dim:
        raise ValueError(f"link {link} out of range for dimension {state.dim}")
    if state.amplitudes[link] == 0:
        return state
    out = state.amplitudes.copy()
    out[link] = 0.0
    if not out.any():
        raise DegenerateStateError(f"link {link} is the only nonzero component")
    return QuantumState(normalized_amplitudes(out), state.basis_labels)
