"""Relay beamformer construction for every transmission scheme.

Each forwarded stream gets one M-vector chosen so the relay's contribution
(a) vanishes at receivers where the stream would otherwise be an undesired
signal (null rows h_Rp^* u = 0), and (b) exactly cancels the direct-path
copy at receivers where the stream arrives as interference (neutralization
rows h_Rq^* u = -h_{tx,q}).  Free dimensions are always resolved by taking
the minimum-norm member of the constraint stack: deterministic, scale
robust, and the lowest relay power choice within the feasible family.

Half-duplex broadcast slots carry no direct links, so every row there is a
homogeneous null row; a unit-gain pinning row h_Rrx^* u = 1 at the intended
receiver keeps the minimum-norm solution away from zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .errors import (
    CognitionInsufficientError,
    EffectiveGainVanishedError,
    ScenarioError,
)
from .linalg import DEFAULT_TOL, least_norm_solve, rank_and_condition
from .network import (
    ChannelRealization,
    StreamId,
    all_streams,
    partner,
    same_side,
)

FULL_2K = "full_2k"
THREE_ANTENNA = "three_antenna"
HALF_DUPLEX = "half_duplex"
COGNITIVE_FULL = "cognitive_full"
COGNITIVE_PARTIAL = "cognitive_partial"

SCHEMES = (FULL_2K, THREE_ANTENNA, HALF_DUPLEX, COGNITIVE_FULL, COGNITIVE_PARTIAL)

# Three-antenna rotation: transmitter subsets in the published slot order.
ROTATION_SILENT_TX = (4, 3, 2, 1)


@dataclass(frozen=True)
class ConstraintSpec:
    """Rows that one stream's beamformer must satisfy.

    ``null_at`` lists receivers where h_Rp^* u = 0; ``neutralize_at`` lists
    (receiver, target) pairs enforcing h_Rq^* u = target (target is the
    negated direct gain for classic neutralization).  ``gain_at`` is the
    optional unit-gain pinning row (receiver, target) used when the stack
    would otherwise be homogeneous.
    """

    stream: StreamId
    null_at: Tuple[int, ...] = ()
    neutralize_at: Tuple[Tuple[int, complex], ...] = ()
    gain_at: Optional[Tuple[int, complex]] = None

    def __post_init__(self):
        neut_nodes = {q for q, _ in self.neutralize_at}
        if set(self.null_at) & neut_nodes:
            raise ScenarioError("a receiver cannot be both nulled and neutralized")
        if self.stream.rx in self.null_at or self.stream.rx in neut_nodes:
            raise ScenarioError("the intended receiver must not be constrained")

    @property
    def n_rows(self) -> int:
        return len(self.null_at) + len(self.neutralize_at) + (
            1 if self.gain_at is not None else 0)


@dataclass(frozen=True)
class BeamformerSet:
    """Solved relay vectors plus the constraint systems that produced them."""

    scheme: str
    vectors: Dict[StreamId, np.ndarray]
    specs: Dict[StreamId, ConstraintSpec]
    known_streams: frozenset = frozenset()

    @property
    def relay_tx_power_per_unit_symbol(self) -> float:
        return float(sum(np.vdot(u, u).real for u in self.vectors.values()))

    def effective_gain(self, ch: ChannelRealization, stream: StreamId,
                       include_direct: bool = True) -> complex:
        """Desired-symbol coefficient at the intended receiver."""
        g = complex(ch.relay_row(stream.rx) @ self.vectors[stream])
        if include_direct:
            g += ch.direct[(stream.tx, stream.rx)]
        return g


@dataclass
class ResidualReport:
    """Back-substitution residuals and per-stream desired gains."""

    scheme: str
    null_residuals: Dict[StreamId, List[float]] = field(default_factory=dict)
    neutralize_residuals: Dict[StreamId, List[float]] = field(default_factory=dict)
    gain_residuals: Dict[StreamId, List[float]] = field(default_factory=dict)
    effective_gains: Dict[StreamId, float] = field(default_factory=dict)
    relay_power_per_unit_symbol: float = 0.0

    @property
    def max_residual(self) -> float:
        vals = [0.0]
        for d in (self.null_residuals, self.neutralize_residuals,
                  self.gain_residuals):
            for rs in d.values():
                vals.extend(rs)
        return max(vals)


def _solve(spec: ConstraintSpec, ch: ChannelRealization,
           tol: float = DEFAULT_TOL) -> np.ndarray:
    rows = []
    rhs = []
    for p in spec.null_at:
        rows.append(ch.relay_row(p))
        rhs.append(0.0)
    for q, target in spec.neutralize_at:
        rows.append(ch.relay_row(q))
        rhs.append(target)
    if spec.gain_at is not None:
        node, target = spec.gain_at
        rows.append(ch.relay_row(node))
        rhs.append(target)
    if not rows:
        return np.zeros(ch.m, dtype=complex)
    return least_norm_solve(np.vstack(rows), np.array(rhs, dtype=complex), tol=tol)


def _full_duplex_spec(ch: ChannelRealization, stream: StreamId,
                      receivers: Sequence[int]) -> ConstraintSpec:
    """Taxonomy-driven spec for one forwarded stream in a full-duplex slot.

    At each listening receiver other than the stream's own endpoints, the
    stream is undesired (same side as the transmitter, relay path only ->
    null) or interference (opposite side, direct path present ->
    neutralize against it).
    """
    null_at = []
    neutralize_at = []
    for r in receivers:
        if r in (stream.tx, stream.rx):
            continue
        if same_side(r, stream.tx):
            null_at.append(r)
        else:
            neutralize_at.append((r, -ch.direct[(stream.tx, r)]))
    return ConstraintSpec(stream=stream, null_at=tuple(null_at),
                          neutralize_at=tuple(neutralize_at))


def _check_gains(bf: BeamformerSet, ch: ChannelRealization, floor: float,
                 include_direct: bool = True) -> None:
    for stream in bf.vectors:
        g = bf.effective_gain(ch, stream, include_direct=include_direct)
        if abs(g) < floor:
            raise EffectiveGainVanishedError(
                f"effective gain for {stream} is {abs(g):.3e} < {floor:.3e}")


def build_full_2k(ch: ChannelRealization, k: int,
                  eff_gain_floor: float = 1e-5,
                  tol: float = DEFAULT_TOL) -> BeamformerSet:
    """One-shot scheme: all 2K streams forwarded in the same slot.

    Requires M >= 2K relay antennas.  Every vector carries K-1 null rows and
    K-1 neutralization rows (2K-2 constraints on >= 2K unknowns).
    """
    if ch.k != k:
        raise ScenarioError("channel realization was drawn for a different K")
    if ch.m < 2 * k:
        raise ScenarioError(f"scheme needs M >= 2K = {2 * k}, got M = {ch.m}")
    receivers = range(1, 2 * k + 1)
    vectors: Dict[StreamId, np.ndarray] = {}
    specs: Dict[StreamId, ConstraintSpec] = {}
    for stream in all_streams(k):
        spec = _full_duplex_spec(ch, stream, receivers)
        specs[stream] = spec
        vectors[stream] = _solve(spec, ch, tol=tol)
    bf = BeamformerSet(scheme=FULL_2K, vectors=vectors, specs=specs)
    _check_gains(bf, ch, eff_gain_floor)
    return bf


def rotation_schedule(slot: int) -> Tuple[Tuple[int, ...], StreamId]:
    """Three-antenna rotation: (active transmitters, silent stream) for a slot.

    The four slots silence transmitters 4, 3, 2, 1 in turn so every user
    sends (and receives) three symbols over four slots.
    """
    if not 0 <= slot <= 3:
        raise ScenarioError(f"rotation slot must be in 0..3, got {slot}")
    silent_tx = ROTATION_SILENT_TX[slot]
    transmitters = tuple(t for t in range(1, 5) if t != silent_tx)
    return transmitters, StreamId(silent_tx, partner(silent_tx))


def build_three_antenna(ch: ChannelRealization, slot: int = 0,
                        eff_gain_floor: float = 1e-5,
                        tol: float = DEFAULT_TOL) -> BeamformerSet:
    """Reduced-relay scheme: K=2, M=3, one transmitter silent per slot.

    The silent transmitter's partner still sends (a lone stream) but has no
    desired message this slot, so no constraints target it as a receiver.
    """
    if ch.k != 2 or ch.m != 3:
        raise ScenarioError("three-antenna scheme needs K=2, M=3")
    transmitters, silent_stream = rotation_schedule(slot)
    idle_rx = silent_stream.rx  # transmits the lone stream, receives nothing
    receivers = [r for r in range(1, 5) if r != idle_rx]
    vectors: Dict[StreamId, np.ndarray] = {}
    specs: Dict[StreamId, ConstraintSpec] = {}
    for tx in transmitters:
        stream = StreamId(tx, partner(tx))
        spec = _full_duplex_spec(ch, stream, receivers)
        specs[stream] = spec
        vectors[stream] = _solve(spec, ch, tol=tol)
    bf = BeamformerSet(scheme=THREE_ANTENNA, vectors=vectors, specs=specs)
    # The idle node's own stream is decoded by a live receiver; check only
    # receivers that actually want a message this slot.
    for stream in vectors:
        if stream.rx == idle_rx:
            continue
        g = bf.effective_gain(ch, stream)
        if abs(g) < eff_gain_floor:
            raise EffectiveGainVanishedError(
                f"effective gain for {stream} is {abs(g):.3e}")
    return bf


def build_half_duplex(ch_slot2: ChannelRealization, k: int,
                      tol: float = DEFAULT_TOL) -> BeamformerSet:
    """Two-slot scheme: relay listens in slot 1, broadcasts in slot 2.

    No direct-link interference reaches listeners in slot 2 (everyone was
    transmitting in slot 1), so each vector carries only 2K-2 null rows plus
    the unit-gain pinning row at the intended receiver.
    """
    if ch_slot2.m < 2 * k:
        raise ScenarioError(f"scheme needs M >= 2K = {2 * k}, got M = {ch_slot2.m}")
    vectors: Dict[StreamId, np.ndarray] = {}
    specs: Dict[StreamId, ConstraintSpec] = {}
    for stream in all_streams(k):
        null_at = tuple(r for r in range(1, 2 * k + 1)
                        if r not in (stream.tx, stream.rx))
        spec = ConstraintSpec(stream=stream, null_at=null_at,
                              gain_at=(stream.rx, 1.0 + 0.0j))
        specs[stream] = spec
        vectors[stream] = _solve(spec, ch_slot2, tol=tol)
    return BeamformerSet(scheme=HALF_DUPLEX, vectors=vectors, specs=specs)


def build_cognitive(ch: ChannelRealization, known: Set[StreamId],
                    eff_gain_floor: float = 1e-5,
                    tol: float = DEFAULT_TOL) -> BeamformerSet:
    """Two-antenna cognitive relay, K=2: full (4 known) or partial (one pair).

    With M = 2 each vector carries exactly one null and one neutralization
    row, so the systems are square.  For partial cognition the relay must be
    able to zero-force the two over-the-air streams after subtracting the
    known pair's contribution.
    """
    if ch.k != 2 or ch.m != 2:
        raise ScenarioError("cognitive schemes are defined for K=2, M=2")
    known = frozenset(known)
    streams = all_streams(2)
    if known == frozenset(streams):
        scheme = COGNITIVE_FULL
    elif len(known) == 2 and len({s.pair for s in known}) == 1:
        scheme = COGNITIVE_PARTIAL
    else:
        raise ScenarioError(
            "cognition covers all 4 streams or exactly the 2 of one pair")
    if scheme == COGNITIVE_PARTIAL:
        unknown = [s for s in streams if s not in known]
        a = np.column_stack([ch.to_relay[s.tx] for s in unknown])
        rank, _ = rank_and_condition(a, tol=tol)
        if rank < len(unknown):
            raise CognitionInsufficientError(
                "residual relay decode is rank deficient")
    receivers = range(1, 5)
    vectors: Dict[StreamId, np.ndarray] = {}
    specs: Dict[StreamId, ConstraintSpec] = {}
    for stream in streams:
        spec = _full_duplex_spec(ch, stream, receivers)
        specs[stream] = spec
        vectors[stream] = _solve(spec, ch, tol=tol)
    bf = BeamformerSet(scheme=scheme, vectors=vectors, specs=specs,
                       known_streams=known)
    _check_gains(bf, ch, eff_gain_floor)
    return bf


_EPS = 1e-30


def verify_constraints(bf: BeamformerSet,
                       ch: ChannelRealization) -> ResidualReport:
    """Back-substitute every solved vector into its constraint rows.

    Null rows are reported relative to the row and vector norms; rows with
    a nonzero target relative to the target's magnitude.
    """
    report = ResidualReport(scheme=bf.scheme)
    for stream, spec in bf.specs.items():
        u = bf.vectors[stream]
        unorm = float(np.linalg.norm(u))
        nulls = []
        for p in spec.null_at:
            row = ch.relay_row(p)
            nulls.append(abs(complex(row @ u)) /
                         (float(np.linalg.norm(row)) * unorm + _EPS))
        neuts = []
        for q, target in spec.neutralize_at:
            neuts.append(abs(complex(ch.relay_row(q) @ u) - target) /
                         (abs(target) + _EPS))
        gains = []
        if spec.gain_at is not None:
            node, target = spec.gain_at
            gains.append(abs(complex(ch.relay_row(node) @ u) - target) /
                         (abs(target) + _EPS))
        report.null_residuals[stream] = nulls
        report.neutralize_residuals[stream] = neuts
        report.gain_residuals[stream] = gains
        include_direct = bf.scheme != HALF_DUPLEX
        report.effective_gains[stream] = abs(
            bf.effective_gain(ch, stream, include_direct=include_direct))
    report.relay_power_per_unit_symbol = bf.relay_tx_power_per_unit_symbol
    return report


def dump_text(bf: BeamformerSet, ch: ChannelRealization) -> str:
    """Human-diffable dump of vectors and residuals for the verify command."""
    report = verify_constraints(bf, ch)
    lines = [f"scheme: {bf.scheme}",
             f"relay_power_per_unit_symbol: {bf.relay_tx_power_per_unit_symbol:.12g}"]
    for stream in sorted(bf.vectors):
        u = bf.vectors[stream]
        entries = " ".join(f"{z.real:+.12g}{z.imag:+.12g}j" for z in u)
        lines.append(f"{stream}: [{entries}]")
        lines.append(
            f"{stream} residuals: null={report.null_residuals[stream]} "
            f"neutralize={report.neutralize_residuals[stream]} "
            f"gain={report.gain_residuals[stream]} "
            f"effective_gain={report.effective_gains[stream]:.12g}")
    return "\n".join(lines) + "\n"
