"""End-to-end simulation of transmission slots.

A slot is simulated twice over, in effect: once with actual complex samples
(including noise draws when requested) to produce received signals and
decode checks, and once symbolically, by assembling the exact coefficient
each symbol carries into each receiver.  The coefficient view is what the
SINR and residual-interference diagnostics use; the sample view is what the
self-interference subtraction and decode checks exercise.

Finite-SNR rate model: the relay must decode a stream before it can forward
it, so a stream's rate is log2(1 + min(relay ZF SNR, receiver SINR)).  Both
component SNRs scale linearly in transmit power, so slope (DoF) estimates
are unaffected by taking the min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .beamforming import (
    BeamformerSet,
    COGNITIVE_FULL,
    COGNITIVE_PARTIAL,
    HALF_DUPLEX,
)
from .errors import SchemeMismatchError, ScenarioError
from .linalg import pinv_apply, zf_error_variances
from .network import (
    ChannelRealization,
    NetworkConfig,
    StreamId,
    SymbolFrame,
    all_streams,
    partner,
    relay_receive_matrix,
)


@dataclass
class SlotResult:
    """Per-slot receiver samples, SINRs, rates and residual diagnostics."""

    received: Dict[int, complex] = field(default_factory=dict)
    relay_received: Optional[np.ndarray] = None
    relay_decoded: Dict[StreamId, complex] = field(default_factory=dict)
    per_stream_sinr_rx: Dict[StreamId, float] = field(default_factory=dict)
    per_stream_snr_relay: Dict[StreamId, float] = field(default_factory=dict)
    per_stream_rate: Dict[StreamId, float] = field(default_factory=dict)
    residual_interference_power: Dict[int, float] = field(default_factory=dict)
    decode_ok: Dict[StreamId, bool] = field(default_factory=dict)

    @property
    def sum_rate(self) -> float:
        return float(sum(self.per_stream_rate.values()))


def random_frame(streams: Iterable[StreamId], slot: int,
                 rng: np.random.Generator) -> SymbolFrame:
    """Unit-modulus symbols with uniform phase for the given streams."""
    symbols = {}
    for s in sorted(streams):
        symbols[s] = complex(np.exp(1j * rng.uniform(0.0, 2.0 * np.pi)))
    return SymbolFrame(symbols=symbols, slot_index=slot)


def _rate(snr_relay: float, sinr_rx: float) -> float:
    eff = min(snr_relay, sinr_rx)
    if math.isinf(eff):
        return math.inf
    return math.log2(1.0 + max(eff, 0.0))


def _noise(rng: Optional[np.random.Generator], var: float, size=None):
    if rng is None or var == 0.0:
        return 0.0 if size is None else np.zeros(size, dtype=complex)
    scale = math.sqrt(var / 2.0)
    if size is None:
        return complex(rng.normal(0.0, scale) + 1j * rng.normal(0.0, scale))
    return rng.normal(0.0, scale, size) + 1j * rng.normal(0.0, scale, size)


def _relay_decode(cfg: NetworkConfig, ch: ChannelRealization,
                  bf: BeamformerSet, frame: SymbolFrame, y_r: np.ndarray,
                  amp: float):
    """Symbol estimates at the relay plus per-stream decode SNRs."""
    active = sorted(frame.symbols)
    decoded: Dict[StreamId, complex] = {}
    snr: Dict[StreamId, float] = {}
    if bf.scheme == COGNITIVE_FULL:
        for s in active:
            decoded[s] = frame.symbols[s]
            snr[s] = math.inf
        return decoded, snr
    if bf.scheme == COGNITIVE_PARTIAL:
        residual = y_r.copy()
        unknown = []
        for s in active:
            if s in bf.known_streams:
                decoded[s] = frame.symbols[s]
                snr[s] = math.inf
                residual = residual - ch.to_relay[s.tx] * amp * frame.symbols[s]
            else:
                unknown.append(s)
        a = relay_receive_matrix(ch, unknown)
        est = pinv_apply(a, residual) / amp
        variances = zf_error_variances(a, cfg.noise_var)
        for s, e, v in zip(unknown, est, variances):
            decoded[s] = complex(e)
            snr[s] = cfg.p / v if v > 0 else math.inf
        return decoded, snr
    a = relay_receive_matrix(ch, active)
    est = pinv_apply(a, y_r) / amp
    variances = zf_error_variances(a, cfg.noise_var)
    for s, e, v in zip(active, est, variances):
        decoded[s] = complex(e)
        snr[s] = cfg.p / v if v > 0 else math.inf
    return decoded, snr


def _receive_coefficients(ch: ChannelRealization, bf: BeamformerSet,
                          active: List[StreamId], node: int,
                          direct_links: bool) -> Dict[StreamId, complex]:
    """Exact coefficient each active symbol carries into ``node``'s output."""
    coefs: Dict[StreamId, complex] = {}
    row = ch.relay_row(node) if ch.m > 0 else None
    for s in active:
        c = 0.0 + 0.0j
        if direct_links and (s.tx, node) in ch.direct:
            c += ch.direct[(s.tx, node)]
        if row is not None and bf is not None and s in bf.vectors:
            c += complex(row @ bf.vectors[s])
        coefs[s] = c
    return coefs


def simulate_slot(cfg: NetworkConfig, ch: ChannelRealization,
                  bf: Optional[BeamformerSet], frame: SymbolFrame, noisy: bool,
                  rng: Optional[np.random.Generator] = None) -> SlotResult:
    """Simulate one full-duplex slot end to end.

    Users transmit, the relay receives, decodes (per its mode) and forwards
    within the same slot, and each listening node subtracts its
    self-interference before measuring its desired stream.  ``bf`` may be
    None in a relay-free scenario (direct links only).
    """
    if bf is not None and frame.active != frozenset(bf.vectors):
        raise SchemeMismatchError(
            "frame streams do not match the beamformer set's scheme")
    if bf is None and ch.m > 0:
        raise SchemeMismatchError("relay channel present but no beamformers")
    if noisy and cfg.noise_var > 0 and rng is None:
        raise ValueError("noisy simulation needs an rng")
    active = sorted(frame.symbols)
    amp = math.sqrt(cfg.p)
    noise_rng = rng if noisy else None

    if bf is not None:
        y_r = np.zeros(ch.m, dtype=complex)
        for s in active:
            y_r += ch.to_relay[s.tx] * amp * frame.symbols[s]
        y_r = y_r + _noise(noise_rng, cfg.noise_var, ch.m)
        decoded, snr_relay = _relay_decode(cfg, ch, bf, frame, y_r, amp)
        x_r = np.zeros(ch.m, dtype=complex)
        for s in active:
            x_r += bf.vectors[s] * amp * decoded[s]
    else:
        y_r = None
        decoded = {}
        snr_relay = {s: math.inf for s in active}
        x_r = None

    result = SlotResult(relay_received=y_r, relay_decoded=decoded,
                        per_stream_snr_relay=snr_relay)
    by_tx = {s.tx: s for s in active}
    for node in range(1, 2 * cfg.k + 1):
        y = complex(ch.relay_row(node) @ x_r) if x_r is not None else 0.0 + 0.0j
        for s in active:
            if (s.tx, node) in ch.direct:
                y += ch.direct[(s.tx, node)] * amp * frame.symbols[s]
        y += _noise(noise_rng, cfg.noise_var)
        result.received[node] = y

        # SI: the node's own forwarded symbol, subtracted with the true
        # symbol and global CSI (direct self paths are absent by model).
        own = by_tx.get(node)
        post_si = y
        if own is not None and bf is not None:
            post_si -= complex(ch.relay_row(node) @ bf.vectors[own]) * amp * \
                frame.symbols[own]

        desired = by_tx.get(partner(node))
        coefs = _receive_coefficients(ch, bf, active, node, direct_links=True)
        interference = sum(
            abs(coefs[s]) ** 2 * cfg.p
            for s in active if s != desired and s.tx != node)
        result.residual_interference_power[node] = float(interference)
        if desired is None:
            continue
        g = coefs[desired]
        denom = cfg.noise_var + interference
        sinr = abs(g) ** 2 * cfg.p / denom if denom > 0 else math.inf
        result.per_stream_sinr_rx[desired] = float(sinr)
        result.per_stream_rate[desired] = _rate(snr_relay[desired], sinr)
        if abs(g) > 0:
            est = post_si / (g * amp)
            result.decode_ok[desired] = bool(
                abs(est - frame.symbols[desired]) < 0.5)
        else:
            result.decode_ok[desired] = False
    return result


def simulate_half_duplex_round(cfg: NetworkConfig,
                               ch_slot1: ChannelRealization,
                               ch_slot2: ChannelRealization,
                               bf: BeamformerSet, frame: SymbolFrame,
                               noisy: bool,
                               rng: Optional[np.random.Generator] = None
                               ) -> SlotResult:
    """Two-slot half-duplex round: uplink slot then relay broadcast slot.

    Rates are per channel use, i.e. divided by the two slots the round
    occupies.  No direct-link terms reach the listeners in slot 2.
    """
    if cfg.duplex != "half":
        raise ScenarioError("config is not half duplex")
    if bf.scheme != HALF_DUPLEX:
        raise SchemeMismatchError("beamformer set is not a half-duplex build")
    if frame.active != frozenset(bf.vectors):
        raise SchemeMismatchError(
            "frame streams do not match the beamformer set's scheme")
    if noisy and cfg.noise_var > 0 and rng is None:
        raise ValueError("noisy simulation needs an rng")
    active = sorted(frame.symbols)
    amp = math.sqrt(cfg.p)
    noise_rng = rng if noisy else None

    # Slot 1: everyone transmits, only the relay listens.
    y_r = np.zeros(ch_slot1.m, dtype=complex)
    for s in active:
        y_r += ch_slot1.to_relay[s.tx] * amp * frame.symbols[s]
    y_r = y_r + _noise(noise_rng, cfg.noise_var, ch_slot1.m)
    a = relay_receive_matrix(ch_slot1, active)
    est = pinv_apply(a, y_r) / amp
    variances = zf_error_variances(a, cfg.noise_var)
    decoded = {s: complex(e) for s, e in zip(active, est)}
    snr_relay = {s: (cfg.p / v if v > 0 else math.inf)
                 for s, v in zip(active, variances)}

    # Slot 2: relay broadcasts over the slot-2 channel, users listen.
    x_r = np.zeros(ch_slot2.m, dtype=complex)
    for s in active:
        x_r += bf.vectors[s] * amp * decoded[s]

    result = SlotResult(relay_received=y_r, relay_decoded=decoded,
                        per_stream_snr_relay=snr_relay)
    by_tx = {s.tx: s for s in active}
    for node in range(1, 2 * cfg.k + 1):
        y = complex(ch_slot2.relay_row(node) @ x_r)
        y += _noise(noise_rng, cfg.noise_var)
        result.received[node] = y
        own = by_tx.get(node)
        post_si = y
        if own is not None:
            post_si -= complex(ch_slot2.relay_row(node) @ bf.vectors[own]) * \
                amp * frame.symbols[own]
        desired = by_tx.get(partner(node))
        coefs = _receive_coefficients(ch_slot2, bf, active, node,
                                      direct_links=False)
        interference = sum(
            abs(coefs[s]) ** 2 * cfg.p
            for s in active if s != desired and s.tx != node)
        result.residual_interference_power[node] = float(interference)
        if desired is None:
            continue
        g = coefs[desired]
        denom = cfg.noise_var + interference
        sinr = abs(g) ** 2 * cfg.p / denom if denom > 0 else math.inf
        result.per_stream_sinr_rx[desired] = float(sinr)
        rate = _rate(snr_relay[desired], sinr)
        result.per_stream_rate[desired] = rate / 2.0 if math.isfinite(rate) \
            else rate
        if abs(g) > 0:
            est_sym = post_si / (g * amp)
            result.decode_ok[desired] = bool(
                abs(est_sym - frame.symbols[desired]) < 0.5)
        else:
            result.decode_ok[desired] = False
    return result


def tdma_baseline_round(cfg: NetworkConfig,
                        ch_list: List[ChannelRealization],
                        frames: List[SymbolFrame], noisy: bool,
                        rng: Optional[np.random.Generator] = None
                        ) -> SlotResult:
    """Relay-free stand-in baseline: pairs time-share within each direction.

    Slot t activates only pair t (both directions at once, full duplex), so
    each slot carries two interference-free point-to-point links and the
    round achieves slope 2 regardless of K.  Rates are averaged over the K
    slots of the round.
    """
    if cfg.relay_mode not in ("none", "causal_reference_only"):
        raise ScenarioError("baseline round expects a relay-free scenario")
    if len(ch_list) != cfg.k or len(frames) != cfg.k:
        raise ScenarioError("baseline round needs one channel/frame per pair")
    if noisy and cfg.noise_var > 0 and rng is None:
        raise ValueError("noisy simulation needs an rng")
    amp = math.sqrt(cfg.p)
    noise_rng = rng if noisy else None
    result = SlotResult()
    for slot, (ch, frame) in enumerate(zip(ch_list, frames)):
        pair = slot + 1
        expected = {StreamId(2 * pair - 1, 2 * pair),
                    StreamId(2 * pair, 2 * pair - 1)}
        if frame.active != frozenset(expected):
            raise SchemeMismatchError(
                f"baseline slot {slot} must carry exactly pair {pair}")
        for s in sorted(frame.symbols):
            h = ch.direct[(s.tx, s.rx)]
            y = h * amp * frame.symbols[s] + _noise(noise_rng, cfg.noise_var)
            result.received[s.rx] = y
            sinr = abs(h) ** 2 * cfg.p / cfg.noise_var \
                if cfg.noise_var > 0 else math.inf
            result.per_stream_sinr_rx[s] = float(sinr)
            result.per_stream_snr_relay[s] = math.inf
            rate = math.log2(1.0 + sinr) if math.isfinite(sinr) else math.inf
            result.per_stream_rate[s] = rate / cfg.k if math.isfinite(rate) \
                else rate
            result.residual_interference_power[s.rx] = 0.0
            est = y / (h * amp)
            result.decode_ok[s] = bool(abs(est - frame.symbols[s]) < 0.5)
    return result
