"""Scenario data model and random channel generation.

Nodes are numbered 1..2K; pair i is the node couple (2i-1, 2i) and the two
nodes of a pair exchange one symbol each per active slot.  Odd nodes only
have direct links to even nodes and vice versa, so the forward direction is
a K-user interference channel and the backward direction another one.

Channel magnitudes are drawn uniformly on [gain_min, gain_max] with uniform
phase; any continuous bounded law works for the constructions here and
uniform is the simplest.  Generation is a pure function of
(config, seed, slot) so Monte Carlo trials reproduce in any order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import yaml

from .errors import MissingRelayError, RankDeficientError, ScenarioError

RELAY_MODES = (
    "none",
    "instantaneous",
    "causal_reference_only",
    "cognitive_full",
    "cognitive_partial",
)
DUPLEX_MODES = ("full", "half")

# Scenario file keys (flat mapping, powers in dB).
SCENARIO_KEYS = (
    "k", "m", "relay_mode", "duplex", "gain_min", "gain_max",
    "p_db", "p_r_db", "noise_var", "master_seed",
)

_SEED_MASK = (1 << 64) - 1
_MAX_REDRAWS = 1000


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class NetworkConfig:
    """Static scenario description.

    Powers are linear per-symbol budgets; ``p_r`` defaults to ``p`` when
    left as None.  ``cond_ceiling`` guards the user-to-relay matrix during
    generation and ``eff_gain_floor`` (default 1e-6 * gain_max) is the
    minimum accepted desired-gain magnitude after beamforming.
    """

    k: int
    m: int = 0
    relay_mode: str = "none"
    duplex: str = "full"
    gain_min: float = 0.1
    gain_max: float = 10.0
    p: float = 1.0
    p_r: Optional[float] = None
    noise_var: float = 1.0
    cond_ceiling: float = 1e6
    eff_gain_floor: Optional[float] = None

    def __post_init__(self):
        if self.k < 1:
            raise ScenarioError("k must be a positive integer")
        if self.m < 0:
            raise ScenarioError("m must be nonnegative")
        if self.relay_mode not in RELAY_MODES:
            raise ScenarioError(f"unknown relay_mode {self.relay_mode!r}")
        if self.duplex not in DUPLEX_MODES:
            raise ScenarioError(f"unknown duplex mode {self.duplex!r}")
        if not (0 < self.gain_min <= self.gain_max < np.inf):
            raise ScenarioError("need 0 < gain_min <= gain_max < inf")
        if self.relay_mode != "none" and self.m < 1:
            raise ScenarioError("a relay mode requires m >= 1")
        if self.relay_mode == "cognitive_partial" and (self.k != 2 or self.m != 2):
            raise ScenarioError("cognitive_partial is defined for k=2, m=2")
        if self.noise_var < 0:
            raise ScenarioError("noise_var must be >= 0")
        if self.p <= 0:
            raise ScenarioError("p must be > 0")

    @property
    def relay_power(self) -> float:
        return self.p if self.p_r is None else self.p_r

    @property
    def gain_floor(self) -> float:
        if self.eff_gain_floor is not None:
            return self.eff_gain_floor
        return 1e-6 * self.gain_max

    @property
    def n_nodes(self) -> int:
        return 2 * self.k

    def with_power(self, p: float) -> "NetworkConfig":
        return replace(self, p=p, p_r=p if self.p_r is None else self.p_r)


@dataclass(frozen=True, order=True)
class StreamId:
    """Directed message stream between the two nodes of one pair."""

    tx: int
    rx: int

    def __post_init__(self):
        if self.tx < 1 or self.rx < 1 or partner(self.tx) != self.rx:
            raise ScenarioError(
                f"stream ({self.tx}->{self.rx}) is not an in-pair exchange")

    @property
    def pair(self) -> int:
        return (self.tx + 1) // 2

    def __str__(self):
        return f"s{self.tx}{self.rx}" if self.rx < 10 else f"s{self.tx},{self.rx}"


def partner(node: int) -> int:
    """The other node of ``node``'s pair."""
    return node + 1 if node % 2 == 1 else node - 1


def all_streams(k: int) -> List[StreamId]:
    """Both directed streams of every pair, in node order."""
    out = []
    for i in range(1, 2 * k, 2):
        out.append(StreamId(i, i + 1))
        out.append(StreamId(i + 1, i))
    return out


def same_side(a: int, b: int) -> bool:
    """Nodes on the same side transmit in the same direction (same parity)."""
    return (a - b) % 2 == 0


@dataclass(frozen=True)
class ChannelRealization:
    """One slot's complex gains.

    ``direct`` maps opposite-parity (tx, rx) pairs to scalar gains;
    ``to_relay``/``from_relay`` map node index to M-vectors (``from_relay``
    entries are used conjugated in the receive equations).  ``rejected_draws``
    counts full redraws forced by the condition-number guard.
    """

    k: int
    m: int
    direct: Dict[Tuple[int, int], complex]
    to_relay: Dict[int, np.ndarray]
    from_relay: Dict[int, np.ndarray]
    rejected_draws: int = 0

    def relay_row(self, node: int) -> np.ndarray:
        """Row vector h_Rnode^* multiplying the relay transmit vector."""
        return np.conj(self.from_relay[node])


@dataclass(frozen=True)
class SymbolFrame:
    """Unit-power information symbols for one slot's active streams."""

    symbols: Dict[StreamId, complex]
    slot_index: int = 0

    @property
    def active(self) -> frozenset:
        return frozenset(self.symbols)


def seeded_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator derived deterministically from a seed and integer keys."""
    ss = np.random.SeedSequence(
        entropy=int(seed) & _SEED_MASK,
        spawn_key=tuple(int(x) & 0xFFFFFFFF for x in key),
    )
    return np.random.default_rng(ss)


def derive_seed(master_seed: int, *key: int) -> int:
    """64-bit sub-seed for one trial/attempt, stable across run orderings."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed) & _SEED_MASK,
        spawn_key=tuple(int(x) & 0xFFFFFFFF for x in key),
    )
    words = ss.generate_state(2, dtype=np.uint32)
    return (int(words[0]) << 32) | int(words[1])


def _draw_gains(rng: np.random.Generator, cfg: NetworkConfig, size=None):
    mag = rng.uniform(cfg.gain_min, cfg.gain_max, size=size)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=size)
    return mag * np.exp(1j * phase)


def generate_channel(cfg: NetworkConfig, seed: int, slot: int) -> ChannelRealization:
    """Draw one slot's channel realization.

    Deterministic in (seed, slot); independent across distinct slots.  When
    a relay is present, realizations whose user-to-relay matrix condition
    number exceeds ``cfg.cond_ceiling`` are redrawn and counted.
    """
    rng = seeded_rng(seed, slot)
    n = cfg.n_nodes
    odds = range(1, n, 2)
    evens = range(2, n + 1, 2)
    rejected = 0
    while True:
        direct: Dict[Tuple[int, int], complex] = {}
        for i in odds:
            for j in evens:
                direct[(i, j)] = complex(_draw_gains(rng, cfg))
                direct[(j, i)] = complex(_draw_gains(rng, cfg))
        to_relay: Dict[int, np.ndarray] = {}
        from_relay: Dict[int, np.ndarray] = {}
        if cfg.m > 0:
            for node in range(1, n + 1):
                to_relay[node] = _draw_gains(rng, cfg, cfg.m)
            for node in range(1, n + 1):
                from_relay[node] = _draw_gains(rng, cfg, cfg.m)
            a = np.column_stack([to_relay[node] for node in range(1, n + 1)])
            s = np.linalg.svd(a, compute_uv=False)
            if s[-1] <= 0 or s[0] / s[-1] > cfg.cond_ceiling:
                rejected += 1
                if rejected > _MAX_REDRAWS:
                    raise RankDeficientError(
                        "could not draw a well-conditioned relay matrix")
                continue
        return ChannelRealization(
            k=cfg.k, m=cfg.m, direct=direct,
            to_relay=to_relay, from_relay=from_relay,
            rejected_draws=rejected,
        )


def relay_receive_matrix(ch: ChannelRealization,
                         active: Iterable[StreamId]) -> np.ndarray:
    """M x |active| matrix whose columns are the transmitters' uplink vectors."""
    if ch.m == 0:
        raise MissingRelayError("scenario has no relay (m = 0)")
    active = list(active)
    if not active:
        return np.zeros((ch.m, 0), dtype=complex)
    return np.column_stack([ch.to_relay[s.tx] for s in active])


def load_scenario(path: str,
                  overrides: Optional[Dict[str, str]] = None
                  ) -> Tuple[NetworkConfig, int]:
    """Parse a flat-key scenario file, returning (config, master_seed).

    Powers are given in dB (``p_db``, ``p_r_db``) and converted to linear.
    ``overrides`` (from repeated --set key=value) must reference known keys.
    """
    with open(path, "r") as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ScenarioError(f"scenario file {path!r} is not a flat mapping")
    data = {str(k): v for k, v in raw.items()}
    for key, val in (overrides or {}).items():
        if key not in SCENARIO_KEYS:
            raise ScenarioError(f"unknown override key {key!r}")
        data[key] = yaml.safe_load(str(val))
    unknown = set(data) - set(SCENARIO_KEYS)
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        cfg = NetworkConfig(
            k=int(data["k"]),
            m=int(data.get("m", 0)),
            relay_mode=str(data.get("relay_mode", "none")),
            duplex=str(data.get("duplex", "full")),
            gain_min=float(data.get("gain_min", 0.1)),
            gain_max=float(data.get("gain_max", 10.0)),
            p=db_to_linear(float(data.get("p_db", 30.0))),
            p_r=(db_to_linear(float(data["p_r_db"]))
                 if "p_r_db" in data else None),
            noise_var=float(data.get("noise_var", 1.0)),
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario is missing required key {exc}") from exc
    master_seed = int(data.get("master_seed", 0))
    return cfg, master_seed
