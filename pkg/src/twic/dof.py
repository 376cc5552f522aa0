"""Power sweeps and degrees-of-freedom slope estimation.

The sweep averages sum rate over independent channel draws at each grid
power, then fits ordinary least squares of mean sum rate against log2(P),
so the fitted slope reads directly as the empirical sum DoF in bits per
symbol per octave of power.  A secondary two-point slope over the top of
the grid is reported for curvature diagnosis.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import beamforming as bf_mod
from .beamforming import (
    COGNITIVE_FULL,
    COGNITIVE_PARTIAL,
    FULL_2K,
    HALF_DUPLEX,
    THREE_ANTENNA,
)
from .errors import (
    EffectiveGainVanishedError,
    RankDeficientError,
    ResampleBudgetError,
    ScenarioError,
)
from .network import (
    NetworkConfig,
    StreamId,
    all_streams,
    derive_seed,
    generate_channel,
    seeded_rng,
)
from .transceiver import (
    random_frame,
    simulate_half_duplex_round,
    simulate_slot,
    tdma_baseline_round,
)

BASELINE = "baseline"
SWEEP_SCHEMES = bf_mod.SCHEMES + (BASELINE,)

DEFAULT_GRID_DB = tuple(float(x) for x in range(30, 91, 10))
_MAX_ATTEMPTS = 64


@dataclass(frozen=True)
class SweepSpec:
    """Grid, trial budget and scheme for one slope estimation run."""

    cfg: NetworkConfig
    scheme: str
    p_db_grid: Tuple[float, ...] = DEFAULT_GRID_DB
    trials_per_point: int = 200

    def __post_init__(self):
        if self.scheme not in SWEEP_SCHEMES:
            raise ScenarioError(f"unknown scheme {self.scheme!r}")
        grid = tuple(self.p_db_grid)
        if len(grid) < 3 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ScenarioError("p_db_grid must be strictly increasing, >= 3 points")
        if self.trials_per_point < 1:
            raise ScenarioError("trials_per_point must be positive")


@dataclass
class SweepPoint:
    p_db: float
    mean_sum_rate: float
    stderr: float
    trials: int
    resamples: int


@dataclass
class DofEstimate:
    """Fitted slope/intercept of mean sum rate versus log2(P)."""

    slope: float
    intercept: float
    r_squared: float
    per_point_rates: List[SweepPoint] = field(default_factory=list)
    two_point_slope: float = math.nan
    resample_rate: float = 0.0


@dataclass
class DofReference:
    """Analytic DoF value for a configuration, when the theory covers it."""

    value: Optional[float]
    note: str = ""


@dataclass
class CompareReport:
    passed: bool
    slope: float
    reference: float
    rel_error: float
    r_squared: float


def scheme_for_config(cfg: NetworkConfig) -> str:
    """The transmission scheme a scenario selects, or a config error."""
    if cfg.relay_mode in ("none", "causal_reference_only"):
        return BASELINE
    if cfg.relay_mode == "cognitive_full":
        if cfg.k != 2 or cfg.m != 2:
            raise ScenarioError("cognitive schemes need k=2, m=2")
        return COGNITIVE_FULL
    if cfg.relay_mode == "cognitive_partial":
        return COGNITIVE_PARTIAL
    # instantaneous relay
    if cfg.duplex == "half":
        if cfg.m < 2 * cfg.k:
            raise ScenarioError(
                f"half-duplex relaying needs m >= 2k = {2 * cfg.k}")
        return HALF_DUPLEX
    if cfg.m >= 2 * cfg.k:
        return FULL_2K
    if cfg.k == 2 and cfg.m == 3:
        return THREE_ANTENNA
    raise ScenarioError(
        f"no scheme for instantaneous relay with k={cfg.k}, m={cfg.m}")


def scheme_target(scheme: str, cfg: NetworkConfig) -> float:
    """Sum DoF the implemented scheme is designed to achieve."""
    return {
        FULL_2K: 2.0 * cfg.k,
        THREE_ANTENNA: 3.0,
        HALF_DUPLEX: float(cfg.k),
        COGNITIVE_FULL: 4.0,
        COGNITIVE_PARTIAL: 4.0,
        BASELINE: 2.0,
    }[scheme]


def analytic_reference(cfg: NetworkConfig) -> DofReference:
    """The channel's analytic sum DoF for this configuration."""
    k, m = cfg.k, cfg.m
    if cfg.relay_mode == "none":
        return DofReference(float(k), "optimal; interference-alignment "
                            "achievability not implemented (baseline gives 2)")
    if cfg.relay_mode == "causal_reference_only":
        return DofReference(float(k), "causal relay cannot beat the relay-free "
                            "value; baseline scheme used")
    if cfg.relay_mode in ("cognitive_full", "cognitive_partial"):
        if k == 2 and m == 2:
            return DofReference(4.0, "maximal value with a 2-antenna cognitive relay")
        return DofReference(None, "unknown")
    # instantaneous
    if cfg.duplex == "half":
        if m >= 2 * k:
            return DofReference(float(k), "half-duplex two-slot scheme")
        return DofReference(None, "unknown")
    if m >= 2 * k:
        return DofReference(2.0 * k, "interference-free maximum")
    if k == 2 and m == 3:
        return DofReference(3.0, "achievable, converse open")
    return DofReference(None, "unknown")


def compare(est: DofEstimate, ref: float,
            rel_tol: float = 0.05) -> CompareReport:
    """Pass iff the slope is within rel_tol of ref and the fit is linear."""
    rel_error = abs(est.slope - ref) / abs(ref)
    passed = rel_error <= rel_tol and est.r_squared >= 0.99
    return CompareReport(passed=passed, slope=est.slope, reference=ref,
                         rel_error=rel_error, r_squared=est.r_squared)


def _trial_sum_rate(cfg: NetworkConfig, scheme: str, master_seed: int,
                    point: int, trial: int) -> Tuple[float, int]:
    """Sum rate (bits/symbol/slot) of one Monte Carlo trial.

    Degenerate channel draws (rank-deficient stacks or vanished effective
    gains, both measure-zero events) are resampled with fresh sub-seeds and
    counted.
    """
    sym_rng = seeded_rng(derive_seed(master_seed, point, trial, 1))
    noise_rng = seeded_rng(derive_seed(master_seed, point, trial, 2))
    resamples = 0
    for attempt in range(_MAX_ATTEMPTS):
        seed = derive_seed(master_seed, point, trial, 3 + attempt)
        try:
            if scheme == FULL_2K:
                ch = generate_channel(cfg, seed, 0)
                bf = bf_mod.build_full_2k(ch, cfg.k,
                                          eff_gain_floor=cfg.gain_floor)
                frame = random_frame(bf.vectors, 0, sym_rng)
                res = simulate_slot(cfg, ch, bf, frame, True, noise_rng)
                return res.sum_rate, resamples
            if scheme == THREE_ANTENNA:
                total = 0.0
                for slot in range(4):
                    ch = generate_channel(cfg, seed, slot)
                    bf = bf_mod.build_three_antenna(
                        ch, slot, eff_gain_floor=cfg.gain_floor)
                    frame = random_frame(bf.vectors, slot, sym_rng)
                    res = simulate_slot(cfg, ch, bf, frame, True, noise_rng)
                    total += res.sum_rate
                return total / 4.0, resamples
            if scheme == HALF_DUPLEX:
                ch1 = generate_channel(cfg, seed, 0)
                ch2 = generate_channel(cfg, seed, 1)
                bf = bf_mod.build_half_duplex(ch2, cfg.k)
                frame = random_frame(bf.vectors, 0, sym_rng)
                res = simulate_half_duplex_round(cfg, ch1, ch2, bf, frame,
                                                 True, noise_rng)
                return res.sum_rate, resamples
            if scheme in (COGNITIVE_FULL, COGNITIVE_PARTIAL):
                ch = generate_channel(cfg, seed, 0)
                if scheme == COGNITIVE_FULL:
                    known = set(all_streams(2))
                else:
                    known = {StreamId(1, 2), StreamId(2, 1)}
                bf = bf_mod.build_cognitive(ch, known,
                                            eff_gain_floor=cfg.gain_floor)
                frame = random_frame(bf.vectors, 0, sym_rng)
                res = simulate_slot(cfg, ch, bf, frame, True, noise_rng)
                return res.sum_rate, resamples
            if scheme == BASELINE:
                chs = [generate_channel(cfg, seed, slot)
                       for slot in range(cfg.k)]
                frames = []
                for slot in range(cfg.k):
                    pair = slot + 1
                    streams = (StreamId(2 * pair - 1, 2 * pair),
                               StreamId(2 * pair, 2 * pair - 1))
                    frames.append(random_frame(streams, slot, sym_rng))
                res = tdma_baseline_round(cfg, chs, frames, True, noise_rng)
                return res.sum_rate, resamples
            raise ScenarioError(f"unknown scheme {scheme!r}")
        except (RankDeficientError, EffectiveGainVanishedError):
            resamples += 1
    raise ResampleBudgetError(
        f"trial exhausted {_MAX_ATTEMPTS} channel resamples")


def _point_stats(args) -> SweepPoint:
    cfg, scheme, master_seed, point, p_db, trials = args
    cfg_p = cfg.with_power(10.0 ** (p_db / 10.0))
    rates = np.empty(trials)
    resamples = 0
    for t in range(trials):
        rates[t], extra = _trial_sum_rate(cfg_p, scheme, master_seed, point, t)
        resamples += extra
    mean = float(np.mean(rates))
    stderr = float(np.std(rates, ddof=1) / math.sqrt(trials)) if trials > 1 \
        else 0.0
    return SweepPoint(p_db=p_db, mean_sum_rate=mean, stderr=stderr,
                      trials=trials, resamples=resamples)


def run_sweep(spec: SweepSpec, master_seed: int, jobs: int = 1) -> DofEstimate:
    """Estimate the DoF slope of a scheme over the power grid.

    Deterministic given ``master_seed`` regardless of ``jobs``: every trial
    derives its own sub-seeds and points are reduced in grid order.  Aborts
    when more than half the attempted channel draws had to be resampled.
    """
    work = [(spec.cfg, spec.scheme, master_seed, i, p_db,
             spec.trials_per_point)
            for i, p_db in enumerate(spec.p_db_grid)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_point_stats, work))
    else:
        points = [_point_stats(w) for w in work]

    total_trials = sum(p.trials for p in points)
    total_resamples = sum(p.resamples for p in points)
    resample_rate = total_resamples / max(total_trials + total_resamples, 1)
    if resample_rate > 0.5:
        raise ResampleBudgetError(
            f"resample rate {resample_rate:.1%} exceeds 50%")

    x = np.log2([10.0 ** (p.p_db / 10.0) for p in points])
    y = np.array([p.mean_sum_rate for p in points])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    two_point = float((y[-1] - y[-2]) / (x[-1] - x[-2]))
    return DofEstimate(slope=float(slope), intercept=float(intercept),
                       r_squared=float(min(max(r_squared, 0.0), 1.0)),
                       per_point_rates=points, two_point_slope=two_point,
                       resample_rate=resample_rate)


def csv_rows(est: DofEstimate, spec: SweepSpec) -> List[str]:
    """Per-point CSV lines (deterministic formatting), header included."""
    lines = ["p_db,mean_sum_rate_bits,stderr,trials,scheme,k,m"]
    for p in est.per_point_rates:
        lines.append(
            f"{p.p_db:.6g},{p.mean_sum_rate:.12g},{p.stderr:.12g},"
            f"{p.trials},{spec.scheme},{spec.cfg.k},{spec.cfg.m}")
    return lines
