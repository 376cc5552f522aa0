"""End-to-end acceptance gate.

Each test prints a single pass/fail line so the suite output doubles as an
acceptance report.  Slope criteria use the standard sweep (30-90 dB grid,
200 trials per point) and require both a 5% slope match and r^2 >= 0.99.
"""

import math
import time

import numpy as np
import pytest

import twic.beamforming as bf_mod
from twic.cli import main
from twic.dof import SweepSpec, compare, run_sweep, scheme_for_config
from twic.linalg import least_norm_solve, null_space_basis, pinv_apply
from twic.network import (
    NetworkConfig,
    StreamId,
    SymbolFrame,
    generate_channel,
    seeded_rng,
)
from twic.transceiver import random_frame, simulate_slot

FULL_CASES = [(2, 4), (3, 6), (4, 8)]
MASTER_SEED = 2024


def report(name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}" +
          (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


def sweep(cfg, trials=200, seed=MASTER_SEED):
    spec = SweepSpec(cfg=cfg, scheme=scheme_for_config(cfg),
                     trials_per_point=trials)
    return run_sweep(spec, seed)


def slope_criterion(name, cfg, target, trials=200):
    start = time.monotonic()
    est = sweep(cfg, trials=trials)
    elapsed = time.monotonic() - start
    rep = compare(est, target)
    report(name, rep.passed,
           f"slope={est.slope:.4f} target={target:g} "
           f"rel_err={rep.rel_error:.3%} r2={est.r_squared:.5f} "
           f"t={elapsed:.1f}s")
    return est, elapsed


def test_criterion_1_constraint_satisfaction():
    start = time.monotonic()
    worst = 0.0
    rejections = 0
    draws = 0
    for k, m in FULL_CASES:
        cfg = NetworkConfig(k=k, m=m, relay_mode="instantaneous")
        for seed in range(100):
            ch = generate_channel(cfg, seed, 0)
            rejections += ch.rejected_draws
            draws += 1 + ch.rejected_draws
            rep = bf_mod.verify_constraints(bf_mod.build_full_2k(ch, k), ch)
            worst = max(worst, rep.max_residual)
    elapsed = time.monotonic() - start
    resample_rate = rejections / draws
    ok = worst < 1e-9 and resample_rate < 0.01 and elapsed < 10.0
    report("criterion 1: constraint residuals < 1e-9, resample rate < 1%",
           ok, f"max_residual={worst:.2e} resample_rate={resample_rate:.3%} "
           f"t={elapsed:.1f}s")


def test_criterion_2_noiseless_exactness():
    worst_residual = 0.0
    worst_decode = 0.0
    for k, m in FULL_CASES:
        cfg = NetworkConfig(k=k, m=m, relay_mode="instantaneous", p=100.0)
        for seed in range(100):
            ch = generate_channel(cfg, seed, 0)
            bf = bf_mod.build_full_2k(ch, k)
            frame = random_frame(bf.vectors, 0, seeded_rng(seed, 1))
            res = simulate_slot(cfg, ch, bf, frame, noisy=False)
            worst_residual = max(
                worst_residual,
                max(res.residual_interference_power.values()) / cfg.p)
            worst_decode = max(
                worst_decode,
                max(abs(res.relay_decoded[s] - frame.symbols[s])
                    for s in frame.symbols))
    ok = worst_residual < 1e-16 and worst_decode < 1e-10
    report("criterion 2: noiseless residual interference < 1e-16*P, "
           "relay decode error < 1e-10", ok,
           f"residual/P={worst_residual:.2e} decode_err={worst_decode:.2e}")


@pytest.mark.parametrize("k", [2, 3])
def test_criterion_3_full_scheme_slope(k):
    cfg = NetworkConfig(k=k, m=2 * k, relay_mode="instantaneous")
    _, elapsed = slope_criterion(
        f"criterion 3: full-relay slope within 5% of {2 * k} (K={k})",
        cfg, 2.0 * k)
    report(f"criterion 3 runtime (K={k}) under 2 min", elapsed < 120.0,
           f"t={elapsed:.1f}s")


def test_criterion_4_three_antenna_slope():
    cfg = NetworkConfig(k=2, m=3, relay_mode="instantaneous")
    slope_criterion("criterion 4: three-antenna rotation slope within "
                    "5% of 3", cfg, 3.0)


@pytest.mark.parametrize("k", [2, 3])
def test_criterion_5_half_duplex_slope(k):
    cfg = NetworkConfig(k=k, m=2 * k, relay_mode="instantaneous",
                        duplex="half")
    slope_criterion(f"criterion 5: half-duplex slope within 5% of {k} "
                    f"(K={k})", cfg, float(k))


@pytest.mark.parametrize("mode", ["cognitive_full", "cognitive_partial"])
def test_criterion_6_cognitive_slope(mode):
    cfg = NetworkConfig(k=2, m=2, relay_mode=mode)
    slope_criterion(f"criterion 6: {mode} slope within 5% of 4", cfg, 4.0)


def test_criterion_7_baseline_slope():
    cfg = NetworkConfig(k=3, m=0, relay_mode="none")
    est, _ = slope_criterion(
        "criterion 7: relay-free time-sharing slope within 5% of 2", cfg, 2.0)
    # Reported explicitly: the baseline sits below the analytic value K.
    report("criterion 7: baseline stays below the analytic value K=3",
           est.slope < 3.0, f"slope={est.slope:.4f} < 3")


def test_criterion_8_cut_set_ceiling():
    cases = [
        NetworkConfig(k=2, m=4, relay_mode="instantaneous"),
        NetworkConfig(k=3, m=6, relay_mode="instantaneous"),
        NetworkConfig(k=2, m=3, relay_mode="instantaneous"),
        NetworkConfig(k=2, m=4, relay_mode="instantaneous", duplex="half"),
        NetworkConfig(k=2, m=2, relay_mode="cognitive_full"),
        NetworkConfig(k=2, m=2, relay_mode="cognitive_partial"),
        NetworkConfig(k=2, m=0, relay_mode="none"),
    ]
    worst_margin = -math.inf
    for cfg in cases:
        est = sweep(cfg, trials=50)
        margin = est.slope / (2.0 * cfg.k) - 1.0
        worst_margin = max(worst_margin, margin)
    report("criterion 8: no slope exceeds 2K + 5%", worst_margin <= 0.05,
           f"worst slope excess over 2K: {worst_margin:+.3%}")


def test_criterion_9_property_suite(tmp_path):
    start = time.monotonic()
    rng = np.random.default_rng(0)

    def crandn(*shape):
        return rng.normal(size=shape) + 1j * rng.normal(size=shape)

    # Least-norm solver: residual and minimality over the feasible family.
    a, b = crandn(6, 8), crandn(6)
    x = least_norm_solve(a, b)
    ok_resid = np.linalg.norm(a @ x - b) / np.linalg.norm(b) < 1e-10
    basis = null_space_basis(a)
    ok_min = all(np.linalg.norm(x) <=
                 np.linalg.norm(x + basis @ crandn(basis.shape[1])) + 1e-12
                 for _ in range(50))

    # Pseudo-inverse exact recovery.
    sq = crandn(5, 5)
    v = crandn(5)
    ok_pinv = np.allclose(pinv_apply(sq, sq @ v), v, atol=1e-9)

    # SI subtraction leaves the received signal independent of own symbol.
    cfg = NetworkConfig(k=2, m=4, relay_mode="instantaneous", p=100.0)
    ch = generate_channel(cfg, 42, 0)
    bf = bf_mod.build_full_2k(ch, 2)
    frame = random_frame(bf.vectors, 0, seeded_rng(42, 1))
    s12 = StreamId(1, 2)
    amp = math.sqrt(cfg.p)

    def post_si(own):
        symbols = dict(frame.symbols)
        symbols[s12] = own
        res = simulate_slot(cfg, ch, bf, SymbolFrame(symbols, 0), noisy=False)
        return res.received[1] - complex(ch.relay_row(1) @ bf.vectors[s12]) \
            * amp * own
    p1, p2 = post_si(1.0 + 0j), post_si(-0.6 + 0.8j)
    ok_si = abs(p1 - p2) < 1e-12 * abs(p1)

    # Determinism: same seed produces byte-identical sweep CSV.
    scn = tmp_path / "scenario.yaml"
    scn.write_text("k: 2\nm: 4\nrelay_mode: instantaneous\nduplex: full\n"
                   "p_db: 40\nnoise_var: 1.0\nmaster_seed: 5\n")
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        main(["sweep", "--scenario", str(scn), "--out", str(out),
              "--trials", "5", "--p-min-db", "30", "--p-max-db", "60"])
        blobs.append((out / "sweep.csv").read_bytes())
    ok_det = blobs[0] == blobs[1]

    # Rate monotonicity in transmit power.
    rates = []
    for p_db in (20.0, 40.0, 60.0):
        cfg_p = cfg.with_power(10 ** (p_db / 10.0))
        res = simulate_slot(cfg_p, ch, bf, frame, noisy=True,
                            rng=seeded_rng(0))
        rates.append(res.sum_rate)
    ok_mono = rates[0] < rates[1] < rates[2]

    elapsed = time.monotonic() - start
    checks = {"least_norm": ok_resid and ok_min, "pinv": ok_pinv,
              "si_independence": ok_si, "csv_determinism": ok_det,
              "rate_monotonicity": ok_mono}
    ok = all(checks.values()) and elapsed < 30.0
    report("criterion 9: property suite (solver, pinv, SI, determinism, "
           "monotonicity) under 30 s", ok,
           f"{checks} t={elapsed:.1f}s")
