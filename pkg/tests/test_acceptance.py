"""End-to-end acceptance checks.

Each test carries a ``criterion`` marker; ``conftest.py`` prints one
PASS/FAIL line per criterion at the end of the run.
"""

import math
import subprocess
import sys

import numpy as np
import pytest

from coopharq import outage
from coopharq.channel import Cdi, draw_frames
from coopharq.metrics import simulate
from coopharq.outage import full_set, members
from coopharq.protocol import ProtocolConfig, run_first_phase, run_round
from coopharq.scenarios import gamma_grid, get_scenario, run_sweep

from instances import mi_column, random_group, random_instance
import oracle

pytestmark = pytest.mark.slow

ASYM_GRID = gamma_grid(-15, 20, 5)
SYM_GRID = gamma_grid(0, 15, 1)


def combined(*se):
    return math.sqrt(sum(x * x for x in se))


# 1 -------------------------------------------------------------------------

@pytest.mark.criterion(1, "IR-MU outage evaluators match brute-force enumeration")
def test_oracle_equivalence():
    rng = np.random.default_rng(20240901)
    mismatches = checked = 0
    for _ in range(1000):
        inst = random_instance(rng)
        m, rx = inst["m"], inst["rx"]
        mi = mi_column(inst["gains"], rx)
        undecoded = full_set(m) & ~inst["decoded"]
        args = (rx, inst["rates"], mi, inst["alpha"], inst["helpers"])
        for s in members(undecoded):
            got = outage.mu_individual(s, undecoded, *args)
            want = oracle.mu_individual(s, oracle.as_set(undecoded), *args)
            mismatches += got != want
            checked += 1
        for group in (undecoded, random_group(rng, undecoded)):
            if not group:
                continue
            got = outage.mu_common(group, undecoded, *args)
            want = oracle.mu_common(oracle.as_set(group), oracle.as_set(undecoded), *args)
            mismatches += got != want
            checked += 1
    print(f"\noracle equivalence: {checked} evaluations, {mismatches} mismatches")
    assert mismatches == 0


# 2 -------------------------------------------------------------------------

RAYLEIGH_CASES = [(r, g) for r in (0.5, 1.0, 2.0) for g in (0.0, 5.0, 10.0)]


def binomial_check(failures, expected):
    p = failures.mean()
    se = math.sqrt(max(expected * (1 - expected), 1e-300) / failures.size)
    return p, se, abs(p - expected) <= 3 * se


@pytest.mark.criterion(2, "single-link outage matches the Rayleigh closed form")
@pytest.mark.parametrize("rate, gamma_db", RAYLEIGH_CASES)
def test_rayleigh_closed_form(rate, gamma_db):
    gamma = 10 ** (gamma_db / 10)
    cdi = Cdi.uniform(1, 0, gamma)
    n = 100_000
    ir = ProtocolConfig("ir-mu", 0.5, 4)
    t_used, dest = simulate(cdi, [rate], ir, n, seed=77)
    # with nobody to help, a frame needs a retransmission exactly when the
    # direct link alone is in outage
    p, se, ok = binomial_check((t_used > 0).astype(float),
                               1 - math.exp(-(2 ** rate - 1) / gamma))
    print(f"\nR={rate} gamma={gamma_db} dB: no-help outage {p:.5f} +- {se:.5f}")
    assert ok
    # the source's own IR retransmissions add alpha * T copies of the same link
    expected = 1 - math.exp(-(2 ** (rate / (1 + ir.alpha * ir.max_rounds)) - 1) / gamma)
    assert binomial_check((dest == 0).astype(float), expected)[2]
    cc = ProtocolConfig("cc", 1.0, 2)
    _, dest = simulate(cdi, [rate], cc, n, seed=78)
    expected = 1 - math.exp(-(2 ** rate - 1) / ((1 + cc.max_rounds) * gamma))
    assert binomial_check((dest == 0).astype(float), expected)[2]


# 3 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def asym3_rows():
    rows = run_sweep(get_scenario("asym-3x3"), ["ir-mu", "ir-su", "cc"], ASYM_GRID,
                     n_frames=20_000, seed=1, mode="exhaustive")
    return {(r.gamma_db, r.protocol): r for r in rows}


@pytest.mark.criterion(3, "eta(IR-MU) >= eta(IR-SU) >= eta(CC) on asym-3x3")
def test_protocol_ordering(asym3_rows):
    bad = []
    for g in ASYM_GRID:
        mu, su, cc = (asym3_rows[(g, p)] for p in ("ir-mu", "ir-su", "cc"))
        print(f"\ngamma={g:+.0f} dB  eta MU {mu.eta:.4f}  SU {su.eta:.4f}  CC {cc.eta:.4f}", end="")
        if mu.eta < su.eta - 2 * combined(mu.eta_se, su.eta_se):
            bad.append((g, "MU<SU"))
        if su.eta < cc.eta - 2 * combined(su.eta_se, cc.eta_se):
            bad.append((g, "SU<CC"))
    print()
    assert not bad


# 4 -------------------------------------------------------------------------

def mean_gap(name):
    rows = run_sweep(get_scenario(name), ["ir-mu", "ir-su"], ASYM_GRID, n_frames=20_000,
                     seed=2, mode="ascent")
    by = {(r.gamma_db, r.protocol): r for r in rows}
    gaps = [by[(g, "ir-mu")].eta - by[(g, "ir-su")].eta for g in ASYM_GRID]
    se = combined(*(combined(by[(g, "ir-mu")].eta_se, by[(g, "ir-su")].eta_se)
                    for g in ASYM_GRID)) / len(ASYM_GRID)
    return float(np.mean(gaps)), se


@pytest.mark.criterion(4, "MU-SU gap grows from asym-3x3 to asym-5x3")
def test_gap_grows_with_sources():
    gap3, se3 = mean_gap("asym-3x3")
    gap5, se5 = mean_gap("asym-5x3")
    print(f"\nmean MU-SU gap: M=3 {gap3:.4f} +- {se3:.4f}, M=5 {gap5:.4f} +- {se5:.4f}")
    assert gap5 - gap3 > combined(se3, se5)


# 5 -------------------------------------------------------------------------

@pytest.mark.criterion(5, "eta grows with M on the symmetric presets")
@pytest.mark.parametrize("protocol", ["ir-mu", "ir-su", "cc"])
def test_symmetric_scaling(protocol):
    rows = {m: run_sweep(get_scenario(f"sym-{m}"), protocol, SYM_GRID, n_frames=20_000,
                         seed=3, mode="ascent") for m in (3, 4, 5)}
    bad = []
    for i, g in enumerate(SYM_GRID):
        r3, r4, r5 = rows[3][i], rows[4][i], rows[5][i]
        if r4.eta < r3.eta - 2 * combined(r3.eta_se, r4.eta_se):
            bad.append((g, "M4<M3", r3.eta, r4.eta))
        if r5.eta < r4.eta - 2 * combined(r4.eta_se, r5.eta_se):
            bad.append((g, "M5<M4", r4.eta, r5.eta))
    for m in (3, 4, 5):
        print(f"\n{protocol} M={m}: " + " ".join(f"{r.eta:.3f}" for r in rows[m]), end="")
    print()
    assert not bad, bad


# 6 -------------------------------------------------------------------------

@pytest.mark.criterion(6, "CC decoding sets stay inside IR-SU's on a pinned schedule")
def test_pinned_schedule_dominance():
    scen = get_scenario("asym-3x3")
    m, l = scen.n_sources, scen.n_relays
    t = 4
    cc = ProtocolConfig("cc", 1.0, t)
    su = ProtocolConfig("ir-su", 1.0, t)
    rng = np.random.default_rng(6)
    violations = rounds = 0
    grid = gamma_grid(-10, 12.5, 2.5)
    per_point = 10_000 // len(grid)
    for k, g in enumerate(grid):
        gains, uniforms = draw_frames(scen.cdi(g), 6, 0, per_point, t, stream=k)
        for f in range(per_point):
            rates = [float(r) for r in rng.choice([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5], size=m)]
            s_cc = run_first_phase(rates, gains[f], m, l)
            s_su = s_cc.copy()
            while s_cc.missing and s_cc.round < t:
                s_cc = run_round(s_cc, gains[f], rates, cc, float(uniforms[f, s_cc.round]))
                rec = s_cc.history[-1]
                s_su = run_round(s_su, gains[f], rates, su, forced=(rec.node, rec.helped_source))
                rounds += 1
                if s_cc.destination_set & ~s_su.destination_set:
                    violations += 1
    print(f"\n{len(grid) * per_point} frames, {rounds} pinned rounds, {violations} violations")
    assert len(grid) * per_point == 10_000
    assert violations == 0


# 7 -------------------------------------------------------------------------

def cli_sweep(tmp_path, workers):
    out = tmp_path / f"sweep_{workers}.csv"
    cmd = [sys.executable, "-m", "coopharq.cli", "sweep", "--scenario", "asym-3x3",
           "--protocol", "all", "--gamma-db-start", "-5", "--gamma-db-stop", "15",
           "--gamma-db-step", "10", "--frames", "20000", "--adapt-frames", "2000",
           "--seed", "7", "--workers", str(workers), "-o", str(out)]
    subprocess.run(cmd, check=True, capture_output=True)
    return out.read_bytes()


@pytest.mark.criterion(7, "sweeps are byte-identical across reruns and worker counts")
def test_determinism(tmp_path):
    serial = cli_sweep(tmp_path, 1)
    assert len(serial.splitlines()) == 1 + 3 * 3
    assert cli_sweep(tmp_path, 1) == serial
    assert cli_sweep(tmp_path, 4) == serial


# 8 -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def high_snr_rows():
    return run_sweep(get_scenario("sym-3"), ["ir-mu", "ir-su", "cc"], [40.0], seed=8,
                     mode="exhaustive")


@pytest.mark.criterion(8, "high-SNR limit: all rates 3.5 and eta within 1e-3 of 3.5")
def test_high_snr_allocation(high_snr_rows):
    for row in high_snr_rows:
        assert row.rates == (3.5, 3.5, 3.5), row


@pytest.mark.criterion(8, "high-SNR limit: all rates 3.5 and eta within 1e-3 of 3.5")
def test_high_snr_efficiency(high_snr_rows):
    for row in high_snr_rows:
        print(f"\n{row.protocol}: eta {row.eta:.6f} +- {row.eta_se:.6f}, "
              f"E[T_used] {row.expected_t_used:.5f}", end="")
    print()
    assert all(abs(row.eta - 3.5) <= 1e-3 for row in high_snr_rows)
