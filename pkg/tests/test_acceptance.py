"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to see the lines as they happen; they are
also collected into the terminal summary.
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest
from oracles import esp_coeffs, grid_search_minmax

from sdmimo.analysis import TABLE1_MEAN, TABLE1_RMS, table1_stats, validate_noise_model
from sdmimo.array import UlaGeometry, UpaGeometry
from sdmimo.cli import main
from sdmimo.conic import DesignSpec, build_user_targeted, design, recover, solve, worst_sector_rnsr
from sdmimo.designs import (
    SqnrContext,
    band_stop,
    first_order,
    first_order_2d,
    prop1_rms_bounds,
    prop2_bounds,
    second_order,
    zero_noise_coeffs,
)
from sdmimo.sigma_delta import FilterDesign, modulate_1d_batch, shaping_response
from sdmimo.sim import ScenarioConfig, fixed_sector_designs, run_ber

pytestmark = pytest.mark.slow

SECTOR_1D = (np.deg2rad(-30.0), np.deg2rad(30.0))
SECTOR_2D = (SECTOR_1D, (0.0, np.deg2rad(20.0)))


def _iq1_rows(g):
    return np.abs(g.real).sum(axis=1) + np.abs(g.imag).sum(axis=1)


def test_c01_no_overload(criterion):
    with criterion(1, "no-overload theorem") as rep:
        t0 = time.perf_counter()
        rng = np.random.default_rng(20240601)
        n_triples, n, l_max = 10_000, 1024, 8
        m = rng.integers(2, 9, n_triples)
        order = rng.integers(1, l_max + 1, n_triples)
        g = rng.standard_normal((n_triples, l_max)) + 1j * rng.standard_normal((n_triples, l_max))
        g[np.arange(l_max) >= order[:, None]] = 0  # zero taps beyond each triple's order
        real_only = rng.random(n_triples) < 0.2
        g[real_only] = g[real_only].real
        budget = rng.uniform(0.0, 0.98, n_triples) * m
        g *= (budget / _iq1_rows(g))[:, None]
        slack = np.where(rng.random(n_triples) < 0.7, 1.0, rng.uniform(0.5, 1.0, n_triples))
        amp = (m - _iq1_rows(g)) * slack
        assert np.all(amp > 0) and np.all(amp + _iq1_rows(g) <= m + 1e-12)
        x = rng.uniform(-1, 1, (n_triples, n)) + 1j * rng.uniform(-1, 1, (n_triples, n))
        corners = rng.random(n_triples) < 0.3  # worst case: every sample at a box corner
        x[corners] = np.sign(x[corners].real) + 1j * np.sign(x[corners].imag)
        x *= amp[:, None]
        violations, worst = 0, 0.0
        for level in np.unique(m):
            rows = m == level
            res = modulate_1d_batch(x[rows], g[rows], int(level))
            violations += res.overload_count
            worst = max(worst, res.max_error_iq)
        elapsed = time.perf_counter() - t0
        rep.detail = f"{n_triples} triples x {n} samples, {violations} violations, max |q|_IQinf = {worst:.6f}"
        assert violations == 0 and worst <= 1 + 1e-12
        assert elapsed < 60, f"runtime {elapsed:.1f} s"


def test_c02_analytic_socp(criterion):
    with criterion(2, "analytic SOCP oracle") as rep:
        t0 = time.perf_counter()
        sol = solve(build_user_targeted([0.0], [1.0], 1, 3))
        d = recover(sol)
        elapsed = time.perf_counter() - t0
        errs = {
            "t": abs(sol.objective - np.sqrt(0.2)),
            "g": abs(d.coeffs[0] - (-0.5)),
            "A": abs(d.amplitude - 2.5),
        }
        rep.detail = ", ".join(f"|d{k}| = {v:.1e}" for k, v in errs.items())
        assert max(errs.values()) <= 1e-6
        assert elapsed < 1.0, f"runtime {elapsed:.2f} s"


def test_c03_grid_search_equivalence(criterion):
    with criterion(3, "grid-search equivalence") as rep:
        t0 = time.perf_counter()
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(20):
            L, k, m = int(rng.integers(1, 3)), int(rng.integers(1, 3)), int(rng.integers(2, 7))
            w = rng.uniform(-np.pi, np.pi, k)
            gam = rng.uniform(0.1, 2.0, k)
            t_solver = solve(build_user_targeted(w, gam, L, m)).objective
            t_grid = grid_search_minmax(w, gam, L, m)[0]
            worst = max(worst, abs(t_solver - t_grid) / t_grid)
        elapsed = time.perf_counter() - t0
        rep.detail = f"20 problems, worst relative gap {worst:.1e}"
        assert worst <= 1e-3
        assert elapsed < 300, f"runtime {elapsed:.1f} s"


def test_c04_zero_noise(criterion):
    with criterion(4, "zero-noise design") as rep:
        rng = np.random.default_rng(4)
        worst_null = 0.0
        for k in range(1, 9):
            w = rng.uniform(-np.pi, np.pi, (500, k))
            g = zero_noise_coeffs(w)
            resp = np.array([shaping_response(gi, wi) for gi, wi in zip(g, w)])
            worst_null = max(worst_null, float(np.abs(resp).max()))
        worst_form = 0.0
        for k in range(1, 11):
            for _ in range(20):
                w = rng.uniform(-np.pi, np.pi, k)
                worst_form = max(worst_form, float(np.abs(zero_noise_coeffs(w) - esp_coeffs(w)).max()))
        rep.detail = f"max |1+G| at nulls {worst_null:.1e} (K<=8), product vs subset-sum {worst_form:.1e} (K<=10)"
        assert worst_null < 1e-9 and worst_form < 1e-9


def test_c05_band_stop_bounds(criterion):
    with criterion(5, "band-stop norm bounds") as rep:
        rng = np.random.default_rng(5)
        ok = True
        for L in range(1, 9):
            lo, hi = prop2_bounds(L)
            norms = np.array([_iq1_rows(band_stop(L, wc)[None])[0] for wc in rng.uniform(-np.pi, np.pi, 1000)])
            ok &= bool(norms.min() >= lo - 1e-9 and norms.max() <= hi + 1e-9)
            ok &= bool(_iq1_rows(band_stop(L, 0.0)[None])[0] == lo)
        rep.detail = "L = 1..8 over 1000 centres each, lower bound exact at omega_c = 0"
        assert ok


def test_c06_norm_statistics(criterion):
    with criterion(6, "coefficient-norm statistics") as rep:
        t0 = time.perf_counter()
        worst_mean = worst_rms = 0.0
        sandwich = True
        for k in range(1, 9):
            s = table1_stats(k, 100_000, seed=0)
            lo, hi = prop1_rms_bounds(k)
            sandwich &= lo <= s.rms <= hi
            if k in TABLE1_MEAN:
                worst_mean = max(worst_mean, abs(s.mean / TABLE1_MEAN[k] - 1))
                worst_rms = max(worst_rms, abs(s.rms / TABLE1_RMS[k] - 1))
        elapsed = time.perf_counter() - t0
        rep.detail = f"worst mean dev {100 * worst_mean:.2f}%, worst RMS dev {100 * worst_rms:.2f}%, RMS sandwich {'ok' if sandwich else 'broken'}"
        assert worst_mean <= 0.05 and worst_rms <= 0.10 and sandwich
        assert elapsed < 120, f"runtime {elapsed:.1f} s"


def test_c07_noise_model(criterion):
    with criterion(7, "noise-power model") as rep:
        t0 = time.perf_counter()
        mag = np.linspace(0.2, 2.0, 19)
        grid = np.concatenate([-mag[::-1], mag])
        shaped = validate_noise_model(first_order(2), grid, 1024, 200, seed=7)
        flat = validate_noise_model(FilterDesign([0.0], 1.0, 2), grid, 1024, 2000, seed=8)
        d_shaped = max(abs(r.ratio_db) for r in shaped)
        d_flat = max(abs(r.ratio_db) for r in flat)
        elapsed = time.perf_counter() - t0
        rep.detail = f"first-order max |ratio| {d_shaped:.2f} dB (200 trials), unshaped {d_flat:.2f} dB (2000 trials)"
        assert d_shaped <= 1.5 and d_flat <= 0.5
        assert elapsed < 120, f"runtime {elapsed:.1f} s"


def test_c08_rnsr_dominance(criterion):
    with criterion(8, "fixed-sector RNSR dominance") as rep:
        ctx = SqnrContext(rho=1.0, noise_var=0.0, n_effective=1024)
        parts, ok = [], True
        for m in (5, 6, 7):
            fs = design(DesignSpec("fixed-sector", 16, m, ctx, sector=SECTOR_1D, spacing=0.25)).worst_rnsr_dense
            fo = worst_sector_rnsr(first_order(m), SECTOR_1D, 0.25)
            so = worst_sector_rnsr(second_order(m), SECTOR_1D, 0.25)
            ok &= fs < fo and fs < so
            parts.append(f"M={m}: {10 * np.log10(fs):.1f} vs {10 * np.log10(fo):.1f}/{10 * np.log10(so):.1f} dB")
        rep.detail = "; ".join(parts)
        assert ok


def test_c09_ber_ordering(criterion):
    with criterion(9, "desk-scale BER ordering") as rep:
        t0 = time.perf_counter()
        cfg = ScenarioConfig(
            geometry=UlaGeometry(256, 0.25),
            n_users=8,
            sector_deg=(-30.0, 30.0),
            m_levels=5,
            order=16,
            schemes=("sd-fs", "sd-1st", "sd-2nd", "direct", "unquant"),
            snr_db=(30.0,),
            n_symbols=500,
            n_trials=100,
            seed=2024,
        )
        r = run_ber(cfg)
        ber = {s: float(r.ber(s)[0]) for s in cfg.schemes}
        floor = 1 / r.bits["unquant"][0]
        elapsed = time.perf_counter() - t0
        rep.detail = ", ".join(f"{s} {b:.2e}" for s, b in ber.items())
        assert ber["unquant"] <= ber["sd-fs"] < ber["sd-1st"] < ber["direct"]
        assert ber["sd-fs"] <= 10 * max(ber["unquant"], floor)
        assert elapsed < 1200, f"runtime {elapsed:.1f} s"


def test_c10_two_dimensional(criterion):
    with criterion(10, "2D fixed-sector sanity") as rep:
        t0 = time.perf_counter()
        cfg = ScenarioConfig(
            geometry=UpaGeometry(40, 40, 0.25, 0.25),
            n_users=8,
            sector_deg=(-30.0, 30.0),
            elevation_deg=(0.0, 20.0),
            m_levels=4,
            order=(5, 5),
            schemes=("sd-fs", "sd-1st"),
            snr_db=(30.0,),
            n_symbols=500,
            n_trials=20,
            seed=11,
        )
        fs_design = fixed_sector_designs(cfg)[0]
        rn_fs = worst_sector_rnsr(fs_design, SECTOR_2D, (0.25, 0.25))
        rn_fo = worst_sector_rnsr(first_order_2d(4), SECTOR_2D, (0.25, 0.25))
        r = run_ber(cfg)
        b_fs, b_fo = float(r.ber("sd-fs")[0]), float(r.ber("sd-1st")[0])
        elapsed = time.perf_counter() - t0
        rep.detail = (
            f"worst RNSR {10 * np.log10(rn_fs):.1f} vs {10 * np.log10(rn_fo):.1f} dB, "
            f"BER@30dB {b_fs:.2e} vs {b_fo:.2e}"
        )
        assert rn_fs < rn_fo and b_fs < b_fo
        assert elapsed < 1800, f"runtime {elapsed:.1f} s"


SIM_TOML = """
[scenario]
array = "ula"
n_antennas = 48
n_users = 3
m_levels = 5
order = 6
schemes = ["sd-fs", "sd-ut", "sd-1st", "sd-2nd", "direct", "unquant"]
snr_db = [0.0, 20.0]
n_symbols = 50
n_trials = 4
seed = 17
"""


def _snapshot(d: Path) -> dict:
    files = {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}
    man = json.loads((d / "manifest.json").read_text())
    man.pop("timings_s")
    files["manifest.json"] = json.dumps(man, sort_keys=True).encode()
    return files


def test_c11_determinism(criterion, tmp_path):
    with criterion(11, "determinism across reruns and workers") as rep:
        cfg_dir = Path(__file__).resolve().parents[1] / "configs"
        sim = tmp_path / "sim.toml"
        sim.write_text(SIM_TOML)
        commands = {
            "design-1d": ["design", "--config", str(cfg_dir / "fixed_sector_m5.toml")],
            "design-ut": ["design", "--config", str(cfg_dir / "user_targeted_k6.toml")],
            "design-2d": ["design", "--config", str(cfg_dir / "fixed_sector_2d.toml")],
            "response": ["response", "--design", "second-order", "--m-levels", "5", "--points", "181"],
            "simulate": ["simulate", "--config", str(sim)],
            "table1": ["analyze", "table1", "--samples", "20000", "--seed", "5"],
            "bounds": ["analyze", "bounds"],
            "noise-model": ["analyze", "noise-model", "--samples", "50", "--n-antennas", "256"],
        }
        for name, argv in commands.items():
            snaps = []
            for run_idx, threads in enumerate(("1", "2", "1")):
                out = tmp_path / f"{name}-{run_idx}"
                assert main(argv + ["--out-dir", str(out), "--threads", threads]) == 0, name
                snaps.append(_snapshot(out))
            assert snaps[0] == snaps[1] == snaps[2], f"{name} outputs differ"
        rep.detail = f"{len(commands)} commands x 3 runs (threads 1, 2, 1), outputs byte-identical"
