"""Acceptance criteria, one test (or group) per criterion with its runtime limit.

Each test records a single pass/fail line that is echoed in the terminal
summary.  Tolerances are the ones the criteria state.
"""

import math
import time
import zlib

import numpy as np
import pytest

from qplasm import channels as ch, estimate as est, mc, transduce as td
from qplasm.cli import Config, build_stack, main
from qplasm.errors import QplasmError
from qplasm.states import make_state

from families import ALL_FAMILIES, information_pair, mzi, within_bound


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


# ------------------------------------------------------------------ 1

def test_criterion_1_kretschmann_dip(configs_dir, acceptance):
    with Timer() as t:
        stack = build_stack(Config.load(configs_dir / "resonance.toml"))
        lam = 632.8
        theta_c = td.critical_angle(stack, lam)
        grid = np.linspace(theta_c + 1e-6, 89.9, 20001)
        R = td.kretschmann_reflectance(grid, lam, stack)[1]
        below = R < 0.05
        runs = int(np.count_nonzero(np.diff(below.astype(int)) == 1) + below[0])
        found = td.find_resonance(stack, wavelength_nm=lam).location
        eps = complex(stack.metal_permittivity(lam)).real
        closed = td.resonance_angle(float(stack.prism_permittivity.index(lam)), 1.32, eps)
    ok = runs == 1 and abs(found - closed) < 0.1 and t.elapsed < 1.0
    acceptance(1, ok, f"dips<0.05={runs} found={found:.4f} closed={closed:.4f} deg, {t.elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 2

WAVELENGTHS = np.linspace(500.0, 1000.0, 11)


def _sensitivity_ranges(stack):
    bad = []
    for lam in WAVELENGTHS:
        try:
            ang = td.stack_sensitivity("angular", stack, lam)
            spec = td.stack_sensitivity("spectral", stack, lam)
        except QplasmError as exc:
            bad.append((float(lam), type(exc).__name__))
            continue
        if not 10 <= ang <= 1e3:
            bad.append((float(lam), f"angular {ang:.1f}"))
        if not 1e3 <= spec <= 1e5:
            bad.append((float(lam), f"spectral {spec:.1f}"))
    return bad


def _fd_mismatch(stack, h=1e-6):
    """Worst relative closed-form vs finite-difference gap away from the pole."""
    worst, used = 0.0, 0
    for lam in WAVELENGTHS:
        n_p = float(stack.prism_permittivity.index(lam))
        n_a = float(stack.analyte_permittivity.index(lam))
        e = complex(stack.metal_permittivity(lam)).real
        pole = n_p**2 * n_a**2 / (n_a**2 - n_p**2)
        if abs(e) < 3 * abs(pole):
            continue
        fd = (td.resonance_angle(n_p, n_a + h, e) - td.resonance_angle(n_p, n_a - h, e)) / (2 * h)
        cf = td.sensitivity_closed_form("angular", n_a, n_p, e)
        worst, used = max(worst, abs(cf - fd) / fd), used + 1
    return worst, used


def test_criterion_2_silver(configs_dir, acceptance):
    with Timer() as t:
        stack = build_stack(Config.load(configs_dir / "sensitivity.toml"))
        bad = _sensitivity_ranges(stack)
        worst, used = _fd_mismatch(stack)
    ok = not bad and used > 0 and worst < 0.01 and t.elapsed < 5.0
    acceptance("2 (silver)", ok, f"out of range={bad} fd gap={worst:.2e} over {used} points, {t.elapsed:.2f}s")
    assert ok


def test_criterion_2_gold_fd(configs_dir, acceptance):
    with Timer() as t:
        worst, used = _fd_mismatch(build_stack(Config.load(configs_dir / "resonance.toml")))
    ok = used > 0 and worst < 0.01 and t.elapsed < 5.0
    acceptance("2 (gold fd)", ok, f"fd gap={worst:.2e} over {used} points, {t.elapsed:.2f}s")
    assert ok


@pytest.mark.xfail(strict=True, reason=(
    "SF14/gold has no finite angular sensitivity at 500 nm (the resonance sits on the pole) "
    "and its spectral sensitivity is below 1e3 nm/RIU at 500-550 nm"))
def test_criterion_2_gold_ranges(configs_dir, acceptance):
    bad = _sensitivity_ranges(build_stack(Config.load(configs_dir / "resonance.toml")))
    acceptance("2 (gold ranges)", not bad, f"strict xfail, out of range={bad}")
    assert not bad


# ------------------------------------------------------------------ 3

def test_criterion_3_intensity_bounds(acceptance):
    lines, ok = [], True
    with Timer() as t:
        for etaT in (0.19, 0.25, 0.36):
            p = {"T": etaT, "eta": 1.0, "N": 100}
            ratio = (est.bound_catalog("fock_intensity", p).value / est.bound_catalog("snl_intensity", p).value)
            ok &= ratio == pytest.approx(math.sqrt(1 - etaT), rel=1e-15)
            base = dict(N=100, T=etaT, eta=1.0, nu=1, samples=1000, seed=20240601)
            c = mc.estimate_transmittance(mc.ExperimentConfig("coherent", stream=0, **base))
            f = mc.estimate_transmittance(mc.ExperimentConfig("fock", stream=1, **base))
            ok &= abs(c.std - c.predicted_std) < 3 * c.std_error
            ok &= abs(f.std - f.predicted_std) < 3 * f.std_error
            enh = 1 - f.std / c.std
            se = (f.std / c.std) * math.hypot(f.std_error / f.std, c.std_error / c.std)
            ok &= 0.10 - 3 * se <= enh <= 0.20 + 3 * se
            lines.append(f"etaT={etaT} enhancement={enh:.3f}+-{se:.3f}")
    ok &= t.elapsed < 30.0
    acceptance(3, ok, f"{'; '.join(lines)}, {t.elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 4

def test_criterion_4_nrf(oracle, acceptance):
    ok = True
    with Timer() as t:
        for eta in (0.1, 0.5, 0.9):
            ok &= est.sigma_out("tf", 1.0, eta, eta) == pytest.approx(1 - eta, abs=1e-15)
            for G in (1.5, 3.0):
                want = 1 - 2 * eta * (G - 1) / (2 * G - 1)
                ok &= est.sigma_out("tmsd", 1.0, eta, eta, G=G) == pytest.approx(want, rel=1e-14)
        o = oracle["nrf"]
        detail = []
        for probe in ("tf", "pc"):
            r = mc.estimate_nrf(mc.ExperimentConfig(probe, N=o["N"], kind="difference", T=o["T"],
                                                    eta_a=o["eta_a"], eta_b=o["eta_b"],
                                                    samples=100000, seed=7))
            closed = est.sigma_out(probe, o["T"], o["eta_a"], o["eta_b"])
            ok &= abs(r.sigma - closed) < 3 * r.std_error
            detail.append(f"{probe} {r.sigma:.4f} vs {closed:.4f}")
    ok &= t.elapsed < 60.0
    acceptance(4, ok, f"{'; '.join(detail)}, {t.elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 5

def test_criterion_5_gaussian_qfi(acceptance):
    ok, worst = True, 0.0
    with Timer() as t:
        def close(value, want, rel):
            nonlocal worst
            gap = abs(value - want) / want
            worst = max(worst, gap) if rel == 1e-4 else worst
            return gap <= rel

        for alpha in (0.5, 1.5 - 0.5j):
            fam = lambda x: ch.apply_phase(make_state("coherent", "gaussian", alpha=alpha), x)
            ok &= close(est.gaussian_qfi(fam, 0.3), 4 * abs(alpha) ** 2, 1e-4)
        for r in (0.3, 0.8):
            N = math.sinh(r) ** 2
            fam = lambda x: ch.apply_phase(make_state("squeezed_vacuum", "gaussian", r=r), x)
            ok &= close(est.gaussian_qfi(fam, 0.2), 8 * (N + N * N), 1e-4)
        for alpha, r in ((1.0, 0.5), (2.0, 0.8)):
            want = alpha**2 * math.exp(2 * r) + math.sinh(r) ** 2
            ok &= close(est.gaussian_qfi(mzi(alpha, r), 0.0), want, 1e-4)
        for alpha, r, eta in ((1.0, 0.5, 0.9), (2.0, 0.8, 0.7)):
            want = est.bound_catalog("mzi_lossy_cs_sv", alpha=alpha, r=r, eta=eta).value ** -2
            ok &= close(est.gaussian_qfi(mzi(alpha, r, eta), 0.0), want, 1e-4)
            fam = mzi(alpha, r, eta, second=True)
            H = est.gaussian_qfi(fam, 0.0)
            for a in np.linspace(0, math.pi, 13):
                ok &= within_bound(est.homodyne_fisher(fam, 0.0, a), H)
            F, _ = est.optimal_homodyne(fam, 0.0)
            c2 = est.bound_catalog("homodyne_lossy", alpha=alpha, r=r, eta=eta).value ** -2
            ok &= close(F, c2, 1e-3)
    ok &= t.elapsed < 10.0
    acceptance(5, ok, f"worst QFI gap={worst:.2e}, {t.elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 6

def test_criterion_6_noon(acceptance):
    with Timer() as t:
        res = est.noon_coincidence(0.3, 1.0, 0.880, 2)
        ok = round(res.threshold, 3) == 0.707 and res.super_sensitive
        gaps = []
        for N in range(1, 7):
            fam = lambda phi: ch.apply_phase(make_state("noon", n=N), phi, "relative")
            gaps.append(abs(est.qfi_pure(fam, 0.2) - N * N) / (N * N))
        ok &= max(gaps) <= 1e-6
    ok &= t.elapsed < 5.0
    acceptance(6, ok, f"threshold={res.threshold:.4f} super={res.super_sensitive} "
                      f"max QFI gap={max(gaps):.1e}, {t.elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 7

def test_criterion_7_measurement_bound(acceptance):
    violations, checked = [], 0
    with Timer() as t:
        for name, draw in ALL_FAMILIES:
            g = np.random.default_rng(zlib.crc32(name.encode()) ^ 0xACCE)
            for _ in range(3):
                fam, x0 = draw(g)
                dom = (0.0, 1.0) if "loss" in name else (-math.inf, math.inf)
                F, H = information_pair(fam, x0, name.startswith("g_"), dom)
                checked += 1
                if not within_bound(F, H):
                    violations.append((name, x0, F, H))
    ok = len(ALL_FAMILIES) == 20 and not violations and t.elapsed < 60.0
    acceptance(7, ok, f"{checked} checks over {len(ALL_FAMILIES)} families, violations={violations}, "
                      f"{t.elapsed:.2f}s")
    assert ok


# ------------------------------------------------------------------ 8

def _snapshot(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


def test_criterion_8_determinism(tmp_path, configs_dir, acceptance):
    configs = sorted(configs_dir.glob("*.toml"))
    runs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for cfg in configs:
            assert main(["run", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0, cfg.name
        assert main(["sweep", "--config", str(configs_dir / "resonance.toml"), "--param", "analyte_index",
                     "--from", "1.30", "--to", "1.35", "--points", "6", "--out", str(out), "--quiet"]) == 0
        runs.append(_snapshot(out))
    ok = runs[0] == runs[1] and len(runs[0]) == 2 * (len(configs) + 1)
    acceptance(8, ok, f"{len(runs[0])} files from {len(configs)} configs + 1 sweep identical across two runs")
    assert ok
