"""Independent reference values for the test suite.

Every number here is computed by a route that does not call the qplasm
physics code: Snell/Airy optics written with complex cosines, explicit
Fock-basis sums, sympy derivatives and a plain numpy binomial pipeline.
Material permittivities are the only shared input.  Results are frozen to
tests/data/oracles.json; the montecarlo golden files are copied from a
CLI run into tests/data/golden/.

    python3 scripts/oracles.py
"""

import json
import math
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np
import sympy as sp
from scipy import optimize, special

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "data"


# ------------------------------------------------------------- optics

def airy_rp(theta_deg, lam_nm, n1, eps2, n3, d_nm):
    """Three-layer p reflection via complex refraction angles."""
    n2 = np.sqrt(complex(eps2))
    s1 = n1 * np.sin(np.radians(theta_deg))

    def cosine(n):
        c = np.sqrt(1 - (s1 / n) ** 2 + 0j)
        # decaying / outgoing wave in medium n
        return np.where((n * c).imag < 0, -c, c)

    c1, c2, c3 = np.cos(np.radians(theta_deg)) + 0j, cosine(n2), cosine(n3 + 0j)
    r12 = (n2 * c1 - n1 * c2) / (n2 * c1 + n1 * c2)
    r23 = (n3 * c2 - n2 * c3) / (n3 * c2 + n2 * c3)
    beta = 2 * np.pi / lam_nm * n2 * c2 * d_nm
    e = np.exp(2j * beta)
    return (r12 + r23 * e) / (1 + r12 * r23 * e)


def two_layer_rp(theta_deg, n1, n3):
    s1 = n1 * np.sin(np.radians(theta_deg))
    c1 = np.cos(np.radians(theta_deg)) + 0j
    c3 = np.sqrt(1 - (s1 / n3) ** 2 + 0j)
    c3 = np.where((n3 * c3).imag < 0, -c3, c3)
    return (n3 * c1 - n1 * c3) / (n3 * c1 + n1 * c3)


def sellmeier(b, c, lam_nm):
    l2 = (lam_nm * 1e-3) ** 2
    return math.sqrt(1 + sum(bi * l2 / (l2 - ci) for bi, ci in zip(b, c)))


SF14 = ((1.69022361, 0.288870052, 1.7045187), (0.0130512113, 0.061369188, 149.517689))


def gold_eps(lam_nm):
    from qplasm.transduce import default_materials  # tabulated input data only
    return complex(default_materials()["gold"].permittivity(lam_nm))


def optics_oracles():
    out = {}
    n1 = sellmeier(*SF14, 632.8)
    angles = [20.0, 45.0, 50.0, 55.0, 60.0, 75.0]
    out["two_layer"] = {
        "theta_deg": angles,
        "R": [float(abs(two_layer_rp(t, n1, 1.32)) ** 2) for t in angles],
    }

    eps_au = gold_eps(632.8)
    crit = math.degrees(math.asin(1.32 / n1))
    grid = np.arange(crit + 1e-4, 89.9, 1e-4)
    R = np.abs(airy_rp(grid, 632.8, n1, eps_au, 1.32, 50.0)) ** 2
    below = R < 0.05
    runs = int(np.count_nonzero(np.diff(below.astype(int)) == 1) + below[0])
    k = int(np.argmin(R))
    out["sf14_gold_dip"] = {"theta_deg": float(grid[k]), "R_min": float(R[k]),
                            "dips_below_0.05": runs, "grid_step_deg": 1e-4}

    # resonance condition with a constant metal, cross-checked by a dip scan
    e = -25.0
    closed = math.degrees(math.asin(math.sqrt(1.32**2 * e / (1.32**2 + e)) / 1.5))
    g = np.arange(62.0, 89.9, 1e-4)
    Rg = np.abs(airy_rp(g, 632.8, 1.5, e + 0.8j, 1.32, 50.0)) ** 2
    out["resonance_np15"] = {"closed_form_deg": closed, "eps_m": [e, 0.8],
                             "scan_min_deg": float(g[np.argmin(Rg)])}

    # Eq. 12 for the sweep: analyte index 1.30..1.35 on SF14/gold
    n_a = np.linspace(1.30, 1.35, 6)
    th = [math.degrees(math.asin(math.sqrt(na**2 * eps_au.real / (na**2 + eps_au.real)) / n1))
          for na in n_a]
    out["sweep_eq12"] = {"analyte_index": n_a.tolist(), "theta_deg": th}
    return out


def lsp_oracle():
    wp, gam, eps_d = 1.37e16, 1.0e14, 1.77
    w = np.linspace(0.3 * wp, 0.7 * wp, 400001)
    eps = 1 - wp**2 / (w**2 + 1j * gam * w)
    k = int(np.argmin(np.abs(eps.real + 2 * eps_d)))
    return {"plasma_frequency": wp, "damping": gam, "eps_d": eps_d,
            "omega_min_abs_eps_plus_2eps_d": float(w[k])}


def lorentzian_oracle():
    lam, n = sp.symbols("lam n", real=True)
    A, G, lam0, S, n0 = sp.Rational(9, 10), 20, 650, 3000, sp.Rational(133, 100)
    I = 1 - A * G**2 / ((lam - lam0 - S * (n - n0)) ** 2 + G**2)
    ratio = sp.Abs(sp.diff(I, n)) / I
    f = sp.lambdify(lam, ratio.subs(n, n0), "numpy")
    grid = np.linspace(550, 750, 200001)
    v = f(grid)
    k = int(np.argmax(v))
    res = optimize.minimize_scalar(lambda x: -f(x), bounds=(grid[k - 2], grid[k + 2]),
                                   method="bounded", options={"xatol": 1e-12})
    return {"A": 0.9, "gamma_nm": 20.0, "lambda0_nm": 650.0, "S_nm_per_riu": 3000.0,
            "n0": 1.33, "fom_star": float(-res.fun), "lambda_star_nm": float(res.x)}


# ------------------------------------------------------------ quantum

def coherent_amps(alpha, dim):
    n = np.arange(dim)
    return np.exp(-abs(alpha) ** 2 / 2) * alpha**n / np.sqrt(special.factorial(n))


def quantum_oracles():
    out = {}
    alpha, eta = 1.3 + 0.4j, 0.6
    dim = 60
    p_in = np.abs(coherent_amps(alpha, dim)) ** 2
    p_out = np.zeros(dim)
    for n in range(dim):
        m = np.arange(n + 1)
        p_out[: n + 1] += p_in[n] * special.comb(n, m) * eta**m * (1 - eta) ** (n - m)
    m = np.arange(dim)
    mean = float((m * p_out).sum())
    out["poisson_thinning"] = {"alpha": [alpha.real, alpha.imag], "eta": eta, "mean": mean,
                               "variance": float((m * m * p_out).sum() - mean**2)}

    # beam splitter Heisenberg map on coherent amplitudes, quadrature means
    T, theta, a0 = 0.3, math.pi / 2, 0.9 - 0.5j
    t, r = math.sqrt(T), math.sqrt(1 - T)
    a_out = t * a0
    b_out = -np.exp(-1j * theta) * r * a0
    d = [math.sqrt(2) * z for v in (a_out, b_out) for z in (v.real, v.imag)]
    out["bs_coherent"] = {"T": T, "theta": theta, "alpha": [a0.real, a0.imag], "d": d}

    # TMSV covariance from its Fock expansion
    rr, cut = 0.6, 80
    lam_ = np.tanh(rr)
    c = (-np.exp(1j * math.pi) * lam_) ** np.arange(cut) / math.cosh(rr)
    n = np.arange(cut)
    ab = float(np.sum(c[1:] * np.conj(c[:-1]) * n[1:]).real)  # <a b>
    nn = float(np.sum(np.abs(c) ** 2 * n))
    # quadrature covariance from <a^dag a> and <a b>
    V = np.zeros((4, 4))
    for k in (0, 2):
        V[k, k] = V[k + 1, k + 1] = nn + 0.5
    V[0, 2] = V[2, 0] = ab
    V[1, 3] = V[3, 1] = -ab
    out["tmsv_covariance"] = {"r": rr, "V": V.tolist(), "mean": nn}

    # FI of binomial counting and its inverted closed form
    rows = []
    for N, et, T_ in [(100, 1.0, 0.5), (50, 0.8, 0.3), (20, 0.9, 0.7)]:
        ks = np.arange(N + 1)
        p = lambda x: special.comb(N, ks) * (et * x) ** ks * (1 - et * x) ** (N - ks)
        h = 1e-6
        dp = (p(T_ + h) - p(T_ - h)) / (2 * h)
        fi = float(np.sum(dp**2 / p(T_)))
        rows.append({"N": N, "eta": et, "T": T_, "F": fi, "closed": N * et / (T_ * (1 - et * T_))})
    out["binomial_fi"] = rows

    a2 = 2.25
    pn = np.abs(coherent_amps(math.sqrt(a2), 80)) ** 2
    k = np.arange(80)
    out["coherent_phase_H"] = {"alpha2": a2, "H": float(4 * ((k * k * pn).sum() - (k * pn).sum() ** 2))}

    al, be = 0.7 + 0.2j, -0.3 + 0.9j
    ov = np.vdot(coherent_amps(al, 80), coherent_amps(be, 80))
    out["coherent_fidelity"] = {"alpha": [al.real, al.imag], "beta": [be.real, be.imag],
                                "F": float(abs(ov) ** 2)}
    rs = 0.8
    # <0|xi> = 1/sqrt(cosh r) from the squeezed-vacuum Fock expansion
    out["squeezed_fidelity"] = {"r": rs, "F": float(abs(1 / math.sqrt(math.cosh(rs))) ** 2)}
    return out


def multiparam_oracle():
    N, eta, T, nu = 100.0, 0.9, 0.4, 10
    h = eta * N / (T * (1 - eta * T))
    single = 1 / math.sqrt(h)  # per-shot single-channel std
    proj = (1 / h + 1 / h) / nu
    return {"N": N, "eta": eta, "T": T, "nu": nu, "projected": proj, "single": single}


def refractive_oracle():
    """Delta-method std ratio fock/coherent at the inflection angle."""
    n1 = sellmeier(*SF14, 632.8)
    eps = gold_eps(632.8)
    Rn = lambda na, th: abs(airy_rp(th, 632.8, n1, eps, na, 50.0)) ** 2
    crit = math.degrees(math.asin(1.32 / n1))
    g = np.linspace(crit + 1e-3, 60, 200001)
    R = Rn(1.32, g)
    dip = g[np.argmin(R)]
    mask = g < dip
    slope = np.gradient(R[mask], g[mask])
    th = float(g[mask][np.argmax(np.abs(slope))])
    N, nu_ref = 1000, 100
    p_sig, p_ref = float(Rn(1.32, th)), float(Rn(1.0, th))
    var = {"coherent": (1 / (N * p_sig), 1 / (N * p_ref)),
           "fock": ((1 - p_sig) / (N * p_sig), (1 - p_ref) / (N * p_ref))}
    std = {k: math.sqrt(vs + vr / nu_ref) for k, (vs, vr) in var.items()}
    return {"theta_deg": th, "T_total": p_sig, "R_air": p_ref,
            "ratio_delta_method": std["fock"] / std["coherent"],
            "ratio_sqrt_1_minus_T": math.sqrt(1 - p_sig)}


def nrf_oracle():
    """Plain numpy binomial pipeline, independent of the qplasm sampler."""
    rng = np.random.default_rng(12345)
    N, T, ea, eb, n = 10, 0.7, 0.9, 0.8, 100000
    res = {}
    for probe in ("tf", "pc"):
        if probe == "tf":
            a, b = rng.binomial(N, T * ea, n), rng.binomial(N, eb, n)
        else:
            a, b = rng.poisson(N * T * ea, n), rng.poisson(N * eb, n)
        d = (b - a).astype(float)
        sig = d.var() / (a + b).mean()
        # nonparametric bootstrap standard error
        boot = []
        for _ in range(200):
            i = rng.integers(0, n, n)
            boot.append(d[i].var() / (a[i] + b[i]).mean())
        res[probe] = {"sigma": float(sig), "std_error": float(np.std(boot, ddof=1))}
    return {"N": N, "T": T, "eta_a": ea, "eta_b": eb, "samples": n, **res}


def freeze_golden():
    dst = OUT / "golden"
    dst.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "qplasm.cli", "run", "--config",
                        str(ROOT / "configs" / "montecarlo.toml"), "--out", tmp, "--quiet"],
                       check=True)
        for f in Path(tmp).iterdir():
            shutil.copy(f, dst / f.name)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    values = {
        "optics": optics_oracles(),
        "lsp": lsp_oracle(),
        "lorentzian": lorentzian_oracle(),
        "quantum": quantum_oracles(),
        "multiparam": multiparam_oracle(),
        "refractive_index": refractive_oracle(),
        "nrf": nrf_oracle(),
    }
    (OUT / "oracles.json").write_text(json.dumps(values, indent=1, sort_keys=True) + "\n")
    freeze_golden()
    print(json.dumps(values, indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
