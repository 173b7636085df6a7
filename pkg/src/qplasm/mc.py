"""Monte Carlo sampling of photon-counting experiments and their estimators.

Random numbers come from Philox generators keyed by (seed, stream, chunk),
so results do not depend on how chunks are scheduled across threads.
``QPLASM_THREADS`` caps the worker count (default 1).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import channels, estimate, states, transduce
from .errors import ConfigError, DomainError
from .states import FockState, GaussianState

CHUNK = 250
CALIBRATION_SLOPE = 1.933e-3  # refractive index change per % concentration


def substream(seed, *keys):
    """Independent generator for ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(int(seed) & (2 ** 64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def n_threads():
    try:
        return max(1, int(os.environ.get("QPLASM_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(samples, fn, seed, stream):
    """Concatenate fn(rng, n) over fixed-size chunks with their own substreams."""
    sizes = [min(CHUNK, samples - s) for s in range(0, samples, CHUNK)]
    jobs = [(k, n) for k, n in enumerate(sizes)]
    run = lambda job: fn(substream(seed, stream, job[0]), job[1])
    threads = n_threads()
    if threads == 1 or len(jobs) == 1:
        parts = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    return np.concatenate(parts)


# ------------------------------------------------------------ sampling

def _probe_spec(probe, N):
    if isinstance(probe, dict):
        return probe
    if probe == "coherent":
        return {"kind": "coherent", "alpha": math.sqrt(N)}
    if probe == "fock":
        return {"kind": "fock", "n": int(round(N))}
    raise ConfigError(f"unknown probe {probe!r}", field="probe")


def draw_counts(probe, N, transmission, size, rng, max_cutoff=states.DEFAULT_MAX_CUTOFF):
    """Photon counts after a channel of total transmission ``transmission``."""
    if probe == "coherent":
        return rng.poisson(N * transmission, size=size)
    if probe == "fock":
        return rng.binomial(int(round(N)), transmission, size=size)
    state = states.make_state(_probe_spec(probe, N), max_cutoff=max_cutoff)
    p = channels.apply_loss(state, transmission, counting=True).probabilities()
    return rng.choice(p.size, size=size, p=p / p.sum())


def sample_outcomes(state, channel_chain, measurement, nu, rng):
    """Draw ``nu`` outcomes of ``measurement`` after ``channel_chain``.

    counting: photon numbers, shape (nu,) or (nu, 2); difference: (nu, 2)
    counts (Gaussian states use their photon-number moments); coincidence:
    booleans marking clicks in both modes.
    """
    if measurement not in ("counting", "difference", "coincidence"):
        raise ConfigError(f"unknown measurement {measurement!r}", field="measurement")
    if isinstance(state, GaussianState):
        if measurement != "difference":
            raise ConfigError(f"{measurement} needs a Fock representation", field="measurement")
        out = channels.apply_chain(state, channel_chain)
        if out.n_modes != 2:
            raise ConfigError("difference detection needs two modes", field="measurement")
        mean, cov = states.number_moments(out)
        return rng.multivariate_normal(mean, cov, size=nu, method="eigh")
    out = channels.apply_chain(state, channel_chain, counting=True)
    p = out.probabilities()
    idx = rng.choice(p.size, size=nu, p=(p / p.sum()).reshape(-1))
    counts = np.stack(np.unravel_index(idx, p.shape), axis=-1)
    if measurement == "counting":
        return counts[:, 0] if p.ndim == 1 else counts
    if p.ndim != 2:
        raise ConfigError(f"{measurement} needs two modes", field="measurement")
    if measurement == "coincidence":
        return (counts[:, 0] > 0) & (counts[:, 1] > 0)
    return counts


# --------------------------------------------------------- configuration

@dataclass(frozen=True)
class ExperimentConfig:
    """One estimation experiment.

    ``kind`` is ``transmittance``, ``refractive_index`` or ``difference``.
    The ground-truth transmittance is ``T`` or, when ``stack`` is set, the
    Kretschmann reflectance at ``theta_deg`` and ``wavelength_nm``.
    """

    probe: object = "coherent"
    N: float = 100.0
    kind: str = "transmittance"
    T: float | None = None
    eta: float = 1.0
    eta_a: float = 1.0
    eta_b: float = 1.0
    stack: transduce.LayerStack | None = None
    theta_deg: float | None = None
    wavelength_nm: float = 632.8
    nu: int = 1
    reference_nu: int | None = None
    samples: int = 1000
    seed: int = 0
    stream: int = 0
    n_window: tuple | None = None
    label: str = ""

    def __post_init__(self):
        if self.nu < 1:
            raise ConfigError("nu must be >= 1", field="nu")
        if self.samples < 2:
            raise ConfigError("samples must be >= 2", field="samples")
        for name in ("eta", "eta_a", "eta_b"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}", field=name)
        if self.T is not None and not 0 <= self.T <= 1:
            raise ConfigError(f"T must lie in [0, 1], got {self.T}", field="T")
        if self.kind not in ("transmittance", "refractive_index", "difference"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}", field="kind")
        if self.kind == "refractive_index" and self.stack is None:
            raise ConfigError("refractive-index estimation needs a layer stack", field="stack")
        if self.N <= 0:
            raise ConfigError("N must be positive", field="N")

    def truth_T(self):
        if self.T is not None:
            return self.T
        if self.stack is None:
            raise ConfigError("give T or a layer stack", field="T")
        theta = self.theta_deg if self.theta_deg is not None else inflection_angle(self.stack, self.wavelength_nm)
        return float(transduce.kretschmann_reflectance(theta, self.wavelength_nm, self.stack)[1])


@dataclass(frozen=True, eq=False)
class EstimateDistribution:
    estimates: np.ndarray
    truth: float
    predicted_std: float | None = None
    flags: tuple = ()
    extra: dict = field(default_factory=dict)

    @property
    def count(self):
        return int(self.estimates.size)

    @property
    def mean(self):
        return float(self.estimates.mean())

    @property
    def std(self):
        return float(self.estimates.std(ddof=1))

    @property
    def bias(self):
        return self.mean - self.truth

    @property
    def std_error(self):
        """Standard error of the sample std (chi-distribution approximation)."""
        return self.std / math.sqrt(2 * (self.count - 1))

    @property
    def mean_error(self):
        return self.std / math.sqrt(self.count)


# ------------------------------------------------------ transmittance

def _transmittance_bound(config, T):
    name = {"coherent": "snl_intensity", "fock": "fock_intensity"}.get(config.probe)
    if name is None or T <= 0:
        return None
    return estimate.bound_catalog(name, T=T, eta=config.eta, N=config.N, nu=config.nu).value


def estimate_transmittance(config):
    """Sample-mean estimator T_est = mean(counts) / (eta N) per block of nu repetitions."""
    T = config.truth_T()
    if config.eta == 0:
        raise ConfigError("eta = 0 leaves nothing to measure", field="eta")

    def block(rng, n):
        counts = draw_counts(config.probe, config.N, config.eta * T, (n, config.nu), rng)
        return counts.mean(axis=1) / (config.eta * config.N)

    est = _chunked(config.samples, block, config.seed, config.stream)
    return EstimateDistribution(est, T, _transmittance_bound(config, T))


# ------------------------------------------------------ refractive index

def inflection_angle(stack, wavelength_nm=632.8):
    """Angle of steepest descent on the low-angle shoulder of the dip."""
    res = transduce.find_resonance(stack, wavelength_nm=wavelength_nm)
    lo = transduce.critical_angle(stack, wavelength_nm) + 1e-3
    def slope(t, h=1e-4):
        R = transduce.kretschmann_reflectance(np.array([t - h, t + h]), wavelength_nm, stack)[1]
        return -abs(R[1] - R[0]) / (2 * h)

    grid = np.linspace(lo, res.location, 400)
    R = transduce.kretschmann_reflectance(grid, wavelength_nm, stack)[1]
    k = int(np.argmax(np.abs(np.gradient(R, grid))))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    return float(minimize_scalar(slope, bounds=(a, b), method="bounded", options={"xatol": 1e-9}).x)


class IndexInverter:
    """Maps a normalized transmittance R(n_a)/R_air back to n_a."""

    def __init__(self, stack, theta_deg, wavelength_nm=632.8, window=None, span=0.05):
        self.stack = stack
        self.theta = float(theta_deg)
        self.wavelength = float(wavelength_nm)
        self.r_air = self.reflectance(1.0)
        n0 = stack.analyte_permittivity.index(wavelength_nm)
        if window is None:
            self.window = self._monotone_window(n0 - span, n0 + span, n0)
        else:
            lo, hi = map(float, window)
            w = self._monotone_window(lo, hi, min(max(n0, lo), hi))
            if w != (lo, hi):
                raise ConfigError(
                    f"R(n_a) is not monotonic over [{lo:.6g}, {hi:.6g}] at theta = {self.theta:.6g} deg; "
                    f"monotonic window is [{w[0]:.6g}, {w[1]:.6g}]", field="n_window")
            self.window = w
        self.g_lo, self.g_hi = self.ratio(self.window[0]), self.ratio(self.window[1])

    def reflectance(self, n):
        n = max(float(n), 1.0)
        st = self.stack.with_analyte(n * n)
        return float(transduce.kretschmann_reflectance(self.theta, self.wavelength, st)[1])

    def ratio(self, n):
        return self.reflectance(n) / self.r_air

    def slope(self, n, h=1e-6):
        return (self.ratio(n + h) - self.ratio(n - h)) / (2 * h)

    def _monotone_window(self, lo, hi, n0, points=801):
        lo = max(lo, 1.0)
        e3max = self.stack.prism_permittivity.permittivity(self.wavelength) * math.sin(math.radians(self.theta)) ** 2
        hi = min(hi, math.sqrt(e3max) - 1e-9)
        grid = np.linspace(lo, hi, points)
        g = np.array([self.ratio(n) for n in grid])
        sign = np.sign(np.diff(g))
        k = min(int(np.searchsorted(grid, n0)), len(sign) - 1)
        k = max(k, 0)
        s = sign[k]
        if s == 0:
            raise ConfigError(f"R(n_a) is flat at n_a = {n0:.6g}", field="theta_deg")
        a = k
        while a > 0 and sign[a - 1] == s:
            a -= 1
        b = k
        while b < len(sign) - 1 and sign[b + 1] == s:
            b += 1
        return (float(grid[a]), float(grid[b + 1]))

    def invert(self, value):
        """n_a with ratio(n_a) = value; values outside the window clip to its edge."""
        lo, hi = self.window
        glo, ghi = self.g_lo, self.g_hi
        if (value - glo) * (value - ghi) > 0:
            return (lo if abs(value - glo) < abs(value - ghi) else hi), True
        return brentq(lambda n: self.ratio(n) - value, lo, hi, xtol=1e-15, rtol=1e-15), False


def _relative_count_var(probe, N, p):
    if probe == "coherent":
        return 1 / (N * p)
    if probe == "fock":
        return (1 - p) / (N * p)
    return None


def estimate_refractive_index(config, zero_noise=False):
    """Simulate signal and air-reference runs and invert the normalized transmittance."""
    stack = config.stack
    theta = config.theta_deg if config.theta_deg is not None else inflection_angle(stack, config.wavelength_nm)
    inv = IndexInverter(stack, theta, config.wavelength_nm, config.n_window)
    n_true = float(stack.analyte_permittivity.index(config.wavelength_nm))
    p_sig = config.eta * inv.reflectance(n_true)
    p_ref = config.eta * inv.r_air
    nu_ref = config.reference_nu or config.nu
    if zero_noise:
        n_hat, _ = inv.invert(p_sig / p_ref)
        est = np.full(config.samples, n_hat)
        return EstimateDistribution(est, n_true, 0.0, extra={"theta_deg": theta})

    def block(rng, n):
        s = draw_counts(config.probe, config.N, p_sig, (n, config.nu), rng).mean(axis=1)
        r = draw_counts(config.probe, config.N, p_ref, (n, nu_ref), rng).mean(axis=1)
        out = np.empty((n, 2))
        for i in range(n):
            out[i] = inv.invert(s[i] / r[i] if r[i] > 0 else np.inf)
        return out

    res = _chunked(config.samples, block, config.seed, config.stream)
    clipped = int(res[:, 1].sum())
    flags = (f"{clipped} estimates clipped to the inversion window",) if clipped else ()
    vs = _relative_count_var(config.probe, config.N, p_sig)
    vr = _relative_count_var(config.probe, config.N, p_ref)
    predicted = None
    if vs is not None:
        ratio = p_sig / p_ref
        predicted = ratio * math.sqrt(vs / config.nu + vr / nu_ref) / abs(inv.slope(n_true))
    extra = {"theta_deg": theta, "window": inv.window, "T_total": p_sig}
    return EstimateDistribution(res[:, 0], n_true, predicted, flags, extra)


def concentration(n_estimate, n_reference, slope=CALIBRATION_SLOPE):
    """Concentration in % from a refractive index via a linear calibration."""
    if slope == 0:
        raise DomainError("calibration slope must be nonzero")
    return (np.asarray(n_estimate) - n_reference) / slope


# ------------------------------------------------- difference detection

@dataclass(frozen=True)
class NrfEstimate:
    sigma: float
    std_error: float
    samples: int


def simulate_differential(probe, T, eta_a, eta_b, N, samples, rng):
    """Brute-force photon pipeline for the intensity-difference NRF.

    tf: |N, N> with binomial loss; pc: independent Poisson modes of mean N;
    tmsv: thermal pair number with mean N shared by both modes.
    """
    pa, pb = T * eta_a, eta_b
    if probe == "tf":
        a = rng.binomial(int(N), pa, samples)
        b = rng.binomial(int(N), pb, samples)
    elif probe == "pc":
        a = rng.poisson(N * pa, samples)
        b = rng.poisson(N * pb, samples)
    elif probe == "tmsv":
        n = rng.geometric(1 / (1 + N), samples) - 1
        a = rng.binomial(n, pa)
        b = rng.binomial(n, pb)
    else:
        raise ConfigError(f"differential pipeline supports tf, pc and tmsv, not {probe!r}", field="probe")
    d = (b - a).astype(float)
    s = (a + b).astype(float)
    md, md2, ms = d.mean(), (d * d).mean(), s.mean()
    if ms == 0:
        raise DomainError("no photons detected")
    sigma = (md2 - md * md) / ms
    # influence function of the ratio-of-moments estimator
    psi = ((d * d - md2) - 2 * md * (d - md)) / ms - sigma * (s - ms) / ms
    return NrfEstimate(float(sigma), float(psi.std(ddof=1) / math.sqrt(samples)), samples)


def estimate_nrf(config):
    rng = substream(config.seed, config.stream, 0)
    T = config.truth_T()
    return simulate_differential(config.probe, T, config.eta_a, config.eta_b, config.N, config.samples, rng)


# ------------------------------------------------------------ comparison

COMPARE_FIELDS = ("label", "kind", "probe", "truth", "empirical", "std_error", "bound",
                  "ratio", "within_3se")


def compare_strategies(configs):
    """Empirical std (or NRF) next to its closed-form prediction, one row per config."""
    rows = []
    truths = {round(c.truth_T(), 12) for c in configs if c.kind != "refractive_index"}
    if len(truths) > 1:
        raise ConfigError("configs in one comparison must share the ground-truth parameter")
    for c in configs:
        if c.kind == "difference":
            r = estimate_nrf(c)
            bound = estimate.sigma_out(c.probe, c.truth_T(), c.eta_a, c.eta_b)
            emp, se, truth = r.sigma, r.std_error, c.truth_T()
        else:
            dist = estimate_transmittance(c) if c.kind == "transmittance" else estimate_refractive_index(c)
            emp, se, bound, truth = dist.std, dist.std_error, dist.predicted_std, dist.truth
        ok = bound is not None and abs(emp - bound) <= 3 * se
        rows.append({
            "label": c.label or f"{c.kind}:{c.probe}",
            "kind": c.kind,
            "probe": c.probe if isinstance(c.probe, str) else c.probe.get("kind", "custom"),
            "truth": truth,
            "empirical": emp,
            "std_error": se,
            "bound": bound if bound is not None else math.nan,
            "ratio": emp / bound if bound else math.nan,
            "within_3se": bool(ok),
        })
    return rows


# ------------------------------------------------- estimator interface

class TransmittanceEstimator(BaseEstimator):
    """Sample-mean transmittance estimator.

    Each row of ``X`` holds the photon counts of one block of repetitions.
    """

    def __init__(self, eta=1.0, n_photons=100.0):
        self.eta = eta
        self.n_photons = n_photons

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        return X.mean(axis=1) / (self.eta * self.n_photons)


class RefractiveIndexEstimator(BaseEstimator):
    """Analyte index from counts, normalized by an air reference.

    ``fit`` takes air-reference count blocks; ``predict`` maps signal count
    blocks to refractive-index estimates.
    """

    def __init__(self, stack=None, theta_deg=None, wavelength_nm=632.8, window=None):
        self.stack = stack
        self.theta_deg = theta_deg
        self.wavelength_nm = wavelength_nm
        self.window = window

    def fit(self, X, y=None):
        X = check_array(X)
        if self.stack is None:
            raise ConfigError("RefractiveIndexEstimator needs a layer stack", field="stack")
        theta = self.theta_deg if self.theta_deg is not None else inflection_angle(self.stack, self.wavelength_nm)
        self.inverter_ = IndexInverter(self.stack, theta, self.wavelength_nm, self.window)
        self.reference_ = float(X.mean())
        if self.reference_ <= 0:
            raise DomainError("air reference recorded no photons")
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "reference_")
        X = check_array(X)
        return np.array([self.inverter_.invert(m / self.reference_)[0] for m in X.mean(axis=1)])


__all__ = [
    "ExperimentConfig", "EstimateDistribution", "IndexInverter", "NrfEstimate",
    "RefractiveIndexEstimator", "TransmittanceEstimator", "compare_strategies", "concentration",
    "draw_counts", "estimate_nrf", "estimate_refractive_index", "estimate_transmittance",
    "inflection_angle", "sample_outcomes", "simulate_differential", "substream",
]
