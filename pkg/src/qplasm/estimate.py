"""Fisher information, quantum Fisher information and closed-form bounds.

Derivatives are central differences at steps h and h/2 combined by
Richardson extrapolation, so the truncation error is O(h^4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (BoundaryError, CatalogError, DegenerateInputError, DifferentiationError,
                     DomainError, ModelError)
from .states import FockState, GaussianState, omega_form, physicality_margin

DEFAULT_STEP = 1e-4
PROB_FLOOR = 1e-15
SLD_FLOOR = 1e-12


def richardson_derivative(f, x, h=DEFAULT_STEP):
    """(4 D(h/2) - D(h)) / 3 with D the central difference."""
    def central(step):
        return (np.asarray(f(x + step)) - np.asarray(f(x - step))) / (2 * step)
    return (4 * central(h / 2) - central(h)) / 3


# ---------------------------------------------------------- classical FI

@dataclass(frozen=True)
class OutcomeModel:
    """Discrete outcome distribution p(y|x).

    ``probability(x)`` returns the vector of probabilities over ``outcomes``.
    """

    outcomes: tuple
    probability: object
    domain: tuple = (-math.inf, math.inf)

    def __call__(self, x):
        p = np.asarray(self.probability(x), dtype=float)
        if p.shape != (len(self.outcomes),):
            raise ModelError(f"model returned {p.shape}, expected ({len(self.outcomes)},)")
        if np.any(p < -1e-12):
            raise ModelError(f"negative probability at x = {x}")
        if abs(p.sum() - 1) > 1e-9:
            raise ModelError(f"probabilities sum to {p.sum():.12g} at x = {x}")
        return p


@dataclass(frozen=True)
class FisherResult:
    value: float
    dropped_mass: float


def fisher_information(model, x, step=DEFAULT_STEP, full=False):
    """F(x) = sum_y (d_x p)^2 / p, skipping outcomes with p < 1e-15."""
    if step <= 0:
        raise DomainError("step must be positive")
    lo, hi = model.domain
    if not (lo < x - step and x + step < hi):
        raise DomainError(f"x = {x} with step {step} is not interior to {model.domain}")
    p = model(x)
    dp = richardson_derivative(model, x, step)
    keep = p >= PROB_FLOOR
    value = float((dp[keep] ** 2 / p[keep]).sum())
    result = FisherResult(value, float(p[~keep].sum()))
    return result if full else value


def counting_model(family, domain=(-math.inf, math.inf)):
    """Photon-counting OutcomeModel for a Fock-state family x -> FockState."""
    probe = family(0.5 * (domain[0] + domain[1]) if np.isfinite(domain).all() else 0.0)
    dims = probe.dims

    def prob(x):
        p = family(x).resized(dims).probabilities()
        return p.reshape(-1)

    outcomes = tuple(np.ndindex(*dims))
    return OutcomeModel(outcomes, prob, domain)


# ------------------------------------------------------------------- QFI

def _amplitudes(psi):
    if isinstance(psi, FockState):
        if psi.kind != "pure":
            raise DomainError("qfi_pure needs pure states")
        return psi.data
    return np.asarray(psi, dtype=complex)


def _common(arrays):
    dims = tuple(max(a.shape[i] for a in arrays) for i in range(arrays[0].ndim))
    return [np.pad(a, [(0, d - s) for d, s in zip(dims, a.shape)]) for a in arrays]


def qfi_pure(family, x, step=DEFAULT_STEP):
    """H = 4 (<d psi|d psi> - |<psi|d psi>|^2) for pure states."""
    h = step
    pts = [x - h, x - h / 2, x, x + h / 2, x + h]
    amps = _common([_amplitudes(family(t)) for t in pts])
    norms = np.array([np.vdot(a, a).real for a in amps])
    if np.abs(norms - norms[2]).max() > 1e-8:
        raise DifferentiationError(f"norm drifts by {np.abs(norms - norms[2]).max():.2e} across the stencil", "qfi_pure")
    d_h = (amps[4] - amps[0]) / (2 * h)
    d_h2 = (amps[3] - amps[1]) / h
    d = (4 * d_h2 - d_h) / 3
    psi = amps[2] / math.sqrt(norms[2])
    d = d / math.sqrt(norms[2])
    return float(4 * (np.vdot(d, d).real - abs(np.vdot(psi, d)) ** 2))


def _density(rho):
    if isinstance(rho, FockState):
        return rho.density_matrix(), rho.dims
    rho = np.asarray(rho, dtype=complex)
    return rho, None


def sld_qfi(rho, drho, floor=SLD_FLOOR):
    """Tr(rho L^2) from the spectral SLD sum."""
    p, v = np.linalg.eigh(rho)
    p = np.clip(p, 0.0, None)
    dm = v.conj().T @ drho @ v
    s = p[:, None] + p[None, :]
    mask = s >= floor
    return float((2 * np.abs(dm[mask]) ** 2 / s[mask]).sum())


def qfi_mixed(family, x, step=DEFAULT_STEP):
    """QFI of a density-matrix family via the spectral SLD."""
    raw = [family(t) for t in (x - step, x - step / 2, x, x + step / 2, x + step)]
    if all(isinstance(r, FockState) for r in raw):
        dims = tuple(max(r.dims[i] for r in raw) for i in range(raw[0].n_modes))
        mats = [r.resized(dims).density_matrix() for r in raw]
    else:
        mats = [_density(r)[0] for r in raw]
    for m in mats:
        if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.allclose(m, m.conj().T, atol=1e-10):
            raise DomainError("density matrix must be square and Hermitian")
    d = (4 * (mats[3] - mats[1]) / step - (mats[4] - mats[0]) / (2 * step)) / 3
    d = 0.5 * (d + d.conj().T)
    return sld_qfi(mats[2], d)


# ------------------------------------------------------ Gaussian routines

def _pad_vacuum(s):
    if s.n_modes == 2:
        return s.d, s.V
    d = np.concatenate([s.d, np.zeros(2)])
    V = np.zeros((4, 4))
    V[:2, :2] = s.V
    V[2:, 2:] = 0.5 * np.eye(2)
    return d, V


def gaussian_fidelity(s1, s2):
    """Uhlmann fidelity of two Gaussian states on up to two modes."""
    for s in (s1, s2):
        if physicality_margin(s.V) < -1e-10:
            raise DomainError("covariance violates V + i Omega/2 >= 0")
    if s1.n_modes != s2.n_modes:
        raise DomainError("states must have the same number of modes")
    d1, V1 = _pad_vacuum(s1)
    d2, V2 = _pad_vacuum(s2)
    Om = omega_form(2)
    Vs = V1 + V2
    dd = d2 - d1
    delta = np.linalg.det(Vs)
    gamma = 16 * np.linalg.det(Om @ V1 @ Om @ V2 - np.eye(4) / 4)
    # V + i Omega/2 is Hermitian; eigvalsh stays finite where a complex LU hits a zero pivot
    lam = 16 * float(np.prod(np.linalg.eigvalsh(V1 + 0.5j * Om)) * np.prod(np.linalg.eigvalsh(V2 + 0.5j * Om)))
    s = math.sqrt(max(gamma, 0.0)) + math.sqrt(max(lam, 0.0))
    rad = s * s - delta
    # pure states make the radicand vanish exactly; keep roundoff from leaking in
    if rad < 1e-13 * s * s:
        rad = 0.0
    expo = math.exp(-0.5 * dd @ np.linalg.solve(Vs, dd))
    return float(min(max(expo * (s + math.sqrt(rad)) / delta, 0.0), 1.0))


@dataclass(frozen=True)
class QfiResult:
    value: float
    flags: tuple = ()


def gaussian_qfi(family, x, dx=DEFAULT_STEP, full=False):
    """H = 8 (1 - sqrt F(rho_{x-dx/2}, rho_{x+dx/2})) / dx^2, Richardson over dx, dx/2."""
    f = [gaussian_fidelity(family(x - h / 2), family(x + h / 2)) for h in (dx, dx / 2)]
    if min(f) >= 1 - 1e-14:
        res = QfiResult(0.0, ("no information: fidelity equals 1 at both steps",))
        return res if full else res.value
    hs = [8 * (1 - math.sqrt(fi)) / h ** 2 for fi, h in zip(f, (dx, dx / 2))]
    res = QfiResult(max((4 * hs[1] - hs[0]) / 3, 0.0))
    return res if full else res.value


def _quadrature_marginal(state, mode, angle):
    d, V = state.block(mode)
    u = np.array([math.cos(angle), math.sin(angle)])
    return float(u @ d), float(u @ V @ u)


def homodyne_fisher(family, x, homodyne_angle, mode=0, step=DEFAULT_STEP):
    """FI of the quadrature x_theta = cos(theta) x + sin(theta) p on ``mode``."""
    mu, var = _quadrature_marginal(family(x), mode, homodyne_angle)
    if var < 1e-12:
        raise DomainError("measured quadrature has (near) zero variance")
    grad = richardson_derivative(lambda t: np.array(_quadrature_marginal(family(t), mode, homodyne_angle)), x, step)
    return float(grad[0] ** 2 / var + 0.5 * (grad[1] / var) ** 2)


def optimal_homodyne(family, x, mode=0, step=DEFAULT_STEP, grid=181):
    """Grid search plus bounded refinement over the homodyne angle in [0, pi)."""
    angles = np.linspace(0, math.pi, grid, endpoint=False)
    vals = np.array([homodyne_fisher(family, x, a, mode, step) for a in angles])
    k = int(np.argmax(vals))
    w = math.pi / grid
    res = minimize_scalar(lambda a: -homodyne_fisher(family, x, a, mode, step),
                          bounds=(angles[k] - w, angles[k] + w), method="bounded",
                          options={"xatol": 1e-10})
    if -res.fun > vals[k]:
        return float(-res.fun), float(res.x % math.pi)
    return float(vals[k]), float(angles[k])


# ------------------------------------------------------------ catalog

@dataclass(frozen=True)
class BoundResult:
    name: str
    value: float
    nu: int
    inputs: dict = field(default_factory=dict)


def _abs2(a):
    return abs(complex(a)) ** 2


def _snl_intensity(T, eta, N):
    return math.sqrt(T / (eta * N))


def _fock_intensity(T, eta, N):
    return math.sqrt(T * (1 - eta * T) / (eta * N))


def _sil(eta_a, eta_b, N):
    return (math.sqrt(eta_a) + math.sqrt(eta_b)) / (2 * math.sqrt(eta_a * eta_b)) / math.sqrt(N)


def _mzi_lossless(alpha, r):
    return 1 / math.sqrt(_abs2(alpha) * math.exp(2 * r) + math.sinh(r) ** 2)


def _mzi_lossy(alpha, r, eta):
    eff = eta / ((1 - eta) + math.exp(-2 * r) * eta)
    return 1 / math.sqrt(_abs2(alpha) * eff + eta * math.sinh(r) ** 2)


def _sm_squeezed(N):
    return 1 / math.sqrt(8 * (N + N * N))


def _noon(N):
    return 1 / N


def _two_smsv(N):
    return 1 / math.sqrt(N * (N + 1))


def _homodyne_lossy(alpha, r, eta):
    a2 = _abs2(alpha)
    return math.sqrt(1 / (a2 * math.exp(2 * r)) + (1 - eta) / (eta * a2))


def _su11_external(eta_e, delta_phi):
    return delta_phi / math.sqrt(eta_e)


def _su11_internal(eta_i, N_i, alpha, beta, delta_phi):
    return math.sqrt(1 + (1 - eta_i) / eta_i * N_i / (_abs2(alpha) + _abs2(beta))) * delta_phi


CATALOG = {
    "snl_intensity": (_snl_intensity, "coherent-state transmittance sensing, intensity readout"),
    "fock_intensity": (_fock_intensity, "Fock-state transmittance sensing, ultimate single-mode bound"),
    "sil": (_sil, "lossy interferometer with coherent light and intensity detection"),
    "mzi_lossless_cs_sv": (_mzi_lossless, "lossless MZI, coherent + squeezed vacuum inputs"),
    "mzi_lossy_cs_sv": (_mzi_lossy, "MZI with balanced loss eta, coherent + squeezed vacuum"),
    "sm_squeezed_phase": (_sm_squeezed, "single-mode squeezed vacuum phase sensing"),
    "noon": (_noon, "NOON state, Heisenberg scaling"),
    "two_smsv_optimal": (_two_smsv, "two single-mode squeezed vacua with opposite phases"),
    "homodyne_lossy": (_homodyne_lossy, "lossy MZI, homodyne readout at the optimal angle"),
    "su11_external": (_su11_external, "SU(1,1) interferometer with external loss"),
    "su11_internal": (_su11_internal, "SU(1,1) interferometer with internal loss"),
}

_UNIT_PARAMS = {"T", "eta", "eta_a", "eta_b", "eta_e", "eta_i"}
_POSITIVE_PARAMS = {"N", "N_i", "delta_phi", "eta", "eta_a", "eta_b", "eta_e", "eta_i", "T"}


def catalog_entries():
    return sorted(CATALOG)


def catalog_params(name):
    fn = CATALOG[name][0]
    return fn.__code__.co_varnames[:fn.__code__.co_argcount]


def bound_catalog(name, params=None, nu=1, **kw):
    """Closed-form standard deviation bound for a named scheme, including 1/sqrt(nu)."""
    if name not in CATALOG:
        raise CatalogError(f"unknown bound {name!r}; entries: {', '.join(catalog_entries())}")
    params = dict(params or {}, **kw)
    nu = params.pop("nu", nu)
    if nu < 1 or int(nu) != nu:
        raise DomainError("nu must be a positive integer")
    fn = CATALOG[name][0]
    wanted = catalog_params(name)
    if name == "sm_squeezed_phase" and "N" not in params and "r" in params:
        params["N"] = math.sinh(params.pop("r")) ** 2
    missing = [k for k in wanted if k not in params]
    if missing:
        raise DomainError(f"{name} needs parameters {', '.join(missing)}")
    args = {k: params[k] for k in wanted}
    for k, v in args.items():
        if k in _UNIT_PARAMS and not 0 <= v <= 1:
            raise DomainError(f"{k} must lie in [0, 1], got {v}")
        if k in _POSITIVE_PARAMS and not v > 0:
            raise DomainError(f"{k} must be positive, got {v}")
    value = fn(**args) / math.sqrt(nu)
    return BoundResult(name, float(value), int(nu), args)


# ------------------------------------------------------------ NOON

@dataclass(frozen=True)
class NoonCoincidence:
    p_coin: float
    delta_phi: float
    threshold: float
    super_sensitive: bool
    eta_eff: float
    flags: tuple = ()


def noon_coincidence(phi, f_N, V_N, N, eta_a=1.0, eta_b=1.0):
    """Coincidence probability, its CR bound and the super-sensitivity threshold."""
    for name, v in (("f_N", f_N), ("V_N", V_N), ("eta_a", eta_a), ("eta_b", eta_b)):
        if not 0 <= v <= 1:
            raise DomainError(f"{name} must lie in [0, 1], got {v}")
    if N < 1:
        raise DomainError("N must be >= 1")
    if f_N == 0 or eta_a * eta_b == 0:
        raise DegenerateInputError("no coincidences possible with f_N = 0 or zero transmission")
    p = f_N * (1 + V_N * math.cos(N * phi)) / 2
    eta_eff = (2 * math.sqrt(eta_a * eta_b) / (math.sqrt(eta_a) + math.sqrt(eta_b))) ** 2
    threshold = math.sqrt(eta_eff / (f_N ** 2 * N))
    denom = f_N * V_N * N * abs(math.sin(N * phi))
    flags = ()
    if denom < 1e-15:
        dphi = math.inf
        flags = ("infinite bound: f_N V_N N |sin(N phi)| = 0",)
    else:
        dphi = 2 * math.sqrt(max(p * (1 - p), 0.0)) / denom
    return NoonCoincidence(p, dphi, threshold, V_N > threshold, eta_eff, flags)


# ------------------------------------------- differential intensity

class AsymmetricProbeError(DomainError):
    """SNR formulas assume equal mean photon numbers in both input modes."""


_PROBE_NOISE = {"tf": lambda N: (-1.0, 0.0), "tmsv": lambda N: (N, 0.0), "pc": lambda N: (0.0, 1.0)}


@dataclass(frozen=True)
class IntensityFigures:
    probe: str
    sigma_out: float
    _snr: float = None
    _r_snr: float = None
    flags: tuple = ()

    @property
    def snr(self):
        if self._snr is None:
            raise AsymmetricProbeError(f"SNR is defined only for symmetric probes, not {self.probe!r}")
        return self._snr

    @property
    def r_snr(self):
        if self._r_snr is None:
            raise AsymmetricProbeError(f"R_SNR is defined only for symmetric probes, not {self.probe!r}")
        return self._r_snr


def sigma_out(probe, T, eta_a, eta_b, G=None, alpha2=0.0):
    """Output noise reduction factor for tf, tmsv, tmsd (|alpha|^2 >> 1) and pc probes."""
    ta, eb = T * eta_a, eta_b
    if probe == "tf":
        return 1 - (ta ** 2 + eb ** 2) / (ta + eb)
    if probe == "pc":
        return 1.0
    if G is None or G < 1:
        raise DomainError(f"{probe} needs a gain G >= 1")
    if probe == "tmsv":
        return 1 + (G * alpha2 * (ta - eb) ** 2 - (ta ** 2 + eb ** 2)) / (ta + eb)
    if probe == "tmsd":
        return 1 + 2 * (G - 1) * (G * (ta - eb) ** 2 - eb ** 2) / (G * ta + (G - 1) * eb)
    raise DomainError(f"unknown probe {probe!r}; choose tf, tmsv, tmsd or pc")


def differential_intensity_figures(probe, T, eta_a, eta_b, N=None, G=None, alpha2=0.0):
    """sigma_out, SNR and R_SNR for intensity-difference sensing.

    For ``tmsv`` the per-mode mean is G - 1 unless ``N`` is given; ``alpha2``
    is the seed intensity appearing in the printed TMSV expression.
    """
    for name, v in (("T", T), ("eta_a", eta_a), ("eta_b", eta_b)):
        if not 0 <= v <= 1:
            raise DomainError(f"{name} must lie in [0, 1], got {v}")
    if T * eta_a + eta_b == 0:
        raise DegenerateInputError("no light reaches either detector")
    sig = sigma_out(probe, T, eta_a, eta_b, G, alpha2)
    if probe == "tmsd":
        return IntensityFigures(probe, sig, flags=("asymmetric probe: SNR not defined",))
    if probe == "tmsv" and N is None:
        N = G - 1
    if N is None or N <= 0:
        raise DomainError("symmetric probes need a per-mode mean N > 0")
    Q, s_in = _PROBE_NOISE[probe](N)
    ta, eb = T * eta_a, eta_b
    noise = (ta - eb) ** 2 * Q + 2 * ta * eb * (s_in - 1) + (ta + eb)
    flags = ()
    if abs(eb - ta) < 1e-15:
        flags = ("zero signal: T eta_a = eta_b",)
    snr = abs(eb - ta) * N / math.sqrt(N * noise) if noise > 0 else math.inf
    r_snr = math.sqrt((ta + eb) / noise) if noise > 0 else math.inf
    return IntensityFigures(probe, sig, snr, r_snr, flags)


# ------------------------------------------------------- multiparameter

@dataclass(frozen=True)
class Qfim:
    matrix: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if not np.allclose(m, m.T, atol=1e-10):
            raise DomainError("QFIM must be symmetric")
        if np.linalg.eigvalsh(m).min() < -1e-10 * max(1.0, abs(m).max()):
            raise DomainError("QFIM must be positive semidefinite")
        object.__setattr__(self, "matrix", m)


def pinv_support(H, rel=1e-10):
    w, v = np.linalg.eigh(H)
    keep = w > rel * max(w.max(), 0.0)
    return (v[:, keep] / w[keep]) @ v[:, keep].T


def multiparam_bounds(kind, params):
    """``qfim_transmittances`` -> Qfim; ``projected_variance`` -> n^T H^+ n / nu."""
    if kind == "qfim_transmittances":
        T = np.atleast_1d(np.asarray(params["T"], dtype=float))
        K = T.size
        eta = np.broadcast_to(np.asarray(params.get("eta", 1.0), dtype=float), (K,))
        N = np.broadcast_to(np.asarray(params["N"], dtype=float), (K,))
        if np.any((T <= 0) | (T >= 1)):
            raise BoundaryError("every T_k must lie strictly inside (0, 1)")
        if np.any((eta <= 0) | (eta > 1)) or np.any(N <= 0):
            raise DomainError("need eta_k in (0, 1] and N_k > 0")
        probe = params.get("probe", "fock")
        if probe == "fock":
            diag = eta * N / (T * (1 - eta * T))
        elif probe == "pc":
            diag = eta * N / T
        else:
            raise DomainError("probe must be 'fock' or 'pc'")
        return Qfim(np.diag(diag), tuple(f"T{k + 1}" for k in range(K)))
    if kind == "projected_variance":
        H = params["H"]
        H = H.matrix if isinstance(H, Qfim) else np.asarray(H, dtype=float)
        n = np.asarray(params["n"], dtype=float)
        if not np.any(n):
            raise DomainError("projection vector must be nonzero")
        nu = params.get("nu", 1)
        return float(n @ pinv_support(H) @ n / nu)
    raise DomainError(f"unknown kind {kind!r}")
