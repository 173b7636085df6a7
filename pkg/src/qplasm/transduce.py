"""Plasmonic transducer physics.

Permittivity models, surface plasmon dispersion, three-layer Kretschmann
reflectance, resonance search, sensitivities and figures of merit for both
propagating and localized plasmons.

Conventions: fields vary as exp(-i w t), so a lossy metal has Im(eps) > 0.
Angles are degrees at the interface and radians inside; wavelengths are in
nm, angular frequencies in rad/s.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import constants, optimize, signal
from scipy.interpolate import CubicSpline

from .errors import AmbiguityError, DomainError, PoleError, SingularityError

C = constants.c
NM = 1e-9


def omega_from_wavelength(wavelength_nm):
    return 2 * np.pi * C / (np.asarray(wavelength_nm, dtype=float) * NM)


def wavelength_from_omega(omega):
    return 2 * np.pi * C / np.asarray(omega, dtype=float) / NM


def _branch_sqrt(z):
    """Square root with Re >= 0, and Im >= 0 on the imaginary axis."""
    w = np.sqrt(np.asarray(z, dtype=complex))
    flip = (w.real < 0) | ((w.real == 0) & (w.imag < 0))
    return np.where(flip, -w, w)


# ---------------------------------------------------------------- materials

@dataclass(frozen=True, eq=False)
class MaterialModel:
    """Drude metal, optionally backed by a tabulated permittivity.

    ``eps_inf`` defaults to 1, which is the free-electron form
    1 - wp^2/(w^2 + i g w).  Table samples are (wavelength nm, complex eps)
    and take precedence inside their range when ``prefer_table`` is set.
    """

    plasma_frequency: float
    damping: float = 0.0
    eps_inf: float = 1.0
    table_wavelength_nm: np.ndarray | None = None
    table_permittivity: np.ndarray | None = None
    interpolation: str = "cubic"
    prefer_table: bool = True
    name: str = ""
    _splines: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.plasma_frequency > 0:
            raise DomainError("plasma_frequency must be > 0")
        if not self.damping >= 0:
            raise DomainError("damping must be >= 0")
        if self.interpolation not in ("cubic", "linear"):
            raise DomainError("interpolation must be 'cubic' or 'linear'")
        if (self.table_wavelength_nm is None) != (self.table_permittivity is None):
            raise DomainError("table needs both wavelengths and permittivities")
        if self.table_wavelength_nm is not None:
            wl = np.asarray(self.table_wavelength_nm, dtype=float)
            eps = np.asarray(self.table_permittivity, dtype=complex)
            if wl.ndim != 1 or wl.shape != eps.shape or wl.size < 2:
                raise DomainError("table must be two equal-length 1-D columns")
            if np.any(np.diff(wl) <= 0):
                raise DomainError("table wavelengths must be strictly increasing")
            object.__setattr__(self, "table_wavelength_nm", wl)
            object.__setattr__(self, "table_permittivity", eps)
            if self.interpolation == "cubic" and wl.size >= 4:
                splines = (CubicSpline(wl, eps.real), CubicSpline(wl, eps.imag))
                object.__setattr__(self, "_splines", splines)

    @property
    def has_table(self):
        return self.table_wavelength_nm is not None

    def _use_table(self, wavelength_nm):
        if not (self.has_table and self.prefer_table):
            return np.zeros(np.shape(wavelength_nm), dtype=bool)
        wl = np.asarray(wavelength_nm, dtype=float)
        return (wl >= self.table_wavelength_nm[0]) & (wl <= self.table_wavelength_nm[-1])

    def _table_eval(self, wl, nu=0):
        if self._splines is not None:
            re, im = self._splines
            return re(wl, nu) + 1j * im(wl, nu)
        x, y = self.table_wavelength_nm, self.table_permittivity
        if nu == 0:
            return np.interp(wl, x, y.real) + 1j * np.interp(wl, x, y.imag)
        slope = np.diff(y) / np.diff(x)
        idx = np.clip(np.searchsorted(x, wl, side="right") - 1, 0, slope.size - 1)
        return slope[idx]

    def drude(self, omega):
        w = np.asarray(omega, dtype=float)
        return self.eps_inf - self.plasma_frequency**2 / (w**2 + 1j * self.damping * w)

    def permittivity(self, wavelength_nm):
        """Complex permittivity at the given vacuum wavelength(s)."""
        wl = np.asarray(wavelength_nm, dtype=float)
        out = np.asarray(self.drude(omega_from_wavelength(wl)), dtype=complex)
        mask = self._use_table(wl)
        if np.any(mask):
            out = np.where(mask, self._table_eval(wl), out)
        return out[()] if out.ndim == 0 else out

    def permittivity_derivative(self, wavelength_nm):
        """d eps / d lambda in 1/nm."""
        wl = np.asarray(wavelength_nm, dtype=float)
        w = omega_from_wavelength(wl)
        g = self.damping
        deps_dw = self.plasma_frequency**2 * (2 * w + 1j * g) / (w**2 + 1j * g * w) ** 2
        out = np.asarray(deps_dw * (-w / wl), dtype=complex)
        mask = self._use_table(wl)
        if np.any(mask):
            out = np.where(mask, self._table_eval(wl, nu=1), out)
        return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class Dielectric:
    """Transparent medium: constant permittivity or a Sellmeier law.

    Sellmeier coefficients use wavelengths in micrometres:
    n^2 = 1 + sum B_i l^2 / (l^2 - C_i).
    """

    constant: float | None = None
    sellmeier_b: tuple = ()
    sellmeier_c: tuple = ()
    name: str = ""

    def __post_init__(self):
        if self.constant is None and not self.sellmeier_b:
            raise DomainError("dielectric needs a constant or Sellmeier terms")
        if len(self.sellmeier_b) != len(self.sellmeier_c):
            raise DomainError("Sellmeier B and C lists differ in length")

    @classmethod
    def from_index(cls, n, name=""):
        return cls(constant=float(n) ** 2, name=name)

    def permittivity(self, wavelength_nm=632.8):
        if self.constant is not None:
            return np.full(np.shape(wavelength_nm), float(self.constant))[()]
        l2 = (np.asarray(wavelength_nm, dtype=float) * 1e-3) ** 2
        eps = 1.0 + sum(b * l2 / (l2 - c) for b, c in zip(self.sellmeier_b, self.sellmeier_c))
        return eps[()] if np.ndim(eps) == 0 else eps

    def index(self, wavelength_nm=632.8):
        return np.sqrt(self.permittivity(wavelength_nm))

    def index_derivative(self, wavelength_nm=632.8):
        """dn/d lambda in 1/nm."""
        if self.constant is not None:
            return np.zeros(np.shape(wavelength_nm))[()]
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        l2 = lam**2
        deps = sum(-2 * b * c * lam / (l2 - c) ** 2 for b, c in zip(self.sellmeier_b, self.sellmeier_c))
        out = deps / (2 * self.index(wavelength_nm)) * 1e-3
        return out[()] if np.ndim(out) == 0 else out


def as_dielectric(value):
    if isinstance(value, Dielectric):
        return value
    return Dielectric(constant=float(value))


@dataclass(frozen=True, eq=False)
class LayerStack:
    """Prism / metal film / analyte, ordered from the illuminated side."""

    prism_permittivity: Dielectric | float
    metal: MaterialModel | complex
    metal_thickness: float
    analyte_permittivity: Dielectric | float
    reference_wavelength_nm: float = 632.8

    def __post_init__(self):
        prism = as_dielectric(self.prism_permittivity)
        analyte = as_dielectric(self.analyte_permittivity)
        object.__setattr__(self, "prism_permittivity", prism)
        object.__setattr__(self, "analyte_permittivity", analyte)
        if not self.metal_thickness > 0:
            raise DomainError("metal_thickness must be > 0 nm")
        lam = self.reference_wavelength_nm
        ep, ea = prism.permittivity(lam), analyte.permittivity(lam)
        if not ep > 1:
            raise DomainError("prism permittivity must exceed 1")
        if not ea >= 1:
            raise DomainError("analyte permittivity must be >= 1")
        if not ep > ea:
            raise DomainError(
                "prism must be optically denser than the analyte "
                f"(eps_p={ep:.6g} <= eps_a={ea:.6g}) for evanescent coupling"
            )

    def metal_permittivity(self, wavelength_nm):
        if isinstance(self.metal, MaterialModel):
            return self.metal.permittivity(wavelength_nm)
        return np.full(np.shape(wavelength_nm), complex(self.metal))[()]

    def with_analyte(self, eps_a):
        return LayerStack(self.prism_permittivity, self.metal, self.metal_thickness,
                          eps_a, self.reference_wavelength_nm)

    def with_metal(self, metal):
        return LayerStack(self.prism_permittivity, metal, self.metal_thickness,
                          self.analyte_permittivity, self.reference_wavelength_nm)


def load_material_table(path):
    """Read ``wavelength_nm eps_real eps_imag`` columns; '#' starts a comment."""
    data = np.loadtxt(path, comments="#", ndmin=2, delimiter=None)
    if data.shape[1] != 3:
        raise DomainError(f"{path}: expected 3 columns, found {data.shape[1]}")
    wl = data[:, 0]
    if np.any(np.diff(wl) <= 0):
        bad = int(np.argmax(np.diff(wl) <= 0)) + 1
        raise DomainError(f"{path}: wavelengths not strictly increasing at row {bad + 1}")
    return wl, data[:, 1] + 1j * data[:, 2]


def save_material_table(path, wavelength_nm, permittivity, header=""):
    eps = np.asarray(permittivity, dtype=complex)
    cols = np.column_stack([wavelength_nm, eps.real, eps.imag])
    head = (header + "\n" if header else "") + "wavelength_nm eps_real eps_imag"
    np.savetxt(path, cols, fmt="%.17g", header=head, comments="# ")


DATA_DIR = Path(__file__).with_name("data")


def default_materials(path=None):
    """Shipped metal and prism models keyed by name.

    The parameter file is user-replaceable; see data/materials.toml.
    """
    from .config import read_toml

    path = Path(path) if path else DATA_DIR / "materials.toml"
    raw = read_toml(path)
    out = {}
    for name, m in raw.get("metal", {}).items():
        wl = eps = None
        if "table" in m:
            wl, eps = load_material_table(path.parent / m["table"])
        out[name] = MaterialModel(
            plasma_frequency=float(m["plasma_frequency_rad_s"]),
            damping=float(m.get("damping_rad_s", 0.0)),
            eps_inf=float(m.get("eps_inf", 1.0)),
            table_wavelength_nm=wl,
            table_permittivity=eps,
            interpolation=m.get("interpolation", "cubic"),
            name=name,
        )
    for name, d in raw.get("dielectric", {}).items():
        if "index" in d:
            out[name] = Dielectric.from_index(d["index"], name=name)
        else:
            out[name] = Dielectric(sellmeier_b=tuple(d["sellmeier_b"]),
                                   sellmeier_c=tuple(d["sellmeier_c_um2"]), name=name)
    return out


# --------------------------------------------------------- Drude and SPPs

def _metal_eps(material, omega):
    if isinstance(material, MaterialModel):
        return drude_permittivity(omega, material)
    return complex(material)


def drude_permittivity(omega, material, use_table=True):
    """Permittivity of ``material`` at angular frequency ``omega`` (rad/s)."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise DomainError("angular frequency must be > 0")
    if use_table and material.has_table and material.prefer_table:
        return material.permittivity(wavelength_from_omega(w))
    out = material.drude(w)
    return out[()] if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SppMode:
    parallel_wavenumber: complex
    kappa_d: complex
    kappa_m: complex
    eps_d: float
    eps_m: complex

    def bound_residual(self):
        """|eps_d/kappa_d + eps_m/kappa_m| relative to its terms."""
        a = self.eps_d / self.kappa_d
        b = self.eps_m / self.kappa_m
        return abs(a + b) / max(abs(a), abs(b))


def spp_dispersion(omega, eps_d, material):
    """Surface plasmon wavenumber and decay constants at a flat interface.

    ``material`` is a MaterialModel or a complex permittivity.
    """
    if not omega > 0:
        raise DomainError("angular frequency must be > 0")
    if not eps_d > 0:
        raise DomainError("eps_d must be > 0")
    eps_m = complex(_metal_eps(material, omega))
    denom = eps_d + eps_m
    if denom == 0:
        raise PoleError("eps_d + eps_m = 0 (surface plasma resonance)", "spp_dispersion")
    k0 = omega / C
    kpar = complex(k0 * _branch_sqrt(eps_d * eps_m / denom))
    kd = complex(_branch_sqrt(kpar**2 - k0**2 * eps_d))
    km = complex(_branch_sqrt(kpar**2 - k0**2 * eps_m))
    return SppMode(kpar, kd, km, float(eps_d), eps_m)


def surface_plasma_frequency(material, eps_d):
    if eps_d < 0:
        raise DomainError("eps_d must be >= 0")
    wp = material.plasma_frequency if isinstance(material, MaterialModel) else float(material)
    return wp / math.sqrt(1 + eps_d)


# ------------------------------------------------------------- Kretschmann

def _fresnel_p(ku, eu, kv, ev):
    a, b = ku / eu, kv / ev
    return (a - b) / (a + b)


def kretschmann_reflectance(theta_deg, wavelength_nm, stack):
    """p-polarized reflection coefficient r and reflectance R = |r|^2.

    Broadcasts over arrays of angle and wavelength.
    """
    theta = np.asarray(theta_deg, dtype=float)
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any((theta < 0) | (theta >= 90)):
        raise DomainError("incidence angle must lie in [0, 90) degrees")
    if np.any(lam <= 0):
        raise DomainError("wavelength must be > 0")
    e1 = np.asarray(stack.prism_permittivity.permittivity(lam), dtype=float)
    e2 = np.asarray(stack.metal_permittivity(lam), dtype=complex)
    e3 = np.asarray(stack.analyte_permittivity.permittivity(lam), dtype=float)
    k0 = 2 * np.pi / (lam * NM)
    s2 = np.sin(np.radians(theta)) ** 2
    # sqrt(eps_u) k0 sqrt(1 - (eps_1/eps_u) sin^2) taken as one pinned root
    k1 = k0 * _branch_sqrt(e1 * (1 - s2) + 0j)
    k2 = k0 * _branch_sqrt(e2 - e1 * s2)
    k3 = k0 * _branch_sqrt(e3 - e1 * s2 + 0j)
    r12 = _fresnel_p(k1, e1, k2, e2)
    r23 = _fresnel_p(k2, e2, k3, e3)
    arg = 2j * k2 * stack.metal_thickness * NM
    if np.any(arg.real > 700):
        warnings.warn("clamped exp(i2k2d) magnitude to avoid overflow", RuntimeWarning)
        arg = np.minimum(arg.real, 700) + 1j * arg.imag
    ph = np.exp(arg)
    r = (ph * r23 + r12) / (ph * r23 * r12 + 1)
    R = np.clip(np.abs(r) ** 2, 0.0, 1.0)
    if r.ndim == 0:
        return complex(r), float(R)
    return r, R


def fresnel_two_layer(theta_deg, wavelength_nm, stack):
    """Direct prism/analyte p-reflection, ignoring the metal film."""
    lam = np.asarray(wavelength_nm, dtype=float)
    e1 = stack.prism_permittivity.permittivity(lam)
    e3 = stack.analyte_permittivity.permittivity(lam)
    kx2 = e1 * np.sin(np.radians(theta_deg)) ** 2
    k1 = _branch_sqrt(e1 - kx2 + 0j)
    k3 = _branch_sqrt(e3 - kx2 + 0j)
    return _fresnel_p(k1, e1, k3, e3)


def critical_angle(stack, wavelength_nm=632.8):
    ep = stack.prism_permittivity.permittivity(wavelength_nm)
    ea = stack.analyte_permittivity.permittivity(wavelength_nm)
    return math.degrees(math.asin(math.sqrt(ea / ep)))


def resonance_angle(n_p, n_a, eps_m_real):
    """Angle (degrees) at which the prism wavevector matches the SPP."""
    e = float(eps_m_real)
    if e + n_a**2 == 0:
        raise PoleError("eps_m' = -n_a^2", "resonance_angle")
    target = n_a**2 * e / (n_a**2 + e)
    if target <= 0:
        raise DomainError("no bound surface plasmon for this permittivity")
    s = math.sqrt(target) / n_p
    if s >= 1:
        raise DomainError("resonance lies beyond grazing incidence for this prism")
    return math.degrees(math.asin(s))


@dataclass(frozen=True)
class Resonance:
    location: float
    reflectance: float
    mode: str


def find_resonance(stack, mode="angular", window=None, *, wavelength_nm=632.8,
                   theta_deg=None, points=2000, tol=1e-6, min_depth=1e-2):
    """Locate the single reflectance dip inside ``window``.

    ``mode="angular"`` scans theta (degrees) at fixed ``wavelength_nm``;
    ``mode="spectral"`` scans wavelength (nm) at fixed ``theta_deg``.
    A dip must be at least ``min_depth`` deep relative to its surroundings;
    zero or several dips raise AmbiguityError.
    """
    if mode == "angular":
        lo, hi = window if window is not None else (critical_angle(stack, wavelength_nm) + 1e-6, 89.9)
        f = lambda x: kretschmann_reflectance(x, wavelength_nm, stack)[1]
    elif mode == "spectral":
        if theta_deg is None:
            raise DomainError("spectral search needs theta_deg")
        if window is None:
            raise DomainError("spectral search needs a wavelength window")
        lo, hi = window
        f = lambda x: kretschmann_reflectance(theta_deg, x, stack)[1]
    else:
        raise DomainError(f"unknown resonance mode {mode!r}")
    if not hi > lo:
        raise DomainError("search window must have hi > lo")
    grid = np.linspace(lo, hi, int(points))
    R = f(grid)
    peaks, _ = signal.find_peaks(-R, prominence=min_depth)
    if len(peaks) != 1:
        raise AmbiguityError(
            f"expected exactly one reflectance dip in [{lo:g}, {hi:g}], found {len(peaks)}",
            "find_resonance",
            candidates=[float(grid[i]) for i in peaks],
        )
    i = int(peaks[0])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(f, bracket=(a, grid[i], b), method="golden",
                                   options={"xtol": tol / max(abs(grid[i]), 1.0)})
    x = float(res.x)
    return Resonance(x, float(f(x)), mode)


def sensitivity_closed_form(kind, n_a, n_p, eps_m_real, deps_dlambda=None, dnp_dlambda=None):
    """Resonance shift per refractive index unit.

    Angular kind returns deg/RIU; spectral returns nm/RIU and needs the
    dispersion slopes d eps_m'/d lambda and d n_p/d lambda (per nm).
    """
    e = float(eps_m_real)
    if not e < 0:
        raise DomainError("eps_m' must be negative")
    na2, np2 = n_a**2, n_p**2
    if kind == "angular":
        pole = np2 * na2 / (na2 - np2)
        A = e * (na2 - np2) - np2 * na2
        if A <= 0 or e + na2 == 0:
            raise SingularityError(
                f"angular sensitivity singular: eps_m'={e:.6g} at/past pole {pole:.6g}",
                "sensitivity_closed_form", pole=pole)
        s = e * math.sqrt(-e) / ((e + na2) * math.sqrt(A))
        return abs(math.degrees(s))
    if kind == "spectral":
        if deps_dlambda is None or dnp_dlambda is None:
            raise DomainError("spectral sensitivity needs deps_dlambda and dnp_dlambda")
        den = 0.5 * n_a**3 * abs(deps_dlambda) + (e + na2) * e * dnp_dlambda * n_a / n_p
        if den == 0:
            raise SingularityError("spectral sensitivity denominator vanishes",
                                   "sensitivity_closed_form")
        return abs(e**2 / den)
    raise DomainError(f"unknown sensitivity kind {kind!r}")


def stack_sensitivity(kind, stack, wavelength_nm):
    """Closed-form sensitivity for a stack at one wavelength."""
    lam = wavelength_nm
    n_a = float(stack.analyte_permittivity.index(lam))
    n_p = float(stack.prism_permittivity.index(lam))
    e = complex(stack.metal_permittivity(lam)).real
    if kind == "angular":
        return sensitivity_closed_form("angular", n_a, n_p, e)
    if isinstance(stack.metal, MaterialModel):
        de = complex(stack.metal.permittivity_derivative(lam)).real
    else:
        de = 0.0
    dn = float(stack.prism_permittivity.index_derivative(lam))
    return sensitivity_closed_form("spectral", n_a, n_p, e, de, dn)


# ---------------------------------------------------------------------- LSP

def lsp_resonance(l, eps_d, material):
    """Free-electron LSP frequency of multipole order ``l`` (math.inf allowed)."""
    wp = material.plasma_frequency if isinstance(material, MaterialModel) else float(material)
    if l == math.inf:
        return wp / math.sqrt(1 + eps_d)
    if l < 1 or int(l) != l:
        raise DomainError("multipole order must be a positive integer or math.inf")
    return wp * math.sqrt(l / (eps_d * (l + 1) + l))


def lsp_cross_sections(omega, eps_d, material, volume):
    """Quasi-static scattering and absorption cross sections (m^2)."""
    if np.any(np.asarray(omega) <= 0) or eps_d <= 0 or volume <= 0:
        raise DomainError("omega, eps_d and volume must be > 0")
    w = np.asarray(omega, dtype=float)
    eps = np.asarray(_metal_eps(material, w) if isinstance(material, MaterialModel)
                     else np.full(w.shape, complex(material)))
    e1, e2 = eps.real, eps.imag
    den = (e1 + 2 * eps_d) ** 2 + e2**2
    sca = 2 * w**4 * eps_d**2 * volume**2 / C**4 * ((e1 - eps_d) ** 2 + e2**2) / den
    ab = 9 * w * eps_d**1.5 * volume / C * e2 / den
    if np.ndim(sca) == 0:
        return float(sca), float(ab)
    return sca, ab


# ---------------------------------------------------------- figures of merit

@dataclass(frozen=True)
class FigureOfMerit:
    sensitivity: float | None = None
    linewidth: float | None = None
    fom: float | None = None
    fom_star: float | None = None
    lod: float | None = None
    fom_star_wavelength: float | None = None
    diagnostics: tuple = ()


def figures_of_merit(sensitivity=None, linewidth_nm=None, delta_y_min=None, spectrum=None,
                     step=1e-5):
    """LOD, FOM and FOM* from whatever inputs are supplied.

    ``spectrum`` is ``(wavelengths_nm, intensity, n_a)`` where
    ``intensity(wavelengths, n_a)`` returns I(lambda); FOM* is the grid
    maximum of |dI/dn_a| / I with a symmetric step in n_a.
    """
    diags = []
    lod = fom = fom_star = lam_star = None
    if sensitivity is not None and sensitivity < 0:
        raise DomainError("sensitivity must be >= 0")
    if delta_y_min is not None:
        if not sensitivity:
            raise DomainError("LOD needs a positive sensitivity")
        lod = delta_y_min / sensitivity
    if linewidth_nm is not None:
        if linewidth_nm <= 0:
            raise DomainError("linewidth must be > 0")
        if sensitivity is None:
            raise DomainError("FOM needs a sensitivity")
        fom = sensitivity / linewidth_nm
    if spectrum is not None:
        lam, intensity, n_a = spectrum
        lam = np.asarray(lam, dtype=float)
        up = np.asarray(intensity(lam, n_a + step), dtype=float)
        dn = np.asarray(intensity(lam, n_a - step), dtype=float)
        I0 = np.asarray(intensity(lam, n_a), dtype=float)
        dI = np.abs(up - dn) / (2 * step)
        zero = I0 == 0
        ratio = np.where(zero, -np.inf, dI / np.where(zero, 1.0, I0))
        if np.any(zero & (dI > 0)):
            diags.append("I(lambda)=0 at some grid points; excluded from FOM* maximum")
        k = int(np.argmax(ratio))
        if not np.isfinite(ratio[k]):
            diags.append("FOM* undefined: intensity vanishes everywhere")
        else:
            fom_star, lam_star = float(ratio[k]), float(lam[k])
    return FigureOfMerit(sensitivity, linewidth_nm, fom, fom_star, lod, lam_star, tuple(diags))
