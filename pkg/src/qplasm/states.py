"""Probe states in truncated Fock space and in Gaussian moment form.

Quadratures are x = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)), so the
vacuum covariance is I/2.  Ordering of the moment vector is (x1, p1, x2, p2).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _fock
from .errors import DegenerateInputError, DomainError, ResourceError

DEFAULT_MAX_CUTOFF = 64
NORM_TOL = 1e-10
LEAK_TOL = 1e-8


def omega_form(n_modes):
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def symplectic_from_bogoliubov(U, W):
    """Real symplectic matrix for a -> U a + W a^dag (mode vector form)."""
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    A, B = U + W, U - W
    m = U.shape[0]
    S = np.zeros((2 * m, 2 * m))
    S[0::2, 0::2] = A.real
    S[0::2, 1::2] = -B.imag
    S[1::2, 0::2] = A.imag
    S[1::2, 1::2] = B.real
    return S


def _amplitude_to_quadrature(alpha):
    a = np.atleast_1d(np.asarray(alpha, dtype=complex))
    d = np.empty(2 * a.size)
    d[0::2] = math.sqrt(2) * a.real
    d[1::2] = math.sqrt(2) * a.imag
    return d


# ----------------------------------------------------------------- Gaussian

@dataclass(frozen=True, eq=False)
class GaussianState:
    """First moments ``d`` and covariance ``V`` over (x1, p1[, x2, p2])."""

    d: np.ndarray
    V: np.ndarray
    labels: tuple = ("a", "b")

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).reshape(-1)
        V = np.asarray(self.V, dtype=float)
        if V.shape != (d.size, d.size) or d.size not in (2, 4):
            raise DomainError("Gaussian state needs d of length 2 or 4 and matching V")
        if not np.allclose(V, V.T, atol=1e-12, rtol=0):
            raise DomainError("covariance matrix must be symmetric")
        V = 0.5 * (V + V.T)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "V", V)
        if physicality_margin(V) < -1e-10:
            raise DomainError("covariance violates V + i Omega/2 >= 0 (unphysical)")

    @property
    def n_modes(self):
        return self.d.size // 2

    def block(self, mode):
        sl = slice(2 * mode, 2 * mode + 2)
        return self.d[sl], self.V[sl, sl]

    def transform(self, S, d_shift=None):
        d = S @ self.d
        if d_shift is not None:
            d = d + d_shift
        return GaussianState(d, S @ self.V @ S.T, self.labels)


def physicality_margin(V):
    """Smallest eigenvalue of V + i Omega / 2."""
    m = V.shape[0] // 2
    return float(np.linalg.eigvalsh(V + 0.5j * omega_form(m)).min())


def vacuum_gaussian(n_modes=1):
    return GaussianState(np.zeros(2 * n_modes), 0.5 * np.eye(2 * n_modes))


def _single_squeezer(r, theta):
    """S1(xi) acting as a -> a cosh r - e^{i theta} a^dag sinh r."""
    return symplectic_from_bogoliubov([[math.cosh(r)]], [[-np.exp(1j * theta) * math.sinh(r)]])


def two_mode_squeezer_symplectic(r, theta):
    """S2(xi): a -> a cosh r - e^{i theta} b^dag sinh r (and a <-> b)."""
    U = math.cosh(r) * np.eye(2)
    W = -np.exp(1j * theta) * math.sinh(r) * np.array([[0, 1], [1, 0]])
    return symplectic_from_bogoliubov(U, W)


def _direct_sum(states):
    d = np.concatenate([s.d for s in states])
    V = np.zeros((d.size, d.size))
    i = 0
    for s in states:
        k = s.d.size
        V[i:i + k, i:i + k] = s.V
        i += k
    return GaussianState(d, V)


# -------------------------------------------------------------------- Fock

@dataclass(frozen=True, eq=False)
class FockState:
    """Truncated Fock-space state on one or two modes.

    ``kind`` is ``"pure"`` (amplitudes), ``"diagonal"`` (photon-number
    distribution) or ``"ensemble"`` (unnormalized pure branches whose sum of
    projectors is the density matrix; produced by loss on coherent states).
    """

    kind: str
    data: np.ndarray
    labels: tuple = ("a", "b")
    notes: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in ("pure", "diagonal", "ensemble"):
            raise DomainError(f"unknown Fock representation {self.kind!r}")
        arr = np.asarray(self.data, dtype=float if self.kind == "diagonal" else complex)
        object.__setattr__(self, "data", arr)
        if self.n_modes not in (1, 2):
            raise DomainError("Fock states span one or two modes")
        total = self.norm()
        if total == 0:
            raise DegenerateInputError("zero-norm state")
        if abs(total - 1) > NORM_TOL:
            raise DomainError(f"state norm {total:.12g} deviates from 1 by more than {NORM_TOL}")
        leak = self.leakage()
        if leak >= LEAK_TOL and not any("truncation" in n for n in self.notes):
            object.__setattr__(self, "notes", self.notes + (f"truncation warning: cutoff-layer mass {leak:.2e}",))

    @property
    def n_modes(self):
        return self.data.ndim - (1 if self.kind == "ensemble" else 0)

    @property
    def dims(self):
        return self.data.shape[-self.n_modes:]

    @property
    def cutoff(self):
        return max(self.dims) - 1

    def probabilities(self):
        if self.kind == "diagonal":
            return self.data
        if self.kind == "pure":
            return np.abs(self.data) ** 2
        return (np.abs(self.data) ** 2).sum(axis=0)

    def norm(self):
        return float(self.probabilities().sum())

    def leakage(self):
        p = self.probabilities()
        worst = 0.0
        for ax in range(p.ndim):
            worst = max(worst, float(np.take(p, -1, axis=ax).sum()))
        return worst

    def branches(self):
        """Pure branches as a (K, *dims) array (diagonal states expanded)."""
        if self.kind == "pure":
            return self.data[None]
        if self.kind == "ensemble":
            return self.data
        p = self.data
        idx = np.argwhere(p > 0)
        out = np.zeros((len(idx),) + p.shape, dtype=complex)
        for k, ix in enumerate(idx):
            out[(k,) + tuple(ix)] = math.sqrt(p[tuple(ix)])
        return out

    def density_matrix(self):
        """Flattened density matrix of size prod(dims) squared."""
        if self.kind == "diagonal":
            return np.diag(self.data.reshape(-1)).astype(complex)
        b = self.branches().reshape(-1 if self.kind == "ensemble" else 1, int(np.prod(self.dims)))
        return b.T @ b.conj()

    def resized(self, dims):
        """Zero-pad (or crop, if the cropped part is empty) to ``dims``."""
        dims = tuple(int(x) for x in dims)
        batch = 1 if self.kind == "ensemble" else 0
        arr = self.data
        for ax, (want, have) in enumerate(zip(dims, self.dims)):
            if want < have:
                cut = np.take(arr, range(want, have), axis=batch + ax)
                if np.any(cut):
                    raise ResourceError("cannot crop occupied Fock layers")
                arr = np.take(arr, range(want), axis=batch + ax)
        arr = _fock.pad_to(arr, dims, batch)
        return FockState(self.kind, arr, self.labels, self.notes)


@dataclass(frozen=True)
class PhotonStats:
    mean: float
    variance: float
    mandel_q: float
    flags: tuple = ()


# ----------------------------------------------------------- construction

SINGLE_MODE = {"vacuum", "coherent", "fock", "squeezed_vacuum"}
TWO_MODE = {"twin_fock", "noon", "tmsv", "tmsd"}
GAUSSIAN_KINDS = {"vacuum", "coherent", "squeezed_vacuum", "tmsv", "tmsd"}


def _normalize_spec(spec, params):
    if isinstance(spec, str):
        spec = dict(params, kind=spec)
    elif params:
        spec = dict(spec, **params)
    else:
        spec = dict(spec)
    if "kind" not in spec:
        raise DomainError("state spec needs a 'kind'")
    return spec


def _mode_mean_std(spec):
    k = spec["kind"]
    if k == "vacuum":
        return [(0.0, 0.0)]
    if k == "coherent":
        n = abs(spec["alpha"]) ** 2
        return [(n, math.sqrt(n))]
    if k == "fock":
        return [(float(spec["n"]), 0.0)]
    if k == "squeezed_vacuum":
        s = math.sinh(spec["r"]) ** 2
        return [(s, math.sqrt(2 * s * (s + 1)))]
    if k == "twin_fock":
        return [(float(spec["n"]), 0.0)] * 2
    if k == "noon":
        n = float(spec["n"])
        return [(n / 2, n / 2)] * 2
    if k in ("tmsv", "tmsd"):
        r = spec["r"]
        s = math.sinh(r) ** 2
        a2 = abs(spec.get("alpha", 0.0)) ** 2
        ma = s + a2 * math.cosh(r) ** 2
        mb = s + a2 * s
        # generous spread: thermal marginal plus displaced part
        return [(ma, math.sqrt(s * (s + 1) + a2 * math.cosh(r) ** 2 * (1 + 2 * s) + ma)),
                (mb, math.sqrt(s * (s + 1) + a2 * s * (1 + 2 * s) + mb))]
    if k == "product":
        out = []
        for sub in spec["modes"]:
            out += _mode_mean_std(_normalize_spec(sub, {}))
        return out
    raise DomainError(f"unknown state kind {k!r}")


def _fock_single(spec, dim):
    k = spec["kind"]
    if k == "vacuum":
        c = np.zeros(dim, dtype=complex)
        c[0] = 1
        return c
    if k == "coherent":
        return _fock.coherent_amplitudes(complex(spec["alpha"]), dim)
    if k == "fock":
        n = int(spec["n"])
        c = np.zeros(dim, dtype=complex)
        c[n] = 1
        return c
    if k == "squeezed_vacuum":
        return _fock.squeezed_amplitudes(spec["r"], spec.get("theta", 0.0), dim)
    raise DomainError(f"{k!r} is not a single-mode state")


def _fock_amplitudes(spec, dims):
    k = spec["kind"]
    if k in SINGLE_MODE:
        return _fock_single(spec, dims[0])
    if k == "product":
        subs = [_normalize_spec(s, {}) for s in spec["modes"]]
        if len(subs) != 2 or any(s["kind"] not in SINGLE_MODE for s in subs):
            raise DomainError("product states combine two single-mode specs")
        return np.multiply.outer(_fock_single(subs[0], dims[0]), _fock_single(subs[1], dims[1]))
    psi = np.zeros(dims, dtype=complex)
    if k == "twin_fock":
        n = int(spec["n"])
        psi[n, n] = 1
    elif k == "noon":
        n = int(spec["n"])
        if n < 1:
            raise DomainError("NOON states need N >= 1")
        psi[n, 0] = psi[0, n] = 1 / math.sqrt(2)
    elif k == "tmsv":
        r, th = spec["r"], spec.get("theta", math.pi)
        n = np.arange(min(dims))
        psi[n, n] = (-np.exp(1j * th) * math.tanh(r)) ** n / math.cosh(r)
    elif k == "tmsd":
        r, th = spec["r"], spec.get("theta", math.pi)
        seed = np.multiply.outer(_fock.coherent_amplitudes(complex(spec["alpha"]), dims[0]),
                                 np.eye(1, dims[1], 0, dtype=complex)[0])
        psi = _fock.two_mode_squeeze(seed, r, th, max(dims), batch=0)[: dims[0], : dims[1]]
    else:
        raise DomainError(f"unknown state kind {k!r}")
    return psi


def make_state(spec, representation="fock", cutoff=None, max_cutoff=DEFAULT_MAX_CUTOFF, **params):
    """Build a normalized probe state.

    ``spec`` is a kind name plus keyword parameters, or a dict with a
    ``kind`` key.  Kinds: vacuum, coherent(alpha), fock(n),
    squeezed_vacuum(r, theta), twin_fock(n), noon(n), tmsv(r, theta),
    tmsd(alpha, r, theta) and product(modes=[spec_a, spec_b]).  Two-mode
    squeezing phases default to pi.

    Fock cutoffs are sized to mean + 8 std per mode and grown until the
    truncated mass is below 1e-10; exceeding ``max_cutoff`` raises
    ResourceError.
    """
    spec = _normalize_spec(spec, params)
    if representation == "gaussian":
        return _make_gaussian(spec)
    if representation != "fock":
        raise DomainError("representation must be 'fock' or 'gaussian'")
    stats = _mode_mean_std(spec)
    if cutoff is not None:
        dims = [int(cutoff) + 1] * len(stats)
    else:
        dims = [max(int(math.ceil(m + 8 * s)) + 1, 2) for m, s in stats]
        if spec["kind"] in ("fock", "twin_fock", "noon"):
            dims = [int(spec["n"]) + 2] * len(stats)
        elif spec["kind"] == "product":
            subs = [_normalize_spec(s, {}) for s in spec["modes"]]
            dims = [int(s["n"]) + 2 if s["kind"] == "fock" else d for s, d in zip(subs, dims)]
    while True:
        if max(dims) - 1 > max_cutoff:
            raise ResourceError(
                f"state needs cutoff {max(dims) - 1} > hard limit {max_cutoff}; raise max_cutoff")
        psi = _fock_amplitudes(spec, tuple(dims))
        p = np.abs(psi) ** 2
        missing = 1 - p.sum()
        leak = max(float(np.take(p, -1, axis=ax).sum()) for ax in range(p.ndim))
        if missing < NORM_TOL and leak < LEAK_TOL:
            break
        if cutoff is not None:
            notes = (f"truncation warning: missing mass {missing:.2e}",)
            psi = psi / math.sqrt(p.sum())
            return FockState("pure", psi, notes=notes)
        dims = [min(int(math.ceil(d * 1.25)) + 1, max_cutoff + 1) if d <= max_cutoff else d + 1 for d in dims]
    if len(dims) == 1:
        return FockState("pure", psi, labels=("a",))
    return FockState("pure", psi)


def _make_gaussian(spec):
    k = spec["kind"]
    if k not in GAUSSIAN_KINDS and k != "product":
        raise DomainError(f"{k!r} has no Gaussian representation")
    if k == "vacuum":
        return vacuum_gaussian(1)
    if k == "coherent":
        return GaussianState(_amplitude_to_quadrature(spec["alpha"]), 0.5 * np.eye(2), ("a",))
    if k == "squeezed_vacuum":
        S = _single_squeezer(spec["r"], spec.get("theta", 0.0))
        return GaussianState(np.zeros(2), 0.5 * S @ S.T, ("a",))
    if k == "product":
        return _direct_sum([_make_gaussian(_normalize_spec(s, {})) for s in spec["modes"]])
    alpha = spec.get("alpha", 0.0) if k == "tmsd" else 0.0
    seed = GaussianState(_amplitude_to_quadrature([alpha, 0.0]), 0.5 * np.eye(4))
    return seed.transform(two_mode_squeezer_symplectic(spec["r"], spec.get("theta", math.pi)))


# ---------------------------------------------------------------- queries

def _ladder_moments(state):
    """<a_j>, <a_j a_k>, <a_j^dag a_k> for a Fock state."""
    m = state.n_modes
    br = state.branches()
    mean = np.zeros(m, dtype=complex)
    M = np.zeros((m, m), dtype=complex)
    N = np.zeros((m, m), dtype=complex)
    lowered = [_fock.lower(br, 1 + j) for j in range(m)]
    for j in range(m):
        mean[j] = np.vdot(br, lowered[j])
        for k in range(m):
            M[j, k] = np.vdot(br, _fock.lower(lowered[k], 1 + j))
            N[j, k] = np.vdot(lowered[j], lowered[k])
    return mean, M, N


def fock_moments(state):
    """Quadrature moments (d, V) of a Fock state, for cross-representation checks."""
    if state.kind == "diagonal":
        state = FockState("ensemble", state.branches(), state.labels)
    m = state.n_modes
    mean, M, N = _ladder_moments(state)
    A = np.zeros((2 * m, 2 * m), dtype=complex)
    for j in range(m):
        A[2 * j, j] = A[2 * j, m + j] = 1 / math.sqrt(2)
        A[2 * j + 1, j] = -1j / math.sqrt(2)
        A[2 * j + 1, m + j] = 1j / math.sqrt(2)
    G = np.zeros((2 * m, 2 * m), dtype=complex)
    G[:m, :m] = M
    G[:m, m:] = N.T + np.eye(m)
    G[m:, :m] = N
    G[m:, m:] = M.conj()
    L = np.concatenate([mean, mean.conj()])
    d = (A @ L).real
    V = (A @ G @ A.T).real - np.outer(d, d)
    return d, 0.5 * (V + V.T)


def _gaussian_number_moments(state):
    """Means and covariance matrix of photon numbers for a Gaussian state."""
    m = state.n_modes
    mean = np.zeros(m)
    cov = np.zeros((m, m))
    for i in range(m):
        di, Vi = state.block(i)
        mean[i] = 0.5 * (np.trace(Vi) + di @ di - 1)
        for j in range(m):
            dj, _ = state.block(j)
            Vij = state.V[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            if i == j:
                cov[i, i] = 0.5 * np.trace(Vi @ Vi) - 0.25 + di @ Vi @ di
            else:
                cov[i, j] = 0.5 * np.trace(Vij @ Vij.T) + di @ Vij @ dj
    return mean, cov


def _fock_number_moments(state):
    p = state.probabilities()
    m = p.ndim
    n = [np.arange(s) for s in p.shape]
    grids = np.meshgrid(*n, indexing="ij")
    total = p.sum()
    mean = np.array([(g * p).sum() / total for g in grids])
    cov = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            cov[i, j] = ((grids[i] - mean[i]) * (grids[j] - mean[j]) * p).sum() / total
    return mean, cov


def number_moments(state):
    if isinstance(state, GaussianState):
        return _gaussian_number_moments(state)
    return _fock_number_moments(state)


def photon_statistics(state, mode=0):
    """Mean, variance and Mandel Q of one mode's photon number."""
    if isinstance(state, FockState) and state.norm() == 0:
        raise DegenerateInputError("zero-norm state")
    mean, cov = number_moments(state)
    mu, var = float(mean[mode]), max(float(cov[mode, mode]), 0.0)
    flags = ()
    if mu <= 1e-15:
        return PhotonStats(0.0, var, 0.0, ("vacuum: Mandel Q set to 0 by convention",))
    return PhotonStats(mu, var, var / mu - 1, flags)


def nrf(state):
    """Var(n_b - n_a) / (<n_a> + <n_b>)."""
    if (isinstance(state, GaussianState) and state.n_modes != 2) or (
            isinstance(state, FockState) and state.n_modes != 2):
        raise DomainError("noise reduction factor needs a two-mode state")
    mean, cov = number_moments(state)
    total = mean.sum()
    if total <= 1e-15:
        raise DegenerateInputError("noise reduction factor undefined for zero total mean")
    if min(mean) <= 1e-15:
        warnings.warn("one mode is empty; noise reduction factor is degenerate", RuntimeWarning)
    var = cov[0, 0] + cov[1, 1] - 2 * cov[0, 1]
    return max(float(var), 0.0) / float(total)
