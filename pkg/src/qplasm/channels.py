"""Loss, beam splitter, phase and two-mode squeezing channels.

Each channel accepts a GaussianState (exact moment transform) or a
FockState.  Loss on pure Fock states keeps every Kraus branch, so the
result is an ``ensemble`` state; pass ``counting=True`` when only photon
number statistics are needed and a ``diagonal`` state is enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _fock
from .errors import DomainError, ResourceError
from .states import (DEFAULT_MAX_CUTOFF, LEAK_TOL, NORM_TOL, FockState, GaussianState,
                     symplectic_from_bogoliubov, two_mode_squeezer_symplectic)

APPROX_NOTE = "lossy pure state tracked as Kraus branches (environment traced out)"


def _check_unit(name, value):
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def _embed(S_mode, mode, n_modes):
    S = np.eye(2 * n_modes)
    S[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = S_mode
    return S


def _compress(branches):
    """Re-express an ensemble with at most prod(dims) orthogonal branches."""
    k = branches.shape[0]
    dims = branches.shape[1:]
    size = int(np.prod(dims))
    if k <= size:
        return branches
    flat = branches.reshape(k, size)
    rho = flat.T @ flat.conj()
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    keep = w > 1e-16 * max(w.max(), 1e-300)
    out = (v[:, keep] * np.sqrt(w[keep])).T
    return out.reshape((-1,) + dims)


def _from_branches(branches, labels, notes):
    if branches.shape[0] == 1 and not any(APPROX_NOTE in n for n in notes):
        return FockState("pure", branches[0], labels, notes)
    return FockState("ensemble", _compress(branches), labels, notes)


def _require_two_mode(state):
    if state.n_modes != 2:
        raise DomainError("channel acts on two modes; supply a two-mode state")


# -------------------------------------------------------------------- loss

def apply_loss(state, eta, mode=0, counting=False):
    """Attenuate ``mode`` to transmittance ``eta`` with a vacuum environment."""
    _check_unit("eta", eta)
    if isinstance(state, GaussianState):
        S = _embed(math.sqrt(eta) * np.eye(2), mode, state.n_modes)
        noise = np.zeros_like(state.V)
        noise[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = 0.5 * (1 - eta) * np.eye(2)
        return GaussianState(S @ state.d, S @ state.V @ S.T + noise, state.labels)
    if mode >= state.n_modes:
        raise DomainError(f"mode {mode} out of range")
    if eta == 1:
        return state
    if counting or state.kind == "diagonal":
        p = _fock.binomial_thin(state.probabilities(), eta, mode)
        return FockState("diagonal", p, state.labels, state.notes)
    batch = 1 if state.kind == "ensemble" else 0
    br = _fock.kraus_loss(state.data, eta, mode, batch)
    notes = state.notes if APPROX_NOTE in state.notes else state.notes + (APPROX_NOTE,)
    return FockState("ensemble", _compress(br), state.labels, notes)


# ------------------------------------------------------------ beam splitter

def beam_splitter_matrix(T, theta=math.pi / 2):
    """Mode-amplitude map alpha_out = M alpha_in for B(T, theta)."""
    t, s = math.sqrt(T), math.sqrt(1 - T)
    return np.array([[t, np.exp(1j * theta) * s], [-np.exp(-1j * theta) * s, t]])


def apply_beam_splitter(state, T=0.5, theta=math.pi / 2):
    """Mix modes a and b with B = exp[tau(e^{i theta} a^dag b - h.c.)], T = cos^2 tau."""
    _check_unit("T", T)
    _require_two_mode(state)
    if isinstance(state, GaussianState):
        return state.transform(symplectic_from_bogoliubov(beam_splitter_matrix(T, theta), np.zeros((2, 2))))
    if T == 1:
        return state
    tau = math.acos(math.sqrt(T))
    br = _fock.beam_splitter(state.branches(), tau, theta, batch=1)
    return _from_branches(br, state.labels, state.notes)


# ------------------------------------------------------------------- phase

def apply_phase(state, phi, kind="single", mode=0):
    """exp(i phi n) on ``mode`` or exp(i phi/2 (n_a - n_b)) for ``kind='relative'``."""
    if kind not in ("single", "relative"):
        raise DomainError("phase kind must be 'single' or 'relative'")
    if kind == "relative":
        _require_two_mode(state)
        phases = [0.5 * phi, -0.5 * phi]
    else:
        phases = [0.0] * state.n_modes
        phases[mode] = phi
    if isinstance(state, GaussianState):
        U = np.diag(np.exp(1j * np.array(phases)))
        return state.transform(symplectic_from_bogoliubov(U, np.zeros_like(U)))
    if state.kind == "diagonal" or phi == 0:
        return state
    data = state.data
    batch = 1 if state.kind == "ensemble" else 0
    for ax, ph in enumerate(phases):
        if ph == 0:
            continue
        dim = data.shape[batch + ax]
        shape = [1] * data.ndim
        shape[batch + ax] = dim
        data = data * np.exp(1j * ph * np.arange(dim)).reshape(shape)
    return FockState(state.kind, data, state.labels, state.notes)


# ---------------------------------------------------------------- squeezer

def gain_to_r(G):
    if G < 1 or math.isnan(G):
        raise DomainError(f"gain G must be >= 1, got {G}")
    return math.acosh(math.sqrt(G))


def apply_two_mode_squeezer(state, G=None, r=None, theta=math.pi, max_cutoff=DEFAULT_MAX_CUTOFF):
    """S2(r e^{i theta}); with theta = pi, a -> sqrt(G) a + sqrt(G-1) b^dag."""
    if (G is None) == (r is None):
        raise DomainError("give exactly one of G or r")
    if r is None:
        r = gain_to_r(G)
    elif r < 0:
        raise DomainError("squeezing r must be >= 0")
    _require_two_mode(state)
    if isinstance(state, GaussianState):
        return state.transform(two_mode_squeezer_symplectic(r, theta))
    if r == 0:
        return state
    br = state.branches()
    p = (np.abs(br) ** 2).sum(axis=0)
    na = (p.sum(axis=1) * np.arange(p.shape[0])).sum()
    nb = (p.sum(axis=0) * np.arange(p.shape[1])).sum()
    g = math.cosh(r) ** 2
    mean = g * max(na, nb) + (g - 1) * (min(na, nb) + 1)
    dout = max(int(math.ceil(mean + 8 * math.sqrt(mean * (mean + 1)))) + 1, max(p.shape))
    while True:
        if dout - 1 > max_cutoff:
            raise ResourceError(
                f"two-mode squeezer output needs cutoff {dout - 1} > hard limit {max_cutoff}")
        out = _fock.two_mode_squeeze(br, r, theta, dout, batch=1)
        q = (np.abs(out) ** 2).sum(axis=0)
        leak = max(q[-1, :].sum(), q[:, -1].sum())
        if abs(q.sum() - 1) < NORM_TOL and leak < LEAK_TOL:
            return _from_branches(out, state.labels, state.notes)
        dout = min(int(dout * 1.25) + 1, max_cutoff + 1) if dout <= max_cutoff else dout + 1


# ------------------------------------------------------------------- specs

@dataclass(frozen=True)
class ChannelSpec:
    """One channel in a chain: ``kind`` plus its parameters."""

    kind: str
    params: dict = field(default_factory=dict)
    mode: int = 0

    def __post_init__(self):
        p = self.params
        if self.kind == "loss":
            _check_unit("eta", p["eta"])
        elif self.kind == "beam_splitter":
            _check_unit("T", p.get("T", 0.5))
        elif self.kind == "two_mode_squeezer":
            if "G" in p:
                gain_to_r(p["G"])
        elif self.kind != "phase":
            raise DomainError(f"unknown channel kind {self.kind!r}")

    def apply(self, state, counting=False):
        p = self.params
        if self.kind == "loss":
            return apply_loss(state, p["eta"], self.mode, counting=counting)
        if self.kind == "beam_splitter":
            return apply_beam_splitter(state, p.get("T", 0.5), p.get("theta", math.pi / 2))
        if self.kind == "phase":
            return apply_phase(state, p["phi"], p.get("type", "single"), self.mode)
        return apply_two_mode_squeezer(state, G=p.get("G"), r=p.get("r"),
                                       theta=p.get("theta", math.pi))


def apply_chain(state, chain, counting=False):
    for spec in chain:
        state = spec.apply(state, counting=counting)
    return state
