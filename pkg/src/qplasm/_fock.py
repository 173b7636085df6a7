"""Low-level Fock-space kernels on amplitude arrays.

Arrays are indexed ``psi[n_a]`` or ``psi[n_a, n_b]``; a leading batch axis
holds ensemble branches.  Nothing here normalizes or validates.
"""

import numpy as np
from scipy.special import gammaln


def lower(psi, axis):
    """Apply the annihilation operator along ``axis``."""
    psi = np.moveaxis(psi, axis, -1)
    n = psi.shape[-1]
    out = np.zeros_like(psi)
    out[..., : n - 1] = psi[..., 1:] * np.sqrt(np.arange(1, n))
    return np.moveaxis(out, -1, axis)


def pad_to(psi, dims, batch=0):
    """Zero-pad trailing mode axes up to ``dims``."""
    widths = [(0, 0)] * batch + [(0, d - s) for d, s in zip(dims, psi.shape[batch:])]
    return np.pad(psi, widths)


def binomial_kernel(eta, dim):
    """K[k, n, m] = sqrt(C(n, k) eta^(n-k) (1-eta)^k) if m = n - k."""
    n = np.arange(dim)
    k = n[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        logc = gammaln(n + 1) - gammaln(k + 1) - gammaln(np.maximum(n - k, 0) + 1)
        lw = logc + (n - k) * np.log(eta if eta > 0 else 1e-300) + k * np.log(1 - eta if eta < 1 else 1e-300)
    w = np.where(n >= k, np.exp(0.5 * np.where(n >= k, lw, 0.0)), 0.0)
    if eta == 1:
        w = np.where(k == 0, 1.0, 0.0) * (n >= 0)
    if eta == 0:
        w = np.where(n == k, 1.0, 0.0)
    return w  # shape (k, n)


def kraus_loss(psi, eta, axis, batch, tol=1e-18):
    """Split pure branches into loss branches indexed by photons lost.

    Returns a stacked array with one new leading batch axis flattened into the
    existing batch axis; branches with negligible weight are dropped.
    """
    mode_axis = batch + axis
    dim = psi.shape[mode_axis]
    w = binomial_kernel(eta, dim)
    branches = []
    for k in range(dim):
        wk = w[k]
        if not np.any(wk):
            continue
        moved = np.moveaxis(psi, mode_axis, -1) * wk
        shifted = np.zeros_like(moved)
        shifted[..., : dim - k] = moved[..., k:]
        b = np.moveaxis(shifted, -1, mode_axis)
        if np.vdot(b, b).real > tol:
            branches.append(b)
    if not branches:
        return np.zeros((1,) + psi.shape[batch:], dtype=complex) if batch else np.zeros_like(psi)[None]
    out = np.stack(branches)
    if batch:
        out = out.reshape((-1,) + psi.shape[batch:])
    return out


def binomial_thin(p, eta, axis):
    """p_out(n) = sum_m C(m, n) eta^n (1-eta)^(m-n) p(m) along ``axis``."""
    dim = p.shape[axis]
    w = binomial_kernel(eta, dim) ** 2  # (k, m): prob of losing k from m
    n = np.arange(dim)
    T = np.zeros((dim, dim))
    for k in range(dim):
        idx = n - k
        ok = idx >= 0
        T[idx[ok], n[ok]] += w[k, ok]
    return np.moveaxis(np.tensordot(T, np.moveaxis(p, axis, 0), axes=(1, 0)), 0, axis)


def bs_block(N, tau, theta):
    """Unitary exp[tau (e^{i theta} a^dag b - e^{-i theta} a b^dag)] on |j, N-j>."""
    j = np.arange(N)
    off = np.exp(1j * theta) * np.sqrt((j + 1) * (N - j))
    G = np.zeros((N + 1, N + 1), dtype=complex)
    G[j + 1, j] = off
    G[j, j + 1] = -np.conj(off)
    lam, vec = np.linalg.eigh(1j * G)
    return (vec * np.exp(-1j * tau * lam)) @ vec.conj().T


def beam_splitter(psi, tau, theta, batch, floor=1e-15):
    """Apply the beam splitter to two-mode arrays; output dims grow to hold N.

    Photon-number blocks whose amplitudes all lie below ``floor`` are dropped.
    """
    da, db = psi.shape[batch], psi.shape[batch + 1]
    occupied = np.abs(psi.reshape(psi.shape[:batch] + (da, db)))
    if batch:
        occupied = occupied.max(axis=tuple(range(batch)))
    tot = np.add.outer(np.arange(da), np.arange(db))
    present = np.unique(tot[occupied > floor])
    top = int(present.max()) if present.size else 0
    dout = top + 1
    out = np.zeros(psi.shape[:batch] + (dout, dout), dtype=complex)
    for N in present:
        N = int(N)
        j = np.arange(max(0, N - db + 1), min(N, da - 1) + 1)
        vec = np.zeros(psi.shape[:batch] + (N + 1,), dtype=complex)
        vec[..., j] = psi[..., j, N - j]
        U = bs_block(N, tau, theta)
        res = vec @ U.T
        jj = np.arange(N + 1)
        out[..., jj, N - jj] = res
    return out


def two_mode_squeeze(psi, r, theta, dout, batch):
    """exp(xi* ab - xi a^dag b^dag), xi = r e^{i theta}, via disentangling.

    Ordering: exp(-t K+) cosh(r)^-(n_a+n_b+1) exp(conj(t) K-) with
    t = e^{i theta} tanh r; exact for every retained component.
    """
    t = np.exp(1j * theta) * np.tanh(r)
    da, db = psi.shape[batch], psi.shape[batch + 1]
    # exp(conj(t) ab): finite series on a truncated input
    phi = psi.astype(complex).copy()
    term = phi.copy()
    for k in range(1, min(da, db)):
        term = lower(lower(term, batch), batch + 1) * (np.conj(t) / k)
        phi = phi + term
    na = np.arange(da)[:, None]
    nb = np.arange(db)[None, :]
    phi = phi * np.cosh(r) ** (-(na + nb + 1.0))
    phi = pad_to(phi, (dout, dout), batch)
    out = phi.copy()
    term = phi
    sq = np.sqrt(np.outer(np.arange(1, dout), np.arange(1, dout)))
    for k in range(1, dout):
        nxt = np.zeros_like(term)
        nxt[..., 1:, 1:] = term[..., :-1, :-1] * sq * (-t / k)
        term = nxt
        if not np.any(term):
            break
        out = out + term
    return out


def coherent_amplitudes(alpha, dim):
    n = np.arange(dim)
    if alpha == 0:
        c = np.zeros(dim, dtype=complex)
        c[0] = 1
        return c
    logmag = -0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def squeezed_amplitudes(r, theta, dim):
    c = np.zeros(dim, dtype=complex)
    m = np.arange((dim + 1) // 2)
    lam = -np.exp(1j * theta) * np.tanh(r)
    if r == 0:
        c[0] = 1
        return c
    logmag = (-0.5 * np.log(np.cosh(r)) + m * np.log(abs(lam))
              + 0.5 * gammaln(2 * m + 1) - m * np.log(2) - gammaln(m + 1))
    c[2 * m] = np.exp(logmag) * np.exp(1j * m * np.angle(lam))
    return c
