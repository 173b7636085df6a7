import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qplasm import states
from qplasm.errors import DegenerateInputError, DomainError, ResourceError
from qplasm.states import FockState, GaussianState, make_state


def test_fock_three():
    s = make_state("fock", n=3)
    p = s.probabilities()
    assert p[3] == 1
    assert p.sum() == 1


@pytest.mark.parametrize("r, theta", [(0.4, math.pi), (0.9, 0.3), (1.2, math.pi)])
def test_tmsv_amplitude_ratio(r, theta):
    s = make_state("tmsv", r=r, theta=theta)
    c = np.diag(s.data)
    ratio = c[1:10] / c[:9]
    np.testing.assert_allclose(ratio, -cmath.exp(1j * theta) * math.tanh(r), rtol=1e-12)
    assert c[0] == pytest.approx(1 / math.cosh(r), rel=1e-12)


def test_tmsv_mean():
    r = 0.7
    mean, _ = states.number_moments(make_state("tmsv", r=r))
    np.testing.assert_allclose(mean, math.sinh(r) ** 2, rtol=1e-10)


@pytest.mark.parametrize("rep", ["fock", "gaussian"])
def test_tmsd_means(rep):
    a, r = 0.9, 0.5
    mean, _ = states.number_moments(make_state("tmsd", rep, alpha=a, r=r))
    assert mean[0] == pytest.approx(math.sinh(r) ** 2 + a * a * math.cosh(r) ** 2, rel=1e-9)
    assert mean[1] == pytest.approx(math.sinh(r) ** 2 + a * a * math.sinh(r) ** 2, rel=1e-9)


def test_noon_amplitudes():
    s = make_state("noon", n=4)
    assert s.data[4, 0] == pytest.approx(1 / math.sqrt(2))
    assert s.data[0, 4] == pytest.approx(1 / math.sqrt(2))
    assert s.norm() == pytest.approx(1, abs=1e-15)


def test_twin_fock():
    s = make_state("twin_fock", n=3)
    assert s.probabilities()[3, 3] == 1


def test_product_state():
    s = make_state("product", modes=[{"kind": "coherent", "alpha": 1.0}, {"kind": "fock", "n": 2}])
    mean, cov = states.number_moments(s)
    np.testing.assert_allclose(mean, [1.0, 2.0], atol=1e-9)
    assert cov[1, 1] == pytest.approx(0, abs=1e-12)
    assert cov[0, 1] == pytest.approx(0, abs=1e-12)


# ----------------------------------------------------------- photon stats

def test_coherent_statistics():
    st_ = states.photon_statistics(make_state("coherent", alpha=1.5 - 0.5j))
    assert st_.mean == pytest.approx(2.5, rel=1e-9)
    assert st_.variance == pytest.approx(2.5, rel=1e-8)
    assert st_.mandel_q == pytest.approx(0, abs=1e-8)


def test_fock_statistics():
    st_ = states.photon_statistics(make_state("fock", n=5))
    assert (st_.mean, st_.variance, st_.mandel_q) == (5.0, 0.0, -1.0)


@pytest.mark.parametrize("rep", ["fock", "gaussian"])
def test_tmsv_marginal_is_thermal(rep):
    r = 0.8
    N = math.sinh(r) ** 2
    st_ = states.photon_statistics(make_state("tmsv", rep, r=r), mode=1)
    assert st_.variance / st_.mean == pytest.approx(N + 1, rel=1e-8)


def test_vacuum_flagged():
    st_ = states.photon_statistics(make_state("vacuum"))
    assert st_.mandel_q == 0
    assert st_.flags


@given(st.sampled_from(["coherent", "fock", "squeezed_vacuum"]), st.floats(0.05, 1.6))
@settings(max_examples=40, deadline=None)
def test_stats_invariants(kind, x):
    spec = {"coherent": {"alpha": x}, "fock": {"n": int(3 * x) + 1}, "squeezed_vacuum": {"r": x / 2}}[kind]
    s = states.photon_statistics(make_state(kind, **spec))
    assert s.variance >= 0
    assert s.mandel_q >= -1 - 1e-12


# ------------------------------------------------------------------- NRF

@pytest.mark.parametrize("rep", ["fock", "gaussian"])
def test_nrf_product_coherent(rep):
    s = make_state("product", rep, modes=[{"kind": "coherent", "alpha": 1.2},
                                          {"kind": "coherent", "alpha": 0.4j}])
    assert states.nrf(s) == pytest.approx(1, rel=1e-8)


@pytest.mark.parametrize("rep", ["fock", "gaussian"])
def test_nrf_tmsv_zero(rep):
    assert states.nrf(make_state("tmsv", rep, r=0.6)) == pytest.approx(0, abs=1e-9)


def test_nrf_tmsd_without_seed():
    assert states.nrf(make_state("tmsd", alpha=0.0, r=0.5)) == pytest.approx(0, abs=1e-9)


def test_nrf_degenerate():
    with pytest.raises(DegenerateInputError):
        states.nrf(make_state("tmsv", "gaussian", r=0.0))


@given(st.floats(0, 1.5), st.floats(0, 1.5), st.floats(0.05, 1.0))
@settings(max_examples=40, deadline=None)
def test_nrf_nonnegative_and_classical(a, b, r):
    pc = make_state("product", "gaussian", modes=[{"kind": "coherent", "alpha": a + 0.1},
                                                  {"kind": "coherent", "alpha": b + 0.1}])
    assert states.nrf(pc) == pytest.approx(1, rel=1e-9)
    tm = states.nrf(make_state("tmsd", "gaussian", alpha=a, r=r))
    assert 0 <= tm < 1


# ------------------------------------------------- cross representation

@pytest.mark.parametrize("r", [0.1, 0.5, 1.0, 1.5])
def test_tmsv_fock_gaussian_agree(r):
    f = make_state("tmsv", "fock", r=r, max_cutoff=200)
    g = make_state("tmsv", "gaussian", r=r)
    mf, cf = states.number_moments(f)
    mg, cg = states.number_moments(g)
    np.testing.assert_allclose(mf, mg, atol=1e-6)
    np.testing.assert_allclose(np.diag(cf), np.diag(cg), atol=1e-6)
    d, V = states.fock_moments(f)
    np.testing.assert_allclose(d, g.d, atol=1e-6)
    np.testing.assert_allclose(V, g.V, atol=1e-6)


@pytest.mark.parametrize("spec", [
    {"kind": "coherent", "alpha": 0.8 + 0.3j},
    {"kind": "squeezed_vacuum", "r": 0.6, "theta": 0.4},
    {"kind": "tmsd", "alpha": 0.7, "r": 0.4},
])
def test_quadrature_moments_agree(spec):
    d, V = states.fock_moments(make_state(spec))
    g = make_state(spec, "gaussian")
    np.testing.assert_allclose(d, g.d, atol=1e-8)
    np.testing.assert_allclose(V, g.V, atol=1e-8)


def test_deterministic():
    a = make_state("tmsd", alpha=0.9, r=0.5)
    b = make_state("tmsd", alpha=0.9, r=0.5)
    assert a.data.tobytes() == b.data.tobytes()


def test_auto_cutoff_leakage():
    s = make_state("coherent", alpha=3.0)
    assert s.leakage() < states.LEAK_TOL
    assert abs(s.norm() - 1) < states.NORM_TOL
    assert not s.notes


def test_cutoff_overflow():
    with pytest.raises(ResourceError):
        make_state("coherent", alpha=20.0)


def test_small_cutoff_warns():
    s = make_state("coherent", alpha=2.0, cutoff=4)
    assert any("truncation" in n for n in s.notes)


# ------------------------------------------------------------ Gaussian

def test_vacuum_gaussian():
    g = states.vacuum_gaussian(2)
    np.testing.assert_array_equal(g.V, 0.5 * np.eye(4))
    np.testing.assert_array_equal(g.d, np.zeros(4))


def test_unphysical_rejected():
    with pytest.raises(DomainError):
        GaussianState(np.zeros(2), 0.1 * np.eye(2))
    with pytest.raises(DomainError):
        GaussianState(np.zeros(2), np.array([[1.0, 0.2], [0.0, 1.0]]))


@given(st.floats(0, 2), st.floats(0, 2 * math.pi))
def test_two_mode_squeezer_symplectic(r, theta):
    S = states.two_mode_squeezer_symplectic(r, theta)
    Om = states.omega_form(2)
    np.testing.assert_allclose(S @ Om @ S.T, Om, atol=1e-9 * math.cosh(r) ** 2)


def test_fock_norm_enforced():
    with pytest.raises(DomainError):
        FockState("pure", np.array([1.0, 1.0]))
