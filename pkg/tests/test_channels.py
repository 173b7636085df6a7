import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qplasm import channels as ch, states
from qplasm.errors import DomainError, ResourceError
from qplasm.states import make_state


# ------------------------------------------------------------------ loss

def test_fock_two_half_loss():
    out = ch.apply_loss(make_state("fock", n=2), 0.5, counting=True)
    np.testing.assert_allclose(out.probabilities()[:3], [0.25, 0.5, 0.25], atol=1e-15)


@pytest.mark.parametrize("rep", ["fock", "gaussian"])
def test_unit_transmission_is_identity(rep):
    s = make_state("coherent", rep, alpha=0.7)
    out = ch.apply_loss(s, 1.0)
    if rep == "fock":
        assert out is s
    else:
        np.testing.assert_array_equal(out.V, s.V)
        np.testing.assert_array_equal(out.d, s.d)


def test_coherent_loss_matches_poisson_thinning(oracle):
    o = oracle["quantum"]["poisson_thinning"]
    alpha = complex(*o["alpha"])
    g = ch.apply_loss(make_state("coherent", "gaussian", alpha=alpha), o["eta"])
    mean, cov = states.number_moments(g)
    assert mean[0] == pytest.approx(o["mean"], rel=1e-12)
    assert cov[0, 0] == pytest.approx(o["variance"], rel=1e-12)
    np.testing.assert_allclose(g.d, math.sqrt(o["eta"]) * make_state("coherent", "gaussian", alpha=alpha).d)
    f = ch.apply_loss(make_state("coherent", alpha=alpha), o["eta"])
    mf, cf = states.number_moments(f)
    assert mf[0] == pytest.approx(o["mean"], rel=1e-9)
    assert cf[0, 0] == pytest.approx(o["variance"], rel=1e-8)


def test_pure_loss_tracks_branches():
    out = ch.apply_loss(make_state("coherent", alpha=1.0), 0.6)
    assert out.kind == "ensemble"
    assert ch.APPROX_NOTE in out.notes
    # a lossy coherent state is still pure: one dominant branch carries the weight
    w = np.linalg.eigvalsh(out.density_matrix())
    assert w[-1] == pytest.approx(1, abs=1e-9)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 6))
@settings(max_examples=50, deadline=None)
def test_loss_composition_fock(e1, e2, n):
    s = make_state("fock", n=n)
    two = ch.apply_loss(ch.apply_loss(s, e1, counting=True), e2, counting=True)
    one = ch.apply_loss(s, e1 * e2, counting=True)
    np.testing.assert_allclose(two.probabilities(), one.probabilities(), atol=1e-14)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1.2), st.floats(-2, 2))
@settings(max_examples=50)
def test_loss_composition_gaussian(e1, e2, r, a):
    s = make_state("tmsd", "gaussian", alpha=a, r=r)
    two = ch.apply_loss(ch.apply_loss(s, e1, mode=1), e2, mode=1)
    one = ch.apply_loss(s, e1 * e2, mode=1)
    np.testing.assert_allclose(two.V, one.V, atol=1e-12)
    np.testing.assert_allclose(two.d, one.d, atol=1e-12)


def test_loss_domain():
    with pytest.raises(DomainError):
        ch.apply_loss(make_state("vacuum"), 1.2)
    with pytest.raises(DomainError):
        ch.ChannelSpec("loss", {"eta": -0.1})


# --------------------------------------------------------- beam splitter

def test_hong_ou_mandel():
    s = make_state("product", modes=[{"kind": "fock", "n": 1}, {"kind": "fock", "n": 1}])
    out = ch.apply_beam_splitter(s, 0.5)
    p = out.probabilities()
    assert p[1, 1] == pytest.approx(0, abs=1e-15)
    assert p[2, 0] == pytest.approx(0.5, abs=1e-14)
    assert p[0, 2] == pytest.approx(0.5, abs=1e-14)
    assert abs(out.data[2, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-14)


def test_unit_splitter_is_identity():
    s = make_state("noon", n=3)
    assert ch.apply_beam_splitter(s, 1.0) is s


def test_coherent_split_moments(oracle):
    o = oracle["quantum"]["bs_coherent"]
    s = make_state("product", "gaussian", modes=[{"kind": "coherent", "alpha": complex(*o["alpha"])},
                                                 {"kind": "vacuum"}])
    out = ch.apply_beam_splitter(s, o["T"], o["theta"])
    np.testing.assert_allclose(out.d, o["d"], atol=1e-14)
    np.testing.assert_allclose(out.V, 0.5 * np.eye(4), atol=1e-14)
    f = ch.apply_beam_splitter(make_state("product", modes=[
        {"kind": "coherent", "alpha": complex(*o["alpha"])}, {"kind": "vacuum"}]), o["T"], o["theta"])
    d, V = states.fock_moments(f)
    np.testing.assert_allclose(d, o["d"], atol=1e-8)
    np.testing.assert_allclose(V, 0.5 * np.eye(4), atol=1e-8)


@given(st.floats(0, 1), st.floats(0, 2 * math.pi), st.floats(0, 1.0), st.floats(-1.5, 1.5))
@settings(max_examples=50)
def test_splitter_conserves_photons(T, theta, r, a):
    s = make_state("tmsd", "gaussian", alpha=a, r=r)
    before, _ = states.number_moments(s)
    after, _ = states.number_moments(ch.apply_beam_splitter(s, T, theta))
    assert after.sum() == pytest.approx(before.sum(), abs=1e-12)


def test_splitter_conserves_photons_fock():
    s = make_state("product", modes=[{"kind": "fock", "n": 3}, {"kind": "coherent", "alpha": 0.8}])
    out = ch.apply_beam_splitter(s, 0.3, 0.7)
    m0, _ = states.number_moments(s)
    m1, _ = states.number_moments(out)
    assert m1.sum() == pytest.approx(m0.sum(), abs=1e-12)


# ----------------------------------------------------------------- phase

def test_zero_phase_identity():
    s = make_state("coherent", alpha=1.0)
    assert ch.apply_phase(s, 0.0) is s


def test_phase_leaves_counts():
    s = make_state("fock", n=4)
    out = ch.apply_phase(s, 1.1)
    np.testing.assert_allclose(out.probabilities(), s.probabilities())


@pytest.mark.parametrize("rep", ["fock", "gaussian"])
def test_phase_rotates_squeezing(rep):
    r, th, phi = 0.5, 0.3, 0.4
    out = ch.apply_phase(make_state("squeezed_vacuum", rep, r=r, theta=th), phi)
    want = make_state("squeezed_vacuum", rep, r=r, theta=th + 2 * phi)
    if rep == "gaussian":
        np.testing.assert_allclose(out.V, want.V, atol=1e-14)
    else:
        n = min(out.data.size, want.data.size)
        np.testing.assert_allclose(out.data[:n], want.data[:n], atol=1e-12)


def test_relative_phase_gaussian_matches_fock():
    spec = {"kind": "tmsd", "alpha": 0.6, "r": 0.3}
    g = ch.apply_phase(make_state(spec, "gaussian"), 0.9, "relative")
    f = ch.apply_phase(make_state(spec), 0.9, "relative")
    d, V = states.fock_moments(f)
    np.testing.assert_allclose(d, g.d, atol=1e-9)
    np.testing.assert_allclose(V, g.V, atol=1e-9)


# -------------------------------------------------------------- squeezer

def test_unit_gain_identity():
    s = make_state("tmsv", "gaussian", r=0.3)
    out = ch.apply_two_mode_squeezer(s, G=1.0)
    np.testing.assert_allclose(out.V, s.V, atol=1e-15)


def test_vacuum_gain_gives_tmsv(oracle):
    o = oracle["quantum"]["tmsv_covariance"]
    G = math.cosh(o["r"]) ** 2
    out = ch.apply_two_mode_squeezer(states.vacuum_gaussian(2), G=G)
    np.testing.assert_allclose(out.V, o["V"], atol=1e-12)
    np.testing.assert_allclose(out.V, make_state("tmsv", "gaussian", r=o["r"]).V, atol=1e-12)
    mean, _ = states.number_moments(out)
    np.testing.assert_allclose(mean, G - 1, atol=1e-12)
    assert states.nrf(out) == pytest.approx(0, abs=1e-12)


@pytest.mark.parametrize("alpha, r", [(0.5, 0.3), (1.0, 0.6), (2.0, 0.2)])
def test_seeded_gain_nrf(alpha, r):
    seed = make_state("product", "gaussian", modes=[{"kind": "coherent", "alpha": alpha}, {"kind": "vacuum"}])
    out = ch.apply_two_mode_squeezer(seed, r=r)
    a2, s2 = alpha**2, math.sinh(r) ** 2
    assert states.nrf(out) == pytest.approx(a2 / (a2 + 2 * (1 + a2) * s2), rel=1e-10)


def test_fock_gain_matches_gaussian():
    seed = {"kind": "product", "modes": [{"kind": "coherent", "alpha": 0.5}, {"kind": "vacuum"}]}
    f = ch.apply_two_mode_squeezer(make_state(seed), r=0.4)
    g = ch.apply_two_mode_squeezer(make_state(seed, "gaussian"), r=0.4)
    d, V = states.fock_moments(f)
    np.testing.assert_allclose(d, g.d, atol=1e-8)
    np.testing.assert_allclose(V, g.V, atol=1e-8)


def test_gain_domain_and_cutoff():
    with pytest.raises(DomainError):
        ch.apply_two_mode_squeezer(states.vacuum_gaussian(2), G=0.5)
    with pytest.raises(ResourceError):
        ch.apply_two_mode_squeezer(make_state("twin_fock", n=2), r=2.5)


# ------------------------------------------------------------ invariants

@given(st.lists(st.sampled_from(["loss", "bs", "phase", "gain"]), min_size=1, max_size=5),
       st.floats(0, 1), st.floats(0, 1.0))
@settings(max_examples=60)
def test_gaussian_channels_stay_physical(kinds, x, r):
    s = make_state("tmsd", "gaussian", alpha=0.7, r=r)
    for k in kinds:
        if k == "loss":
            s = ch.apply_loss(s, x, mode=1)
        elif k == "bs":
            s = ch.apply_beam_splitter(s, x, 2.0 * x)
        elif k == "phase":
            s = ch.apply_phase(s, 6 * x, "relative")
        else:
            s = ch.apply_two_mode_squeezer(s, r=0.5 * x)
    assert states.physicality_margin(s.V) >= -1e-10


@pytest.mark.parametrize("alpha, r", [(0.0, 1.0), (0.5, 0.5)])
def test_pipeline_fock_vs_gaussian(alpha, r):
    chain = [ch.ChannelSpec("two_mode_squeezer", {"r": r}),
             ch.ChannelSpec("loss", {"eta": 0.7}, mode=0),
             ch.ChannelSpec("loss", {"eta": 0.9}, mode=1),
             ch.ChannelSpec("beam_splitter", {"T": 0.4})]
    seed = {"kind": "product", "modes": [{"kind": "coherent", "alpha": alpha}, {"kind": "vacuum"}]}
    g = ch.apply_chain(make_state(seed, "gaussian"), chain)
    f = ch.apply_chain(make_state(seed), chain)
    d, V = states.fock_moments(f)
    np.testing.assert_allclose(d, g.d, atol=1e-6)
    np.testing.assert_allclose(V, g.V, atol=1e-6)


def test_channel_spec_rejects_unknown():
    with pytest.raises(DomainError):
        ch.ChannelSpec("kerr", {})
