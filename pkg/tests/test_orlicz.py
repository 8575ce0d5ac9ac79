import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from travelwave.errors import ConfigError, DomainError
from travelwave.grid import Grid2D
from travelwave.orlicz import (DEFAULT_SAMPLES, check_assumptions, check_delta2, check_nabla2, complementary,
                               conjugate, eval_phi, logtype_nfunction, luxemburg_norm, make_kerr_nonlinearity,
                               make_logtype_nonlinearity, make_power_nonlinearity, nonlinearity_from_config,
                               power_nfunction)

LOG33 = logtype_nfunction(3, 3)


def _logtype_f(s):
    return s**2 * (np.log(2.0) if s <= 1 else np.log1p(s))


# -- N-functions ------------------------------------------------------------------

def test_power_value_and_evenness():
    phi = power_nfunction(4)
    assert eval_phi(phi, 2.0) == 4.0
    assert eval_phi(phi, -2.0) == 4.0
    assert eval_phi(phi, 0.0) == 0.0


def test_logtype_value_matches_quadrature():
    # oracle: adaptive quadrature of the piecewise derivative, split at the kink
    ref = quad(_logtype_f, 0, 1, epsabs=0, epsrel=1e-13)[0] + quad(_logtype_f, 1, 2, epsabs=0, epsrel=1e-13)[0]
    assert eval_phi(LOG33, 2.0) == pytest.approx(ref, rel=1e-12)
    assert eval_phi(LOG33, -2.0) == eval_phi(LOG33, 2.0)


def test_non_finite_argument():
    with pytest.raises(DomainError):
        eval_phi(LOG33, np.nan)


@pytest.mark.parametrize("nf", [power_nfunction(3), power_nfunction(4, normalized=False), LOG33],
                         ids=["power3", "power4-raw", "log33"])
def test_nfunction_invariants(nf):
    t = DEFAULT_SAMPLES
    phi = nf(t)
    assert np.all(phi > 0)
    a, b = t[:-1], t[1:]
    assert np.all(nf(0.5 * (a + b)) <= 0.5 * (nf(a) + nf(b)) * (1 + 1e-12))
    assert nf(1e-6) / 1e-6 < 1e-6 and nf(1e6) / 1e6 > 1e6
    assert nf(1e-6) / 1e-12 < 1e-3 and nf(1e6) / 1e12 > 1e3


# -- complementary functions --------------------------------------------------------

def test_complementary_closed_forms():
    assert complementary(power_nfunction(2), 3.0) == pytest.approx(4.5, rel=1e-12)
    assert complementary(power_nfunction(4), 1.0) == pytest.approx(0.75, rel=1e-12)
    assert complementary(power_nfunction(4), 0.0) == 0.0


def test_complementary_logtype_grid_search():
    # oracle: grid maximisation of 2t - Φ(t) on [0, 1000], zoomed twice around the best node
    t = np.linspace(0, 1e3, 10_001)
    for _ in range(3):
        vals = 2 * t - LOG33(t)
        j = int(np.argmax(vals))
        t = np.linspace(t[max(j - 1, 0)], t[min(j + 1, t.size - 1)], 10_001)
    ref = float(np.max(vals))
    assert complementary(LOG33, 2.0) == pytest.approx(ref, abs=1e-8)


@pytest.mark.parametrize("nf", [power_nfunction(3), power_nfunction(4), LOG33], ids=["p3", "p4", "log33"])
def test_young_identity(nf):
    t = np.logspace(-4, 4, 33)
    lhs = complementary(nf, nf.d(t))
    rhs = t * nf.d(t) - nf(t)
    assert np.allclose(lhs, rhs, rtol=1e-8, atol=0)
    kappa = check_delta2(nf).kappa
    assert np.all(lhs <= (kappa - 1) * nf(t) * (1 + 1e-8))


@pytest.mark.parametrize("nf", [power_nfunction(3), LOG33], ids=["p3", "log33"])
def test_double_duality(nf):
    t = np.logspace(-2, 2, 17)
    back = complementary(conjugate(nf), t)
    assert np.allclose(back, nf(t), rtol=1e-6, atol=0)


# -- growth conditions ----------------------------------------------------------

@pytest.mark.parametrize("p", [3, 4])
def test_delta2_power_exact(p):
    rep = check_delta2(power_nfunction(p))
    assert rep.holds
    assert rep.K == pytest.approx(2.0**p, abs=1e-10)
    assert rep.kappa == pytest.approx(p, abs=1e-10)


def test_nabla2_power_and_square():
    assert check_nabla2(power_nfunction(4)).kappa_prime == pytest.approx(4, abs=1e-10)
    rep = check_nabla2(power_nfunction(2, normalized=False))
    assert rep.holds and rep.kappa_prime == pytest.approx(2, abs=1e-10)


def test_logtype_conditions():
    d = check_delta2(LOG33)
    n = check_nabla2(LOG33)
    assert d.holds and d.kappa <= 4
    assert n.holds and n.kappa_prime >= 3 - 1e-12


def test_sample_grid_must_span_twelve_decades():
    with pytest.raises(ConfigError):
        check_delta2(LOG33, np.logspace(-3, 3, 100))


@pytest.mark.parametrize("nf,C,p", [(power_nfunction(4, normalized=False), 1.0, 4), (LOG33, 1.0, 4)])
def test_growth_sandwich(nf, C, p):
    t = DEFAULT_SAMPLES
    assert np.all(nf(t) <= C * (t**2 + t**p))


# -- Luxemburg norm -------------------------------------------------------------

def _bump(grid, amp=1.0):
    X1, X2 = grid.coords()
    return amp * np.exp(-(X1**2 + X2**2))


def test_luxemburg_equals_lp_norm(grid32, rng):
    u = rng.standard_normal((6, *grid32.shape))
    for p in (3.0, 4.0):
        lp = float(grid32.integrate(np.sum(u * u, axis=0) ** (p / 2))) ** (1 / p)
        assert luxemburg_norm(power_nfunction(p, normalized=False), u, grid32) == pytest.approx(lp, rel=1e-8)


def test_luxemburg_zero_field(grid32):
    assert luxemburg_norm(LOG33, np.zeros((6, *grid32.shape)), grid32) == 0.0


def test_luxemburg_logtype_alpha_scan():
    g = Grid2D.square(32, 3.0)
    mag = np.abs(_bump(g, 3.0))

    def modular(a):
        return float(g.integrate(LOG33(mag / a)))

    # oracle: monotone scan of the modular in log alpha, zoomed on the crossing of level 1
    lo, hi = -2.0, 2.0
    for _ in range(4):
        xs = np.linspace(lo, hi, 41)
        mods = np.array([modular(10**x) for x in xs])
        i = int(np.argmax(mods <= 1.0))
        lo, hi = xs[i - 1], xs[i]
    m0, m1 = modular(10**lo), modular(10**hi)
    ref = 10 ** (lo + (m0 - 1) / (m0 - m1) * (hi - lo))
    assert luxemburg_norm(LOG33, mag, g) == pytest.approx(ref, rel=1e-6)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), lam=st.floats(-50, 50).filter(lambda x: abs(x) > 1e-3))
def test_luxemburg_triangle_and_homogeneity(seed, lam):
    g = Grid2D.square(16, 2.0)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 6, *g.shape))
    nf = power_nfunction(3)
    nu, nv = luxemburg_norm(nf, u, g), luxemburg_norm(nf, v, g)
    assert luxemburg_norm(nf, u + v, g) <= (nu + nv) * (1 + 1e-8)
    assert luxemburg_norm(nf, lam * u, g) == pytest.approx(abs(lam) * nu, rel=1e-8)


# -- nonlinearities -------------------------------------------------------------

def test_kerr_values():
    F = make_kerr_nonlinearity(1.0, 1.0)
    u = np.zeros((6, 1))
    u[0] = 1.0
    assert F.F(u)[0] == pytest.approx(1 / 8)
    assert np.allclose(F.f(u)[:, 0], [0.5, 0, 0, 0, 0, 0])
    assert F.F(np.zeros((6, 1)))[0] == 0 and np.all(F.f(np.zeros((6, 1))) == 0)


def test_kerr_homogeneity_and_susceptibility(rng):
    F = make_kerr_nonlinearity(1.7, 0.4)
    u = rng.standard_normal((6, 500))
    assert np.allclose(np.sum(F.f(u) * u, axis=0), 4 * F.F(u), rtol=1e-13)
    # f(u) = ω² χ(|u|²/2) u with χ(s) = χ⁽³⁾ s
    s = 0.5 * np.sum(u * u, axis=0)
    assert np.allclose(F.f(u), 1.7**2 * 0.4 * s * u, rtol=1e-13)
    assert np.allclose(F.susceptibility(s), 0.4 * s, rtol=1e-13)


@pytest.mark.parametrize("F", [make_kerr_nonlinearity(1.0, 1.0), make_power_nonlinearity(3.0),
                               make_logtype_nonlinearity(3.0, 3.0)], ids=["kerr", "power3", "log33"])
def test_assumption_suite(F, rng):
    rep = check_assumptions(F)
    assert rep["F0"] and rep["F1"] and rep["F2"] and rep["F3"]
    # f is the gradient of F: central differences along random directions
    u = rng.standard_normal((6, 20))
    d = rng.standard_normal((6, 20))
    delta = 1e-6
    fd = (F.F(u + delta * d) - F.F(u - delta * d)) / (2 * delta)
    assert np.allclose(fd, np.sum(F.f(u) * d, axis=0), rtol=1e-6)
    jv = (F.f(u + delta * d) - F.f(u - delta * d)) / (2 * delta)
    assert np.allclose(jv, F.jvp(u, d), rtol=1e-6, atol=1e-8)


def test_radial_dependence(rng):
    F = make_logtype_nonlinearity(3.0, 4.0)
    u = rng.standard_normal((6, 50))
    Q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
    assert np.allclose(F.F(Q @ u), F.F(u), rtol=1e-12)


def test_scaled_nonlinearity(rng):
    F = make_kerr_nonlinearity(1.0, 1.0)
    u = rng.standard_normal((6, 10))
    assert np.allclose(F.scaled(2.5).f(u), 2.5 * F.f(u))
    with pytest.raises(ConfigError):
        F.scaled(0.0)


@pytest.mark.parametrize("cfg", [{"kind": "kerr", "chi3": -1.0}, {"kind": "power", "p": 2.0},
                                 {"kind": "logtype", "p": 3}, {"kind": "saturable"}])
def test_bad_nonlinearity_configs(cfg):
    with pytest.raises(ConfigError):
        nonlinearity_from_config(cfg, omega=1.0)


def test_config_builds_kerr():
    F = nonlinearity_from_config({"kind": "kerr", "chi3": 2.0}, omega=0.5)
    assert F.params == {"omega": 0.5, "chi3": 2.0}
