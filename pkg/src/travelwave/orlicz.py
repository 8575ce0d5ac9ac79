"""N-functions, complementary functions, Luxemburg norms and the nonlinearities.

Two conventions for power N-functions coexist and are never mixed
implicitly: ``power_nfunction(p)`` is ``|t|^p / p`` (the primitive of
``|t|^(p-2) t``, used by ``F``) while ``power_nfunction(p, normalized=False)``
is ``|t|^p``, whose Luxemburg norm is exactly the ``L^p`` norm.
"""
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, NumericError
from .grid import pointwise_norm

LN2 = np.log(2.0)
DEFAULT_SAMPLES = np.logspace(-6, 6, 481)

# composite Gauss-Legendre rule for ∫_1^t s^(q-1) ln(1+s) ds in σ = ln s
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_GL_PANELS = 24


@dataclass(frozen=True)
class NFunction:
    """Even convex ``Φ`` with its derivative; ``params`` documents the kind."""

    kind: str
    params: dict = field(default_factory=dict)
    eval: Callable = None
    deriv: Callable = None

    def __call__(self, t):
        return self.eval(np.asarray(t, dtype=float))

    def d(self, t):
        return self.deriv(np.asarray(t, dtype=float))


def power_nfunction(p, normalized=True):
    """``|t|^p / p`` (default) or ``|t|^p``."""
    if not p > 1:
        raise ConfigError("power N-function needs p > 1", p=p)
    c = 1.0 / p if normalized else 1.0

    def ev(t):
        return c * np.abs(t) ** p

    def dv(t):
        return c * p * np.sign(t) * np.abs(t) ** (p - 1)

    return NFunction("power", {"p": p, "normalized": normalized}, ev, dv)


def _logtype_tail(t, q):
    """``∫_1^t s^(q-1) ln(1+s) ds`` for ``t >= 1`` (vectorised)."""
    L = np.log(t)[..., None, None]
    a = np.arange(_GL_PANELS)[:, None] / _GL_PANELS
    sig = L * (a + (_GL_NODES[None, :] + 1) / (2 * _GL_PANELS))
    vals = np.exp(q * sig) * np.log1p(np.exp(sig))
    return np.sum(vals * _GL_WEIGHTS, axis=(-2, -1)) * L[..., 0, 0] / (2 * _GL_PANELS)


def logtype_nfunction(p, q):
    """Primitive of ``|t|^(p-2) t ln 2`` on ``|t| <= 1`` and ``|t|^(q-2) t ln(1+|t|)`` beyond."""
    if not (p > 2 and q > 2):
        raise ConfigError("log-type N-function needs p, q > 2", p=p, q=q)

    def ev(t):
        a = np.abs(t)
        out = LN2 * a**p / p
        big = a > 1
        if np.any(big):
            out = np.where(big, LN2 / p + _logtype_tail(np.where(big, a, 1.0), q), out)
        return out

    def dv(t):
        a = np.abs(t)
        return np.sign(t) * np.where(a > 1, a ** (q - 1) * np.log1p(a), LN2 * a ** (p - 1))

    return NFunction("logtype", {"p": p, "q": q}, ev, dv)


def _logtype_second(a, p, q):
    return np.where(a > 1, (q - 1) * a ** (q - 2) * np.log1p(a) + a ** (q - 1) / (1 + a),
                    (p - 1) * LN2 * a ** (p - 2))


def eval_phi(nf, t):
    """``Φ(t)``; raises ``DomainError`` on non-finite input."""
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("Φ evaluated at a non-finite argument")
    out = nf(t)
    return float(out) if out.ndim == 0 else out


def _solve_deriv(nf, s, maxiter=2000):
    """``t* >= 0`` with ``Φ'(t*) = s`` for ``s > 0``, by bracketed Brent iteration."""
    hi = 1.0
    for _ in range(maxiter):
        if nf.d(hi) >= s:
            break
        hi *= 2.0
    else:
        raise NumericError("could not bracket Φ'(t) = s", s=float(s), bracket=[0.0, hi])
    lo = 0.0
    while lo == 0.0 and hi > 1e-300 and nf.d(0.5 * hi) >= s:
        hi *= 0.5
    try:
        return brentq(lambda t: float(nf.d(t)) - s, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
                      maxiter=500)
    except RuntimeError as exc:
        raise NumericError("root finder did not converge", s=float(s), bracket=[0.0, hi]) from exc


def complementary(nf, s):
    """Complementary function ``Ψ(s) = sup_{t >= 0} (t |s| - Φ(t))``.

    Evaluated as ``|s| t* - Φ(t*)`` with ``Φ'(t*) = |s|``; the error in ``t*``
    only enters at second order.
    """
    s = np.asarray(s, dtype=float)

    def one(x):
        x = abs(float(x))
        if x == 0.0:
            return 0.0
        t = _solve_deriv(nf, x)
        return x * t - float(nf(t))

    out = np.vectorize(one, otypes=[float])(s)
    return float(out) if out.ndim == 0 else out


def conjugate(nf):
    """``Ψ`` as an ``NFunction``; ``Ψ' = (Φ')^{-1}``."""

    def dv(s):
        s = np.asarray(s, dtype=float)
        inv = np.vectorize(lambda x: 0.0 if x == 0 else _solve_deriv(nf, abs(x)), otypes=[float])
        return np.sign(s) * inv(s)

    return NFunction("custom", {"conjugate_of": nf.kind, **nf.params},
                     lambda s: np.asarray(complementary(nf, s)), dv)


class Delta2Report(NamedTuple):
    holds: bool
    K: float
    kappa: float


class Nabla2Report(NamedTuple):
    holds: bool
    kappa_prime: float


def _check_samples(nf, t):
    t = DEFAULT_SAMPLES if t is None else np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.log10(t.max() / t.min()) < 12 - 1e-9:
        raise ConfigError("sample grid must be positive and span at least 12 decades")
    phi = nf(t)
    if np.any(phi <= 0):
        raise ConfigError("Φ vanishes at a positive sample; not an N-function",
                          t=float(t[np.argmax(phi <= 0)]))
    return t, phi


def check_delta2(nf, samples=None):
    """Sampled ``K = sup Φ(2t)/Φ(t)`` and ``κ = sup tΦ'(t)/Φ(t)``.

    The condition is certified only on the sampled range (default
    ``[1e-6, 1e6]``, 481 log-spaced points).
    """
    t, phi = _check_samples(nf, samples)
    K = float(np.max(nf(2 * t) / phi))
    kappa = float(np.max(t * nf.d(t) / phi))
    return Delta2Report(bool(np.isfinite(K) and np.isfinite(kappa)), K, kappa)


def check_nabla2(nf, samples=None):
    """Sampled ``κ' = inf tΦ'(t)/Φ(t)``; holds iff ``κ' > 1 + 1e-6``."""
    t, phi = _check_samples(nf, samples)
    kp = float(np.min(t * nf.d(t) / phi))
    return Nabla2Report(bool(kp > 1 + 1e-6), kp)


def luxemburg_norm(nf, u, grid, rtol=1e-12):
    """``inf{α > 0 : ∫ Φ(|u|/α) dx <= 1}`` by bisection on ``log α``.

    ``u`` may be a stacked field ``(c, n1, n2)`` (pointwise Euclidean norm) or
    a scalar grid function.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise DomainError("field has non-finite entries")
    mag = pointwise_norm(u) if u.ndim == 3 else np.abs(u)
    if not np.any(mag):
        return 0.0

    def modular(alpha):
        return float(grid.integrate(nf(mag / alpha)))

    lo = hi = float(np.max(mag))
    for _ in range(400):
        if modular(hi) <= 1.0:
            break
        hi *= 2.0
    for _ in range(400):
        if modular(lo) > 1.0:
            break
        lo *= 0.5
    if not (modular(lo) > 1.0 >= modular(hi)):
        raise NumericError("Luxemburg bisection could not bracket", lo=lo, hi=hi)
    while hi - lo > rtol * hi:
        mid = np.sqrt(lo * hi)
        if modular(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


# -- nonlinearities -----------------------------------------------------------

@dataclass(frozen=True)
class Nonlinearity:
    """Radial ``F(u) = potential(|u|)`` with ``f(u) = gain(|u|) u``.

    ``dgain(s)`` is ``gain'(s) / s`` so that the Jacobian of ``f`` is
    ``gain I + dgain u u^T``.  ``gamma``, ``c1``, ``c2`` are the constants of
    the growth and superquadraticity bounds with respect to ``phi``.
    """

    kind: str
    params: dict
    potential: Callable
    gain: Callable
    dgain: Callable
    phi: NFunction
    gamma: float
    c1: float
    c2: float
    omega: float = 1.0

    def F(self, u):
        return self.potential(pointwise_norm(u))

    def f(self, u):
        return self.gain(pointwise_norm(u)) * u

    def jvp(self, u, du):
        """Directional derivative ``f'(u) du``."""
        s = pointwise_norm(u)
        return self.gain(s) * du + self.dgain(s) * np.sum(u * du, axis=0) * u

    def susceptibility(self, s):
        """``χ(s)`` with ``f(u) = ω² χ(|u|²/2) u``."""
        return self.gain(np.sqrt(2.0 * np.asarray(s, dtype=float))) / self.omega**2

    def scaled(self, lam):
        """Nonlinearity with ``f`` multiplied by ``lam > 0``."""
        if lam <= 0:
            raise ConfigError("scale must be positive", lam=lam)
        return Nonlinearity(self.kind, {**self.params, "scale": self.params.get("scale", 1.0) * lam},
                            lambda s: lam * self.potential(s), lambda s: lam * self.gain(s),
                            lambda s: lam * self.dgain(s), self.phi, self.gamma, lam * self.c1,
                            lam * self.c2, self.omega)

    def to_dict(self):
        return {"kind": self.kind, **self.params}


def make_kerr_nonlinearity(omega, chi3):
    """``F(u) = ω² χ⁽³⁾ |u|⁴ / 8``, ``f(u) = ω² χ⁽³⁾ |u|² u / 2``, ``Φ(t) = t⁴``.

    ``F`` is the primitive ``ω² ∫_0^{|u|²/2} χ(s) ds`` of ``f(u) = ω² χ(|u|²/2) u``
    with ``χ(s) = χ⁽³⁾ s``.
    """
    if not (omega > 0 and chi3 > 0):
        raise ConfigError("Kerr nonlinearity needs omega > 0 and chi3 > 0", omega=omega, chi3=chi3)
    a = omega**2 * chi3
    phi = NFunction("kerr", {"p": 4}, lambda t: np.asarray(t, dtype=float) ** 4,
                    lambda t: 4 * np.asarray(t, dtype=float) ** 3)
    return Nonlinearity(
        "kerr", {"omega": omega, "chi3": chi3},
        potential=lambda s: a * s**4 / 8,
        gain=lambda s: a * s**2 / 2,
        dgain=lambda s: a + 0 * s,
        phi=phi, gamma=4.0, c1=a / 8, c2=a / 8, omega=omega,
    )


def make_power_nonlinearity(p, coef=1.0):
    """``F(u) = coef |u|^p / p`` with the power N-function ``|t|^p / p``."""
    if not (p > 2 and coef > 0):
        raise ConfigError("power nonlinearity needs p > 2 and coef > 0", p=p, coef=coef)

    def dgain(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = coef * (p - 2) * s ** (p - 4)
        return np.where(s > 0, out, 0.0)

    return Nonlinearity("power", {"p": p, "coef": coef},
                        potential=lambda s: coef * s**p / p,
                        gain=lambda s: coef * s ** (p - 2),
                        dgain=dgain, phi=power_nfunction(p), gamma=float(p), c1=coef, c2=coef)


def make_logtype_nonlinearity(p, q):
    """``F = Φ`` with ``Φ`` the log-type N-function; ``γ = min(p, q)``."""
    phi = logtype_nfunction(p, q)

    def gain(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = phi.d(s) / s
        return np.where(s > 0, out, 0.0)

    def dgain(s):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (_logtype_second(s, p, q) - phi.d(s) / s) / s**2
        return np.where(s > 0, out, 0.0)

    return Nonlinearity("logtype", {"p": p, "q": q}, potential=phi, gain=gain, dgain=dgain,
                        phi=phi, gamma=float(min(p, q)), c1=1.0, c2=1.0)


def check_assumptions(F, n=10_000, seed=0, rtol=1e-12):
    """Sample (F0)-(F3) on ``n`` random ``u`` in ``R^6`` with log-uniform magnitudes.

    Returns a dict of booleans plus the worst observed ratios.
    """
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((6, n))
    d /= np.linalg.norm(d, axis=0)
    mag = 10.0 ** rng.uniform(-3, 3, n)
    u = d * mag
    u2 = rng.standard_normal((6, n)) * 10.0 ** rng.uniform(-3, 3, n)
    Fu = F.F(u)
    fu = F.f(u)
    s = pointwise_norm(u)
    conv = F.F(0.5 * (u + u2)) <= 0.5 * (Fu + F.F(u2)) * (1 + rtol) + 1e-300
    f0 = bool(np.all(Fu >= 0) and F.F(np.zeros((6, 1)))[0] == 0 and np.all(conv))
    small = np.array([1e-2, 1e-4, 1e-6, 1e-8])
    ratio = F.gain(small)
    f1 = bool(np.all(np.diff(ratio) < 0) and ratio[-1] < 1e-6)
    fnorm = pointwise_norm(fu)
    growth = fnorm / (1 + F.phi.d(s))
    f2 = bool(np.all(fnorm <= F.c1 * (1 + F.phi.d(s)) * (1 + rtol)))
    upper = np.sum(fu * u, axis=0) / F.gamma
    lower = F.c2 * F.phi(s)
    f3 = bool(np.all(upper >= Fu * (1 - rtol)) and np.all(Fu >= lower * (1 - rtol)))
    with np.errstate(divide="ignore", invalid="ignore"):
        margin = np.where(Fu > 0, upper / Fu, np.inf)
    return {"F0": f0, "F1": f1, "F2": f2, "F3": f3, "gamma": F.gamma, "c1": F.c1, "c2": F.c2,
            "F1_gain_at_1e-8": float(ratio[-1]), "F2_worst_ratio": float(np.max(growth)),
            "F3_min_margin": float(np.min(margin)), "samples": n}


def nonlinearity_from_config(cfg, omega=None):
    """Build from ``{"kind": "kerr"|"power"|"logtype", ...}``."""
    kind = cfg.get("kind")
    try:
        if kind == "kerr":
            om = cfg.get("omega", omega)
            if om is None:
                raise ConfigError("Kerr nonlinearity needs omega")
            return make_kerr_nonlinearity(float(om), float(cfg["chi3"]))
        if kind == "power":
            return make_power_nonlinearity(float(cfg["p"]), float(cfg.get("coef", 1.0)))
        if kind == "logtype":
            return make_logtype_nonlinearity(float(cfg["p"]), float(cfg["q"]))
    except KeyError as exc:
        raise ConfigError("missing nonlinearity parameter", parameter=exc.args[0], kind=kind) from exc
    raise ConfigError("unknown nonlinearity kind", kind=kind)
