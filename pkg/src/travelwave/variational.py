"""Action functional, inner convex minimisation and critical-point searches.

The action ``J(u) = ½ b_L(u,u) - ½∫V|u|² - ∫F(u)`` is strongly indefinite:
it is coercive on the divergence-constrained space V and concave on the
kernel W = {∇̊p}.  For each ``v`` in V the kernel part is eliminated by the
convex problem ``min_p ½∫V|v+∇̊p|² + ∫F(v+∇̊p)``, which leaves the reduced
functional ``J̃(v) = J(v + w(v))`` with mountain-pass geometry.

Searches run in the grid-exact symmetric class (quarter turns, the
reflection ``x2 -> -x2`` and the TM flip).  Every operator here commutes
with that group, so critical points in the class are critical points of
the full discrete functional.  Certification always uses the full residual
``Lu - Vu - f(u)``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.sparse.linalg import LinearOperator, cg, minres

from .errors import ConfigError, NumericError, SearchError
from .grid import Grid2D, RadialProfile
from .operators import (apply_L, circ_curl, circ_grad, circ_grad_adjoint, discrete_frequency,
                        divergence_residuals, dual_norm_V, helmholtz_split, project_V, riesz_V,
                        v_norm)
from .symmetry import (decompose_rtz, dihedral_residual, profile_tau_fraction, project_tm,
                       symmetrize_dihedral, tau_fraction)

log = logging.getLogger(__name__)


# -- media -------------------------------------------------------------------

@dataclass(frozen=True)
class PermittivityProfile:
    """Radial ``V(r)``: ``constant`` (``V = a``) or ``bump`` (``V = a + b e^{-r²}``)."""

    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "bump"):
            raise ConfigError(f"unknown permittivity kind {self.kind!r}")
        if self.kind == "constant" and self.b != 0:
            raise ConfigError("constant profile takes no bump amplitude")

    @classmethod
    def constant(cls, a):
        return cls("constant", float(a))

    @classmethod
    def bump(cls, a, b):
        return cls("bump", float(a), float(b))

    @classmethod
    def from_config(cls, cfg):
        if isinstance(cfg, (int, float)):
            return cls.constant(cfg)
        kind = cfg.get("kind", "constant")
        if kind == "constant":
            return cls.constant(cfg["value"] if "value" in cfg else cfg["a"])
        return cls.bump(cfg["a"], cfg["b"])

    def values(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, self.a)
        return self.a + self.b * np.exp(-r * r)

    def on_grid(self, grid):
        return self.values(grid.radius())

    def bounds(self):
        """``(essinf, esssup)`` over the plane."""
        return (min(self.a, self.a + self.b), max(self.a, self.a + self.b))

    def validate(self, k):
        lo, hi = self.bounds()
        if not lo > 0:
            raise ConfigError("assumption (V) violated: V must be positive", essinf=lo)
        if not hi < k * k:
            raise ConfigError("assumption (V) violated: esssup V must be below k^2", esssup=hi, k2=k * k)
        return self

    def to_dict(self):
        d = {"kind": self.kind, "a": self.a}
        if self.kind == "bump":
            d["b"] = self.b
        return d


@dataclass
class VariationalProblem:
    """Grid, wave number, medium and nonlinearity of one solve.

    ``symmetry`` is ``"tm"`` (dihedral plus TM flip, the default),
    ``"dihedral"`` or ``None``.
    """

    grid: Grid2D
    k: float
    V: PermittivityProfile
    F: object
    symmetry: str = "tm"
    band_limit: bool = True
    Vx: np.ndarray = field(init=False, repr=False)
    _band: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.k == 0 or not np.isfinite(self.k):
            raise ConfigError("wave number k must be finite and nonzero", k=self.k)
        self.V.validate(self.k)
        if self.symmetry not in ("tm", "dihedral", None):
            raise ConfigError("symmetry must be 'tm', 'dihedral' or null", symmetry=self.symmetry)
        if self.symmetry and not self.grid.is_square:
            raise ConfigError("symmetric solves need a square grid")
        self.Vx = self.V.on_grid(self.grid)
        K1, K2 = self.grid.frequencies()
        h = self.grid.h
        self._band = (np.abs(K1 * h) <= np.pi / 2 + 1e-12) & (np.abs(K2 * h) <= np.pi / 2 + 1e-12)

    @property
    def V_mean(self):
        lo, hi = self.V.bounds()
        return 0.5 * (lo + hi)

    def project(self, u):
        """Average over the symmetry group (a no-op on class members up to rounding)."""
        if self.symmetry is None:
            return u
        return symmetrize_dihedral(u, self.grid, tm=self.symmetry == "tm")

    def smooth(self, u):
        """Fourier restriction to ``|ξ_j h| ≤ π/2``.

        The central-difference symbol ``sin(ξh)/h`` takes every value twice on
        the Brillouin zone, so the discrete operators split into four
        decoupled staggered sub-lattices.  Saddle searches restricted to the
        lower half band cannot collapse onto a single sub-lattice, whose
        pointwise coupling through ``f`` has the wrong continuum limit.
        """
        if not self.band_limit:
            return u
        return np.real(np.fft.ifft2(np.fft.fft2(u) * self._band))

    def project_outer(self, v):
        """Symmetric class plus band limit: the admissible set of saddle searches."""
        return self.smooth(self.project(v))

    def symmetry_residual(self, u):
        if self.symmetry is None:
            return 0.0
        scale = max(np.max(np.abs(u)), 1e-300)
        res = dihedral_residual(u, self.grid)
        if self.symmetry == "tm":
            res = max(res, float(np.max(np.abs(u - project_tm(u))) / scale))
        return res

    def with_nonlinearity(self, F):
        return VariationalProblem(self.grid, self.k, self.V, F, self.symmetry, self.band_limit)


@dataclass
class StateDecomp:
    """``u = v + w`` with ``v`` in V and ``w = ∇̊p`` in the kernel of L."""

    v: np.ndarray
    p: np.ndarray
    k: float
    grid: Grid2D

    @property
    def w(self):
        return circ_grad(self.p, self.k, self.grid)

    @property
    def u(self):
        return self.v + self.w

    @classmethod
    def from_field(cls, u, k, grid):
        v, _, p = helmholtz_split(u, k, grid)
        return cls(v, p, k, grid)

    def divergence_residual(self):
        """Largest V-constraint violation of ``v``, relative to ``max|∇v|`` scale."""
        res = divergence_residuals(self.v, self.k, self.grid)
        scale = max(np.max(np.abs(self.v)) * (abs(self.k) + 1 / self.grid.h), 1e-300)
        return float(np.max(np.abs(res)) / scale)


# -- functional ------------------------------------------------------------------

def _field(state):
    return state.u if isinstance(state, StateDecomp) else state


def action_J(state, prob):
    """``½ b_L(u,u) - ½∫V|u|² - ∫F(u)`` by grid quadrature."""
    u = _field(state)
    g = prob.grid
    c = circ_curl(u, prob.k, g)
    return 0.5 * g.inner(c, c) - 0.5 * g.inner(prob.Vx * u, u) - float(g.integrate(prob.F.F(u)))


def grad_J(state, prob):
    """L2 gradient ``Lu - Vu - f(u)``."""
    u = _field(state)
    return apply_L(u, prob.k, prob.grid) - prob.Vx * u - prob.F.f(u)


@dataclass
class InnerResult:
    w: np.ndarray
    p: np.ndarray
    grad_norm: float
    iterations: int
    trace: list


def _inner_objective(v, p, prob):
    u = v + circ_grad(p, prob.k, prob.grid)
    g = prob.grid
    val = 0.5 * g.inner(prob.Vx * u, u) + float(g.integrate(prob.F.F(u)))
    grad = circ_grad_adjoint(prob.Vx * u + prob.F.f(u), prob.k, g)
    return val, grad, u


def _potential_preconditioner(prob):
    vbar = prob.V_mean

    def apply(r):
        return riesz_V(r, prob.k, prob.grid) / vbar

    return apply


def inner_minimize(v, prob, tol=1e-10, p0=None, maxiter=60):
    """Minimise ``½∫V|v+∇̊p|² + ∫F(v+∇̊p)`` over kernel potentials ``p``.

    Damped Newton with preconditioned CG for the Hessian
    ``∇̊ᵀ(V + f'(u))∇̊``; a preconditioned gradient step with backtracking is
    used whenever CG fails to give a descent direction.  Stops when the
    L2 norm of the potential gradient is below ``tol``.
    """
    g = prob.grid
    shape = (2, *g.shape)
    p = np.zeros(shape) if p0 is None else np.array(p0, dtype=float)
    prec = _potential_preconditioner(prob)
    val, grad, u = _inner_objective(v, p, prob)
    trace = []
    for it in range(maxiter):
        gn = g.norm(grad)
        trace.append((it, val, gn))
        if gn < tol:
            return InnerResult(circ_grad(p, prob.k, g), p, gn, it, trace)

        def hess(x, u=u):
            dp = x.reshape(shape)
            dw = circ_grad(dp, prob.k, g)
            return circ_grad_adjoint(prob.Vx * dw + prob.F.jvp(u, dw), prob.k, g).ravel()

        H = LinearOperator((grad.size, grad.size), matvec=hess, dtype=float)
        M = LinearOperator((grad.size, grad.size), matvec=lambda x: prec(x.reshape(shape)).ravel(), dtype=float)
        forcing = min(0.1, np.sqrt(gn))
        step, info = cg(H, -grad.ravel(), rtol=forcing, maxiter=200, M=M)
        step = step.reshape(shape)
        slope = float(np.sum(grad * step))
        if info != 0 or not slope < 0:
            step = -prec(grad)
            slope = float(np.sum(grad * step))
        # below the rounding level of the objective, ask for a smaller gradient instead
        resolvable = abs(slope) * g.cell_area > 1e-12 * max(abs(val), 1.0)
        tau = 1.0
        while True:
            new_val, new_grad, new_u = _inner_objective(v, p + tau * step, prob)
            if resolvable:
                ok = new_val <= val + 1e-4 * tau * slope * g.cell_area
            else:
                ok = g.norm(new_grad) < (1 - 1e-4 * tau) * gn
            if ok or tau < 1e-10:
                break
            tau *= 0.5
        if tau < 1e-10 and new_val > val:
            # rounding floor: the objective no longer resolves the decrease
            trace.append((it + 1, new_val, g.norm(new_grad)))
            if gn < 100 * tol:
                break
            raise NumericError("inner minimisation stalled", trace=trace[-5:])
        p = p + tau * step
        val, grad, u = new_val, new_grad, new_u
    gn = g.norm(grad)
    if gn >= tol and gn >= 100 * tol:
        raise NumericError("inner minimisation hit the iteration cap", trace=trace[-5:], grad_norm=gn)
    return InnerResult(circ_grad(p, prob.k, g), p, gn, len(trace), trace)


def kkt_residual(u, prob, n_tests=8, seed=0):
    """``max |J'(u)(∇̊q)| / ‖∇̊q‖₂`` over random kernel tests ``q`` plus the exact sup."""
    g = prob.grid
    G = grad_J(u, prob)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_tests):
        q = rng.standard_normal((2, *g.shape))
        wq = circ_grad(q, prob.k, g)
        worst = max(worst, abs(g.inner(G, wq)) / g.norm(wq))
    exact = g.norm(G - project_V(G, prob.k, g))
    return max(worst, exact)


def reduced_J(v, prob, tol=1e-10, p0=None):
    """``J̃(v) = J(v + w(v))``; returns ``(value, InnerResult)``."""
    inner = inner_minimize(v, prob, tol=tol, p0=p0)
    return action_J(v + inner.w, prob), inner


def reduced_grad(v, prob, tol=1e-10, p0=None, inner=None, restrict=True):
    """V-projection of ``grad_J`` at ``v + w(v)`` (no differentiation through ``w``).

    ``restrict`` also applies the band limit of the saddle searches.
    """
    if inner is None:
        inner = inner_minimize(v, prob, tol=tol, p0=p0)
    G = grad_J(v + inner.w, prob)
    proj = prob.project_outer if restrict else prob.project
    return proj(project_V(G, prob.k, prob.grid)), inner


def cerami_residual(v, prob, tol=1e-10, p0=None, inner=None):
    """``(1 + ‖v‖) ‖J̃'(v)‖`` with the V-norm and its dual."""
    gV, _ = reduced_grad(v, prob, tol=tol, p0=p0, inner=inner)
    return (1.0 + v_norm(v, prob.k, prob.grid)) * dual_norm_V(gV, prob.k, prob.grid)


# -- critical points ----------------------------------------------------------------

@dataclass
class SolverSettings:
    tol: float = 1e-6
    inner_tol: float = 1e-10
    max_iter: int = 400
    seed: int = 0
    states: int = 2
    mpa_tol: float = 5e-2
    mpa_inner_tol: float = 1e-8
    newton_tol: float = 1e-11
    newton_maxiter: int = 40
    basis_size: int = 4

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg or {})
        known = {f for f in cls.__dataclass_fields__}
        bad = set(cfg) - known
        if bad:
            raise ConfigError("unknown solver settings", keys=sorted(bad))
        return cls(**cfg)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class CriticalPoint:
    state: StateDecomp
    action: float
    grad_norm: float
    cerami_residual: float
    maxwell_residual: float
    profiles: dict
    tau_fraction: float
    pointwise_tau_fraction: float
    energy: float = None
    trace: list = field(default_factory=list, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def u(self):
        return self.state.u

    def certified(self, tol=1e-5):
        return self.maxwell_residual < tol

    def summary(self):
        return {"action": self.action, "grad_norm": self.grad_norm,
                "cerami_residual": self.cerami_residual, "maxwell_residual": self.maxwell_residual,
                "tau_fraction": self.tau_fraction, "pointwise_tau_fraction": self.pointwise_tau_fraction,
                "energy": self.energy, **self.meta}


def full_residual(u, prob):
    """``‖Lu - Vu - f(u)‖₂ / ‖u‖₂``."""
    g = prob.grid
    return g.norm(grad_J(u, prob)) / max(g.norm(u), np.finfo(float).eps)


def _profiles(u, grid):
    split = decompose_rtz(u, grid, check=False)
    p = split.profiles
    names = {"alpha": "rho", "gamma": "zeta", "alpha_tilde": "tilde_rho", "gamma_tilde": "tilde_zeta",
             "tau": "tau", "tau_tilde": "tilde_tau"}
    return {key: p[src] for key, src in names.items()}, profile_tau_fraction(split)


def certify(u, prob, settings=None, trace=None, meta=None):
    """Assemble a ``CriticalPoint`` from a field, recomputing every diagnostic."""
    settings = settings or SolverSettings()
    g = prob.grid
    state = StateDecomp.from_field(u, prob.k, g)
    inner = inner_minimize(state.v, prob, tol=settings.inner_tol, p0=state.p)
    state = StateDecomp(state.v, inner.p, prob.k, g)
    gV, _ = reduced_grad(state.v, prob, inner=inner, restrict=False)
    gn = dual_norm_V(gV, prob.k, g)
    profiles, tf = _profiles(state.u, g)
    return CriticalPoint(
        state=state, action=action_J(state, prob), grad_norm=gn,
        cerami_residual=(1 + v_norm(state.v, prob.k, g)) * gn,
        maxwell_residual=full_residual(state.u, prob), profiles=profiles, tau_fraction=tf,
        pointwise_tau_fraction=tau_fraction(state.u, g), trace=trace or [], meta=dict(meta or {}),
    )


def initial_direction(prob, seed=0, radial_order=0):
    """Smooth class member in V built from Laguerre–Gauss radial profiles.

    ``radial_order`` selects the number of radial sign changes of the
    axial profile; the seed jitters widths and mixing weights.
    """
    rng = np.random.default_rng(seed)
    g = prob.grid
    X1, X2 = g.coords()
    r = np.hypot(X1, X2)
    width = 2.0 * (1 + 0.1 * rng.uniform(-1, 1))
    x = (r / width) ** 2
    lag = np.polynomial.laguerre.lagval(x, np.eye(radial_order + 1)[radial_order])
    env = np.exp(-x / 2)
    u = np.zeros((6, *g.shape))
    u[2] = lag * env
    mix = 0.3 * rng.uniform(-1, 1)
    u[3] = mix * X1 / width * lag * env
    u[4] = mix * X2 / width * lag * env
    if prob.symmetry != "tm":
        u[0] = 0.2 * rng.uniform(-1, 1) * X1 / width * env
        u[1] = 0.2 * rng.uniform(-1, 1) * X2 / width * env
    v = prob.project_outer(project_V(u, prob.k, g))
    return v / v_norm(v, prob.k, g)


class _RayMax:
    """``max_{t>0} J̃(t v̂)`` by a safeguarded secant on ``φ'(t) = ⟨J'(t v̂ + w), v̂⟩``."""

    def __init__(self, prob, inner_tol):
        self.prob = prob
        self.tol = inner_tol
        self.evals = 0

    def dphi(self, t, vhat, p0):
        val, inner = reduced_J(t * vhat, self.prob, tol=self.tol, p0=p0)
        self.evals += 1
        G = grad_J(t * vhat + inner.w, self.prob)
        return self.prob.grid.inner(G, vhat), val, inner

    def far_endpoint(self, vhat, t_star, p=None):
        """Smallest ``T = 2^j t*`` with ``J̃(T v̂) < 0``."""
        T = 2.0 * t_star
        while True:
            val, inner = reduced_J(T * vhat, self.prob, tol=self.tol,
                                   p0=None if p is None else 2.0 * p)
            self.evals += 1
            if val < 0:
                return T
            p = inner.p
            T *= 2.0
            if T > 1e8 * t_star:
                raise SearchError("reduced functional does not become negative along the ray")

    def __call__(self, vhat, t0=1.0, p0=None, xtol=1e-11):
        """Return ``(t*, J̃(t* v̂), inner)``."""
        t1 = t0
        d1, v1, in1 = self.dphi(t1, vhat, p0)
        t2 = t1 * (1.05 if d1 > 0 else 1 / 1.05)
        d2, v2, in2 = self.dphi(t2, vhat, in1.p * (t2 / t1))
        lo = hi = None
        for t, d in ((t1, d1), (t2, d2)):
            if d > 0:
                lo = t if lo is None else max(lo, t)
            else:
                hi = t if hi is None else min(hi, t)
        for _ in range(80):
            if d2 != d1:
                t3 = t2 - d2 * (t2 - t1) / (d2 - d1)
            else:
                t3 = np.nan
            if lo is not None and hi is not None:
                if not (min(lo, hi) < t3 < max(lo, hi)):
                    t3 = 0.5 * (lo + hi)
            elif not (0.25 * t2 <= t3 <= 4 * t2):
                t3 = 2.0 * t2 if hi is None else 0.5 * t2
            if t3 < 1e-8 or t3 > 1e8:
                raise SearchError("ray maximum not found", t=t3)
            d3, v3, in3 = self.dphi(t3, vhat, in2.p * (t3 / t2))
            if d3 > 0:
                lo = t3 if lo is None else max(lo, t3)
            else:
                hi = t3 if hi is None else min(hi, t3)
            t1, d1, v1, in1 = t2, d2, v2, in2
            t2, d2, v2, in2 = t3, d3, v3, in3
            if abs(t2 - t1) <= xtol * t2:
                return t2, v2, in2
        raise SearchError("ray maximum iteration cap", t=t2)


def mountain_pass_search(prob, settings=None, start=None, log_every=10):
    """Mountain-pass search followed by a Newton–MINRES polish.

    Paths are segments from 0 to a far endpoint ``e = T v̂`` with
    ``J̃(e) < 0``.  Each step locates the path maximiser ``t* v̂``, deforms it
    along the preconditioned steepest descent direction of ``J̃`` and
    re-forms the segment through the deformed point.  The loop stops once
    the Cerami residual at the maximiser is below ``settings.mpa_tol``; the
    polish then drives the full residual to ``settings.newton_tol``.
    """
    settings = settings or SolverSettings()
    g = prob.grid
    if start is None:
        vhat = initial_direction(prob, settings.seed)
    else:
        vhat = prob.project_outer(project_V(start, prob.k, g))
        vhat = vhat / v_norm(vhat, prob.k, g)
    ray = _RayMax(prob, settings.mpa_inner_tol)
    t, val, inner = ray(vhat)
    T = ray.far_endpoint(vhat, t, inner.p)
    trace = [{"iter": 0, "J": val, "t": t, "far_T": T}]
    tau = 1.0
    for it in range(1, settings.max_iter + 1):
        m = t * vhat
        gV, _ = reduced_grad(m, prob, inner=inner)
        d = riesz_V(gV, prob.k, g)
        dn2 = g.inner(gV, d)
        res = (1 + t) * np.sqrt(max(dn2, 0.0))
        trace.append({"iter": it, "J": val, "t": t, "cerami": res, "tau": tau,
                      "symmetry": prob.symmetry_residual(m)})
        if it % log_every == 0:
            log.info("mpa iter %d J=%.10g cerami=%.3e", it, val, res)
        if res < settings.mpa_tol:
            break
        while True:
            trial = prob.project_outer(m - tau * d)
            trial_hat = trial / v_norm(trial, prob.k, g)
            try:
                t_new, val_new, inner_new = ray(trial_hat, t0=t, p0=inner.p)
            except SearchError:
                val_new = np.inf
            if val_new <= val - 1e-4 * tau * dn2:
                break
            tau *= 0.5
            if tau < 1e-8:
                raise SearchError("mountain-pass deformation stalled", trace=trace[-5:])
        vhat, t, val, inner = trial_hat, t_new, val_new, inner_new
        tau = min(2.0 * tau, 256.0)
    else:
        raise SearchError("mountain-pass iteration cap reached", best=trace[-1])
    T = ray.far_endpoint(vhat, t, inner.p)
    u0 = t * vhat + inner.w
    u, ntrace = newton_polish(u0, prob, settings)
    cp = certify(u, prob, settings, trace=trace + ntrace,
                 meta={"method": "mountain-pass", "mpa_level": val, "mpa_iterations": it,
                       "far_endpoint_T": T, "reduced_evaluations": ray.evals})
    _check_certified(cp, settings)
    return cp


def _check_certified(cp, settings):
    if not (cp.maxwell_residual < 1e-5 and cp.grad_norm < settings.tol * max(1.0, cp.state.grid.norm(cp.u))):
        raise NumericError("solution failed certification", maxwell_residual=cp.maxwell_residual,
                           grad_norm=cp.grad_norm)


def _newton_preconditioner(prob):
    g = prob.grid
    K1, K2 = g.frequencies()
    s1 = discrete_frequency(K1, g.h)
    s2 = discrete_frequency(K2, g.h)
    lo, hi = prob.V.bounds()
    gap = s1 * s1 + s2 * s2 + prob.k**2 - hi
    shape = (6, *g.shape)

    def apply(x):
        r = x.reshape(shape)
        v, w, _ = helmholtz_split(r, prob.k, g)
        pv = np.real(np.fft.ifft2(np.fft.fft2(v) / gap))
        pv = project_V(pv, prob.k, g)
        return (pv + w / prob.V_mean).ravel()

    return LinearOperator((np.prod(shape), np.prod(shape)), matvec=apply, dtype=float)


def _deflation(u, known, grid):
    """``m(u) = Π (1/‖u-u_j‖² + 1)`` over ``±u_j`` and ``∇ log m``."""
    logm = 0.0
    dlog = np.zeros_like(u)
    for uj in known:
        for sgn in (1.0, -1.0):
            diff = u - sgn * uj
            d2 = grid.inner(diff, diff)
            logm += np.log1p(1.0 / d2)
            dlog += -2.0 * diff / (d2 * (d2 + 1.0))
    return logm, dlog


def _newton(u, prob, settings, known, proj):
    g = prob.grid
    shape = u.shape
    M = _newton_preconditioner(prob)
    trace = []
    for it in range(settings.newton_maxiter):
        R = proj(grad_J(u, prob))
        rel = g.norm(R) / max(g.norm(u), 1e-300)
        trace.append({"newton": it, "residual": rel})
        if rel < settings.newton_tol:
            return u, trace
        if not np.isfinite(rel):
            break

        def jac(x, u=u):
            du = proj(x.reshape(shape))
            return proj(apply_L(du, prob.k, g) - prob.Vx * du - prob.F.jvp(u, du)).ravel()

        A = LinearOperator((u.size, u.size), matvec=jac, dtype=float)
        step, info = minres(A, -R.ravel(), M=M, rtol=min(1e-3, 0.1 * rel), maxiter=500)
        step = proj(step.reshape(shape))
        if known:
            _, dlog = _deflation(u, known, g)
            denom = 1.0 - g.inner(dlog, step)
            if abs(denom) < 1e-12:
                break
            step = step / denom
        # damping: accept the step if the residual does not explode
        lam = 1.0
        while lam > 1e-3:
            cand = u + lam * step
            rc = g.norm(proj(grad_J(cand, prob))) / max(g.norm(cand), 1e-300)
            if rc < max(rel, 1e-14) * (1 - 0.1 * lam) or (rel > 1e-4 and rc < 2 * rel):
                break
            lam *= 0.5
        u = cand
    raise NumericError("Newton polish did not converge", trace=trace[-5:])


def newton_polish(u0, prob, settings=None, known=()):
    """Newton–MINRES on ``Lu - Vu - f(u) = 0`` inside the symmetric class.

    With a band-limited problem the iteration first runs on the Galerkin
    system projected onto the lower half band, then finishes on the full
    grid equation from that start.  ``known`` lists solutions to deflate in
    the first stage: the Newton step ``δ`` is rescaled by
    ``1 / (1 - ⟨∇log m, δ⟩)``, which is the Newton step for ``m(u) R(u)``.
    """
    settings = settings or SolverSettings()
    u = prob.project(np.array(u0, dtype=float))
    trace = []
    if prob.band_limit:
        u, trace = _newton(prob.smooth(u), prob, settings, known, prob.project_outer)
        for entry in trace:
            entry["stage"] = "band"
        known = ()
    u, full = _newton(u, prob, settings, known, prob.project)
    return u, trace + full


# -- higher states -------------------------------------------------------------------

def _radial_basis(prob, size, seed):
    return [initial_direction(prob, seed, radial_order=j) for j in range(size)]


def _subspace_max(prob, basis, settings, rng):
    """Maximise ``J̃`` over the span of ``basis`` (a finite-dimensional ``Y_n``)."""
    g = prob.grid
    state = {"p": None}

    def neg(c):
        v = sum(ci * b for ci, b in zip(c, basis))
        val, inner = reduced_J(v, prob, tol=settings.inner_tol, p0=state["p"])
        state["p"] = inner.p
        G = grad_J(v + inner.w, prob)
        return -val, -np.array([g.inner(G, b) for b in basis])

    c0 = rng.uniform(0.5, 1.0, len(basis)) * np.sign(rng.uniform(-1, 1, len(basis)))
    c0 *= 2.0 / np.linalg.norm(c0)
    res = minimize(neg, c0, jac=True, method="BFGS", options={"gtol": 1e-6, "maxiter": 200})
    v = sum(ci * b for ci, b in zip(res.x, basis))
    return v, -res.fun


def higher_state_search(prob, settings=None, count=None, ground=None):
    """Ground state plus further critical points by subspace maximisation and deflation.

    Nested spaces ``Y_n`` are spanned by the first ``n`` Laguerre–Gauss
    radial profiles.  The maximiser of ``J̃`` on each ``Y_n`` seeds a
    deflated Newton solve that excludes ``±`` every point found so far.
    Returns ``(points, log)``; points are sorted by action and strictly
    increasing.  Fewer than ``count`` points is reported in the log, not
    raised.
    """
    settings = settings or SolverSettings()
    count = settings.states if count is None else count
    if count < 1:
        raise ConfigError("state count must be positive", count=count)
    g = prob.grid
    rng = np.random.default_rng(settings.seed)
    found = [ground if ground is not None else mountain_pass_search(prob, settings)]
    search_log = [{"state": 0, "method": "mountain-pass", "action": found[0].action}]
    basis = _radial_basis(prob, settings.basis_size + 1, settings.seed)
    for n in range(2, settings.basis_size + 2):
        if len(found) >= count:
            break
        guesses = []
        try:
            v, level = _subspace_max(prob, basis[:n], settings, rng)
            guesses.append(("subspace", n, v, level))
        except (NumericError, SearchError) as exc:
            search_log.append({"basis": n, "error": str(exc)})
        # the pure n-th radial mode scaled to its ray maximum
        try:
            t, level, inner = _RayMax(prob, settings.mpa_inner_tol)(basis[n - 1])
            guesses.append(("ray", n, t * basis[n - 1], level))
        except SearchError as exc:
            search_log.append({"basis": n, "error": str(exc)})
        for kind, n_b, v, level in guesses:
            inner = inner_minimize(v, prob, tol=settings.inner_tol)
            try:
                u, tr = newton_polish(v + inner.w, prob, settings, known=[c.u for c in found])
            except NumericError as exc:
                search_log.append({"basis": n_b, "seed": kind, "error": str(exc)})
                continue
            dist = min(min(g.norm(u - c.u), g.norm(u + c.u)) for c in found)
            cp = certify(u, prob, settings, trace=tr,
                         meta={"method": f"deflated-newton/{kind}", "basis": n_b, "seed_level": level})
            entry = {"basis": n_b, "seed": kind, "action": cp.action, "distance": dist,
                     "maxwell_residual": cp.maxwell_residual}
            search_log.append(entry)
            if dist > 1e-3 and cp.maxwell_residual < 1e-5 and cp.action > 0 and \
                    all(abs(cp.action - c.action) > 1e-8 for c in found):
                found.append(cp)
                break
    found.sort(key=lambda c: c.action)
    if len(found) < count:
        search_log.append({"warning": f"found {len(found)} of {count} states"})
    return found[:max(count, 1)], search_log


def rescaled(prob, lam):
    """Problem with ``f`` multiplied by ``lam``; solutions map by ``u -> u / √lam``."""
    return prob.with_nonlinearity(prob.F.scaled(lam))


__all__ = ["PermittivityProfile", "VariationalProblem", "StateDecomp", "CriticalPoint", "SolverSettings",
           "InnerResult", "action_J", "grad_J", "inner_minimize", "kkt_residual", "reduced_J",
           "reduced_grad", "cerami_residual", "mountain_pass_search", "higher_state_search",
           "newton_polish", "certify", "full_residual", "initial_direction", "rescaled",
           "RadialProfile"]
