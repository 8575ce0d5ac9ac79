"""Shooting solver for nodal TE profiles.

The azimuthal TE ansatz ``U = β(r)/r (-x2, x1, 0)`` turns the Kerr problem
into ``β'' + β'/r - β/r² + β³ - β = 0`` with ``β(0) = β(∞) = 0``.  Near the
origin ``β = s r + (s/8) r³ + O(r⁵)``.

Trajectories never blow up: once ``|β|`` reaches the wells at ``±1`` it
either crosses zero again or turns back and stays trapped.  ``zero_count``
counts crossings before the first turn-back, a nondecreasing step function
of the slope ``s``; an ``n``-node solution sits at the jump from ``n`` to
``n + 1`` and is located by bisection.  Past the point where the two
bracketing trajectories separate, the profile is continued by the decaying
solution of the full equation, integrated inward from ``A K1(r)`` data far out.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse.linalg import spsolve
from scipy.special import iv, kve

from .errors import ConfigError, NumericError, SearchError
from .grid import RadialProfile

log = logging.getLogger(__name__)

BLOWUP = 1e3
PRINTED_EXPONENT = 0.5 * (1 + np.sqrt(5.0))


@dataclass
class ShootingProblem:
    """Integration settings; ``printed_form`` integrates ``β/r`` in place of ``β'/r``."""

    r_max: float = 30.0
    rtol: float = 1e-10
    atol: float = 1e-14
    max_step: float = 0.25
    r0: float = 1e-6
    cubic: bool = True
    printed_form: bool = False
    slope_range: tuple = (1e-4, 1e2)
    n_scan: int = 120

    def __post_init__(self):
        if not self.r_max > 20:
            raise ConfigError("r_max must exceed 20", r_max=self.r_max)

    def refined(self, factor=0.5):
        return ShootingProblem(self.r_max, self.rtol * factor, self.atol * factor, self.max_step,
                               self.r0, self.cubic, self.printed_form, self.slope_range, self.n_scan)


@dataclass
class Trajectory:
    s: float
    r: np.ndarray
    beta: np.ndarray
    dbeta: np.ndarray
    sol: object
    zeros: np.ndarray
    extrema: np.ndarray
    turn_back: float
    blowup: bool
    r_end: float

    def __call__(self, r):
        return self.sol(r)


def _rhs(prob):
    c = 1.0 if prob.cubic else 0.0
    if prob.printed_form:
        def f(r, y):
            b, db = y
            return [db, -b / r + b / r**2 - c * b**3 + b]
    else:
        def f(r, y):
            b, db = y
            return [db, -db / r + b / r**2 - c * b**3 + b]
    return f


def initial_data(s, prob):
    r0 = prob.r0
    if prob.printed_form:
        lam = PRINTED_EXPONENT
        return [s * r0**lam, s * lam * r0 ** (lam - 1)]
    c3 = s / 8.0
    return [s * r0 + c3 * r0**3, s + 3 * c3 * r0**2]


def integrate_te(s, prob=None, r_end=None):
    """Integrate from ``r0`` with series data; dense output in ``sol``."""
    prob = prob or ShootingProblem()
    if s == 0:
        raise ConfigError("slope must be nonzero")
    r_end = prob.r_max if r_end is None else r_end

    def ev_zero(r, y):
        return y[0]

    def ev_ext(r, y):
        return y[1]

    def ev_blow(r, y):
        return abs(y[0]) - BLOWUP

    ev_blow.terminal = True
    sol = solve_ivp(_rhs(prob), (prob.r0, r_end), initial_data(s, prob), method="DOP853",
                    rtol=prob.rtol, atol=prob.atol, max_step=prob.max_step, dense_output=True,
                    events=[ev_zero, ev_ext, ev_blow])
    if sol.status == -1:
        raise NumericError("ODE integration failed", s=s, message=sol.message)
    ext = sol.t_events[1]
    yext = sol.y_events[1]
    turn = [r for r, y in zip(ext, yext) if y[0] ** 2 < 1 + 1 / r**2] if prob.cubic else []
    return Trajectory(s=s, r=sol.t, beta=sol.y[0], dbeta=sol.y[1], sol=sol.sol,
                      zeros=sol.t_events[0], extrema=ext,
                      turn_back=turn[0] if turn else np.inf,
                      blowup=sol.status == 1, r_end=float(sol.t[-1]))


def count_sign_changes(traj, r_stop=None):
    """Strict sign changes of ``β`` on ``(r0, r_stop)``.

    ``traj`` may be a ``Trajectory`` (event-located zeros) or a pair
    ``(r, values)`` of samples; sampled zeros are refined by bisection on
    linear interpolation only to count them, not to locate them.
    """
    if isinstance(traj, Trajectory):
        stop = traj.r_end if r_stop is None else r_stop
        return int(np.sum(traj.zeros < stop))
    r, vals = (np.asarray(a, dtype=float) for a in traj)
    if r_stop is not None:
        keep = r < r_stop
        r, vals = r[keep], vals[keep]
    sgn = np.sign(vals)
    sgn = sgn[sgn != 0]
    return int(np.sum(sgn[1:] != sgn[:-1]))


def zero_count(s, prob):
    """Crossings before the first turn-back (or before ``r_max``)."""
    traj = integrate_te(s, prob)
    return count_sign_changes(traj, min(traj.turn_back, traj.r_end))


_SCAN_CACHE = {}


def _key(prob):
    return (prob.r_max, prob.rtol, prob.atol, prob.max_step, prob.r0, prob.cubic,
            prob.printed_form, tuple(prob.slope_range), prob.n_scan)


def slope_scan(prob, slopes=None):
    """Zero counts over a log-spaced slope scan (cached per problem for the default slopes)."""
    if slopes is not None:
        slopes = np.asarray(slopes, dtype=float)
        return slopes, np.array([zero_count(s, prob) for s in slopes])
    key = _key(prob)
    if key not in _SCAN_CACHE:
        slopes = np.logspace(*np.log10(prob.slope_range), prob.n_scan)
        _SCAN_CACHE[key] = (slopes, np.array([zero_count(s, prob) for s in slopes]))
    slopes, counts = _SCAN_CACHE[key]
    return slopes.copy(), counts.copy()


@dataclass
class NodalSolution:
    n: int
    slope_star: float
    profile: RadialProfile
    dprofile: RadialProfile
    zeros: int
    deriv_zeros: int
    residual: float
    r_match: float
    tail_amplitude: float
    bracket: tuple
    scan_log: list = field(default_factory=list)
    beta_fn: object = field(default=None, repr=False)
    dbeta_fn: object = field(default=None, repr=False)

    def beta(self, r):
        """Dense ``β(r)``; falls back to the sampled mesh after a CSV round trip."""
        return self.beta_fn(r) if self.beta_fn is not None else self.profile(r)

    def dbeta(self, r):
        return self.dbeta_fn(r) if self.dbeta_fn is not None else self.dprofile(r)

    def summary(self):
        return {"n": self.n, "slope_star": self.slope_star, "residual": self.residual,
                "zeros": self.zeros, "deriv_zeros": self.deriv_zeros, "r_match": self.r_match,
                "r_max": float(self.profile.r[-1]), "beta_at_r_max": float(self.profile.value[-1])}


def _bracket(n, prob):
    slopes, counts = slope_scan(prob)
    log_rows = [(float(s), int(c)) for s, c in zip(slopes, counts)]
    lo = np.flatnonzero(counts == n)
    hi = np.flatnonzero(counts > n)
    if lo.size == 0 or hi.size == 0:
        raise SearchError(f"no slope bracket for n={n}", n=n, scan=log_rows[:: max(1, len(log_rows) // 50)])
    i = lo[-1]
    j = hi[hi > i]
    if j.size == 0:
        raise SearchError(f"no slope bracket for n={n}", n=n)
    return slopes[i], slopes[j[0]], log_rows


def _bisect(n, s_lo, s_hi, prob):
    for _ in range(200):
        mid = 0.5 * (s_lo + s_hi)
        if mid in (s_lo, s_hi):
            break
        if zero_count(mid, prob) <= n:
            s_lo = mid
        else:
            s_hi = mid
    return s_lo, s_hi


def _match_tail(r, b, db):
    """Coefficient ``A`` of ``K1`` after removing the growing ``I1`` part at ``r``."""
    k1 = kve(1, r) * np.exp(-r)
    dk1 = -(kve(0, r) * np.exp(-r)) - k1 / r
    i1 = iv(1, r)
    di1 = iv(0, r) - i1 / r
    det = k1 * di1 - i1 * dk1
    return (b * di1 - i1 * db) / det


def _k1_tail(A, r):
    k1 = kve(1, r) * np.exp(-r)
    dk1 = -(kve(0, r) * np.exp(-r)) - k1 / r
    return A * k1, A * dk1


def _nonlinear_tail(r_c, b_c, A0, r_max, prob):
    """Decaying solution on ``[r_c, r_max]`` with ``β(r_c) = b_c``.

    Integrated inward from ``A K1`` data at ``r_max``, the stable direction;
    the amplitude ``A`` is fixed by a secant solve on the mismatch at ``r_c``.
    """
    f = _rhs(prob)

    def run(A):
        return solve_ivp(f, (r_max, r_c), list(_k1_tail(A, r_max)), method="DOP853", rtol=prob.rtol,
                         atol=prob.atol * 1e-3, max_step=prob.max_step, dense_output=True)

    def miss(A):
        return run(A).y[0, -1] - b_c

    lo, hi = 0.5 * A0, 2.0 * A0
    while miss(lo) * miss(hi) > 0:
        lo, hi = 0.5 * lo, 2.0 * hi
    A = brentq(miss, lo, hi, xtol=1e-15 * abs(A0), rtol=1e-15)
    return A, run(A).sol


def ode_residual(beta_fn, dbeta_fn, r, delta=1e-5, cubic=True):
    """``|β'' + β'/r - β/r² + β³ - β|`` with ``β''`` from central differences of ``β'``."""
    r = np.asarray(r, dtype=float)
    d2 = (dbeta_fn(r + delta) - dbeta_fn(r - delta)) / (2 * delta)
    b = beta_fn(r)
    c = 1.0 if cubic else 0.0
    return np.abs(d2 + dbeta_fn(r) / r - b / r**2 + c * b**3 - b)


def find_nodal(n, prob=None, n_mesh=3001, rel_sep=1e-9):
    """Slope and profile of the nodal solution with ``n`` interior zeros."""
    prob = prob or ShootingProblem()
    if n < 0:
        raise ConfigError("n must be nonnegative", n=n)
    s_lo, s_hi, scan = _bracket(n, prob)
    s_lo, s_hi = _bisect(n, s_lo, s_hi, prob)
    t_lo = integrate_te(s_lo, prob)
    t_hi = integrate_te(s_hi, prob)
    last_zero = t_lo.zeros[n - 1] if n > 0 else 0.0
    # start comparing at the last hump, away from the zero of β
    humps = t_lo.extrema[t_lo.extrema > last_zero]
    start = humps[0] if humps.size else max(last_zero, 1.0)

    # shooting branch is trusted while the bracketing trajectories agree
    rr = np.linspace(start, min(t_lo.turn_back, t_lo.r_end), 4000)
    b_lo = t_lo(rr)[0]
    b_hi = t_hi(rr)[0]
    ok = np.abs(b_hi - b_lo) <= rel_sep * np.abs(b_lo)
    bad = np.flatnonzero(~ok)
    if bad.size == 0 or bad[0] == 0:
        raise NumericError("bracketing trajectories never agree on the tail", n=n, s=[s_lo, s_hi])
    r_c = rr[bad[0] - 1]
    # the accepted slope is re-integrated tightly for the dense profile
    fine = ShootingProblem(prob.r_max, 1e-13, 1e-16, min(prob.max_step, 0.05), prob.r0,
                           prob.cubic, prob.printed_form, prob.slope_range, prob.n_scan)
    t_lo = integrate_te(s_lo, fine, r_end=r_c + 1.0)
    b_c, db_c = t_lo(r_c)
    r_max = prob.r_max
    A0 = _match_tail(r_c, b_c, db_c)
    while abs(_k1_tail(A0, r_max)[0]) > 1e-8:
        r_max *= 2
    A, tail = _nonlinear_tail(r_c, b_c, A0, r_max, prob)

    def evaluate(r, row):
        r = np.asarray(r, dtype=float)
        flat = r.ravel()
        head = t_lo(np.clip(flat, prob.r0, r_c))[row]
        far = tail(np.clip(flat, r_c, r_max))[row]
        near = s_lo * flat if row == 0 else np.full_like(flat, s_lo)
        out = np.where(flat <= r_c, np.where(flat < prob.r0, near, head), np.where(flat <= r_max, far, 0.0))
        return out.reshape(r.shape)

    def beta_fn(r):
        return evaluate(r, 0)

    def dbeta_fn(r):
        return evaluate(r, 1)

    mesh = np.linspace(0.0, r_max, n_mesh)
    beta = beta_fn(mesh)
    dbeta = dbeta_fn(mesh)

    # residual away from the series start and the matching point
    rc = np.linspace(10 * 1e-5 + prob.r0, r_max - 1e-4, 20001)
    rc = rc[np.abs(rc - r_c) > 2e-5]
    res = float(np.max(ode_residual(beta_fn, dbeta_fn, rc)))
    dense = np.linspace(prob.r0, r_max, 200001)
    zeros = count_sign_changes((dense, beta_fn(dense)))
    dzeros = count_sign_changes((dense, dbeta_fn(dense)))
    return NodalSolution(
        n=n, slope_star=0.5 * (s_lo + s_hi),
        profile=RadialProfile(mesh, beta), dprofile=RadialProfile(mesh, dbeta),
        zeros=zeros, deriv_zeros=dzeros, residual=res, r_match=float(r_c),
        tail_amplitude=float(A), bracket=(float(s_lo), float(s_hi)), scan_log=scan,
        beta_fn=beta_fn, dbeta_fn=dbeta_fn,
    )


def solve_te_fd(n_nodes, h, r_max=30.0, guess=None, tol=1e-12, maxiter=50):
    """Second-order finite-difference BVP solve on ``r_i = i h``.

    Works with ``φ = β/r``, which is even and satisfies the regular equation
    ``φ'' + 3φ'/r + r²φ³ - φ = 0`` with ``φ'(0) = 0`` and ``φ(r_max) = 0``;
    at ``r = 0`` the operator becomes ``4φ''``.  The slope is ``φ(0)``, so it
    converges at ``O(h²)``.  Newton iteration starts from ``guess`` (a
    callable ``r -> β``).  Returns ``(r, β, slope)``.
    """
    N = int(round(r_max / h))
    r = h * np.arange(N + 1)
    rr = r[:-1]
    if guess is None:
        raise ConfigError("an initial guess is required")
    safe = np.where(rr > 0, rr, 1.0)
    phi = np.where(rr > 0, guess(rr) / safe, 0.0)
    phi[0] = 2 * phi[1] - phi[2]
    lower = 1 / h**2 - 3 / (2 * h * safe[1:])
    upper = 1 / h**2 + 3 / (2 * h * safe[:-1])
    upper[0] = 8 / h**2
    for _ in range(maxiter):
        full = np.concatenate([phi, [0.0]])
        lap = np.empty_like(phi)
        lap[0] = 8 * (full[1] - full[0]) / h**2
        lap[1:] = ((full[2:] - 2 * phi[1:] + full[:-2]) / h**2
                   + 3 * (full[2:] - full[:-2]) / (2 * h * rr[1:]))
        F = lap + rr**2 * phi**3 - phi
        diag = -2 / h**2 + 3 * rr**2 * phi**2 - 1
        diag[0] = -8 / h**2 - 1
        Jm = sparse.diags([lower, diag, upper], [-1, 0, 1], format="csc")
        step = spsolve(Jm, -F)
        phi = phi + step
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise NumericError("finite-difference Newton did not converge", h=h, iterations=maxiter)
    beta = np.concatenate([rr * phi, [0.0]])
    zeros = count_sign_changes((r[1:-1], beta[1:-1]))
    if zeros != n_nodes:
        raise NumericError("finite-difference solution changed nodal class", expected=n_nodes, got=zeros)
    return r, beta, float(phi[0])


def linear_oracle(s, r, prob=None):
    """Solution of the linearised equation ``β'' + β'/r - β/r² - β = 0``: ``2 s I1(r)``."""
    return 2 * s * iv(1, np.asarray(r, dtype=float))


def te_profile_on_grid(sol, grid):
    """``(β(r)/r)(-x2, x1, 0)`` with ``Ũ = 0``; ``sol`` may be a ``NodalSolution`` or a callable."""
    beta = sol.beta if isinstance(sol, NodalSolution) else sol
    if isinstance(sol, NodalSolution) and min(grid.R1, grid.R2) * np.sqrt(2) > sol.profile.r[-1]:
        raise ConfigError("grid extends beyond the profile mesh")
    X1, X2 = grid.coords()
    r = np.hypot(X1, X2)
    safe = np.where(r > 0, r, 1.0)
    a = np.where(r > 0, beta(r) / safe, 0.0)
    u = np.zeros((6, *grid.shape))
    u[0] = -a * X2
    u[1] = a * X1
    return u


te_field_from_profile = te_profile_on_grid

__all__ = ["ShootingProblem", "Trajectory", "NodalSolution", "integrate_te", "count_sign_changes",
           "zero_count", "slope_scan", "find_nodal", "solve_te_fd", "linear_oracle",
           "te_field_from_profile", "ode_residual"]
