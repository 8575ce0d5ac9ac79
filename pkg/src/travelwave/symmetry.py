"""SO(2) action, the ρ/τ/ζ split of equivariant fields and the S, S̃ involutions.

Two families of tools live here:

* the continuum constructions (``so2_act`` with bilinear resampling, the
  pointwise ρ/τ/ζ split, ``project_S``/``project_S_tilde``, radial profiles);
* the grid-exact symmetry group used by the solvers: quarter turns,
  the reflection ``x2 -> -x2`` (which flips the τ parts of both profiles and
  fixes their ρ and ζ parts) and the TM sign flip of ``(U1, U2, Ũ3)``.  These
  commute with every central-difference operator, so the Palais principle
  holds exactly on the grid.
"""
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .grid import RadialProfile, radial_bins

_REFLECT_SIGNS = np.array([1.0, -1.0, 1.0, 1.0, -1.0, 1.0])[:, None, None]
_TM_MASK = np.array([0.0, 0.0, 1.0, 1.0, 1.0, 0.0])[:, None, None]


def rotation_block(angle):
    """``g̃ = diag(g, 1, g, 1)`` for the rotation ``g`` by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    g = np.array([[c, -s], [s, c]])
    out = np.eye(6)
    out[0:2, 0:2] = g
    out[3:5, 3:5] = g
    return out


def _rotate_components(u, angle):
    return np.einsum("ab,b...->a...", rotation_block(angle), u)


def quarter_turn(u, grid, times=1):
    """``g ⋆ u`` for ``g`` the rotation by ``times * π/2``; exact on a square grid."""
    times %= 4
    if times == 0:
        return u.copy()
    n = grid.n1
    i = np.arange(n)
    src = (n - i) % n
    out = u
    for _ in range(times):
        # (g ⋆ u)(x1, x2) = g̃ u(x2, -x1)
        moved = out[:, :, src].transpose(0, 2, 1)
        out = np.stack([-moved[1], moved[0], moved[2], -moved[4], moved[3], moved[5]])
    return out


def reflect(u, grid):
    """``diag(1,-1,1,1,-1,1) u(x1, -x2)``: fixes ρ/ζ parts, negates τ parts."""
    n = grid.n2
    src = (n - np.arange(n)) % n
    return _REFLECT_SIGNS * u[:, :, src]


def tm_flip(u):
    """``(U1, U2, U3, Ũ1, Ũ2, Ũ3) -> (-U1, -U2, U3, Ũ1, Ũ2, -Ũ3)``."""
    return (2 * _TM_MASK - 1) * u


def project_tm(u):
    """Keep only ``U3, Ũ1, Ũ2`` (the fixed space of ``tm_flip``)."""
    return _TM_MASK * u


def symmetrize_dihedral(u, grid, tm=False):
    """Average over quarter turns and the reflection (and the TM flip)."""
    acc = np.zeros_like(u)
    for t in range(4):
        r = quarter_turn(u, grid, t)
        acc += r + reflect(r, grid)
    acc /= 8.0
    return project_tm(acc) if tm else acc


def dihedral_residual(u, grid):
    """Largest deviation of ``u`` from its dihedral average, relative to ``max|u|``."""
    scale = np.max(np.abs(u))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(u - symmetrize_dihedral(u, grid))) / scale)


def so2_act(angle, u, grid):
    """``(g ⋆ u)(x) = g̃ u(g⁻¹ x)`` with bilinear resampling and periodic wrap.

    Multiples of ``π/2`` are routed through the exact grid permutation.
    """
    quarters = angle / (np.pi / 2)
    if grid.is_square and abs(quarters - round(quarters)) < 1e-12:
        return quarter_turn(u, grid, int(round(quarters)))
    X1, X2 = grid.coords()
    c, s = np.cos(angle), np.sin(angle)
    y1 = c * X1 + s * X2
    y2 = -s * X1 + c * X2
    i = (y1 + grid.R1) / grid.h
    j = (y2 + grid.R2) / grid.h
    sampled = np.stack([map_coordinates(comp, [i, j], order=1, mode="grid-wrap") for comp in u])
    return _rotate_components(sampled, angle)


def symmetrize_so2(u, grid, m=64):
    """``(1/m) Σ_j so2_act(2πj/m, u)``."""
    if m < 8:
        raise ValueError("need at least 8 rotations")
    return sum(so2_act(2 * np.pi * j / m, u, grid) for j in range(m)) / m


def equivariance_residual(u, grid, angles=(0.3, 1.1, 2.2)):
    """``max_g |g⋆u - u|_∞ / |u|_∞`` over a few generic angles (interpolation floor ``O(h²)``)."""
    scale = np.max(np.abs(u))
    if scale == 0:
        return 0.0
    return float(max(np.max(np.abs(so2_act(a, u, grid) - u)) for a in angles) / scale)


def _unit_vectors(grid):
    X1, X2 = grid.coords()
    r = np.hypot(X1, X2)
    safe = np.where(r > 0, r, 1.0)
    e_r = np.stack([X1 / safe, X2 / safe]) * (r > 0)
    e_t = np.stack([-X2 / safe, X1 / safe]) * (r > 0)
    return e_r, e_t, r


def radial_coefficients(U, grid):
    """Pointwise ``(α_ρ, α_τ, α_ζ)`` of a 3-vector profile; ``α_ρ = α_τ = 0`` at ``x = 0``."""
    e_r, e_t, _ = _unit_vectors(grid)
    return (np.sum(e_r * U[:2], axis=0), np.sum(e_t * U[:2], axis=0), U[2].copy())


def profile_parts(U, grid):
    """``(U_ρ, U_τ, U_ζ)`` with ``U = U_ρ + U_τ + U_ζ`` exactly.

    At the origin the planar value has no direction; it is assigned to ``U_ρ``.
    """
    e_r, e_t, r = _unit_vectors(grid)
    a_t = np.sum(e_t * U[:2], axis=0)
    U_t = np.zeros_like(U)
    U_t[:2] = a_t * e_t
    U_z = np.zeros_like(U)
    U_z[2] = U[2]
    U_r = U - U_t - U_z
    return U_r, U_t, U_z


def _profile(values, grid, origin_zero):
    r, mean, std, _ = radial_bins(grid, values)
    if origin_zero:
        mean = mean.copy()
        mean[0] = 0.0
        std = std.copy()
        std[0] = 0.0
    return RadialProfile(r, mean, std)


@dataclass
class RtzSplit:
    """ρ/τ/ζ decomposition of both profiles of ``u``.

    ``u_rho``, ``u_tau``, ``u_zeta`` follow the convention used for ``S``:
    ``u_rho = (U_ρ, Ũ)``, ``u_tau = (U_τ, 0)``, ``u_zeta = (U_ζ, 0)``.
    ``ut_rho`` etc. are the mirror parts used for ``S̃``:
    ``ut_rho = (U, Ũ_ρ)``, ``ut_tau = (0, Ũ_τ)``, ``ut_zeta = (0, Ũ_ζ)``.
    ``pure`` holds the six pure pieces ``(U_ρ, U_τ, U_ζ, Ũ_ρ, Ũ_τ, Ũ_ζ)`` as
    6-component fields; they sum to ``u``.
    """

    u_rho: np.ndarray
    u_tau: np.ndarray
    u_zeta: np.ndarray
    ut_rho: np.ndarray
    ut_tau: np.ndarray
    ut_zeta: np.ndarray
    pure: dict
    coefficients: dict
    profiles: dict
    equivariance_residual: float
    equivariant: bool


def decompose_rtz(u, grid, tol=None, check=True):
    """Pointwise ρ/τ/ζ split of ``u`` plus radial profiles from ring averages.

    Non-equivariant input only sets ``equivariant=False`` and a warning.
    """
    U, Ut = u[:3], u[3:]
    Ur, Utau, Uz = profile_parts(U, grid)
    Vr, Vtau, Vz = profile_parts(Ut, grid)
    zero = np.zeros_like(U)
    cat = lambda a, b: np.concatenate([a, b])  # noqa: E731
    coeffs = {}
    for name, prof in (("", U), ("tilde_", Ut)):
        a_r, a_t, a_z = radial_coefficients(prof, grid)
        coeffs[name + "rho"], coeffs[name + "tau"], coeffs[name + "zeta"] = a_r, a_t, a_z
    profiles = {name: _profile(val, grid, origin_zero=name.endswith(("rho", "tau")))
                for name, val in coeffs.items()}
    res = equivariance_residual(u, grid) if check else 0.0
    if tol is None:
        tol = 10 * grid.h**2
    ok = res <= tol
    if not ok:
        warnings.warn(f"field is not SO(2)-equivariant (residual {res:.2e})", stacklevel=2)
    pure = {"rho": cat(Ur, zero), "tau": cat(Utau, zero), "zeta": cat(Uz, zero),
            "tilde_rho": cat(zero, Vr), "tilde_tau": cat(zero, Vtau), "tilde_zeta": cat(zero, Vz)}
    return RtzSplit(
        u_rho=cat(Ur, Ut), u_tau=cat(Utau, zero), u_zeta=cat(Uz, zero),
        ut_rho=cat(U, Vr), ut_tau=cat(zero, Vtau), ut_zeta=cat(zero, Vz),
        pure=pure, coefficients=coeffs, profiles=profiles,
        equivariance_residual=res, equivariant=ok,
    )


def _tau_of(prof, grid):
    return profile_parts(prof, grid)[1]


def S_action(u, grid):
    """``S u = u_ρ - u_τ + u_ζ``."""
    out = u.copy()
    out[:3] -= 2 * _tau_of(u[:3], grid)
    return out


def S_tilde_action(u, grid):
    """``S̃ u = ũ_ρ - ũ_τ + ũ_ζ``."""
    out = u.copy()
    out[3:] -= 2 * _tau_of(u[3:], grid)
    return out


def minus_S_projector(u, grid):
    """Fixed-point projection of ``-S``: keeps only ``u_τ`` (TE-type fields)."""
    out = np.zeros_like(u)
    out[:3] = _tau_of(u[:3], grid)
    return out


def project_S(u, grid):
    """``(u + S u) / 2 = u_ρ + u_ζ``."""
    out = u.copy()
    out[:3] -= _tau_of(u[:3], grid)
    return out


def project_S_tilde(u, grid):
    """``(u + S̃ u) / 2``, removing the τ part of the second profile."""
    out = u.copy()
    out[3:] -= _tau_of(u[3:], grid)
    return out


def tau_fraction(u, grid):
    """``(|U_τ|₂² + |Ũ_τ|₂²)^(1/2) / |u|₂`` with pointwise τ parts."""
    nu = grid.norm(u)
    if nu == 0:
        return 0.0
    t = np.concatenate([_tau_of(u[:3], grid), _tau_of(u[3:], grid)])
    return grid.norm(t) / nu


def profile_tau_fraction(split):
    """τ content of the ring-averaged profiles relative to the total profile norm."""
    p = split.profiles
    tau = np.hypot(p["tau"].l2(), p["tilde_tau"].l2())
    total = np.sqrt(sum(prof.l2() ** 2 for prof in p.values()))
    return float(tau / total) if total > 0 else 0.0


def equivariant_field(grid, a_rho=None, a_tau=None, a_zeta=None,
                      at_rho=None, at_tau=None, at_zeta=None):
    """Build ``u`` from radial callables ``r -> value`` of the six coefficients.

    ``U = a_rho(r) e_r + a_tau(r) e_τ + a_zeta(r) e_3`` and likewise for ``Ũ``.
    """
    e_r, e_t, r = _unit_vectors(grid)
    u = np.zeros((6, *grid.shape))
    for off, (fr, ft, fz) in ((0, (a_rho, a_tau, a_zeta)), (3, (at_rho, at_tau, at_zeta))):
        if fr is not None:
            u[off:off + 2] += fr(r) * e_r
        if ft is not None:
            u[off:off + 2] += ft(r) * e_t
        if fz is not None:
            u[off + 2] += fz(r)
    return u
