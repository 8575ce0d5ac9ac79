"""Discrete ∇̊, ∇̊×, the curl-curl operator L and the Helmholtz-type split.

Every first derivative is the periodic central difference
``(a[i+1] - a[i-1]) / 2h``.  Using one stencil family throughout makes
``curl(grad p) = 0`` and ``L = curl curl`` hold to rounding, and makes the
FFT split below an exact L2-orthogonal projection.

Sums are plain numpy reductions over the whole grid; for a fixed array
layout the result is bitwise reproducible.
"""
import numpy as np

from .errors import ConfigError, ShapeError


def _check_k(k):
    if k == 0 or not np.isfinite(k):
        raise ConfigError("wave number k must be finite and nonzero", k=k)


def d1(a, h):
    """Central difference along x1 (axis -2)."""
    return (np.roll(a, -1, axis=-2) - np.roll(a, 1, axis=-2)) / (2 * h)


def d2(a, h):
    """Central difference along x2 (axis -1)."""
    return (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) / (2 * h)


def circ_grad(p, k, grid):
    """``∇̊(α, α̃) = (∂1α, ∂2α, kα̃, ∂1α̃, ∂2α̃, -kα)``."""
    _check_k(k)
    p = grid.check(p, 2)
    a, at = p
    h = grid.h
    return np.stack([d1(a, h), d2(a, h), k * at, d1(at, h), d2(at, h), -k * a])


def circ_grad_adjoint(u, k, grid):
    """L2 adjoint of ``circ_grad``: minus the two constraint functionals of V."""
    _check_k(k)
    u = grid.check(u, 6)
    h = grid.h
    return -np.stack([d1(u[0], h) + d2(u[1], h) + k * u[5],
                      d1(u[3], h) + d2(u[4], h) - k * u[2]])


def divergence_residuals(u, k, grid):
    """``(∂1u1 + ∂2u2 + kũ3, ∂1ũ1 + ∂2ũ2 - ku3)``; both vanish on V."""
    return -circ_grad_adjoint(u, k, grid)


def circ_curl(u, k, grid):
    """The 6-component ``∇̊×`` with central differences."""
    _check_k(k)
    u = grid.check(u, 6)
    h = grid.h
    b1, b2, b3, c1, c2, c3 = u
    return np.stack([
        d2(b3, h) - k * c2,
        k * c1 - d1(b3, h),
        d1(b2, h) - d2(b1, h),
        d2(c3, h) + k * b2,
        -k * b1 - d1(c3, h),
        d1(c2, h) - d2(c1, h),
    ])


def circ_curl_spectral(u, k, grid):
    """``∇̊×`` with exact Fourier derivatives.

    For smooth fields that decay to rounding level inside the box this is a
    near machine-precision approximation of the continuum curl; it is used for
    pointwise identities that central differences only satisfy to ``O(h²)``.
    """
    _check_k(k)
    u = grid.check(u, 6)
    K1, K2 = grid.frequencies()

    def sd(a, K):
        return np.real(np.fft.ifft2(1j * K * np.fft.fft2(a)))

    b1, b2, b3, c1, c2, c3 = u
    return np.stack([
        sd(b3, K2) - k * c2,
        k * c1 - sd(b3, K1),
        sd(b2, K1) - sd(b1, K2),
        sd(c3, K2) + k * b2,
        -k * b1 - sd(c3, K1),
        sd(c2, K1) - sd(c1, K2),
    ])


def apply_L(u, k, grid):
    """``L u`` as ``∇̊×∇̊× u``."""
    return circ_curl(circ_curl(u, k, grid), k, grid)


def _dxx(a, h, axis):
    return (np.roll(a, -2, axis=axis) - 2 * a + np.roll(a, 2, axis=axis)) / (4 * h * h)


def _dxy(a, h):
    pp = np.roll(np.roll(a, -1, axis=-2), -1, axis=-1)
    pm = np.roll(np.roll(a, -1, axis=-2), 1, axis=-1)
    mp = np.roll(np.roll(a, 1, axis=-2), -1, axis=-1)
    mm = np.roll(np.roll(a, 1, axis=-2), 1, axis=-1)
    return (pp - pm - mp + mm) / (4 * h * h)


def apply_L_direct(u, k, grid):
    """``L u`` from the explicit 6x6 operator matrix.

    Second derivatives use the wide stencils ``∂ii = (a[i+2] - 2a + a[i-2]) / 4h²``
    and the four-corner ``∂12`` so the result equals ``∇̊×∇̊×`` to rounding.
    """
    _check_k(k)
    u = grid.check(u, 6)
    h = grid.h
    k2 = k * k
    b1, b2, b3, c1, c2, c3 = u
    xx = lambda a: _dxx(a, h, -2)  # noqa: E731
    yy = lambda a: _dxx(a, h, -1)  # noqa: E731
    return np.stack([
        -yy(b1) + k2 * b1 + _dxy(b2, h) + k * d1(c3, h),
        _dxy(b1, h) - xx(b2) + k2 * b2 + k * d2(c3, h),
        -xx(b3) - yy(b3) + k * d1(c1, h) + k * d2(c2, h),
        -k * d1(b3, h) - yy(c1) + k2 * c1 + _dxy(c2, h),
        -k * d2(b3, h) + _dxy(c1, h) - xx(c2) + k2 * c2,
        -k * d1(b1, h) - k * d2(b2, h) - xx(c3) - yy(c3),
    ])


def symbol_L(xi, k):
    """Real symmetric Fourier symbol of ``L`` at frequency ``xi``.

    With ``∂ -> iξ`` the symbol is Hermitian; conjugating by
    ``diag(1, 1, i, 1, 1, -i)`` makes it real without changing the spectrum.
    ``xi`` may have shape ``(2,)`` or ``(..., 2)``; pass ``discrete_frequency``
    values to get the symbol of the central-difference operator.
    """
    xi = np.asarray(xi, dtype=float)
    x, y = xi[..., 0], xi[..., 1]
    k2 = k * k
    z = np.zeros_like(x)
    rows = [
        [y * y + k2, -x * y, z, z, z, k * x],
        [-x * y, x * x + k2, z, z, z, k * y],
        [z, z, x * x + y * y, k * x, k * y, z],
        [z, z, k * x, y * y + k2, -x * y, z],
        [z, z, k * y, -x * y, x * x + k2, z],
        [k * x, k * y, z, z, z, x * x + y * y],
    ]
    return np.moveaxis(np.array(rows), (0, 1), (-2, -1))


def discrete_frequency(xi, h):
    """``sin(ξ h) / h``: the multiplier of the central difference."""
    return np.sin(np.asarray(xi, dtype=float) * h) / h


def _fft_inverse_helmholtz(rhs, k, grid):
    K1, K2 = grid.frequencies()
    s1 = discrete_frequency(K1, grid.h)
    s2 = discrete_frequency(K2, grid.h)
    return np.real(np.fft.ifft2(np.fft.fft2(rhs) / (s1 * s1 + s2 * s2 + k * k)))


def solve_potentials(u, k, grid):
    """Potentials ``p`` with ``∇̊ᵀ∇̊ p = ∇̊ᵀ u``, i.e. ``(-Δ + k²) α = -(∂1u1 + ∂2u2 + kũ3)``
    and ``(-Δ + k²) α̃ = -(∂1ũ1 + ∂2ũ2 - ku3)`` with the wide discrete Laplacian."""
    return _fft_inverse_helmholtz(circ_grad_adjoint(u, k, grid), k, grid)


def helmholtz_split(u, k, grid):
    """Split ``u = v + w`` with ``v`` in the discrete V and ``w = ∇̊p`` in ker L.

    Returns ``(v, w, p)``.
    """
    p = solve_potentials(u, k, grid)
    w = circ_grad(p, k, grid)
    return u - w, w, p


def project_V(u, k, grid):
    return helmholtz_split(u, k, grid)[0]


def bilinear_bL(u, v, k, grid):
    """``b_L(u, v) = ∫ ∇̊×u · ∇̊×v dx``."""
    if np.shape(u) != np.shape(v):
        raise ShapeError("fields live on different grids", u=list(np.shape(u)), v=list(np.shape(v)))
    return grid.inner(circ_curl(u, k, grid), circ_curl(v, k, grid))


def v_norm(v, k, grid):
    """``‖v‖ = (Σ_i |∇v_i|² + k²|v_i|²)^(1/2)`` over all six components."""
    h = grid.h
    return float(np.sqrt(grid.inner(d1(v, h), d1(v, h)) + grid.inner(d2(v, h), d2(v, h))
                         + k * k * grid.inner(v, v)))


def riesz_V(g, k, grid, shift=0.0):
    """Apply ``(-Δ + k² - shift)^{-1}`` componentwise (a Fourier multiplier).

    On V this inverts ``L - shift``; it is the preconditioner of the solvers.
    """
    K1, K2 = grid.frequencies()
    s1 = discrete_frequency(K1, grid.h)
    s2 = discrete_frequency(K2, grid.h)
    return np.real(np.fft.ifft2(np.fft.fft2(g) / (s1 * s1 + s2 * s2 + k * k - shift)))


def dual_norm_V(g, k, grid):
    """``sup_{‖φ‖ = 1} ⟨g, φ⟩₂`` over V, for ``g`` already in V."""
    return float(np.sqrt(max(grid.inner(g, riesz_V(g, k, grid)), 0.0)))
