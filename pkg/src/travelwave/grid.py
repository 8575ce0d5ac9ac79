"""Uniform periodic grids, 6-component fields and their on-disk formats.

A ``Field6`` is a plain ``ndarray`` of shape ``(6, n1, n2)`` holding
``(U1, U2, U3, Ũ1, Ũ2, Ũ3)``; a ``ScalarPair`` is ``(2, n1, n2)`` holding the
potentials ``(α, α̃)``.  Axis 1 runs along x1 and axis 2 along x2.

Binary field layout (little endian)::

    magic   8 bytes   b"TWFIELD6"
    n1, n2  2 x int64
    h, k    2 x float64
    data    n1*n2*6 x float64, row-major over (i, j), then the 6 components

CSV field layout: one ``# n1,n2,h,k`` header line with values, a column
header ``i,j,x1,x2,U1,U2,U3,Ut1,Ut2,Ut3`` and one row per grid point.
"""
import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ShapeError

_MAGIC = b"TWFIELD6"
_HEADER = struct.Struct("<8sqqdd")


@dataclass(frozen=True)
class Grid2D:
    """Periodic grid on ``[-R1, R1) x [-R2, R2)`` with ``R = n h / 2``."""

    n1: int
    n2: int
    h: float

    def __post_init__(self):
        if self.n1 < 16 or self.n2 < 16:
            raise ConfigError("grid needs at least 16 points per axis", n1=self.n1, n2=self.n2)
        if self.n1 % 2 or self.n2 % 2:
            raise ConfigError("grid sizes must be even so that x=0 is a grid point",
                              n1=self.n1, n2=self.n2)
        if not (np.isfinite(self.h) and self.h > 0):
            raise ConfigError("grid spacing must be positive", h=self.h)

    @classmethod
    def square(cls, n, R):
        """``n x n`` grid covering ``[-R, R)^2``."""
        return cls(int(n), int(n), 2.0 * float(R) / int(n))

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def R1(self):
        return 0.5 * self.n1 * self.h

    @property
    def R2(self):
        return 0.5 * self.n2 * self.h

    @property
    def is_square(self):
        return self.n1 == self.n2

    @property
    def cell_area(self):
        return self.h * self.h

    def axes(self):
        x1 = -self.R1 + self.h * np.arange(self.n1)
        x2 = -self.R2 + self.h * np.arange(self.n2)
        return x1, x2

    def coords(self):
        """Meshgrid ``(X1, X2)`` with ``ij`` indexing."""
        x1, x2 = self.axes()
        return np.meshgrid(x1, x2, indexing="ij")

    def radius(self):
        X1, X2 = self.coords()
        return np.hypot(X1, X2)

    def origin_index(self):
        return self.n1 // 2, self.n2 // 2

    def frequencies(self):
        """Angular FFT frequencies ``(K1, K2)`` matching ``numpy.fft.fft2`` layout."""
        k1 = 2 * np.pi * np.fft.fftfreq(self.n1, d=self.h)
        k2 = 2 * np.pi * np.fft.fftfreq(self.n2, d=self.h)
        return np.meshgrid(k1, k2, indexing="ij")

    def integrate(self, values):
        """Rectangle rule, exact for trigonometric polynomials under periodicity."""
        return self.cell_area * np.sum(values, axis=(-2, -1))

    def inner(self, u, v):
        """Discrete L2 inner product of two stacked fields."""
        return self.cell_area * float(np.sum(u * v))

    def norm(self, u):
        return float(np.sqrt(self.inner(u, u)))

    def check(self, arr, ncomp=None):
        arr = np.asarray(arr, dtype=float)
        if arr.shape[-2:] != self.shape or (ncomp is not None and arr.shape[:-2] != (ncomp,)):
            expected = (ncomp, *self.shape) if ncomp is not None else self.shape
            raise ShapeError("array does not match grid", got=list(arr.shape), expected=list(expected))
        return arr

    def to_dict(self):
        return {"n1": self.n1, "n2": self.n2, "h": self.h, "R1": self.R1, "R2": self.R2}


def zeros_field(grid, ncomp=6):
    return np.zeros((ncomp, *grid.shape))


def pointwise_norm(u):
    """``|u(x)| = (|U|^2 + |Ũ|^2)^(1/2)`` at every grid point."""
    return np.sqrt(np.sum(np.asarray(u) ** 2, axis=0))


# -- Field6 serialisation ----------------------------------------------------

def save_field_binary(path, u, grid, k):
    u = grid.check(u, 6)
    data = np.ascontiguousarray(np.moveaxis(u, 0, -1), dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, grid.n1, grid.n2, float(grid.h), float(k)))
        fh.write(data.tobytes())


def load_field_binary(path):
    """Return ``(u, grid, k)`` from a binary field file."""
    raw = Path(path).read_bytes()
    magic, n1, n2, h, k = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ShapeError("not a travelwave field file", path=str(path))
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != n1 * n2 * 6:
        raise ShapeError("truncated field file", path=str(path), size=int(data.size))
    u = np.moveaxis(data.reshape(n1, n2, 6), -1, 0).astype(float)
    return u, Grid2D(int(n1), int(n2), float(h)), float(k)


def save_field_csv(path, u, grid, k):
    u = grid.check(u, 6)
    X1, X2 = grid.coords()
    with open(path, "w", newline="") as fh:
        fh.write(f"# {grid.n1},{grid.n2},{grid.h!r},{float(k)!r}\n")
        w = csv.writer(fh)
        w.writerow(["i", "j", "x1", "x2", "U1", "U2", "U3", "Ut1", "Ut2", "Ut3"])
        for i in range(grid.n1):
            for j in range(grid.n2):
                w.writerow([i, j, repr(X1[i, j]), repr(X2[i, j]), *(repr(float(c)) for c in u[:, i, j])])


def load_field_csv(path):
    with open(path, newline="") as fh:
        n1, n2, h, k = fh.readline().lstrip("# ").strip().split(",")
        grid = Grid2D(int(n1), int(n2), float(h))
        reader = csv.reader(fh)
        next(reader)
        u = zeros_field(grid)
        for row in reader:
            i, j = int(row[0]), int(row[1])
            u[:, i, j] = [float(c) for c in row[4:10]]
    return u, grid, float(k)


# -- radial profiles -----------------------------------------------------------

@dataclass
class RadialProfile:
    """Scalar function of ``r`` sampled on a 1-D mesh, with a spread diagnostic."""

    r: np.ndarray
    value: np.ndarray
    stddev: np.ndarray = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.stddev is None:
            self.stddev = np.zeros_like(self.value)
        self.stddev = np.asarray(self.stddev, dtype=float)

    def __call__(self, r):
        return np.interp(r, self.r, self.value, right=0.0)

    def l2(self):
        """``(∫ value^2 2πr dr)^(1/2)`` by the trapezoid rule."""
        return float(np.sqrt(np.trapezoid(self.value**2 * 2 * np.pi * self.r, self.r)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "value", "bin_stddev"])
            for row in zip(self.r, self.value, self.stddev):
                w.writerow([repr(float(c)) for c in row])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1], data[:, 2])


def radial_bins(grid, values, rmax=None):
    """Azimuthal mean of ``values`` in rings of width ``h``.

    Returns ``(r_mean, mean, std, counts)``; bin ``b`` holds points with
    ``(b - 1/2) h <= |x| < (b + 1/2) h`` so the origin sits alone in bin 0.
    """
    r = grid.radius()
    if rmax is None:
        rmax = min(grid.R1, grid.R2) - grid.h
    idx = np.floor(r / grid.h + 0.5).astype(int).ravel()
    nb = int(np.floor(rmax / grid.h + 0.5)) + 1
    keep = idx < nb
    idx, vals, rr = idx[keep], np.asarray(values).ravel()[keep], r.ravel()[keep]
    counts = np.bincount(idx, minlength=nb).astype(float)
    sums = np.bincount(idx, weights=vals, minlength=nb)
    sq = np.bincount(idx, weights=vals * vals, minlength=nb)
    rs = np.bincount(idx, weights=rr, minlength=nb)
    ok = counts > 0
    mean = np.where(ok, sums / np.maximum(counts, 1), np.nan)
    var = np.where(ok, sq / np.maximum(counts, 1) - mean**2, np.nan)
    r_mean = np.where(ok, rs / np.maximum(counts, 1), np.nan)
    return r_mean[ok], mean[ok], np.sqrt(np.maximum(var[ok], 0.0)), counts[ok]
