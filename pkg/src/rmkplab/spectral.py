"""Grids, Fourier transforms and norm evaluators.

Coefficient convention: ``coeffs`` holds samples of the unitary continuous
transform (1/2pi) * integral of exp(-i(x xi + y eta)) u dx dy, i.e.
``lx*ly/(2 pi N) * fft2(u)``, stored in numpy FFT order.  With this scaling
the lattice sum  sum |c|^2 dxi deta  equals  sum |u|^2 dx dy  exactly.
"""
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dispersion import bracket, phase


def _is_pow2(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid2D:
    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if not (_is_pow2(self.nx) and _is_pow2(self.ny)):
            raise ValueError(f"nx, ny must be powers of two, got {self.nx}, {self.ny}")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("lx, ly must be positive")

    @property
    def n(self):
        return self.nx * self.ny

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    @property
    def dxi(self):
        return 2 * np.pi / self.lx

    @property
    def deta(self):
        return 2 * np.pi / self.ly

    @property
    def jx(self):
        """Integer x-mode indices in FFT order."""
        return np.fft.fftfreq(self.nx, 1.0 / self.nx).astype(int)

    @property
    def jy(self):
        return np.fft.fftfreq(self.ny, 1.0 / self.ny).astype(int)

    @property
    def xi(self):
        return self.jx * self.dxi

    @property
    def eta(self):
        return self.jy * self.deta

    def mesh(self):
        """(XI, ETA) frequency arrays of shape (nx, ny)."""
        return np.meshgrid(self.xi, self.eta, indexing="ij")

    def coords(self):
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    @property
    def norm_factor(self):
        return self.lx * self.ly / (2 * np.pi * self.n)


def make_grid(nx, ny, lx, ly):
    if not (_is_pow2(nx) and _is_pow2(ny)) or nx < 8 or ny < 8:
        raise ValueError(f"nx, ny must be powers of two >= 8, got {nx}, {ny}")
    return Grid2D(int(nx), int(ny), float(lx), float(ly))


@dataclass(frozen=True)
class SpectralField:
    grid: Grid2D
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (self.grid.nx, self.grid.ny):
            raise ValueError(f"coeffs shape {c.shape} does not match grid")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def reflected(self):
        """coeffs(-j, -k) in FFT order."""
        return np.roll(np.flip(self.coeffs), 1, axis=(0, 1))

    def hermitian_defect(self):
        scale = max(np.abs(self.coeffs).max(), np.finfo(float).tiny)
        return float(np.abs(self.reflected() - np.conj(self.coeffs)).max() / scale)

    def is_real(self, tol=1e-12):
        return self.hermitian_defect() <= tol

    def has_zero_mean(self):
        return bool(np.all(self.coeffs[0, :] == 0))

    def zero_mean(self):
        c = self.coeffs.copy()
        c[0, :] = 0
        return SpectralField(self.grid, c)

    def __add__(self, other):
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def scaled(self, a):
        return SpectralField(self.grid, a * self.coeffs)


def require_zero_mean(u: SpectralField):
    if not u.has_zero_mean():
        raise ValueError("field has nonzero x-mean (coeffs at xi = 0)")


def to_spectral(grid: Grid2D, u) -> SpectralField:
    u = np.asarray(u)
    if u.shape != (grid.nx, grid.ny):
        raise ValueError(f"data shape {u.shape} does not match grid ({grid.nx}, {grid.ny})")
    return SpectralField(grid, grid.norm_factor * np.fft.fft2(u))


def to_physical(f: SpectralField, real=True):
    u = np.fft.ifft2(f.coeffs) / f.grid.norm_factor
    return u.real if real else u


def l2_physical(grid: Grid2D, u):
    return float(np.sqrt(np.sum(np.abs(u) ** 2) * grid.dx * grid.dy))


def sobolev_weight(grid: Grid2D, s1, s2):
    XI, ETA = grid.mesh()
    return bracket(XI) ** s1 * bracket(ETA) ** s2


def sobolev_norm(u: SpectralField, s1=0.0, s2=0.0):
    """sqrt( sum <xi>^{2 s1} <eta>^{2 s2} |c|^2 dxi deta )."""
    g = u.grid
    w = sobolev_weight(g, 2 * s1, 2 * s2)
    return float(np.sqrt(np.sum(w * np.abs(u.coeffs) ** 2) * g.dxi * g.deta))


@dataclass(frozen=True)
class NormSpec:
    s1: float = 0.0
    s2: float = 0.0
    b: float = 0.0
    sigma: float = 0.0
    p: float = 2.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")


def bump_window(t):
    """Smooth cutoff: 1 on [-1, 1], 0 outside (-2, 2), exp-mollifier transition."""
    t = np.abs(np.asarray(t, dtype=float))

    def f(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    s = np.clip(t - 1.0, 0.0, 1.0)
    a, b = f(1.0 - s), f(s)
    return a / (a + b)


def ones_window(t):
    return np.ones_like(np.asarray(t, dtype=float))


WINDOWS = {"bump": bump_window, "ones": ones_window}


@dataclass(frozen=True)
class SpaceTimeField:
    """Spatial Fourier coefficients sampled at t_n = (n - nt/2) dt.

    ``values[n]`` uses the same coefficient convention as SpectralField.
    The window is applied inside the Bourgain norm, not to ``values``.
    """
    grid: Grid2D
    nt: int
    dt: float
    values: np.ndarray
    window: Callable = field(default=bump_window)

    def __post_init__(self):
        if not _is_pow2(self.nt):
            raise ValueError(f"nt must be a power of two, got {self.nt}")
        v = np.array(self.values, dtype=complex)
        if v.shape != (self.nt, self.grid.nx, self.grid.ny):
            raise ValueError("values shape does not match (nt, nx, ny)")
        w = self.window(self.times)
        if np.any(w < 0) or np.any(w > 1):
            raise ValueError("window values must lie in [0, 1]")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def times(self):
        return (np.arange(self.nt) - self.nt // 2) * self.dt

    def windowed(self):
        return self.window(self.times)[:, None, None] * self.values

    def physical(self, windowed=True):
        v = self.windowed() if windowed else self.values
        return np.fft.ifft2(v, axes=(1, 2)) / self.grid.norm_factor


def free_evolution(u0: SpectralField, nt, dt, window=bump_window, times=None):
    """Samples of W(t)u0 on the symmetric time lattice."""
    require_zero_mean(u0)
    g = u0.grid
    XI, ETA = g.mesh()
    ph = np.zeros_like(XI)
    nz = XI != 0
    ph[nz] = phase(XI[nz], ETA[nz])
    t = (np.arange(nt) - nt // 2) * dt if times is None else times
    vals = np.exp(1j * t[:, None, None] * ph[None]) * u0.coeffs[None]
    return SpaceTimeField(g, nt, dt, vals, window)


def spacetime_l2(u: SpaceTimeField):
    g = u.grid
    return float(np.sqrt(np.sum(np.abs(u.windowed()) ** 2) * u.dt * g.dxi * g.deta))


def bourgain_norm(u: SpaceTimeField, spec: NormSpec):
    """Discrete X-type norm  || <xi>^{s1+sigma} |xi|^{-sigma} <eta>^{s2} <lambda>^b F u ||.

    Each spatial mode is demodulated by exp(-i t phi) before the time
    transform, so the transform variable is lambda itself and lambda stays
    on the resolved band even when |phi| exceeds the time Nyquist rate.
    """
    g = u.grid
    XI, ETA = g.mesh()
    nz = XI != 0
    v = u.windowed()
    zero_col = np.abs(v[:, ~nz]).max() if np.any(~nz) else 0.0
    if zero_col > 0 and (spec.sigma > 0 or spec.b != 0):
        raise ValueError("nonzero xi = 0 content is incompatible with sigma > 0 or b != 0")
    ph = np.zeros_like(XI)
    ph[nz] = phase(XI[nz], ETA[nz])
    t = u.times
    v = np.exp(-1j * t[:, None, None] * ph[None]) * v
    vh = u.dt * np.fft.fft(v, axis=0) / np.sqrt(2 * np.pi)
    lam = 2 * np.pi * np.fft.fftfreq(u.nt, u.dt)
    dlam = 2 * np.pi / (u.nt * u.dt)
    w = bracket(XI) ** (2 * (spec.s1 + spec.sigma)) * bracket(ETA) ** (2 * spec.s2)
    if spec.sigma != 0:
        w = np.where(nz, w * np.abs(np.where(nz, XI, 1.0)) ** (-2 * spec.sigma), w)
    tot = np.sum(bracket(lam)[:, None, None] ** (2 * spec.b) * w[None] * np.abs(vh) ** 2)
    return float(np.sqrt(tot * dlam * g.dxi * g.deta))


def _increments(V):
    """Matrix of ||v_j - v_i|| for i < j (upper triangle), L2 over the vector axis."""
    n = V.shape[0]
    D = np.zeros((n, n))
    for j in range(1, n):
        D[:j, j] = np.sqrt(np.sum(np.abs(V[j] - V[:j]) ** 2, axis=1))
    return D


def pvariation_norm(samples, p, weight=1.0):
    """Exact discrete V^p value: sup over sub-partitions of (sum ||dv||^p)^(1/p).

    ``weight`` multiplies the squared vector norm (a cell volume for
    sampled fields).  O(n^2) dynamic programme over the last partition point.
    """
    V = np.asarray(samples)
    if V.ndim == 1:
        V = V[:, None]
    V = V.reshape(V.shape[0], -1)
    if V.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    D = _increments(V) * np.sqrt(weight)
    # scale by the largest increment: no overflow for large p, and a single
    # dominant increment comes back exactly for every p
    M = D.max()
    if M == 0:
        return 0.0
    Dp = (D / M) ** p
    n = V.shape[0]
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + Dp[:j, j])
    return float(M * best.max() ** (1.0 / p))


FIELD_FORMAT = "rmkplab.field"


def field_to_dict(u: SpectralField):
    g = u.grid
    inter = np.empty(2 * g.n)
    flat = u.coeffs.ravel()
    inter[0::2], inter[1::2] = flat.real, flat.imag
    return {"format": FIELD_FORMAT, "version": 1, "order": "fft", "layout": "row-major (j, k)",
            "grid": {"nx": g.nx, "ny": g.ny, "lx": g.lx, "ly": g.ly},
            "coeffs": inter.tolist()}


def field_from_dict(d) -> SpectralField:
    if d.get("format") != FIELD_FORMAT:
        raise ValueError("not a field container")
    gd = d["grid"]
    g = make_grid(gd["nx"], gd["ny"], gd["lx"], gd["ly"])
    a = np.asarray(d["coeffs"], dtype=float)
    if a.size != 2 * g.n:
        raise ValueError("coefficient count does not match grid")
    return SpectralField(g, (a[0::2] + 1j * a[1::2]).reshape(g.nx, g.ny))


def save_field(u: SpectralField, path):
    with open(path, "w") as fh:
        json.dump(field_to_dict(u), fh, sort_keys=True)


def load_field(path) -> SpectralField:
    with open(path) as fh:
        return field_from_dict(json.load(fh))
