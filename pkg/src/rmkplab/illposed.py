"""Norm inflation of the third Picard term for box initial data.

Initial data (in frequency)

    u0^ = (chi_+(xi) + chi_-(xi)) * chi_2(eta / xi),
    chi_+ : [2^k + 2^(1-k/2), 2^k + 2^(2-k/2)],  chi_- : [-2^k, -2^k + 2^(-k/2)],
    chi_2 : [2, 2 + 2^(-k/2)].

The boxes are thin wedges far from the origin, so they live on a local patch
lattice (xi, eta) = (J hxi, L heta) and not on a global grid.  Each lattice
cell carries its overlap fraction with the box.

Third term of the Picard expansion of u = W u0 - 1/2 int W d_x(u^2):

    A3(t0) = int_0^t0 W(t0 - tau) d_x( W(tau) u0 . W2(tau) ) dtau
    W2(tau) = 1/2 int_0^tau W(tau - t') d_x( (W(t') u0)^2 ) dt'

Products of lattice fields use the convolution of the unitary transform,
(f g)^(z) = sum_a f^(a) g^(z - a) dA / 2pi.  A3 is evaluated twice:
``third_term_solver`` does the nested time integrals by quadrature,
``third_term_direct`` uses the closed-form time integrals per triple.
"""
from dataclasses import dataclass

import numpy as np
import shapely
from numpy.polynomial import legendre as npleg
from scipy import sparse
from scipy.special import spherical_jn

from .dispersion import bracket, phase
from .spectral import Grid2D, SpectralField

T0_DEFAULT = 1.0 / 256
T0_MAX = 1.0 / 200

_SHIFT = 1 << 32  # lattice key = J * 2^32 + L
_HALF = 1 << 31

# quadrature plan: half-panel phase budget for interpolated factors, and the
# smallest demodulated half-panel frequency handed to the Levin solve
THETA_HALF = 2.0
OMEGA_LEVIN = 40.0


class ResolutionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


def _pack(J, L):
    return np.asarray(J, dtype=np.int64) * _SHIFT + np.asarray(L, dtype=np.int64)


def _unpack(key):
    key = np.asarray(key, dtype=np.int64)
    J = np.floor_divide(key + _HALF, _SHIFT)
    return J, key - J * _SHIFT


@dataclass(frozen=True)
class LatticeField:
    """Sparse transform samples on the lattice (J hxi, L heta), sorted by key."""
    hxi: float
    heta: float
    J: np.ndarray
    L: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        J = np.asarray(self.J, dtype=np.int64)
        L = np.asarray(self.L, dtype=np.int64)
        v = np.asarray(self.values, dtype=complex)
        if not (J.shape == L.shape == v.shape and J.ndim == 1):
            raise ValueError("J, L, values must be 1-d arrays of equal length")
        order = np.argsort(_pack(J, L), kind="stable")
        J, L, v = J[order], L[order], v[order]
        if np.any(np.diff(_pack(J, L)) == 0):
            raise ValueError("duplicate lattice points")
        for a in (J, L, v):
            a.setflags(write=False)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_keys(cls, hxi, heta, keys, values):
        J, L = _unpack(keys)
        return cls(hxi, heta, J, L, values)

    @property
    def keys(self):
        return _pack(self.J, self.L)

    @property
    def xi(self):
        return self.J * self.hxi

    @property
    def eta(self):
        return self.L * self.heta

    @property
    def cell(self):
        return self.hxi * self.heta

    def __len__(self):
        return self.J.size

    def norm(self, s1=0.0):
        """sqrt( sum <xi>^{2 s1} |v|^2 dxi deta )."""
        w = bracket(self.xi) ** (2 * s1) * np.abs(self.values) ** 2
        return float(np.sqrt(np.sum(w) * self.cell))

    def value_at(self, J, L):
        i = np.searchsorted(self.keys, _pack(J, L))
        if i < len(self) and self.keys[i] == _pack(J, L):
            return complex(self.values[i])
        return 0j

    def to_spectral(self, grid: Grid2D) -> SpectralField:
        if not (np.isclose(grid.dxi, self.hxi, rtol=1e-12) and np.isclose(grid.deta, self.heta, rtol=1e-12)):
            raise ValueError("grid spacing does not match the lattice")
        if len(self) and (np.abs(self.J).max() >= grid.nx // 2 or np.abs(self.L).max() >= grid.ny // 2):
            raise ResolutionError("lattice points beyond the grid Nyquist index")
        c = np.zeros((grid.nx, grid.ny), dtype=complex)
        c[self.J % grid.nx, self.L % grid.ny] = self.values
        return SpectralField(grid, c)

    @classmethod
    def from_spectral(cls, f: SpectralField):
        g = f.grid
        jx, jy = np.nonzero(f.coeffs)
        J = np.where(jx >= g.nx // 2, jx - g.nx, jx)
        L = np.where(jy >= g.ny // 2, jy - g.ny, jy)
        return cls(g.dxi, g.deta, J, L, f.coeffs[jx, jy])


def box_intervals(k):
    """Endpoints of chi_+, chi_- and of the slope window for level k."""
    k = int(k)
    return {"plus": (2.0 ** k + 2.0 ** (1 - k / 2), 2.0 ** k + 2.0 ** (2 - k / 2)),
            "minus": (-(2.0 ** k), -(2.0 ** k) + 2.0 ** (-k / 2)),
            "slope": (2.0, 2.0 + 2.0 ** (-k / 2))}


def resolution_report(k, hxi, heta, nyq_xi=np.inf, nyq_eta=np.inf, points=4):
    """Required spacings for ``points`` lattice points across every box side.

    The eta extent of a wedge at fixed xi is |xi| * 2^(-k/2); it is measured
    at the nominal |xi| = 2^k.
    """
    b = box_intervals(k)
    w_xi = min(b["minus"][1] - b["minus"][0], b["plus"][1] - b["plus"][0])
    w_eta = 2.0 ** k * (b["slope"][1] - b["slope"][0])
    xi_max = b["plus"][1]
    eta_max = b["slope"][1] * xi_max
    need = {"hxi_max": w_xi / points, "heta_max": w_eta / points,
            "nyquist_xi_min": xi_max, "nyquist_eta_min": eta_max}
    ok = (hxi <= need["hxi_max"] * (1 + 1e-12) and heta <= need["heta_max"] * (1 + 1e-12)
          and nyq_xi > xi_max + hxi and nyq_eta > eta_max + heta)
    need.update(hxi=hxi, heta=heta, ok=bool(ok))
    return need


def _wedge(lo, hi, s_lo, s_hi):
    if lo > 0:
        pts = [(lo, s_lo * lo), (hi, s_lo * hi), (hi, s_hi * hi), (lo, s_hi * lo)]
    else:
        pts = [(lo, s_hi * lo), (hi, s_hi * hi), (hi, s_lo * hi), (lo, s_lo * lo)]
    return shapely.Polygon(pts)


def _overlap_cells(poly, hxi, heta):
    minx, miny, maxx, maxy = poly.bounds
    j = np.arange(np.floor(minx / hxi) - 1, np.ceil(maxx / hxi) + 2)
    l = np.arange(np.floor(miny / heta) - 1, np.ceil(maxy / heta) + 2)
    J, L = np.meshgrid(j, l, indexing="ij")
    J, L = J.ravel(), L.ravel()
    cells = shapely.box((J - 0.5) * hxi, (L - 0.5) * heta, (J + 0.5) * hxi, (L + 0.5) * heta)
    frac = shapely.area(shapely.intersection(cells, poly)) / (hxi * heta)
    keep = frac > 1e-14
    return J[keep].astype(np.int64), L[keep].astype(np.int64), np.minimum(frac[keep], 1.0)


@dataclass(frozen=True)
class IllposedData:
    k: int
    xi_plus: tuple
    xi_minus: tuple
    slope: tuple
    u0: LatticeField
    grid: Grid2D | None = None

    @property
    def weights(self):
        return self.u0.values.real

    def norm(self, s1):
        """H^{s1,0} norm of the indicator data.

        chi^2 = chi, so the overlap fraction enters linearly; this is the
        O(h^2) quadrature of the continuum norm.
        """
        u = self.u0
        return float(np.sqrt(np.sum(bracket(u.xi) ** (2 * s1) * self.weights) * u.cell))

    def field(self) -> SpectralField:
        if self.grid is None:
            raise ValueError("data were built on a patch lattice; pass a grid to build_illposed_data")
        return self.u0.to_spectral(self.grid)


def build_illposed_data(k, grid: Grid2D | None = None, cells=4):
    """Box data at level k on a patch lattice, or on ``grid`` when given."""
    if int(k) != k or k < 3:
        raise ValueError(f"k must be an integer >= 3, got {k}")
    k = int(k)
    b = box_intervals(k)
    if grid is None:
        if cells < 4:
            raise ResolutionError(f"cells={cells}: need at least 4 lattice points across each box")
        hxi, heta = 2.0 ** (-k / 2) / cells, 2.0 ** (k / 2) / cells
        rep = resolution_report(k, hxi, heta)
    else:
        hxi, heta = grid.dxi, grid.deta
        rep = resolution_report(k, hxi, heta, grid.nx // 2 * hxi, grid.ny // 2 * heta)
    if not rep["ok"]:
        raise ResolutionError(
            "boxes not resolved: need dxi <= {hxi_max:.6g}, deta <= {heta_max:.6g}, "
            "xi Nyquist > {nyquist_xi_min:.6g}, eta Nyquist > {nyquist_eta_min:.6g} "
            "(have dxi={hxi:.6g}, deta={heta:.6g})".format(**rep))
    parts = [_overlap_cells(_wedge(*b[s], *b["slope"]), hxi, heta) for s in ("plus", "minus")]
    J = np.concatenate([p[0] for p in parts])
    L = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    u0 = LatticeField(hxi, heta, J, L, w.astype(complex))
    return IllposedData(k, b["plus"], b["minus"], b["slope"], u0, grid)


def _as_lattice(u0):
    return u0.u0 if isinstance(u0, IllposedData) else u0


def _check_time(t, name):
    if not 0 < t < T0_MAX:
        raise ValueError(f"{name} must lie in (0, {T0_MAX}), got {t}")


# ---------------------------------------------------------------- kernels


def _g(x, t0):
    """int_0^t0 exp(i s x) ds."""
    x = np.asarray(x, dtype=float)
    y = t0 * x
    small = np.abs(y) < 1e-3
    ys = np.where(small, y, 0.0)
    xs = np.where(small, 1.0, x)
    big = (np.exp(1j * y) - 1.0) / (1j * xs)
    ser = t0 * (1 + 1j * ys / 2 - ys ** 2 / 6 - 1j * ys ** 3 / 24)
    return np.where(small, ser, big)


def kernel_factor(x, t0):
    """(exp(i t0 x) - 1) / x, with the limit i t0 at x = 0."""
    return 1j * _g(x, t0)


def _moments(R, t0, m_max=3):
    """G_m = int_0^t0 (i s)^m exp(i s R) ds for m = 1..m_max."""
    R = np.asarray(R, dtype=float)
    y = t0 * R
    out = np.zeros((m_max,) + R.shape, dtype=complex)
    small = np.abs(y) < 1.0
    if np.any(small):
        Rs = R[small]
        for m in range(1, m_max + 1):
            acc = np.zeros(Rs.shape, dtype=complex)
            term = np.ones(Rs.shape, dtype=complex)
            for j in range(40):
                if j:
                    term = term * (1j * Rs * t0) / j
                acc = acc + term / (m + j + 1)
            out[m - 1][small] = (1j) ** m * t0 ** (m + 1) * acc
    if np.any(~small):
        Rb = R[~small]
        e = np.exp(1j * t0 * Rb)
        prev = (e - 1.0) / (1j * Rb)
        for m in range(1, m_max + 1):
            prev = (1j * t0) ** m * e / (1j * Rb) - (m / Rb) * prev
            out[m - 1][~small] = prev
    return out


def divided_kernel(R, Qp, t0):
    """(g(R + Qp) - g(R)) / Qp with g(x) = int_0^t0 exp(i s x) ds.

    Small t0*Qp falls back to the Taylor expansion in Qp.
    """
    R, Qp = np.broadcast_arrays(np.asarray(R, dtype=float), np.asarray(Qp, dtype=float))
    small = np.abs(t0 * Qp) < 1e-3
    safe = np.where(small, 1.0, Qp)
    out = (_g(R + Qp, t0) - _g(R, t0)) / safe
    if np.any(small):
        G = _moments(R[small], t0)
        q = Qp[small]
        out = np.array(out)
        out[small] = G[0] + G[1] * q / 2 + G[2] * q ** 2 / 6
    return out


# ---------------------------------------------------------------- direct route


def _pairs(u: LatticeField, signs=None):
    """All ordered pairs (b, c) of lattice points with xi_b + xi_c != 0."""
    n = len(u)
    ib, ic = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ib, ic = ib.ravel(), ic.ravel()
    keep = (u.J[ib] + u.J[ic]) != 0
    if signs is not None:
        sb, sc = np.sign(u.J[ib]), np.sign(u.J[ic])
        keep &= (np.minimum(sb, sc) == min(signs)) & (np.maximum(sb, sc) == max(signs))
    return ib[keep], ic[keep]


def _aggregate(hxi, heta, keys, vals):
    uk, inv = np.unique(keys, return_inverse=True)
    v = np.bincount(inv, vals.real, uk.size) + 1j * np.bincount(inv, vals.imag, uk.size)
    return LatticeField.from_keys(hxi, heta, uk, v)


def third_term_direct(u0, t0=T0_DEFAULT, chunk=32):
    """A3(t0) from the closed-form time integrals.

    Per triple (a, b, c), with z1 = b + c and z = a + z1,
      Qp = phi(b) + phi(c) - phi(z1),  R = phi(a) + phi(z1) - phi(z),  P = R + Qp,
      A3^(z) = 1/2 xi e^{i t0 phi(z)} sum xi1 * i (g(P) - g(R)) / Qp * u(a) u(b) u(c) (dA/2pi)^2.
    """
    _check_time(t0, "t0")
    u = _as_lattice(u0)
    if len(u) == 0 or not np.any(u.values):
        return LatticeField(u.hxi, u.heta, [], [], [])
    dA = u.cell / (2 * np.pi)
    ib, ic = _pairs(u)
    x1 = (u.J[ib] + u.J[ic]) * u.hxi
    e1 = (u.L[ib] + u.L[ic]) * u.heta
    ph = phase(u.xi, u.eta)
    p1 = phase(x1, e1)
    Qp = ph[ib] + ph[ic] - p1
    kb = u.keys[ib] + u.keys[ic]
    amp_bc = u.values[ib] * u.values[ic] * x1
    keys, vals = [], []
    for s in range(0, len(u), chunk):
        a = np.arange(s, min(s + chunk, len(u)))[:, None]
        X = u.xi[a] + x1[None, :]
        E = u.eta[a] + e1[None, :]
        ok = X != 0
        Xs = np.where(ok, X, 1.0)
        R = ph[a] + p1[None, :] - phase(Xs, E)
        K = 1j * divided_kernel(R, np.broadcast_to(Qp, R.shape), t0)
        v = 0.5 * Xs * np.exp(1j * t0 * phase(Xs, E)) * K * u.values[a] * amp_bc[None, :] * dA ** 2
        v = np.where(ok, v, 0.0)
        keys.append((u.keys[a] + kb[None, :]).ravel())
        vals.append(v.ravel())
    return _aggregate(u.hxi, u.heta, np.concatenate(keys), np.concatenate(vals))


# ---------------------------------------------------------------- quadrature route


def _legendre_tools(q):
    x, w = npleg.leggauss(q)
    V = npleg.legvander(x, q - 1)
    Vinv = np.linalg.inv(V)
    dV = np.stack([npleg.legval(x, npleg.legder(np.eye(q)[n])) for n in range(q)], axis=1)
    D = dV @ Vinv
    # S[j, m] = int_{-1}^{x_j} l_m
    S = np.zeros((q, q))
    for n in range(q):
        c = npleg.legint(np.eye(q)[n], lbnd=-1)
        S[:, :] += np.outer(npleg.legval(x, c), Vinv[n])
    ends = npleg.legvander(np.array([-1.0, 1.0]), q - 1) @ Vinv
    return x, w, D, S, ends[0], ends[1]


class _Rule:
    """Composite Gauss-Legendre panels with Filon and Levin helpers."""

    def __init__(self, T, panels, q):
        self.T, self.panels, self.q = T, panels, q
        self.h = T / panels
        self.x, self.w, self.D, self.S, self.lo, self.hi = _legendre_tools(q)
        self.a = np.arange(panels) * self.h
        self.t = self.a[:, None] + 0.5 * self.h * (self.x[None, :] + 1.0)

    def filon(self, nu, panels=slice(None)):
        """Weights of int e^{i nu t} p(t) dt over each panel, p known at the nodes."""
        nh = 0.5 * nu * self.h
        n = np.arange(self.q)
        coef = (2 * n + 1) * (1j) ** n * spherical_jn(n, abs(nh)) * np.where(nh < 0, (-1.0) ** n, 1.0)
        F = self.w * (npleg.legvander(self.x, self.q - 1) @ coef)
        c = self.a[panels] + 0.5 * self.h
        return 0.5 * self.h * np.exp(1j * nu * c)[:, None] * F[None, :]

    def levin(self, omega):
        """Matrix taking f at the nodes to g with g' + i omega g = f (slow solution)."""
        wh = 0.5 * omega * self.h
        return 0.5 * self.h * np.linalg.inv(self.D + 1j * wh * np.eye(self.q))


@dataclass
class QuadratureReport:
    panels: list
    changes: list
    converged: bool

    @property
    def change(self):
        return self.changes[-1] if self.changes else float("nan")


def _doubling(compute, panels0, tol, max_doublings, strict, what):
    panels, prev, changes, out = [panels0], compute(panels0), [], None
    for _ in range(max_doublings):
        p = panels[-1] * 2
        cur = compute(p)
        scale = max(np.linalg.norm(cur), np.finfo(float).tiny)
        changes.append(float(np.linalg.norm(cur - prev) / scale))
        panels.append(p)
        prev = cur
        if changes[-1] < tol:
            break
    rep = QuadratureReport(panels, changes, bool(changes and changes[-1] < tol))
    if strict and not rep.converged:
        raise ConvergenceError(f"{what}: relative change {rep.change:.3g} after {panels[-1]} panels (tol {tol})")
    return prev, rep


def _pow2_at_least(x):
    return int(2 ** max(0, int(np.ceil(np.log2(max(x, 1.0))))))


@dataclass
class _Inner:
    """Terms of the inner time integrand for one sector: sum amp e^{i t theta} -> z1."""
    theta: np.ndarray
    amp: np.ndarray
    out: np.ndarray
    z1_keys: np.ndarray
    pref: np.ndarray  # 1/2 i xi1 per output

    def __post_init__(self):
        self.omega = 0.5 * (self.theta.max() + self.theta.min())
        self.sigma = 0.5 * (self.theta.max() - self.theta.min())
        self.M = sparse.csr_matrix((self.amp, (np.arange(self.theta.size), self.out)),
                                   shape=(self.theta.size, self.z1_keys.size))


def _inner_sectors(u: LatticeField, variant):
    dA = u.cell / (2 * np.pi)
    ph = phase(u.xi, u.eta)
    if variant == "printed":
        # 1/2 int W(tau - t') d_x W(t') u0 dt': constant integrand in the rotating frame
        return [_Inner(np.zeros(len(u)), u.values.copy(), np.arange(len(u)), u.keys, 0.5j * u.xi)]
    if variant != "quadratic":
        raise ValueError(f"unknown W2 variant {variant!r}")
    out = []
    signs = sorted(set(np.sign(u.J).tolist()))
    for i, s in enumerate(signs):
        for s2 in signs[i:]:
            ib, ic = _pairs(u, (s, s2))
            if ib.size == 0:
                continue
            kz = u.keys[ib] + u.keys[ic]
            zk, inv = np.unique(kz, return_inverse=True)
            J1, L1 = _unpack(zk)
            x1, e1 = J1 * u.hxi, L1 * u.heta
            theta = ph[ib] + ph[ic] - phase(x1, e1)[inv]
            out.append(_Inner(theta, u.values[ib] * u.values[ic] * dA, inv, zk, 0.5j * x1))
    return out


def second_iterate(u0, tau, variant="quadratic", q=16, tol=1e-8, max_doublings=8,
                   strict=True, full_output=False):
    """W2(tau) by composite Filon-Gauss-Legendre quadrature in time.

    Each sign sector of the integrand is demodulated by its central frequency;
    the remaining slow factor is interpolated on the panel nodes.  Panels
    double until the relative change is below ``tol``.
    ``variant="printed"`` uses the linear integrand d_x W(t') u0.
    """
    _check_time(tau, "tau")
    u = _as_lattice(u0)
    if len(u) == 0 or not np.any(u.values):
        f = LatticeField(u.hxi, u.heta, [], [], [])
        return (f, QuadratureReport([], [], True)) if full_output else f
    secs = _inner_sectors(u, variant)
    keys = np.unique(np.concatenate([s.z1_keys for s in secs]))
    idx = [np.searchsorted(keys, s.z1_keys) for s in secs]
    spread = max(s.sigma for s in secs)
    p0 = _pow2_at_least(spread * tau / (2 * THETA_HALF))

    def compute(panels):
        rule = _Rule(tau, panels, q)
        t = rule.t.ravel()
        total = np.zeros(keys.size, dtype=complex)
        for s, ix in zip(secs, idx):
            W = rule.filon(s.omega).ravel()
            acc = np.zeros(s.theta.size, dtype=complex)
            for c in range(0, t.size, 2048):
                E = np.exp(1j * np.outer(t[c:c + 2048], s.theta - s.omega))
                acc += W[c:c + 2048] @ E
            total[ix] += s.pref * (s.M.T @ acc)
        return total

    vals, rep = _doubling(compute, p0, tol, max_doublings, strict, "second_iterate")
    J, L = _unpack(keys)
    vals = vals * np.exp(1j * tau * phase(J * u.hxi, L * u.heta))
    f = LatticeField(u.hxi, u.heta, J, L, vals)
    return (f, rep) if full_output else f


@dataclass
class _Outer:
    inner: int
    ia: np.ndarray
    iz: np.ndarray
    oix: np.ndarray
    n_out: int
    out_keys: np.ndarray
    R_c: float
    sigma: float

    def __post_init__(self):
        self.M = sparse.csr_matrix((np.ones(self.ia.size), (np.arange(self.ia.size), self.oix)),
                                   shape=(self.ia.size, self.n_out))


class _ThirdTermPlan:
    def __init__(self, u: LatticeField, t0, variant):
        self.u, self.t0 = u, t0
        self.ph = phase(u.xi, u.eta)
        self.inner = _inner_sectors(u, variant)
        self.z1_phase = []
        for s in self.inner:
            J1, L1 = _unpack(s.z1_keys)
            self.z1_phase.append(phase(J1 * u.hxi, L1 * u.heta))
        outer, all_keys = [], []
        for si, s in enumerate(self.inner):
            ia, iz = np.meshgrid(np.arange(len(u)), np.arange(s.z1_keys.size), indexing="ij")
            ia, iz = ia.ravel(), iz.ravel()
            kz = u.keys[ia] + s.z1_keys[iz]
            Jz, Lz = _unpack(kz)
            keep = Jz != 0
            ia, iz, kz, Jz, Lz = ia[keep], iz[keep], kz[keep], Jz[keep], Lz[keep]
            for sa in sorted(set(np.sign(u.J[ia]).tolist())):
                m = np.sign(u.J[ia]) == sa
                ok, inv = np.unique(kz[m], return_inverse=True)
                R = self.ph[ia[m]] + self.z1_phase[si][iz[m]] - phase(Jz[m] * u.hxi, Lz[m] * u.heta)
                outer.append(_Outer(si, ia[m], iz[m], inv, ok.size, ok,
                                    0.5 * (R.max() + R.min()), 0.5 * (R.max() - R.min())))
                all_keys.append(ok)
        self.outer = outer
        self.keys = np.unique(np.concatenate(all_keys))
        self.out_idx = [np.searchsorted(self.keys, o.out_keys) for o in outer]
        self.out_phase = []
        for o in outer:
            J, L = _unpack(o.out_keys)
            self.out_phase.append(phase(J * u.hxi, L * u.heta))

    def classify(self, panels):
        """Levin flags per inner sector and the resulting bracket spread."""
        h = self.t0 / panels
        levin = [abs(s.omega) * h / 2 >= OMEGA_LEVIN for s in self.inner]
        inner_spread = [s.sigma if lv else np.abs(s.theta).max() for s, lv in zip(self.inner, levin)]
        spread = max(o.sigma + inner_spread[o.inner] for o in self.outer)
        return levin, spread

    def base_panels(self):
        panels = 1
        while True:
            _, spread = self.classify(panels)
            need = _pow2_at_least(spread * self.t0 / (2 * THETA_HALF))
            if need <= panels:
                return panels
            panels = need

    def compute(self, panels, levin, q=16, chunk=32):
        u, t0 = self.u, self.t0
        rule = _Rule(t0, panels, q)
        carry = [np.zeros(s.z1_keys.size, dtype=complex) for s in self.inner]
        lev = [rule.levin(s.omega) if lv else None for s, lv in zip(self.inner, levin)]
        acc = [np.zeros((o.n_out, 2), dtype=complex) for o in self.outer]
        for p0 in range(0, panels, chunk):
            pp = slice(p0, min(p0 + chunk, panels))
            t = rule.t[pp]
            a = rule.a[pp]
            C = t.shape[0]
            tf = t.ravel()
            # inner: W2 in the rotating frame = K + e^{i omega t} G
            Kn, Gn = [], []
            for si, s in enumerate(self.inner):
                om = s.omega if levin[si] else 0.0
                F = np.exp(1j * np.outer(tf, s.theta - om)) @ s.M
                F = (F * s.pref[None, :]).reshape(C, rule.q, -1)
                if levin[si]:
                    G = np.einsum("jm,pmz->pjz", lev[si], F)
                    g0 = np.einsum("m,pmz->pz", rule.lo, G)
                    g1 = np.einsum("m,pmz->pz", rule.hi, G)
                    inc = np.exp(1j * om * (a + rule.h))[:, None] * g1 - np.exp(1j * om * a)[:, None] * g0
                    start = carry[si][None, :] + np.cumsum(inc, axis=0) - inc
                    carry[si] = start[-1] + inc[-1]
                    K = start - np.exp(1j * om * a)[:, None] * g0
                    Kn.append(np.broadcast_to(K[:, None, :], G.shape))
                    Gn.append(G)
                else:
                    tot = 0.5 * rule.h * np.einsum("m,pmz->pz", rule.w, F)
                    start = carry[si][None, :] + np.cumsum(tot, axis=0) - tot
                    carry[si] = start[-1] + tot[-1]
                    Kn.append(start[:, None, :] + 0.5 * rule.h * np.einsum("jm,pmz->pjz", rule.S, F))
                    Gn.append(None)
            # outer: int e^{i tau R} W2 dtau, split by the modulation of each part
            Xa = u.values[None, :] * np.exp(1j * np.outer(tf, self.ph))
            for oi, o in enumerate(self.outer):
                s = self.inner[o.inner]
                ez = np.exp(1j * np.outer(tf, self.z1_phase[o.inner]))
                dem = np.exp(-1j * np.outer(tf, self.out_phase[oi] + o.R_c))
                parts = [(Kn[o.inner], o.R_c)]
                if Gn[o.inner] is not None:
                    parts.append((Gn[o.inner], o.R_c + s.omega))
                for pi, (Y, nu) in enumerate(parts):
                    Yz = Y.reshape(C * rule.q, -1) * ez
                    B = ((Xa[:, o.ia] * Yz[:, o.iz]) @ o.M) * dem
                    W = rule.filon(nu, pp).ravel()
                    acc[oi][:, pi] += W @ B
        total = np.zeros(self.keys.size, dtype=complex)
        for oi, o in enumerate(self.outer):
            total[self.out_idx[oi]] += acc[oi].sum(axis=1)
        return total


def third_term_solver(u0, t0=T0_DEFAULT, variant="quadratic", q=16, tol=1e-8, max_doublings=2,
                      strict=True, full_output=False):
    """A3(t0) by nested Duhamel quadrature in time.

    The inner integral W2(tau) is accumulated on the panel nodes of the outer
    rule.  Fast sign sectors of the inner integrand are split by a Levin
    collocation into a panel constant plus e^{i omega t} times a slow factor;
    the outer integral then uses Filon weights for each modulation.  The
    number of panels doubles until the relative change is below ``tol``.
    """
    _check_time(t0, "t0")
    u = _as_lattice(u0)
    if len(u) == 0 or not np.any(u.values):
        f = LatticeField(u.hxi, u.heta, [], [], [])
        return (f, QuadratureReport([], [], True)) if full_output else f
    plan = _ThirdTermPlan(u, t0, variant)
    p0 = plan.base_panels()
    levin, _ = plan.classify(p0)

    def compute(panels):
        return plan.compute(panels, levin, q)

    vals, rep = _doubling(compute, p0, tol, max_doublings, strict, "third_term_solver")
    J, L = _unpack(plan.keys)
    xi, eta = J * u.hxi, L * u.heta
    dA = u.cell / (2 * np.pi)
    vals = 1j * xi * np.exp(1j * t0 * phase(xi, eta)) * vals * dA
    f = LatticeField(u.hxi, u.heta, J, L, vals)
    return (f, rep) if full_output else f


def relative_difference(f: LatticeField, g: LatticeField):
    """||f - g|| / ||g|| over the union of both supports (plain l2)."""
    keys = np.union1d(f.keys, g.keys)
    a = np.zeros(keys.size, dtype=complex)
    b = np.zeros(keys.size, dtype=complex)
    a[np.searchsorted(keys, f.keys)] = f.values
    b[np.searchsorted(keys, g.keys)] = g.values
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def sum_set(u: LatticeField, times):
    """Keys of all ``times``-fold sums of support points."""
    keys = u.keys
    out = keys
    for _ in range(times - 1):
        out = np.unique((out[:, None] + keys[None, :]).ravel())
    return out


# ---------------------------------------------------------------- sweeps


def kernel_terms(k, t0=T0_DEFAULT, cells=4):
    """Median magnitudes of the two kernel terms over in-box triples.

    Triples take a and c in the + box and b in the - box:
      T1 = (e^{i t0 P} - 1) / (P Qp),   T2 = (e^{i t0 R} - 1) / (R Qp).
    """
    u = build_illposed_data(k, cells=cells).u0
    ph = phase(u.xi, u.eta)
    P_, M_ = np.nonzero(u.J > 0)[0], np.nonzero(u.J < 0)[0]
    a, b, c = (x.ravel() for x in np.meshgrid(P_, M_, P_, indexing="ij"))
    x1, e1 = u.xi[b] + u.xi[c], u.eta[b] + u.eta[c]
    Qp = ph[b] + ph[c] - phase(x1, e1)
    R = ph[a] + phase(x1, e1) - phase(u.xi[a] + x1, u.eta[a] + e1)
    P = R + Qp
    T1 = np.abs(kernel_factor(P, t0) / Qp)
    T2 = np.abs(kernel_factor(R, t0) / Qp)
    return float(np.median(T1)), float(np.median(T2))


def log2_slope(ks, values):
    return float(np.polyfit(np.asarray(ks, dtype=float), np.log2(np.asarray(values, dtype=float)), 1)[0])


@dataclass(frozen=True)
class InflationPoint:
    k: int
    s1: float
    norm_u0: float
    norm_A3: float
    ratio: float
    converged: bool


@dataclass
class InflationSweep:
    points: list
    slopes: dict

    def rows(self):
        return [(p.k, p.s1, p.norm_u0, p.norm_A3, p.ratio, p.converged) for p in self.points]


def inflation_sweep(k_range, s1_list, t0=T0_DEFAULT, route="direct", cells=4):
    """r(k) = ||A3(t0)|| / ||u0||^3 in H^{s1,0} and the fitted slope of log2 r in k.

    Per-k failures are recorded as non-converged rows; the sweep continues.
    """
    _check_time(t0, "t0")
    if route not in ("direct", "solver"):
        raise ValueError(f"unknown route {route!r}")
    points = []
    for k in k_range:
        try:
            data = build_illposed_data(k, cells=cells)
            if route == "direct":
                A3, ok = third_term_direct(data, t0), True
            else:
                A3, rep = third_term_solver(data, t0, strict=False, full_output=True)
                ok = rep.converged
        except (ConvergenceError, ResolutionError, FloatingPointError, ValueError):
            for s1 in s1_list:
                points.append(InflationPoint(int(k), float(s1), np.nan, np.nan, np.nan, False))
            continue
        for s1 in s1_list:
            n0, n3 = data.norm(s1), A3.norm(s1)
            points.append(InflationPoint(int(k), float(s1), n0, n3, n3 / n0 ** 3, ok))
    slopes = {}
    for s1 in s1_list:
        pts = [p for p in points if p.s1 == float(s1) and p.converged and np.isfinite(p.ratio)]
        slopes[float(s1)] = log2_slope([p.k for p in pts], [p.ratio for p in pts]) if len(pts) >= 2 else np.nan
    return InflationSweep(points, slopes)
