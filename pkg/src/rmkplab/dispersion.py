"""Phase function, resonance function and the frequency-region classifier.

All functions accept scalars or numpy arrays and broadcast.
"""
from dataclasses import dataclass

import numpy as np

# lower bound on |xi_2| for the high-low interaction set Omega_0
XI2_MIN = 6.0 ** 7


def _nonzero(name, *xs):
    for x in xs:
        if np.any(np.asarray(x) == 0):
            raise ValueError(f"{name}: zero xi is not allowed")


def bracket(x):
    """<x> = 1 + |x|."""
    return 1.0 + np.abs(x)


def phase(xi, eta):
    """phi(xi, eta) = xi^3 - (eta^2 + 1)/xi."""
    _nonzero("phase", xi)
    xi = np.asarray(xi, dtype=float)
    return xi ** 3 - (np.asarray(eta, dtype=float) ** 2 + 1.0) / xi


def symbol_lambda(tau, xi, eta):
    """Modulation lambda = tau - phi(xi, eta)."""
    return np.asarray(tau, dtype=float) - phase(xi, eta)


@dataclass(frozen=True)
class FreqPoint:
    xi: float
    eta: float
    tau: float | None = None

    def __add__(self, other):
        tau = None
        if self.tau is not None and other.tau is not None:
            tau = self.tau + other.tau
        return FreqPoint(self.xi + other.xi, self.eta + other.eta, tau)


@dataclass(frozen=True)
class FreqTriple:
    """Interaction (zeta_1, zeta_2) with output zeta = zeta_1 + zeta_2."""
    p1: FreqPoint
    p2: FreqPoint

    @property
    def p(self):
        return self.p1 + self.p2


def resonance_xi(xi1, eta1, xi2, eta2):
    """Q = phi(z1) + phi(z2) - phi(z1 + z2), array form."""
    xi1, eta1, xi2, eta2 = (np.asarray(a, dtype=float) for a in (xi1, eta1, xi2, eta2))
    _nonzero("resonance", xi1, xi2, xi1 + xi2)
    return phase(xi1, eta1) + phase(xi2, eta2) - phase(xi1 + xi2, eta1 + eta2)


def resonance(t: FreqTriple):
    return resonance_xi(t.p1.xi, t.p1.eta, t.p2.xi, t.p2.eta)


def identity_rhs(xi1, eta1, xi2, eta2, numerator="identity"):
    """Closed form of |Q|.

    ``numerator="identity"`` uses xi^2 - xi*xi1 + xi1^2, which equals
    xi1^2 + xi1*xi2 + xi2^2. ``"weight"`` swaps in xi1^2 - xi1*xi2 + xi2^2
    (the region weight w/3) to show the two are not interchangeable.
    """
    xi1, eta1, xi2, eta2 = (np.asarray(a, dtype=float) for a in (xi1, eta1, xi2, eta2))
    xi, eta = xi1 + xi2, eta1 + eta2
    _nonzero("identity_rhs", xi1, xi2, xi)
    d = xi * xi1 * xi2
    if numerator == "identity":
        num = xi ** 2 - xi * xi1 + xi1 ** 2
    elif numerator == "weight":
        num = xi1 ** 2 - xi1 * xi2 + xi2 ** 2
    else:
        raise ValueError(f"unknown numerator {numerator!r}")
    return np.abs(3.0 * d + (xi1 * eta - xi * eta1) ** 2 / d + num / d)


def resonance_identity_residual(xi1, eta1, xi2, eta2, numerator="identity"):
    """| |Q| - rhs | / max(1, |Q|)."""
    q = np.abs(resonance_xi(xi1, eta1, xi2, eta2))
    return np.abs(q - identity_rhs(xi1, eta1, xi2, eta2, numerator)) / np.maximum(1.0, q)


def region_weight(xi1, xi2):
    """w = 3(xi1^2 - xi1*xi2 + xi2^2)."""
    xi1, xi2 = np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float)
    return 3.0 * (xi1 ** 2 - xi1 * xi2 + xi2 ** 2)


@dataclass(frozen=True)
class RegionLabel:
    in_omega0: bool
    in_omega1: bool
    in_omega2: bool
    in_A: bool
    in_B: bool

    @property
    def regular(self):
        return self.in_omega0 and self.in_omega1

    @property
    def singular(self):
        return self.in_omega0 and self.in_omega2


def region_masks(xi1, xi2, xi2_min=XI2_MIN):
    """Vectorised membership flags; returns a dict of boolean arrays."""
    xi1, xi2 = np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float)
    xi = xi1 + xi2
    _nonzero("classify_region", xi1, xi2, xi)
    a1, a2 = np.abs(xi1), np.abs(xi2)
    om0 = (3.0 * a1 <= a2) & (a2 >= xi2_min)
    g = np.abs(1.0 - 1.0 / (3.0 * xi1 ** 2 * xi2 ** 2))
    om1 = g >= 0.25
    om2 = g < 0.25
    d = np.abs(xi * xi1 * xi2)
    lhs = 3.0 * d
    rhs = (xi1 ** 2 - xi1 * xi2 + xi2 ** 2) / d
    return {"omega0": om0, "omega1": om1, "omega2": om2,
            "A": lhs >= rhs, "B": lhs <= rhs,
            "regular": om0 & om1, "singular": om0 & om2}


def classify_region(xi1, xi2, xi2_min=XI2_MIN):
    m = region_masks(xi1, xi2, xi2_min)
    return RegionLabel(bool(m["omega0"]), bool(m["omega1"]), bool(m["omega2"]),
                       bool(m["A"]), bool(m["B"]))


def sample_singular(n, rng, log2_xi2=(np.log2(XI2_MIN), 40.0)):
    """Random points of the singular set: |xi2| >= 6^7 and 3 xi1^2 xi2^2 in (4/5, 4/3)."""
    xi2 = 2.0 ** rng.uniform(*log2_xi2, size=n) * rng.choice([-1.0, 1.0], size=n)
    c = rng.uniform(0.8, 4.0 / 3.0, size=n)
    c = np.where(c <= 0.8, np.nextafter(0.8, 1.0), c)
    xi1 = np.sqrt(c / 3.0) / np.abs(xi2) * rng.choice([-1.0, 1.0], size=n)
    return xi1, xi2


def singular_scaling_check(samples, seed=0):
    """Observed range of 3 xi1^2 xi2^2 and |xi1 xi2| over random singular points."""
    rng = np.random.default_rng(seed)
    xi1, xi2 = sample_singular(samples, rng)
    m = region_masks(xi1, xi2)
    xi1, xi2 = xi1[m["singular"]], xi2[m["singular"]]
    prod = np.abs(xi1 * xi2)
    c = np.sqrt(5.0 / 3.0)
    lo, hi = 3 ** -0.5 / c, c * 3 ** -0.5
    three = 3.0 * prod ** 2
    return {"samples": int(prod.size), "min_prod": float(prod.min()), "max_prod": float(prod.max()),
            "min_3x2y2": float(three.min()), "max_3x2y2": float(three.max()),
            "within": bool(np.all((prod >= lo) & (prod <= hi)))}


def _vu(xi1, eta1, xi, eta, tau):
    xi2, eta2 = xi - xi1, eta - eta1
    v = 3.0 * xi * xi1 * xi2
    u = tau - phase(xi1, eta1) - phase(xi2, eta2)
    return np.stack([v, u])


def jacobian_analytic(xi1, eta1, xi, eta):
    """6 |xi1^2 - xi2^2| |eta1/xi1 - eta2/xi2| for the map (xi1, eta1) -> (v, u)."""
    xi2, eta2 = xi - xi1, eta - eta1
    return 6.0 * np.abs(xi1 ** 2 - xi2 ** 2) * np.abs(eta1 / xi1 - eta2 / xi2)


def jacobian_check(xi1, eta1, xi, eta, tau, h=1e-5):
    """Relative error of the analytic Jacobian against central differences.

    A vanishing analytic Jacobian is a degenerate point; the absolute
    finite-difference value is returned there instead.
    """
    xi1, eta1, xi, eta, tau = (np.asarray(a, dtype=float) for a in (xi1, eta1, xi, eta, tau))
    _nonzero("jacobian_check", xi1, xi - xi1, xi)
    # step relative to the coordinate scale keeps the stencil well conditioned
    hx = h * np.maximum(1.0, np.abs(xi1))
    he = h * np.maximum(1.0, np.abs(eta1))
    dx = (_vu(xi1 + hx, eta1, xi, eta, tau) - _vu(xi1 - hx, eta1, xi, eta, tau)) / (2 * hx)
    de = (_vu(xi1, eta1 + he, xi, eta, tau) - _vu(xi1, eta1 - he, xi, eta, tau)) / (2 * he)
    fd = np.abs(dx[0] * de[1] - dx[1] * de[0])
    an = jacobian_analytic(xi1, eta1, xi, eta)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(an == 0, fd, np.abs(fd - an) / np.where(an == 0, 1.0, an))
