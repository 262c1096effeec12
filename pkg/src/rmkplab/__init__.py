"""Numerical lab for the rotation-modified Kadomtsev-Petviashvili equation

    u_t - beta u_xxx - d_x^{-1} u_yy - gamma d_x^{-1} u + d_x(u^2)/2 = 0  (beta = -1, gamma = 1).
"""
__version__ = "0.1.0"

from . import dispersion, estimates, illposed, solver, spectral  # noqa: E402,F401
