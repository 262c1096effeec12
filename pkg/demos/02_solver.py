"""
Pseudospectral integration and the Picard fixed point
=====================================================

ETDRK4 in time, FFT in space, 2/3 dealiasing.  The quadratic nonlinearity
conserves the L2 norm of the truncated system, so the drift below is pure
time-stepping error.
"""
import numpy as np

from rmkplab import solver as sol
from rmkplab.spectral import make_grid, sobolev_norm

g = make_grid(64, 64, 8 * np.pi, 8 * np.pi)
u0 = sol.gaussian_ic(g, 0.5)
tr = sol.solve(u0, T=1.0, dt=1e-2, sample_every=20)
for t, l2, e in zip(tr.times, tr.l2, tr.energy):
    print(f"t={t:4.2f}  L2={l2:.12f}  energy={e:+.6e}")

# halving dt cuts the error by about 2^4
ends = [sol.solve(u0, T=0.5, dt=dt).fields[-1] for dt in (1 / 32, 1 / 64, 1 / 128)]
e1, e2 = sobolev_norm(ends[0] - ends[1]), sobolev_norm(ends[1] - ends[2])
print("observed order:", np.log2(e1 / e2))

# small data: the Duhamel map contracts and its limit is the solver's answer
g = make_grid(32, 32, 4 * np.pi, 4 * np.pi)
u0 = sol.random_ic(g, 0.05, seed=1)
rep = sol.picard_iterate(u0, 0.1, n_iters=6)
print("successive-difference ratios:", np.round(rep.ratios, 4))
ref = sol.solve(u0, T=0.1, dt=1e-3).fields[-1]
print("distance to solve():", sobolev_norm(rep.iterates[-1] - ref) / sobolev_norm(ref))
