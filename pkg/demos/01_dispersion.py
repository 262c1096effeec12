"""
Phase, resonance and the frequency regions
==========================================

The linear symbol is phi(xi, eta) = xi^3 - (eta^2 + 1)/xi.  Two waves
interacting at z1, z2 are off resonance by Q = phi(z1) + phi(z2) - phi(z1 + z2),
and Q has a closed form that makes its size visible.
"""
import numpy as np

from rmkplab import dispersion as dsp

print("phi(2, 0) =", dsp.phase(2.0, 0.0))

# the closed form agrees with the direct difference of phases
rng = np.random.default_rng(0)
x1, x2 = rng.uniform(0.5, 5, 5), rng.uniform(-5, -0.5, 5)
e1, e2 = rng.normal(size=5), rng.normal(size=5)
print("|Q| direct :", np.abs(dsp.resonance_xi(x1, e1, x2, e2)))
print("|Q| formula:", dsp.identity_rhs(x1, e1, x2, e2))

# regular versus singular: the singular set hugs |xi1 xi2| = 3^{-1/2}
xi2 = 2.0 ** 20
for xi1 in (1.0, 1 / (np.sqrt(3) * xi2), 3.0 / xi2):
    lab = dsp.classify_region(xi1, xi2)
    print(f"xi1 = {xi1:.3e}: regular={lab.regular} singular={lab.singular}")

rep = dsp.singular_scaling_check(10_000, seed=1)
print("sampled singular set stays in the band:", rep["within"])
