"""
Norm inflation of the third Picard term
=======================================

Box data at frequency 2^k, thin in both directions.  The ratio
r(k) = ||A3(t0)|| / ||u0||^3 grows with k exactly when s1 < -1/2.
"""
import numpy as np

from rmkplab import illposed as ip

d = ip.build_illposed_data(6)
print("k=6 lattice points:", len(d.u0), " norm in H^{-1/2}:", d.norm(-0.5))

# two independent evaluations of A3: closed-form time integrals and quadrature
direct = ip.third_term_direct(d)
quad, rep = ip.third_term_solver(d, full_output=True)
print("panels", rep.panels, "relative difference", ip.relative_difference(quad, direct))

sw = ip.inflation_sweep([6, 8, 10, 12], [-0.7, -0.5, -0.3])
for k, s1, n0, n3, r, ok in sw.rows():
    print(f"k={k:2d} s1={s1:+.1f} r={r:.4e}")
for s1, slope in sw.slopes.items():
    print(f"s1={s1:+.1f}: d log2 r / dk = {slope:+.3f} (expected {0.0 - (1 + 2 * s1):+.1f})")
