"""
Numerical probes of the bilinear machinery
==========================================

Each check reports the sup of (left side)/(claimed bound) over a parameter
ladder; a finite sup that does not move when the ladder grows is the
numerical signature of the estimate.
"""
from rmkplab import estimates as est

for lemma in ("2.7", "2.10", "2.12", "2.8"):
    rep = est.verify(lemma)
    print(f"{lemma:>5}: sup={rep.sup_ratio:.4g} stable={rep.stable}")

# trilinear forms on 16^3 lattices, with the dyadic scaling in N2
rep = est.verify("2.18", est.SweepConfig(trials=20))
print("2.18 sups:", rep.extra["sups"])
print(f"fitted slope {rep.extra['slope']:+.3f}, bound slope {rep.extra['bound_slope']:+.2f}")
