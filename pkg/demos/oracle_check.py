"""Cross-checking the trajectory engine against dense references.

For two steps on a small momentum grid the master equation can be integrated
directly.  A standard quantum-jump unraveling of the same equation must agree
with it to statistical accuracy.  The production engine uses fixed-rate jumps
with quasimomentum-shifting recoil, and the printout shows how far it sits
from both references.
"""
import math

import numpy as np

from kickwalk import RunConfig, l1_distance, run_ensemble
from kickwalk.oracle import evolve_walk_dense, mcwf_standard
from kickwalk.reduction import ThreeLevelModel, validate_reduction

N = 2000

for p_se in (0.037, 0.11):
    config = RunConfig(p_se=p_se, steps=2, trajectories=N)
    dense = evolve_walk_dense(config, n_max=6)[-1]
    jumps = mcwf_standard(config, np.random.default_rng(1), n_max=6)[-1]
    engine = run_ensemble(config).final
    bound = 3 * math.sqrt(np.sum(dense.p_total * (1 - dense.p_total)) / N)
    print(f"p_se={p_se}: statistical bound {bound:.4f}")
    print(f"  unraveling vs dense  {l1_distance(jumps, dense):.4f}")
    print(f"  engine vs dense      {l1_distance(engine, dense):.4f}")

# adiabatic elimination of the excited state, weak and strong drive
for omega in (0.01, 0.1):
    report = validate_reduction(ThreeLevelModel(omega, 1.0, 1.0, 0.0005, 0.0005), duration=200.0)
    print(f"Omega/Delta = {omega}")
    print(report.summary())
