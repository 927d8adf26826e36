"""Coherent walk without spontaneous emission.

Starting from the two-class ratchet, the two internal channels are kicked in
opposite directions and the balanced coin mixes them after each kick.  The
momentum distribution develops the two outer peaks of a quantum walk and its
variance grows ballistically, while the classical random walk built from the
same single-kick kernel only spreads diffusively.
"""
import numpy as np

from kickwalk import classical_walk_reference, metrics, run_ideal

K = 1.45
STEPS = 30

walk = run_ideal(K, K, STEPS)
print(" T   var(quantum)   var(classical)   contrast")
for t in (5, 10, 15, 20, 30):
    q = metrics(walk[t], k=K, steps=t)
    c = metrics(classical_walk_reference(t, k=K)[0], k=K, steps=t)
    print(f"{t:2d}   {q.variance:12.3f}   {c.variance:14.3f}   {q.peak_contrast:8.3f}")

final = metrics(walk[-1], k=K)
print("outer peaks at n =", final.peak_positions)

# bar chart of the final distribution in the terminal
p = walk[-1]
scale = 60 / p.p_total.max()
for n, v in zip(p.n, p.p_total):
    if v > 1e-4:
        print(f"{n:4d} {'#' * int(round(v * scale))}")
