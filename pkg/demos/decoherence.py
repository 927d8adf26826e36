"""From quantum to classical as spontaneous emission grows.

Each spontaneous emission collapses the internal state and shifts the
quasimomentum by a random recoil, so the walk loses its outer peaks.  The
peak contrast is compared with the threshold derived from the classical
reference walk; a finite width of the initial quasimomentum distribution
has a similar washing-out effect.
"""
from kickwalk import RunConfig, metrics, run_ensemble
from kickwalk.analysis import classicality_threshold

K = 1.45
TRAJECTORIES = 300  # 1000 reproduces the figure-scale ensembles

threshold = classicality_threshold(15, K)
print(f"classicality threshold at T=15: {threshold:.3f}\n")

print("p_se    dbeta   contrast   variance   verdict")
for p_se, width in [(0.0, 0.0), (0.02, 0.0), (0.037, 0.0), (0.11, 0.0), (0.02, 0.01), (0.02, 0.025)]:
    result = run_ensemble(RunConfig(k=K, p_se=p_se, delta_beta=width, trajectories=TRAJECTORIES))
    m = metrics(result.final, k=K)
    verdict = "bimodal" if m.peak_contrast > threshold else "classical-like"
    print(f"{p_se:5.3f}  {width:6.3f}   {m.peak_contrast:8.3f}   {m.variance:8.2f}   {verdict}")
    if p_se > 0:
        print(f"                mean emissions per trajectory: {result.event_counts.mean():.2f}")
