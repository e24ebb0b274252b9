"""Feature dimension k and whitening penalty kappa."""
from uda_lab.analytics import ablation_k, ablation_kappa
from uda_lab.model import ModelParams

p = ModelParams()
for r in ablation_k(p, [1, 2, 5, 25]):
    print(f"k={r.k:2d} {r.method:4s} {r.acc_closed:.6f}")

# short runs; the CLI default is 20000 steps
for r in ablation_kappa(p, [0.05, 0.5, 10], k=10, steps=5000):
    print(f"kappa={r.kappa:<5g} {r.method:4s} {r.acc_closed:.6f} loss {r.extra.get('loss', float('nan')):.4f}")
