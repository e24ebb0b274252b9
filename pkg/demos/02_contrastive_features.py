"""Closed-form contrastive features on the default instance and how much they amplify the invariant direction."""
import numpy as np

from uda_lab.augment import augmentation_moments
from uda_lab.contrastive import amplification, bt_closed_form, bt_gradient_train, bt_subspace_bound
from uda_lab.model import ModelParams, decompose, stream

p = ModelParams()
fm = bt_closed_form(p, k=4)
mom = augmentation_moments(p)
print("whitening error", np.abs(fm.phi @ mom.sigma_a @ fm.phi.T - np.eye(4)).max())
for j, row in enumerate(fm.phi, 1):
    d = decompose(row, p)
    print(f"row {j}: along w_inv {d.a_inv:+.4f}  along w_spu {d.a_spu:+.4f}  rest {np.linalg.norm(d.resid):.4f}")

c = amplification(p)
print(f"c = ({c.c1:.4f}, {c.c2:.4f}, {c.c3:.4f}, {c.c4:.4f})")
print("data ratio gamma/sigma_sp", p.gamma / p.sigma_sp, "feature 2 ratio |c2/c4|", abs(c.c2 / c.c4))

run = bt_gradient_train(p, kappa=0.5, k=10, rng=stream(0, "demo"))
rep = bt_subspace_bound(run, float(run.losses[-1]), 0.5, p)
print(f"trained loss {run.losses[-1]:.4f}; alignment error {rep.error:.3f}, bound {rep.bound:.3f} ({rep.status})")
