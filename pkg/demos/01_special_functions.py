"""erfc, erfcx, Mill's ratio and the pseudolabel loss g(mu, sigma) far into the tails."""
import math

import numpy as np

from uda_lab.specialfns import erfc, erfcx, mills, st_loss, st_loss_grad
from uda_lab.model import stream

for x in (1.0, 10.0, 27.0, 40.0):
    print(f"x={x:5.1f}  erfc={float(erfc(x)):.6e}  erfcx={float(erfcx(x)):.12f}")

# the naive form exp(s^2/2) overflows near s ~ 38; the scaled kernel does not
for s in (1.0, 30.0, 1e3):
    g, gm, gs = st_loss_grad(0.5, s)
    print(f"g(0.5, {s:g}) = {g:.6e}  dg/dmu = {gm:+.3e}  dg/dsigma = {gs:+.3e}")

z = stream(0, "demo").standard_normal(1_000_000)
print("closed form", st_loss(1.0, 2.0), "monte carlo", float(np.mean(np.exp(-np.abs(1.0 + 2.0 * z)))))

m = mills(2.0)
print(f"Mill's ratio at 2: r={m.r:.6f} r'={m.r1:.6f} r''={m.r2:.6f}  (r' = x r - 1: {2 * m.r - 1:.6f})")
print("sqrt(pi/2) =", math.sqrt(math.pi / 2), "r(0) =", mills(0.0).r)
