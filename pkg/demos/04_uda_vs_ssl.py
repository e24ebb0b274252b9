"""Same instance, two settings: ST over CL helps a lot under shift and not at all without it."""
from uda_lab.analytics import ssl_compare, uda_compare
from uda_lab.model import ModelParams

p = ModelParams()
print("UDA (source labels, target unlabeled)")
for r in uda_compare(p, mc_n=200_000):
    print(f"  {r.method:5s} closed {r.acc_closed:.6f}  monte carlo {r.acc_mc:.6f}")
print("SSL (100 target labels, population of target unlabeled)")
for r in ssl_compare(p, n_labeled=100):
    print(f"  {r.method:5s} {r.acc_closed:.6f}")
