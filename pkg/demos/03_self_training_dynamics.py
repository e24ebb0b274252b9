"""Population self-training: from the source ERM head it locks onto the spurious direction; from CL features it recovers."""
from uda_lab.classify import erm_closed_form
from uda_lab.contrastive import amplification
from uda_lab.model import ModelParams
from uda_lab.selftrain import condition_report, st_scratch_run, stoc_run

p = ModelParams()
print("ERM target accuracy", erm_closed_form(p).accuracy)

tr = st_scratch_run(p)
for t in (0, 10, 100, 1000, len(tr) - 1):
    print(f"ST  step {t:5d}: a_inv {tr.a_inv[t]:+.4f} a_spu {tr.a_spu[t]:+.4f} acc {tr.acc[t]:.4f}")

win = st_scratch_run(p.with_(gamma=2.0))
print("ST with gamma=2:", win.final_acc)

so = stoc_run(amplification(p), p)
for t in (0, 10, 100, len(so) - 1):
    print(f"STOC step {t:5d}: h {so.h[t].round(4)} acc {so.acc[t]:.8f}")

print(condition_report(p, amplification(p)))
