"""Sweep gamma / sigma_sp and find where ST and STOC flip from failure to success."""
import sys

from uda_lab.analytics import default_phase_grid, phase_sweep, phase_table, single_crossing, threshold_ratio
from uda_lab.model import ModelParams
from uda_lab.svg import line_chart

p = ModelParams()
tab = phase_table(phase_sweep(default_phase_grid(p), p, jobs=2))
ratios = tab["ST"][0]
print("ratio   " + "  ".join(f"{m:>6s}" for m in ("ERM", "ST", "CL", "STOC")))
for i, r in enumerate(ratios):
    print(f"{r:6.3f}  " + "  ".join(f"{tab[m][1][i]:6.3f}" for m in ("ERM", "ST", "CL", "STOC")))
print("ST threshold", single_crossing(*tab["ST"]), "STOC threshold", threshold_ratio(*tab["STOC"]))

if len(sys.argv) > 1:
    svg = line_chart([(m, *tab[m]) for m in ("ERM", "ST", "CL", "STOC")], title="phase diagram",
                     xlabel="gamma / sigma_sp", ylabel="target accuracy", logx=True, ylim=(0, 1))
    open(sys.argv[1], "w").write(svg)
