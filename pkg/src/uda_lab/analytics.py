"""Experiment drivers: UDA and SSL comparisons, the gamma/sigma_sp phase sweep and the k / kappa ablations."""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .classify import (accuracy_mc, cl_probe_closed_form, erm_closed_form, feature_head, population_probe,
                       probe_gd)
from .contrastive import amplification, bt_closed_form, bt_gradient_train
from .model import Domain, ModelParams, sample_labeled, stream, w_inv, w_spu
from .selftrain import feature_problem, self_train, st_scratch_run, stoc_run

METHODS = ("ERM", "ST", "CL", "STOC")


@dataclass
class ExperimentResult:
    experiment: str
    setting: str
    method: str
    params: ModelParams
    acc_closed: float
    acc_mc: float = math.nan
    k: int = None
    kappa: float = None
    extra: dict = field(default_factory=dict)

    @property
    def target_acc(self):
        return self.acc_closed


def _mc(h, p, mc_n, key, phi=None):
    if not mc_n:
        return math.nan
    return accuracy_mc(h, p, mc_n, stream(p.seed, *key), phi=phi)


def uda_compare(p, mc_n=0, eta=0.05, max_iters=200_000, experiment="uda", cell=0):
    """ERM, ST from ERM, CL probe and STOC on one instance (all population quantities)."""
    wi, ws = w_inv(p), w_spu(p)
    erm = erm_closed_form(p)
    st = st_scratch_run(p, eta=eta, max_iters=max_iters)
    st_w = st.a_inv[-1] * wi + st.a_spu[-1] * ws
    c = amplification(p)
    cl = cl_probe_closed_form(c, p)
    so = stoc_run(c, p, eta=eta, max_iters=max_iters)
    phi2 = np.vstack([c.c1 * wi + c.c3 * ws, c.c2 * wi + c.c4 * ws])
    key = (experiment, cell)
    base = dict(experiment=experiment, setting="UDA", params=p, k=2, kappa=None)
    return [
        ExperimentResult(method="ERM", acc_closed=erm.accuracy, acc_mc=_mc(erm.h, p, mc_n, key + ("ERM",)), **base),
        ExperimentResult(method="ST", acc_closed=st.final_acc, acc_mc=_mc(st_w, p, mc_n, key + ("ST",)),
                         extra={"iters": len(st) - 1, "converged": st.converged, "a_inv": st.a_inv[-1],
                                "a_spu": st.a_spu[-1]}, **base),
        ExperimentResult(method="CL", acc_closed=cl.accuracy, acc_mc=_mc(cl.h, p, mc_n, key + ("CL",), phi2),
                         extra={"c1": c.c1, "c2": c.c2, "c3": c.c3, "c4": c.c4}, **base),
        ExperimentResult(method="STOC", acc_closed=so.final_acc,
                         acc_mc=_mc(so.final_h, p, mc_n, key + ("STOC",), phi2),
                         extra={"iters": len(so) - 1, "converged": so.converged}, **base),
    ]


def _labeled_draw(p, n, rng):
    for attempt in range(100):
        b = sample_labeled(p, Domain.TARGET, n, rng)
        if len(np.unique(b.ys)) == 2:
            return b, attempt
    raise RuntimeError("could not draw both classes")


def ssl_compare(p, n_labeled=100, n_unlabeled=None, k=None, mc_n=0, probe_steps=5000, probe_lr=0.1,
                eta=0.05, max_iters=200_000, rng=None, experiment="ssl", cell=0):
    """Target-only contrastive features; CL = probe on a few labelled target points, STOC = ST from that probe."""
    if n_labeled < 2:
        raise ValueError("n_labeled must be >= 2")
    k = p.k if k is None else k
    rng = stream(p.seed, experiment, cell, "labeled") if rng is None else rng
    fm = bt_closed_form(p, k=k, domain=Domain.TARGET)
    batch, redraws = _labeled_draw(p, n_labeled, rng)
    h, _ = probe_gd(batch.xs @ fm.phi.T, batch.ys, steps=probe_steps, lr=probe_lr)
    cl = feature_head(h, fm.phi, p)
    if n_unlabeled is None:
        tr = self_train(feature_problem(fm.phi, p), h, eta=eta, max_iters=max_iters)
    else:
        from .selftrain import st_empirical_run
        tr = st_empirical_run(p, n_unlabeled, phi=fm.phi, h0=h, eta=eta,
                              rng=stream(p.seed, experiment, cell, "unlabeled"))
    key = (experiment, cell)
    base = dict(experiment=experiment, setting="SSL", params=p, k=k, kappa=None)
    extra = {"n_labeled": n_labeled, "n_unlabeled": "population" if n_unlabeled is None else n_unlabeled}
    if redraws:
        extra["redraws"] = redraws
    return [
        ExperimentResult(method="CL", acc_closed=cl.accuracy, acc_mc=_mc(cl.h, p, mc_n, key + ("CL",), fm.phi),
                         extra=extra, **base),
        ExperimentResult(method="STOC", acc_closed=tr.final_acc,
                         acc_mc=_mc(tr.final_h, p, mc_n, key + ("STOC",), fm.phi),
                         extra=dict(extra, iters=len(tr) - 1), **base),
    ]


def log_grid(lo, hi, n):
    return [float(x) for x in np.geomspace(lo, hi, int(n))]


def default_phase_grid(base, lo=0.1, hi=4.0, n=20):
    """Vary gamma at the base sigma_sp so that gamma / sigma_sp spans a log grid."""
    return [(r * base.sigma_sp, base.sigma_sp) for r in log_grid(lo, hi, n)]


def _map(fn, items, jobs):
    if jobs is None or jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_star, [(fn, it) for it in items]))


def _star(arg):
    fn, it = arg
    return fn(*it)


def _phase_cell(i, g, s, base, mc_n, eta, max_iters):
    p = base.with_(gamma=g, sigma_sp=s)
    try:
        rows = uda_compare(p, mc_n=mc_n, eta=eta, max_iters=max_iters, experiment="phase", cell=i)
    except Exception as exc:  # isolate failures to the cell
        return [ExperimentResult("phase", "UDA", m, p, math.nan, extra={"error": repr(exc)}) for m in METHODS]
    for r in rows:
        r.extra["ratio"] = g / s
    return rows


def phase_sweep(grid, base, mc_n=0, eta=0.05, max_iters=200_000, jobs=1):
    """uda_compare on every (gamma, sigma_sp) cell; rows sorted by gamma / sigma_sp."""
    if not grid:
        raise ValueError("empty grid")
    items = [(i, float(g), float(s), base, mc_n, eta, max_iters) for i, (g, s) in enumerate(grid)]
    out = _map(_phase_cell, items, jobs)
    out.sort(key=lambda rows: (rows[0].params.gamma / rows[0].params.sigma_sp, rows[0].params.gamma))
    return [r for rows in out for r in rows]


def phase_table(rows):
    """{method: (ratios, accs)} from phase_sweep output."""
    table = {}
    for r in rows:
        ratio = r.params.gamma / r.params.sigma_sp
        xs, ys = table.setdefault(r.method, ([], []))
        xs.append(ratio)
        ys.append(r.acc_closed)
    return {m: (np.array(x), np.array(y)) for m, (x, y) in table.items()}


def threshold_ratio(ratios, accs, hi=0.95):
    """Smallest ratio from which every later cell exceeds hi (None if the last cell does not)."""
    idx = None
    for i in range(len(accs) - 1, -1, -1):
        if accs[i] > hi:
            idx = i
        else:
            break
    return None if idx is None else float(ratios[idx])


def single_crossing(ratios, accs, lo=0.6, hi=0.95):
    """Threshold ratio if cells split cleanly into acc < lo then acc > hi, else None."""
    r = threshold_ratio(ratios, accs, hi)
    if r is None:
        return None
    below = [a for x, a in zip(ratios, accs) if x < r]
    if not below or max(below) >= lo:
        return None
    return r


def _k_cell(i, k, base, eta, max_iters):
    p = base.with_(k=k)
    fm = bt_closed_form(p, k=k)
    pr = population_probe(fm.phi, p)
    tr = self_train(feature_problem(fm.phi, p), pr.h, eta=eta, max_iters=max_iters)
    common = dict(experiment="ablate-k", setting="UDA", params=p, k=k, kappa=None)
    return [ExperimentResult(method="CL", acc_closed=pr.accuracy, **common),
            ExperimentResult(method="STOC", acc_closed=tr.final_acc, extra={"iters": len(tr) - 1}, **common)]


def ablation_k(base, ks, eta=0.05, max_iters=200_000, jobs=1):
    """CL and STOC accuracy with closed-form features of output dimension k."""
    for k in ks:
        if not 1 <= k <= base.d:
            raise ValueError(f"k={k} outside [1, {base.d}]")
    items = [(i, int(k), base, eta, max_iters) for i, k in enumerate(ks)]
    return [r for rows in _map(_k_cell, items, jobs) for r in rows]


def _kappa_cell(i, kappa, base, k, steps, lr, eta, max_iters):
    p = base.with_(kappa=kappa, k=k)
    common = dict(experiment="ablate-kappa", setting="UDA", params=p, k=k, kappa=kappa)
    try:
        fm = bt_gradient_train(p, kappa=kappa, k=k, steps=steps, lr=lr, rng=stream(p.seed, "ablate-kappa", i))
        pr = population_probe(fm.phi, p)
        tr = self_train(feature_problem(fm.phi, p), pr.h, eta=eta, max_iters=max_iters)
    except Exception as exc:
        return [ExperimentResult(method=m, acc_closed=math.nan, extra={"error": repr(exc)}, **common)
                for m in ("CL", "STOC")]
    loss = float(fm.losses[-1])
    return [ExperimentResult(method="CL", acc_closed=pr.accuracy, extra={"loss": loss}, **common),
            ExperimentResult(method="STOC", acc_closed=tr.final_acc, extra={"loss": loss, "iters": len(tr) - 1},
                             **common)]


def ablation_kappa(base, kappas, k=10, steps=20000, lr=1e-3, eta=0.05, max_iters=200_000, jobs=1):
    """Gradient-trained features per kappa; trainer failures are recorded in the row, not raised."""
    for kap in kappas:
        if not kap > 0:
            raise ValueError("kappa must be > 0")
    items = [(i, float(kap), base, k, steps, lr, eta, max_iters) for i, kap in enumerate(kappas)]
    return [r for rows in _map(_kappa_cell, items, jobs) for r in rows]


def default_jobs():
    return os.cpu_count() or 1


def _check(name, fn):
    try:
        ok, detail = fn()
    except Exception as exc:
        return name, False, f"raised {exc!r}"
    return name, bool(ok), detail


def verify_suite(p=None, seed=0):
    """Fast invariant checks; returns [(name, passed, detail)]."""
    from .augment import augmentation_moments
    from .contrastive import bt_grad, bt_loss
    from .model import decompose
    from .selftrain import coeff_problem, scratch_problem
    from .specialfns import SQRT_PI, erfcx, mills_arrays, st_loss, st_loss_grad

    p = ModelParams(seed=seed) if p is None else p

    def erfc_sandwich():
        x = np.linspace(40 / 1000, 40, 1000)
        lo = 2 / SQRT_PI / (x + np.sqrt(x * x + 2))
        hi = 2 / SQRT_PI / (x + np.sqrt(x * x + 4 / math.pi))
        v = erfcx(x)
        bad = int(np.sum(~((lo < v) & (v <= hi))))
        return bad == 0, f"{bad} violations"

    def mills_props():
        x = np.linspace(-5, 50, 1000)
        r, r1, r2 = mills_arrays(x)
        bad = (int(np.sum(np.diff(r) >= 0)) + int(np.sum(r1 >= 0)) + int(np.sum(r2 <= 0))
               + int(np.sum(np.diff(r2) >= 0)))
        # x^2 r'(x) is decreasing only on x >= 0; it rises from -inf to 0 on the negative axis
        pos = x >= 0
        bad4 = int(np.sum(np.diff((x * x * r1)[pos]) >= 0))
        return bad + bad4 == 0, f"{bad + bad4} violations (x^2 r' checked on x >= 0)"

    def g_mc():
        rng = stream(seed, "verify", "g")
        z = rng.standard_normal(400_000)
        worst = 0.0
        for mu, s in [(0.0, 1.0), (1.0, 1.0), (-2.0, 0.3), (0.5, 4.0)]:
            worst = max(worst, abs(st_loss(mu, s) - float(np.mean(np.exp(-np.abs(mu + s * z))))))
        return worst < 5e-3, f"max |closed - MC| = {worst:.2e}"

    def g_grad():
        worst = 0.0
        for mu in np.linspace(-3, 3, 7):
            for s in (0.2, 1.0, 3.0):
                _, gm, gs = st_loss_grad(mu, s)
                h = 1e-6
                fm = (st_loss(mu + h, s) - st_loss(mu - h, s)) / (2 * h)
                fs = (st_loss(mu, s + h) - st_loss(mu, s - h)) / (2 * h)
                worst = max(worst, abs(gm - fm), abs(gs - fs))
        return worst < 1e-6, f"max abs error {worst:.2e}"

    def whitening():
        fm = bt_closed_form(p, k=4)
        mom = augmentation_moments(p)
        w = float(np.abs(fm.phi @ mom.sigma_a @ fm.phi.T - np.eye(4)).max())
        o = max(max(abs(decompose(r, p).a_inv), abs(decompose(r, p).a_spu)) for r in fm.phi[2:])
        return w < 1e-8 and o < 1e-8, f"whitening {w:.1e}, W-leakage of rows 3-4 {o:.1e}"

    def amp():
        c = amplification(p)
        ok = c.c2 > 0 and c.c1 < 0 and c.c3 < 0 and c.c4 < 0
        return ok, f"c = ({c.c1:.4f}, {c.c2:.4f}, {c.c3:.4f}, {c.c4:.4f})"

    def erm_mc():
        h = erm_closed_form(p)
        mc = accuracy_mc(h.h, p, 400_000, stream(seed, "verify", "erm"))
        return abs(mc - h.accuracy) < 0.006, f"closed {h.accuracy:.4f}, MC {mc:.4f}"

    def dyn_grad():
        rng = stream(seed, "verify", "dyn")
        c = amplification(p)
        worst = 0.0
        for prob in (scratch_problem(p), coeff_problem(c, p)):
            for _ in range(20):
                h = rng.standard_normal(2)
                h /= np.linalg.norm(h)
                an = prob.grad(h)
                fd = np.zeros(2)
                for i in range(2):
                    e = np.zeros(2)
                    e[i] = 1e-6
                    fd[i] = (st_loss(*prob.stats(h + e)) - st_loss(*prob.stats(h - e))) / 2e-6
                worst = max(worst, float(np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-12)))
        return worst < 1e-6, f"max relative error {worst:.2e}"

    def bt_fd():
        q = ModelParams(d_in=3, d_sp=3, seed=seed)
        mom = augmentation_moments(q)
        rng = stream(seed, "verify", "btfd")
        phi = rng.standard_normal((2, 6))
        an = bt_grad(phi, mom, 0.7)
        fd = np.zeros_like(phi)
        for idx in np.ndindex(phi.shape):
            e = np.zeros_like(phi)
            e[idx] = 1e-6
            fd[idx] = (bt_loss(phi + e, mom, 0.7) - bt_loss(phi - e, mom, 0.7)) / 2e-6
        err = float(np.linalg.norm(an - fd) / np.linalg.norm(fd))
        return err < 1e-5, f"relative error {err:.2e}"

    def st_regimes():
        fail = st_scratch_run(p)
        win = st_scratch_run(p.with_(gamma=2.0, sigma_sp=1.0, d_sp=20))
        ok = abs(fail.final_acc - 0.5) <= 0.02 and fail.a_spu[-1] >= 0.99 and win.final_acc >= 0.999
        return ok, f"failure acc {fail.final_acc:.4f}, success acc {win.final_acc:.4f}"

    def stoc():
        tr = stoc_run(amplification(p), p)
        target = 0.5 * math.erfc(-math.sqrt(10)) - 1e-3
        return tr.final_acc >= target, f"STOC acc {tr.final_acc:.6f} (needs >= {target:.6f})"

    checks = [("erfc_sandwich", erfc_sandwich), ("mills_ratio", mills_props), ("g_vs_monte_carlo", g_mc),
              ("g_gradient", g_grad), ("bt_whitening_orthogonality", whitening), ("amplification_signs", amp),
              ("erm_vs_monte_carlo", erm_mc), ("dynamics_gradient", dyn_grad), ("bt_gradient", bt_fd),
              ("st_regimes", st_regimes), ("stoc_recovery", stoc)]
    return [_check(n, f) for n, f in checks]
