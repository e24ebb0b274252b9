"""Acceptance criteria 1-13; each test prints one PASS/FAIL line."""
import filecmp
import math
import time

import numpy as np

from uda_lab import cli
from uda_lab.analytics import phase_sweep, phase_table, single_crossing, ssl_compare, threshold_ratio, uda_compare, \
    default_phase_grid
from uda_lab.augment import augmentation_moments
from uda_lab.classify import accuracy_mc, erm_closed_form
from uda_lab.contrastive import (amplification, asymptotic_limits, bt_closed_form, bt_gradient_train,
                                 bt_subspace_bound, slice_params)
from uda_lab.model import ModelParams, decompose, stream
from uda_lab.selftrain import coeff_problem, scratch_problem, st_scratch_run, stoc_run
from uda_lab.specialfns import SQRT_PI, erfc, erfcx, mills_arrays, st_loss

P = ModelParams()


def test_c01_erm_closed_form(report):
    t = time.perf_counter()
    erm = erm_closed_form(P)
    oracle = 0.5 * math.erfc(-P.gamma**2 / (math.sqrt(2 * P.d_sp) * P.sigma_sp))
    mc = accuracy_mc(erm.h, P, 2_000_000, stream(P.seed, "acceptance", 1))
    dt = time.perf_counter() - t
    ok = abs(erm.accuracy - oracle) < 1e-12 and abs(mc - erm.accuracy) <= 0.005 and dt < 10
    assert report(1, ok, f"closed {erm.accuracy:.6f} oracle {oracle:.6f} MC {mc:.6f} in {dt:.2f}s")


def test_c02_st_failure(report):
    t = time.perf_counter()
    tr = st_scratch_run(P)
    dt = time.perf_counter() - t
    ok = abs(tr.final_acc - 0.5) <= 0.02 and tr.a_spu[-1] >= 0.99 and dt < 5
    assert report(2, ok, f"acc {tr.final_acc:.6f} a_spu {tr.a_spu[-1]:.6f} in {dt:.2f}s")


def test_c03_st_success(report):
    tr = st_scratch_run(P.with_(gamma=2.0, sigma_sp=1.0, d_sp=20))
    ok = tr.final_acc >= 0.999 and tr.a_inv[-1] >= 0.999
    assert report(3, ok, f"acc {tr.final_acc:.6f} a_inv {tr.a_inv[-1]:.6f}")


def test_c04_stoc_recovery(report):
    t = time.perf_counter()
    tr = stoc_run(amplification(P), P)
    dt = time.perf_counter() - t
    target = 0.5 * math.erfc(-math.sqrt(10)) - 1e-3
    ok = tr.final_acc >= target and dt < 5
    assert report(4, ok, f"acc {tr.final_acc:.8f} >= {target:.6f} in {dt:.2f}s")


def test_c05_bt_structure(report):
    worst_w = worst_o = 0.0
    mom = augmentation_moments(P)
    for k in range(2, P.d + 1):
        phi = bt_closed_form(P, k=k).phi
        worst_w = max(worst_w, float(np.abs(phi @ mom.sigma_a @ phi.T - np.eye(k)).max()))
        for row in phi[2:]:
            dec = decompose(row, P)
            worst_o = max(worst_o, abs(dec.a_inv), abs(dec.a_spu))
    ok = worst_w <= 1e-8 and worst_o <= 1e-8
    assert report(5, ok, f"whitening err {worst_w:.1e}, W-leakage {worst_o:.1e} (k=2..{P.d})")


def test_c06_amplification_asymptotics(report):
    k1 = k2 = 1.0
    p = slice_params(k1, k2, 100.0, P)
    c = amplification(p, crosscheck=False)
    lim = asymptotic_limits(k1, k2, p.d_in, p.sigma_in)
    target_24 = (1 + k2**2) * math.sqrt(p.d_sp) / p.gamma
    r24 = abs(c.c2 / c.c4)
    e24 = abs(r24 / target_24 - 1)
    e13 = abs(c.c1 / c.c3 / lim.c1_over_c3 - 1)
    cp = amplification(p, sp_coef=4 / 3, crosscheck=False)
    lim_p = asymptotic_limits(k1, k2, p.d_in, p.sigma_in, sp_coef=4 / 3)
    print(f"  4/3 constants: c1/c3 {cp.c1 / cp.c3:.4f} vs own-block limit {lim_p.c1_over_c3:.4f}, "
          f"vs implementation-block limit {lim.c1_over_c3:.4f}; |c2/c4| {abs(cp.c2 / cp.c4):.1f} vs {target_24:.1f}")
    ok = e24 <= 0.05 and e13 <= 0.05
    assert report(6, ok, f"|c2/c4| {r24:.1f} vs {target_24:.1f} ({e24:.2%}); c1/c3 {c.c1 / c.c3:.4f} vs "
                         f"{lim.c1_over_c3:.4f} ({e13:.2%})")


def test_c07_regularized_trainer(report):
    t = time.perf_counter()
    run = bt_gradient_train(P, kappa=0.5, k=10, rng=stream(P.seed, "acceptance", 7))
    dt = time.perf_counter() - t
    losses = np.asarray(run.losses)
    mono = bool(np.all(np.diff(losses) <= 0))
    rep = bt_subspace_bound(run, float(losses[-1]), 0.5, P)
    ok = mono and rep.error <= rep.bound and dt < 60
    assert report(7, ok, f"loss {losses[0]:.4f} -> {losses[-1]:.4f} monotone={mono}; alignment {rep.error:.3f} <= "
                         f"bound {rep.bound:.3f} [{rep.status}] in {dt:.1f}s")


def test_c08_g_vs_monte_carlo(report):
    rng = stream(P.seed, "acceptance", 8)
    worst = 0.0
    for mu in np.linspace(-3, 3, 10):
        for s in np.linspace(0.1, 5, 10):
            z = rng.standard_normal(1_000_000)
            worst = max(worst, abs(st_loss(mu, s) - float(np.mean(np.exp(-np.abs(mu + s * z))))))
    assert report(8, worst <= 2e-3, f"max |closed - MC| = {worst:.2e}")


def test_c09_dynamics_gradient(report):
    rng = stream(P.seed, "acceptance", 9)
    c = amplification(P)
    worst = 0.0
    for prob in (scratch_problem(P), coeff_problem(c, P)):
        for _ in range(100):
            h = rng.standard_normal(2)
            h /= np.linalg.norm(h)
            fd = np.zeros(2)
            for i in range(2):
                e = np.zeros(2)
                e[i] = 1e-6
                fd[i] = (st_loss(*prob.stats(h + e)) - st_loss(*prob.stats(h - e))) / 2e-6
            worst = max(worst, float(np.linalg.norm(prob.grad(h) - fd) / np.linalg.norm(fd)))
    assert report(9, worst <= 1e-6, f"max relative error {worst:.2e} over 200 states")


def test_c10_special_function_properties(report):
    x = np.linspace(-5, 50, 1000)
    r, r1, r2 = mills_arrays(x)
    v = {
        "r decreasing": int(np.sum(np.diff(r) >= 0)),
        "r1 < 0": int(np.sum(r1 >= 0)),
        "r2 > 0": int(np.sum(r2 <= 0)),
        "r2 decreasing": int(np.sum(np.diff(r2) >= 0)),
        "x^2 r1 decreasing": int(np.sum(np.diff(x * x * r1) >= 0)),
    }
    # erfc(x) underflows past x ~ 27, so the sandwich is compared after scaling by exp(x^2)
    xs = np.linspace(0.04, 40, 1000)
    lo = 2 / SQRT_PI / (xs + np.sqrt(xs * xs + 2))
    hi = 2 / SQRT_PI / (xs + np.sqrt(xs * xs + 4 / math.pi))
    ex = erfcx(xs)
    v["erfc sandwich"] = int(np.sum(~((lo < ex) & (ex <= hi))))
    small = xs[xs < 5]
    direct = np.array([float(erfc(t)) for t in small]) * np.exp(small * small)
    v["scaled vs direct"] = int(np.sum(np.abs(direct - erfcx(small)) > 1e-13 * erfcx(small)))
    total = sum(v.values())
    assert report(10, total == 0, ", ".join(f"{k}: {n}" for k, n in v.items()))


def test_c11_phase_diagram(report):
    t = time.perf_counter()
    rows = phase_sweep(default_phase_grid(P), P)
    dt = time.perf_counter() - t
    tab = phase_table(rows)
    st_thr = single_crossing(*tab["ST"])
    stoc_thr = threshold_ratio(*tab["STOC"])
    cl = tab["CL"][1]
    cl_mono = bool(np.all(np.diff(cl) >= 0))
    cl_gradual = float(np.max(np.diff(cl))) < 0.1
    ok = (st_thr is not None and stoc_thr is not None and stoc_thr < st_thr and cl_mono and cl_gradual
          and dt < 120)
    assert report(11, ok, f"ST threshold {st_thr}, STOC threshold {stoc_thr}, CL monotone={cl_mono} "
                          f"max step {float(np.max(np.diff(cl))):.3f} in {dt:.1f}s")


def test_c12_ssl_negative_result(report):
    ssl = {r.method: r.acc_closed for r in ssl_compare(P, n_labeled=100)}
    uda = {r.method: r.acc_closed for r in uda_compare(P)}
    d_ssl = ssl["STOC"] - ssl["CL"]
    d_uda = uda["STOC"] - uda["CL"]
    ok = d_ssl <= 0.01 and d_uda >= 0.05
    assert report(12, ok, f"SSL STOC-CL {d_ssl:+.4f} (CL {ssl['CL']:.4f}); UDA STOC-CL {d_uda:+.4f}")


def test_c13_determinism(report, tmp_path):
    same = []
    for exp, extra in [("uda", ["--mc", "true", "--mc-n", "20000"]), ("ssl", []),
                       ("phase", ["--gamma-over-sigmasp", "0.1:4:8log"]), ("ablate-k", ["--ks", "1,2,5"]),
                       ("ablate-kappa", ["--kappas", "0.5,10", "--steps", "300"]), ("verify", [])]:
        outs = []
        for rep in range(2):
            out = tmp_path / f"{exp}-{rep}"
            cli.main([exp, "--out", str(out), "--jobs", str(1 + rep), *extra])
            outs.append(out / "results.csv")
        same.append((exp, filecmp.cmp(*outs, shallow=False)))
    ok = all(s for _, s in same)
    assert report(13, ok, ", ".join(f"{e}: {'identical' if s else 'DIFFERS'}" for e, s in same))
