import math

import numpy as np
import pytest

from uda_lab.classify import cl_probe_closed_form, erm_closed_form
from uda_lab.contrastive import AmplificationCoeffs, amplification
from uda_lab.model import ModelParams, stream, w_inv, w_spu
from uda_lab.selftrain import (HeadProblem, coeff_problem, condition_report, convergence_residual, input_problem,
                               scratch_multipliers, scratch_problem, self_train, st_empirical_run, st_scratch_run,
                               stoc_run)
from uda_lab.specialfns import st_loss

P = ModelParams()
SUCCESS = ModelParams(gamma=2.0, sigma_sp=1.0, d_sp=20)


@pytest.fixture(scope="module")
def fail_trace():
    return st_scratch_run(P)


@pytest.fixture(scope="module")
def win_trace():
    return st_scratch_run(SUCCESS)


@pytest.fixture(scope="module")
def coeffs():
    return amplification(P)


@pytest.fixture(scope="module")
def stoc_trace(coeffs):
    return stoc_run(coeffs, P)


def test_scratch_failure(fail_trace):
    assert fail_trace.converged
    assert abs(fail_trace.final_acc - 0.5) <= 0.02
    assert fail_trace.a_spu[-1] >= 0.99
    assert np.all(np.diff(fail_trace.a_spu) >= -1e-15)
    assert not fail_trace.flags


def test_scratch_success(win_trace):
    assert win_trace.final_acc >= 1 - 1e-3
    assert win_trace.a_inv[-1] >= 0.999
    assert np.all(np.diff(win_trace.a_inv) >= -1e-15)


def test_unit_norm_and_nonnegative_sigma(fail_trace, stoc_trace):
    for tr in (fail_trace, stoc_trace):
        assert np.max(np.abs(np.linalg.norm(tr.h, axis=1) - 1)) < 1e-10
        assert np.all(tr.sigma >= 0)


def test_full_space_run_stays_in_w():
    prob = input_problem(P)
    tr = self_train(prob, erm_closed_form(P).h, max_iters=400)
    assert np.max(np.abs(tr.a_inv**2 + tr.a_spu**2 - 1)) < 1e-10
    ref = st_scratch_run(P, max_iters=400)
    assert np.max(np.abs(tr.a_spu - ref.a_spu)) < 1e-10


def test_one_step_equals_multiplier_form():
    eta = 0.05
    for a_inv, a_spu in [(0.3, 0.95), (0.8, 0.6)]:
        n = math.hypot(a_inv, a_spu)
        a_inv, a_spu = a_inv / n, a_spu / n
        tr = st_scratch_run(P, eta=eta, max_iters=1, h0=np.array([a_inv, a_spu]))
        m1, m2 = scratch_multipliers(a_inv, a_spu, P, eta)
        v = np.array([a_inv * m1, a_spu * m2])
        assert tr.h[1] == pytest.approx(v / np.linalg.norm(v), abs=1e-14)


def test_small_eta_direction_matches_loss_gradient():
    a_inv, a_spu = 0.2, math.sqrt(1 - 0.04)
    m1, m2 = scratch_multipliers(a_inv, a_spu, P, 1e-4)
    step = np.array([a_inv * (m1 - 1), a_spu * (m2 - 1)]) / 1e-4

    def g(x, y):
        return st_loss(P.gamma * x, P.sigma_sp * y)

    h = 1e-6
    fd = -np.array([(g(a_inv + h, a_spu) - g(a_inv - h, a_spu)) / (2 * h),
                    (g(a_inv, a_spu + h) - g(a_inv, a_spu - h)) / (2 * h)])
    assert step == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("which", ["scratch", "stoc"])
def test_gradient_matches_finite_differences(which, coeffs):
    prob = scratch_problem(P) if which == "scratch" else coeff_problem(coeffs, P)
    rng = stream(0, which)
    worst = 0.0
    for _ in range(100):
        h = rng.standard_normal(2)
        h /= np.linalg.norm(h)
        fd = np.zeros(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1e-6
            fd[i] = (st_loss(*prob.stats(h + e)) - st_loss(*prob.stats(h - e))) / 2e-6
        worst = max(worst, np.linalg.norm(prob.grad(h) - fd) / np.linalg.norm(fd))
    assert worst < 1e-6


def test_stoc_recovers(stoc_trace):
    assert stoc_trace.converged
    assert stoc_trace.final_acc >= 0.5 * math.erfc(-math.sqrt(10)) - 1e-3
    assert stoc_trace.residual[-1] <= 1e-10
    assert stoc_trace.residual[0] > 1e-3


def test_stoc_h2_path(stoc_trace):
    h2 = stoc_trace.h[:, 1]
    neg = h2 < 0
    assert np.all(np.diff(np.abs(h2[neg])) <= 1e-15)
    pos = np.where(h2 > 0)[0]
    seg = h2[pos[0]:]
    upto = seg[: np.argmax(seg >= 1 / math.sqrt(2))] if np.any(seg >= 1 / math.sqrt(2)) else seg
    assert np.all(np.diff(upto) >= -1e-15)
    assert abs(h2[-1]) >= 1 / math.sqrt(2)


def test_degenerate_coefficients_reduce_to_scratch():
    c = AmplificationCoeffs(1.0, 0.0, 0.0, 1.0)
    a = st_scratch_run(P, max_iters=3000)
    b = stoc_run(c, P, max_iters=3000, h0=erm_closed_form(P).h @ np.vstack([w_inv(P), w_spu(P)]).T)
    n = min(len(a), len(b)) - 1
    assert np.max(np.abs(a.h[:n] - b.h[:n])) < 1e-8


def test_residual_zero_at_fixed_point():
    d = np.array([0.3, -1.2])
    assert convergence_residual(d / np.linalg.norm(d), d) == 0.0


def test_condition_report_examples(coeffs):
    r = condition_report(P, coeffs)
    assert (r.st_fails_informal, r.st_fails_formal, r.st_succeeds) == (False, True, False)
    assert condition_report(P.with_(gamma=2.0)).st_succeeds
    for g in (0.01, 0.3, 5.0):
        r = condition_report(P.with_(sigma_sp=0.5, gamma=g))
        assert not r.st_fails_informal and not r.st_fails_formal
    assert r.stoc_condition in (True, False)
    assert r.stoc_condition_refined in (True, False)


def test_condition_predicates_exclusive():
    for g in np.geomspace(0.01, 10, 30):
        for s in np.geomspace(0.1, 20, 30):
            r = condition_report(P.with_(gamma=g, sigma_sp=s))
            assert not ((r.st_fails_informal or r.st_fails_formal) and r.st_succeeds)


def test_condition_warning_when_c4_small():
    c = AmplificationCoeffs(-1.0, 1.0, -2.0, -0.5)
    assert condition_report(P, c).warnings


def test_mu_nonpositive_is_flagged():
    tr = st_scratch_run(P, h0=np.array([-0.1, 1.0]))
    assert tr.flags and tr.flags[0].startswith("mu_nonpositive")
    assert len(tr) == 1


def test_empirical_small_pool_outcome_signs():
    fail = st_empirical_run(P, 1000, epochs=3000, rng=stream(1))
    win = st_empirical_run(SUCCESS, 1000, epochs=3000, rng=stream(2))
    assert fail.final_acc < 0.6 and fail.a_spu[-1] > abs(fail.a_inv[-1])
    assert win.final_acc > 0.95
    with pytest.raises(ValueError):
        st_empirical_run(P, 10)


def test_empirical_scratch_matches_population(fail_trace):
    # two-column view of the pool along (w_inv, w_spu); the population head never leaves that plane
    basis = np.vstack([w_inv(P), w_spu(P)])
    h0 = erm_closed_form(P).h @ basis.T
    tr = st_empirical_run(P, 1_000_000, phi=basis, h0=h0, epochs=len(fail_trace) + 500, rng=stream(3))
    assert abs(tr.h[-1][1] - fail_trace.a_spu[-1]) <= 0.05


def test_empirical_stoc_matches_population(coeffs, stoc_trace):
    phi = np.vstack([coeffs.c1 * w_inv(P) + coeffs.c3 * w_spu(P), coeffs.c2 * w_inv(P) + coeffs.c4 * w_spu(P)])
    tr = st_empirical_run(P, 1_000_000, phi=phi, h0=cl_probe_closed_form(coeffs, P).h,
                          epochs=len(stoc_trace) + 500, rng=stream(4))
    assert abs(tr.final_acc - stoc_trace.final_acc) <= 0.01


def test_coefficient_form_matches_general_feature_stats(coeffs):
    from uda_lab.selftrain import feature_problem
    phi = np.vstack([coeffs.c1 * w_inv(P) + coeffs.c3 * w_spu(P), coeffs.c2 * w_inv(P) + coeffs.c4 * w_spu(P)])
    a, b = coeff_problem(coeffs, P), feature_problem(phi, P)
    rng = stream(0, "coef-vs-general")
    for _ in range(20):
        h = rng.standard_normal(2)
        assert a.stats(h) == pytest.approx(b.stats(h), rel=1e-12, abs=1e-14)
