"""Population self-training of a linear head.

A head h sees y h^T z ~ N(mu, sigma^2) on the target with mu = h^T s and
sigma^2 = h^T Q h, so every variant (raw inputs, the two leading contrastive
features, a full feature map) is one (s, Q) pair. Each step moves h against
the gradient of g(mu, sigma) = E exp(-|mu + z|) and renormalises.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .classify import cl_probe_closed_form, erm_closed_form, gaussian_accuracy
from .model import Domain, class_mean, sample_labeled, target_noise_cov
from .specialfns import alphas, st_loss_grad


@dataclass
class HeadProblem:
    s: np.ndarray
    q: np.ndarray
    # maps a head to input space (d x k); rows 0/1 of `wcoords` give (a_inv, a_spu)
    wcoords: np.ndarray = None

    @property
    def dim(self):
        return len(self.s)

    def stats(self, h):
        h = np.asarray(h, dtype=float)
        return float(h @ self.s), math.sqrt(max(float(h @ self.q @ h), 0.0))

    def grad(self, h):
        """Gradient of g(mu(h), sigma(h)) with respect to h."""
        mu, sigma = self.stats(h)
        _, gm, gs = st_loss_grad(mu, sigma)
        out = gm * self.s
        if sigma > 0:
            out = out + (gs / sigma) * (self.q @ h)
        return out


def scratch_problem(p):
    """Head on (a_inv, a_spu) coordinates of the input space."""
    return HeadProblem(np.array([p.gamma, 0.0]), np.diag([0.0, p.sigma_sp**2]), np.eye(2))


def input_problem(p):
    from .model import w_inv, w_spu
    return HeadProblem(class_mean(p, Domain.TARGET), target_noise_cov(p), np.vstack([w_inv(p), w_spu(p)]))


def coeff_problem(c, p):
    """Head on the two leading contrastive features given their amplification coefficients."""
    v = np.array([c.c3, c.c4])
    return HeadProblem(p.gamma * np.array([c.c1, c.c2]), p.sigma_sp**2 * np.outer(v, v),
                       np.array([[c.c1, c.c2], [c.c3, c.c4]]))


def feature_problem(phi, p):
    from .model import w_inv, w_spu
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    return HeadProblem(phi @ class_mean(p, Domain.TARGET), phi @ target_noise_cov(p) @ phi.T,
                       np.vstack([w_inv(p), w_spu(p)]) @ phi.T)


@dataclass
class SelfTrainTrace:
    h: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    a_inv: np.ndarray
    a_spu: np.ndarray
    acc: np.ndarray
    residual: np.ndarray
    converged: bool = False
    converge_iter: int = None
    flags: list = field(default_factory=list)

    @property
    def final_acc(self):
        return float(self.acc[-1])

    @property
    def final_h(self):
        return self.h[-1]

    def __len__(self):
        return len(self.mu)

    def rows(self):
        for t in range(len(self)):
            yield (t, *self.h[t], self.mu[t], self.sigma[t], self.a_inv[t], self.a_spu[t], self.acc[t])


def convergence_residual(h, delta):
    """|h1 d2 - h2 d1| for a two-dimensional head; zero exactly at the fixed points of the update."""
    return abs(float(h[0]) * float(delta[1]) - float(h[1]) * float(delta[0]))


def _run_2d(prob, h0, eta, max_iters, tol, stop_on, stop_on_nonpositive_mu):
    s0, s1 = float(prob.s[0]), float(prob.s[1])
    q00, q01, q11 = float(prob.q[0, 0]), float(prob.q[0, 1]), float(prob.q[1, 1])
    wc = prob.wcoords
    h0v = np.asarray(h0, dtype=float)
    h0v = h0v / np.linalg.norm(h0v)
    x, y = float(h0v[0]), float(h0v[1])
    hs, mus, sigs, res = [], [], [], []
    flags = []
    converged, conv_at = False, None
    for t in range(int(max_iters) + 1):
        mu = x * s0 + y * s1
        qx, qy = q00 * x + q01 * y, q01 * x + q11 * y
        sigma = math.sqrt(max(x * qx + y * qy, 0.0))
        _, gm, gs = st_loss_grad(mu, sigma)
        dx, dy = gm * s0, gm * s1
        if sigma > 0:
            dx += gs / sigma * qx
            dy += gs / sigma * qy
        r = abs(x * dy - y * dx)
        hs.append((x, y))
        mus.append(mu)
        sigs.append(sigma)
        res.append(r)
        if not (math.isfinite(dx) and math.isfinite(dy)):
            raise FloatingPointError(f"non-finite update at iterate {t}: h={(x, y)}, mu={mu}, sigma={sigma}")
        if mu <= 0 and not flags:
            flags.append(f"mu_nonpositive@{t}")
            if stop_on_nonpositive_mu:
                break
        if stop_on == "residual" and r <= tol:
            converged, conv_at = True, t
            break
        if t == max_iters:
            break
        nx, ny = x - eta * dx, y - eta * dy
        nrm = math.hypot(nx, ny)
        nx, ny = nx / nrm, ny / nrm
        step = math.hypot(nx - x, ny - y)
        x, y = nx, ny
        if stop_on == "step" and step < tol:
            hs.append((x, y))
            mu = x * s0 + y * s1
            sigma = math.sqrt(max(x * (q00 * x + q01 * y) + y * (q01 * x + q11 * y), 0.0))
            mus.append(mu)
            sigs.append(sigma)
            res.append(math.nan)
            converged, conv_at = True, t + 1
            break
    return _trace(np.array(hs), np.array(mus), np.array(sigs), np.array(res), wc, converged, conv_at, flags)


def _run_nd(prob, h0, eta, max_iters, tol, stop_on_nonpositive_mu):
    h = np.asarray(h0, dtype=float)
    h = h / np.linalg.norm(h)
    hs, mus, sigs, res = [], [], [], []
    flags = []
    converged, conv_at = False, None
    for t in range(int(max_iters) + 1):
        mu, sigma = prob.stats(h)
        g = prob.grad(h)
        hs.append(h)
        mus.append(mu)
        sigs.append(sigma)
        res.append(float(np.linalg.norm(g - (g @ h) * h)))
        if mu <= 0 and not flags:
            flags.append(f"mu_nonpositive@{t}")
            if stop_on_nonpositive_mu:
                break
        if t == max_iters:
            break
        nh = h - eta * g
        nh /= np.linalg.norm(nh)
        step = float(np.linalg.norm(nh - h))
        h = nh
        if step < tol:
            mu, sigma = prob.stats(h)
            hs.append(h)
            mus.append(mu)
            sigs.append(sigma)
            res.append(math.nan)
            converged, conv_at = True, t + 1
            break
    return _trace(np.array(hs), np.array(mus), np.array(sigs), np.array(res), prob.wcoords, converged, conv_at, flags)


def _trace(hs, mus, sigs, res, wc, converged, conv_at, flags):
    ab = hs @ wc.T if wc is not None else np.full((len(hs), 2), np.nan)
    acc = np.array([gaussian_accuracy(m, s) for m, s in zip(mus, sigs)])
    return SelfTrainTrace(hs, mus, sigs, ab[:, 0], ab[:, 1], acc, res, converged, conv_at, flags)


def self_train(prob, h0, eta=0.05, max_iters=200_000, tol=1e-10, stop_on="step", stop_on_nonpositive_mu=False):
    """Run population self-training on a HeadProblem from h0."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    if prob.dim == 2:
        return _run_2d(prob, h0, eta, max_iters, tol, stop_on, stop_on_nonpositive_mu)
    return _run_nd(prob, h0, eta, max_iters, tol, stop_on_nonpositive_mu)


def st_scratch_run(p, eta=0.05, max_iters=200_000, h0=None, tol=1e-10):
    """Self-training from the source ERM head on raw inputs, tracked in (a_inv, a_spu)."""
    if h0 is None:
        h0 = np.array([p.gamma, math.sqrt(p.d_sp)])
    return self_train(scratch_problem(p), h0, eta, max_iters, tol, "step", stop_on_nonpositive_mu=True)


def scratch_multipliers(a_inv, a_spu, p, eta):
    """Per-coordinate factors (1 - eta/2 alpha1 gamma^2 / mu, 1 - eta/2 alpha2 sigma_sp^2) before renormalising."""
    mu, sigma = p.gamma * a_inv, p.sigma_sp * abs(a_spu)
    a1, a2 = alphas(mu, sigma)
    return 1 - 0.5 * eta * a1 * p.gamma**2 / mu, 1 - 0.5 * eta * a2 * p.sigma_sp**2


def stoc_run(c, p, eta=0.05, max_iters=200_000, h0=None, tol=1e-10):
    """Self-training over the two leading contrastive features, started from the source probe."""
    if h0 is None:
        h0 = cl_probe_closed_form(c, p).h
    return self_train(coeff_problem(c, p), h0, eta, max_iters, tol, "residual")


def st_empirical_run(p, n_unlabeled, phi=None, h0=None, eta=0.05, epochs=2000, rng=None, tol=1e-10):
    """Finite-sample self-training on a fixed unlabelled target pool, pseudolabels refreshed each epoch."""
    from .classify import population_probe
    from .model import stream
    n_unlabeled = int(n_unlabeled)
    if n_unlabeled < 1000:
        raise ValueError("n_unlabeled must be at least 1000")
    rng = stream(p.seed, "st_empirical") if rng is None else rng
    batch = sample_labeled(p, Domain.TARGET, n_unlabeled, rng)
    z = batch.xs if phi is None else batch.xs @ np.asarray(phi).T
    prob = input_problem(p) if phi is None else feature_problem(phi, p)
    if h0 is None:
        h0 = erm_closed_form(p).h if phi is None else population_probe(phi, p).h
    h = np.asarray(h0, dtype=float)
    h = h / np.linalg.norm(h)
    hs = [h]
    for _ in range(int(epochs)):
        m = z @ h
        wts = np.exp(-np.abs(m)) * np.where(m >= 0, 1.0, -1.0)
        g = -(wts @ z) / n_unlabeled
        nh = h - eta * g
        nh /= np.linalg.norm(nh)
        step = np.linalg.norm(nh - h)
        h = nh
        hs.append(h)
        if step < tol:
            break
    hs = np.array(hs)
    stats = [prob.stats(x) for x in hs]
    mus = np.array([m for m, _ in stats])
    sigs = np.array([s for _, s in stats])
    tr = _trace(hs, mus, sigs, np.full(len(hs), np.nan), prob.wcoords, False, None, [])
    return tr


@dataclass(frozen=True)
class ConditionReport:
    st_fails_informal: bool
    st_fails_formal: bool
    st_succeeds: bool
    stoc_condition: bool = None
    stoc_condition_refined: bool = None
    mu_condition_c2: bool = None
    mu_condition_c12: bool = None
    warnings: tuple = ()


def condition_report(p, c=None, k1=None, k2=None):
    """Evaluate the success/failure predicates for ST and STOC on one instance.

    k1, k2 default to the slice constants of p: k2 = sigma_sp / sqrt(d_sp), k1 = gamma sqrt(d_sp).
    """
    g, s = p.gamma, p.sigma_sp
    fi = g < 1 / (2 * s) and s >= 1
    ff = g <= 1 / (2 * math.sqrt(s)) and s >= 1
    ok = g >= s
    k2 = s / math.sqrt(p.d_sp) if k2 is None else k2
    k1 = g * math.sqrt(p.d_sp) if k1 is None else k1
    stoc = p.d_sp <= k1**2 * k2 ** (2 / 3)
    L = 1 + k2**2
    extra = (p.d_in / (2 * L * p.sigma_in**2 * (p.d_in - 1))) ** (2 / 3) if p.sigma_in > 0 and p.d_in > 1 else math.inf
    stoc_refined = p.d_sp <= k1**2 * k2 ** (2 / 3) * extra
    m2 = m12 = None
    warns = []
    if c is not None:
        mu0 = cl_probe_closed_form(c, p).mu
        m2 = c.c2 != 0 and mu0 >= s * (-c.c4) / (g * c.c2)
        m12 = (c.c2 + c.c1) != 0 and mu0 >= s * (-c.c4 - c.c3) / (g * (c.c2 + c.c1))
        if abs(c.c4) <= abs(c.c3):
            warns.append("|c4| <= |c3|: the simplifying assumption |c4| > |c3| does not hold")
    return ConditionReport(bool(fi), bool(ff), bool(ok), bool(stoc), bool(stoc_refined),
                           None if m2 is None else bool(m2), None if m12 is None else bool(m12), tuple(warns))
