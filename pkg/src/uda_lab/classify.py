"""Linear heads on raw inputs or contrastive features, and their target accuracy."""

import math
from dataclasses import dataclass

import numpy as np

from .model import Domain, class_mean, decompose, sample_labeled, source_noise_cov, target_noise_cov, w_inv, w_spu
from .specialfns import SQRT2, erfc


@dataclass
class HeadState:
    """A unit-norm head h and the target statistics of y * h^T features: mean mu, scale sigma."""

    space: str  # "input" or "feature"
    h: np.ndarray
    mu: float
    sigma: float

    @property
    def accuracy(self):
        return gaussian_accuracy(self.mu, self.sigma)


def gaussian_accuracy(mu, sigma):
    """P(mu + sigma z > 0) for z ~ N(0, 1)."""
    sigma = abs(float(sigma))
    if sigma == 0.0:
        return 1.0 if mu > 0 else (0.5 if mu == 0 else 0.0)
    return 0.5 * erfc(-float(mu) / (SQRT2 * sigma))


def input_stats(w, p):
    """Target (mu, sigma) of y w^T x for an input-space vector w."""
    w = np.asarray(w, dtype=float)
    w_in, w_sp = w[: p.d_in], w[p.d_in:]
    proj = float(w_in @ p.wstar)
    var_in = max(float(w_in @ w_in) - proj * proj, 0.0)
    return p.gamma * proj, math.sqrt(p.sigma_in**2 * var_in + p.sigma_sp**2 * float(w_sp @ w_sp))


def input_head(w, p):
    w = np.asarray(w, dtype=float)
    w = w / np.linalg.norm(w)
    mu, sigma = input_stats(w, p)
    return HeadState("input", w, mu, sigma)


def feature_head(h, phi, p):
    h = np.asarray(h, dtype=float)
    h = h / np.linalg.norm(h)
    mu, sigma = input_stats(np.asarray(phi).T @ h, p)
    return HeadState("feature", h, mu, sigma)


def erm_closed_form(p):
    """Population source ERM direction (gamma w_inv + sqrt(d_sp) w_spu) / norm."""
    return input_head(p.gamma * w_inv(p) + math.sqrt(p.d_sp) * w_spu(p), p)


def accuracy_closed_form(l1, l2, p):
    """Target accuracy of l1 w_inv + l2 w_spu."""
    if l1 == 0 and l2 == 0:
        raise ValueError("the zero classifier has no defined accuracy")
    return gaussian_accuracy(l1 * p.gamma, l2 * p.sigma_sp)


def coeff_stats(h, c, p):
    """(mu, sigma) for a head on the two leading contrastive features described by c."""
    h1, h2 = float(h[0]), float(h[1])
    mu = p.gamma * (c.c1 * h1 + c.c2 * h2)
    return mu, abs(p.sigma_sp * (c.c3 * h1 + c.c4 * h2))


def cl_probe_closed_form(c, p):
    """Max-margin source probe on the top two features: h ~ (c1 g + c3 sqrt(dsp), c2 g + c4 sqrt(dsp))."""
    r = math.sqrt(p.d_sp)
    h = np.array([c.c1 * p.gamma + c.c3 * r, c.c2 * p.gamma + c.c4 * r])
    h /= np.linalg.norm(h)
    mu, sigma = coeff_stats(h, c, p)
    return HeadState("feature", h, mu, sigma)


def population_probe(phi, p, domain="source", tol=1e-9):
    """Limit direction of exponential-loss descent on infinite labelled data seen through phi.

    Along directions where the features carry no noise the data are separable and the
    head diverges there; otherwise the minimiser is the Fisher direction.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    dom = Domain(domain)
    cov = source_noise_cov(p) if dom is Domain.SOURCE else target_noise_cov(p)
    a = phi @ class_mean(p, dom)
    c = phi @ cov @ phi.T
    w, v = np.linalg.eigh(c)
    null = w <= tol * max(w.max(), 1.0)
    a_null = v[:, null] @ (v[:, null].T @ a)
    if np.linalg.norm(a_null) > tol * max(np.linalg.norm(a), 1e-300):
        h = a_null
    else:
        h = v[:, ~null] @ ((v[:, ~null].T @ a) / w[~null])
    return feature_head(h, phi, p)


def _log_exp_loss(h, z, ys):
    m = -ys * (z @ h)
    top = m.max()
    e = np.exp(m - top)
    return top + math.log(e.sum() / len(ys)), e / e.sum()


def probe_gd(features, ys, steps=5000, lr=0.1, report_every=100, tol=1e-8):
    """Gradient descent on (1/n) sum exp(-y h^T z) from h = 0; returns the unit direction and loss history."""
    z = np.asarray(features, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if z.ndim != 2 or len(z) < 1 or len(z) != len(ys):
        raise ValueError("features must be an n x k matrix with n labels")
    h = np.zeros(z.shape[1])
    prev = None
    losses = []
    for t in range(int(steps)):
        logl, wts = _log_exp_loss(h, z, ys)
        if not math.isfinite(logl):
            raise FloatingPointError(f"probe loss overflowed at step {t}")
        losses.append(logl)
        grad = -math.exp(logl) * ((wts * ys) @ z)
        h = h - lr * grad
        if (t + 1) % report_every == 0:
            nrm = np.linalg.norm(h)
            if nrm == 0:
                break
            cur = h / nrm
            if prev is not None and np.linalg.norm(cur - prev) < tol:
                break
            prev = cur
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise ValueError("probe did not move from zero; are both classes present?")
    return h / nrm, np.array(losses)


def accuracy_mc(h, p, n, rng, phi=None, chunk=200_000):
    """Monte Carlo target accuracy of sgn(h^T Phi x) with sgn(0) = +1."""
    h = np.asarray(h, dtype=float)
    w = h if phi is None else np.asarray(phi).T @ h
    n = int(n)
    hits = 0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        b = sample_labeled(p, Domain.TARGET, m, rng)
        pred = np.where(b.xs @ w >= 0, 1.0, -1.0)
        hits += int(np.sum(pred == b.ys))
        done += m
    return hits / n


def margin_radius(n, delta, p, dim=None):
    """B = 4 max(sigma_in, sigma_sp, 1)(sqrt(D) + sqrt(log(2n/delta))) + gamma."""
    dim = p.d if dim is None else dim
    return 4.0 * max(p.sigma_in, p.sigma_sp, 1.0) * (math.sqrt(dim) + math.sqrt(math.log(2 * n / delta))) + p.gamma


def ssl_margin_bound(n, xi, delta, p, emp_margin_err, dim=None):
    """Margin-based generalisation bound; dim defaults to d_in + d_sp, pass k for feature space."""
    if not xi > 0 or not 0 < delta < 1:
        raise ValueError("need xi > 0 and 0 < delta < 1")
    b = margin_radius(n, delta, p, dim)
    if xi > 4 * b:
        raise ValueError(f"xi={xi} exceeds 4B={4 * b}; the bound is undefined")
    loglog = math.log(math.log2(4 * b / xi)) if 4 * b / xi > 2 else 0.0
    return (emp_margin_err + 4 * (b / xi) * math.sqrt(1 / n) + math.sqrt(math.log(2 / delta) / n)
            + math.sqrt(max(loglog, 0.0) / n))
