"""Linear Barlow Twins: closed form, gradient training, alignment bound and
the 2x2 reduction onto span{w_inv, w_spu}."""

import math
from dataclasses import dataclass, field

import numpy as np

from .augment import augmentation_moments, w_blocks
from .model import Domain, decompose, stream


class ConvergenceError(RuntimeError):
    pass


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues in descending order and the matching eigenvectors as columns.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("square matrix required")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    thresh = tol * max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a)))
        if off.max(initial=0.0) <= thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= thresh * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = np.abs(a - np.diag(np.diag(a)))
        if off.max(initial=0.0) > thresh:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]


def inv_sqrt(s, floor=1e-14):
    """S^{-1/2} of a symmetric positive definite matrix."""
    w, v = jacobi_eigh(s)
    top = w.max()
    if w.min() <= floor * top:
        i = int(np.argmin(w))
        raise np.linalg.LinAlgError(
            f"matrix is singular: eigenvalue #{i} = {w[i]:.3e} <= {floor:g} * max ({top:.3e})"
        )
    return (v / np.sqrt(w)) @ v.T


@dataclass
class FeatureMap:
    phi: np.ndarray
    source: str = "closed_form"
    eigvals: np.ndarray = None
    losses: np.ndarray = None

    @property
    def k(self):
        return self.phi.shape[0]


def _canonical_rows(phi, p):
    phi = phi.copy()
    d_in = p.d_in
    for j in range(phi.shape[0]):
        row = phi[j]
        if j == 0:
            ref = row[d_in:].sum()
            flip = ref > 0
        elif j == 1:
            ref = row[:d_in] @ p.wstar
            flip = ref < 0
        else:
            ref = row[np.argmax(np.abs(row))]
            flip = ref < 0
        if flip:
            phi[j] = -row
    return phi


def generalized_basis(mom):
    """All generalized eigenpairs of (Sigma_tilde, Sigma_A), descending; rows are Sigma_A-orthonormal."""
    s = inv_sqrt(mom.sigma_a)
    w, u = jacobi_eigh(s @ mom.sigma_tilde @ s)
    return w, u.T @ s


def bt_closed_form(p, k=None, domain=Domain.UNION):
    """Top-k whitened eigenvectors: Phi = U_k^T Sigma_A^{-1/2}."""
    k = p.k if k is None else int(k)
    if not 1 <= k <= p.d:
        raise ValueError(f"k must lie in [1, {p.d}]")
    mom = augmentation_moments(p, domain)
    w, full = generalized_basis(mom)
    return FeatureMap(_canonical_rows(full[:k], p), "closed_form", w)


def bt_loss(phi, mom, kappa):
    g = phi @ mom.sigma_a @ phi.T - np.eye(phi.shape[0])
    return 2.0 * np.trace(phi @ (mom.sigma_a - mom.sigma_tilde) @ phi.T) + kappa * np.sum(g * g)


def bt_grad(phi, mom, kappa):
    pa = phi @ mom.sigma_a
    g = pa @ phi.T - np.eye(phi.shape[0])
    return 4.0 * phi @ (mom.sigma_a - mom.sigma_tilde) + 4.0 * kappa * g @ pa


def bt_gradient_train(p, kappa=None, k=None, steps=20000, lr=1e-3, rng=None, phi0=None, domain=Domain.UNION):
    """Full-batch gradient descent on the kappa-regularised objective."""
    kappa = p.kappa if kappa is None else float(kappa)
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    k = p.k if k is None else int(k)
    mom = augmentation_moments(p, domain)
    if phi0 is None:
        rng = stream(p.seed, "bt_init", k) if rng is None else rng
        phi = rng.standard_normal((k, p.d)) / math.sqrt(p.d)
    else:
        phi = np.array(phi0, dtype=float)
    steps = int(steps)
    losses = np.empty(steps + 1)
    diff = mom.sigma_a - mom.sigma_tilde
    eye = np.eye(phi.shape[0])
    for t in range(steps + 1):
        pa = phi @ mom.sigma_a
        g = pa @ phi.T - eye
        loss = 2.0 * np.sum(phi * (phi @ diff)) + kappa * np.sum(g * g)
        losses[t] = loss
        if not np.isfinite(loss) or loss > 1e12:
            raise ConvergenceError(f"loss diverged to {loss:.3e} at step {t}; try a smaller lr than {lr}")
        if t == steps:
            break
        phi = phi - lr * (4.0 * phi @ diff + 4.0 * kappa * g @ pa)
    return FeatureMap(phi, "gradient", None, losses)


@dataclass
class BoundReport:
    error: float
    bound: float
    loss: float
    epsilon: float
    status: str  # "ok", "vacuous" or "not a low-loss solution"
    align: np.ndarray = field(repr=False, default=None)

    @property
    def holds(self):
        return self.error <= self.bound * (1 + 1e-9) + 1e-15


def bt_subspace_bound(phi_hat, epsilon, kappa, p, domain=Domain.UNION):
    """Best linear alignment of phi_hat to the top-k closed form and the k eps / (2 gap) bound."""
    ph = phi_hat.phi if isinstance(phi_hat, FeatureMap) else np.asarray(phi_hat, dtype=float)
    k = ph.shape[0]
    mom = augmentation_moments(p, domain)
    lam, full = generalized_basis(mom)
    top = full[:k]
    align = ph @ mom.sigma_a @ top.T
    delta = align @ top - ph
    err = float(np.trace(delta @ mom.sigma_a @ delta.T))
    loss = float(bt_loss(ph, mom, kappa))
    gap = 1.0 - lam[k] if k < p.d else math.inf
    bound = k * epsilon / (2.0 * gap)
    if loss > epsilon * (1 + 1e-9) + 1e-15:
        status = "not a low-loss solution"
    elif bound >= np.trace(ph @ mom.sigma_a @ ph.T):
        status = "vacuous"
    else:
        status = "ok"
    rep = BoundReport(err, bound, loss, float(epsilon), status, align)
    if status == "ok" and not rep.holds:
        raise AssertionError(f"alignment error {err:.3e} exceeds bound {bound:.3e}")
    return rep


@dataclass(frozen=True)
class AmplificationCoeffs:
    c1: float
    c2: float
    c3: float
    c4: float
    alpha: float = 0.0
    theta: float = 0.0
    tau: float = 1.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    lambda1_tilde: float = 0.0
    lambda2_tilde: float = 0.0
    beta: float = 0.0


def _eig2(m):
    """Eigen-decomposition of a symmetric 2x2: (l1, l2, angle of top eigenvector)."""
    a, b, d = m[0, 0], m[0, 1], m[1, 1]
    mid, rad = 0.5 * (a + d), math.hypot(0.5 * (a - d), b)
    ang = 0.5 * math.atan2(2.0 * b, a - d)
    return mid + rad, mid - rad, ang


def _canonical_c(c1, c2, c3, c4):
    if c3 > 0:
        c1, c3 = -c1, -c3
    if c2 < 0:
        c2, c4 = -c2, -c4
    return c1, c2, c3, c4


def w_rows_from_closed_form(p):
    """(c1, c2, c3, c4) read off the two closed-form rows lying in span{w_inv, w_spu}.

    These are usually the top two rows, but for small gamma a direction outside
    W can rank above the second W row, so the rows are picked by residual.
    """
    lam, full = generalized_basis(augmentation_moments(p))
    dec = [decompose(r, p) for r in full]
    resid = np.array([x.resid / max(np.linalg.norm(r), 1e-300) for x, r in zip(dec, full)])
    i, j = sorted(np.argsort(resid, kind="stable")[:2])
    return dec[i].a_inv, dec[j].a_inv, dec[i].a_spu, dec[j].a_spu


def amplification(p, sp_coef=2.0 / 3.0, crosscheck=True):
    """(c1..c4) with phi1 = c1 w_inv + c3 w_spu, phi2 = c2 w_inv + c4 w_spu."""
    if not p.ones_direction:
        raise ValueError("amplification() supports only w* = 1/sqrt(d_in)")
    a, t = w_blocks(p, sp_coef)
    l1, l2, alpha = _eig2(a)
    lt1, lt2, beta = _eig2(t)
    u = np.array([[math.cos(alpha), math.sin(alpha)], [math.sin(alpha), -math.cos(alpha)]])
    ut = np.array([[math.cos(beta), math.sin(beta)], [math.sin(beta), -math.cos(beta)]])
    x = np.diag([l1**-0.5, l2**-0.5]) @ u.T @ ut @ np.diag([math.sqrt(lt1), math.sqrt(lt2)])
    _, s = jacobi_eigh(x @ x.T)
    q = s[:, 0] if s[0, 0] >= 0 else -s[:, 0]
    theta = math.atan2(q[1], q[0])
    scale = u @ np.diag([l1**-0.5, l2**-0.5])
    f1 = scale @ np.array([math.cos(theta), math.sin(theta)])
    f2 = scale @ np.array([math.sin(theta), -math.cos(theta)])
    c1, c2, c3, c4 = _canonical_c(f1[0], f2[0], f1[1], f2[1])
    out = AmplificationCoeffs(c1, c2, c3, c4, alpha, theta, math.sqrt(l1 / l2), l1, l2, lt1, lt2, beta)
    if crosscheck and sp_coef == 2.0 / 3.0 and p.d <= 500:
        got = _canonical_c(*w_rows_from_closed_form(p))
        want = (c1, c2, c3, c4)
        if max(abs(g - w) for g, w in zip(got, want)) > 1e-6 * max(1.0, max(map(abs, want))):
            raise AssertionError(f"amplification {want} disagrees with closed-form rows {got}")
    return out


def slice_params(k1, k2, sigma_sp, base):
    """Instance on the slice gamma = k1 k2 / sigma_sp, d_sp = sigma_sp^2 / k2^2."""
    return base.with_(gamma=k1 * k2 / sigma_sp, sigma_sp=sigma_sp, d_sp=int(round(sigma_sp**2 / k2**2)), w_star=None)


@dataclass(frozen=True)
class AsymptoticLimits:
    tau_tan_theta: float
    cot_alpha: float
    z_cot_alpha: float
    z_over_tau_sq: float
    c2_over_c4_over_z: float
    c1_over_c3: float


def asymptotic_limits(k1, k2, d_in, sigma_in, sp_coef=2.0 / 3.0):
    """Large-z limits on the slice d_sp = z, gamma = k1/sqrt(z), sigma_sp = k2 sqrt(z).

    sp_coef is the sigma_sp^2 coefficient in the spurious diagonal of 4 Sigma_A:
    2/3 for the exact moments, 4/3 for the variant block.
    """
    if not (k1 > 0 and k2 > 0):
        raise ValueError("k1 and k2 must be positive")
    s_in = sigma_in**2 * (1 - 1 / d_in)
    b = 1 + 2 * sp_coef * k2**2
    lam_sp = (1 + k2**2) / b
    tt = 3 * k1 * (1 - lam_sp) / (2 * lam_sp * s_in)
    return AsymptoticLimits(
        tau_tan_theta=tt,
        cot_alpha=0.0,
        z_cot_alpha=k1 / b,
        z_over_tau_sq=(2 * s_in / 3) / b,
        c2_over_c4_over_z=(1 + k2**2) / k1,
        c1_over_c3=tt,
    )
