"""Stable special functions: erfc, scaled erfcx, Mill's ratio and the
self-training population loss g(mu, sigma) = E exp(-|mu + z|), z ~ N(0, sigma^2).

Everything that would otherwise multiply a huge exponential by a tiny erfc is
routed through erfcx, so sigma in the thousands is fine.
"""

import math
from dataclasses import dataclass

import numpy as np

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
A3_CONST = 2.0 * SQRT2 / SQRT_PI

# Ooura's approximation of erfcx on [0, inf), t = K / (x + K)
_K = 3.97886080735226
_P1 = (
    0.00127109764952614092, 1.19314022838340944e-4, -0.003963850973605135,
    -8.70779635317295828e-4, 0.00773672528313526668, 0.00383335126264887303,
    -0.0127223813782122755, -0.0133823644533460069, 0.0161315329733252248,
    0.0390976845588484035, 0.00249367200053503304,
)
_P2 = (
    -0.0838864557023001992, -0.119463959964325415, 0.0166207924969367356,
    0.357524274449531043, 0.805276408752910567, 1.18902982909273333,
    1.37040217682338167, 1.31314653831023098, 1.07925515155856677,
    0.774368199119538609, 0.490165080585318424, 0.275374741597376782,
)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


def _erfcx_pos(ax):
    # ax >= 0, works for floats and arrays alike
    t = _K / (ax + _K)
    u = t - 0.5
    y = _P1[0]
    for c in _P1[1:]:
        y = y * u + c
    for c in _P2:
        y = y * u + c
    return y * t


def _erfcx_scalar(x):
    if x >= 0.0:
        return _erfcx_pos(x)
    return 2.0 * math.exp(x * x) - _erfcx_pos(-x)


def _erfc_scalar(x):
    if x >= 0.0:
        if x > 27.3:
            return 0.0
        return _erfcx_pos(x) * math.exp(-x * x)
    return 2.0 - _erfc_scalar(-x)


def erfcx(x):
    """exp(x^2) * erfc(x), overflow-free for large positive x."""
    if np.ndim(x) == 0:
        x = float(x)
        if math.isnan(x):
            return math.nan
        if math.isinf(x):
            return 0.0 if x > 0 else math.inf
        return _erfcx_scalar(x)
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    y = _erfcx_pos(np.where(np.isfinite(ax), ax, 0.0))
    y = np.where(ax == np.inf, 0.0, y)
    neg = x < 0
    if np.any(neg):
        with np.errstate(over="ignore"):
            y = np.where(neg, 2.0 * np.exp(np.where(neg, x * x, 0.0)) - y, y)
    return y


def erfc(x):
    """Complementary error function."""
    if np.ndim(x) == 0:
        x = float(x)
        if math.isnan(x):
            raise DomainError("erfc: NaN argument")
        if math.isinf(x):
            return 0.0 if x > 0 else 2.0
        return _erfc_scalar(x)
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise DomainError("erfc: NaN argument")
    ax = np.minimum(np.abs(x), 30.0)
    pos = _erfcx_pos(ax) * np.exp(-ax * ax)
    return np.where(x >= 0, pos, 2.0 - pos)


@dataclass(frozen=True)
class MillsEval:
    x: float
    r: float
    r1: float
    r2: float


def mills(x):
    """Mill's ratio r(x) = exp(x^2/2) erfc(x/sqrt2) sqrt(pi/2) and its first two derivatives."""
    x = float(x)
    r = erfcx(x / SQRT2) * SQRT_HALF_PI
    r1 = x * r - 1.0
    r2 = r + x * r1
    return MillsEval(x, r, r1, r2)


def mills_arrays(x):
    """Vectorised mills(); returns (r, r1, r2) arrays."""
    x = np.asarray(x, dtype=float)
    r = erfcx(x / SQRT2) * SQRT_HALF_PI
    r1 = x * r - 1.0
    return r, r1, r + x * r1


def _scaled_term(u, expo, gauss):
    # exp(expo) * erfc(u), where expo - u^2 = -mu^2/(2 sigma^2) so that for
    # u >= 0 the product equals gauss * erfcx(u); for u < 0 expo is negative.
    if u >= 0.0:
        return gauss * _erfcx_scalar(u) if gauss > 0.0 else 0.0
    return math.exp(expo) * _erfc_scalar(u)


def a_terms(mu, sigma):
    """The three building blocks (A1, A2, A3) of g and its derivatives.

    A1 = exp(sigma^2/2 - mu) erfc(-mu/(sqrt2 sigma) + sigma/sqrt2)
    A2 = exp(sigma^2/2 + mu) erfc( mu/(sqrt2 sigma) + sigma/sqrt2)
    A3 = 2 sqrt2/sqrt(pi) exp(-mu^2 / (2 sigma^2))
    """
    mu = float(mu)
    sigma = float(sigma)
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    q = mu / sigma
    gauss = math.exp(-0.5 * q * q)
    s2 = 0.5 * sigma * sigma
    a1 = _scaled_term((sigma - q) / SQRT2, s2 - mu, gauss)
    a2 = _scaled_term((sigma + q) / SQRT2, s2 + mu, gauss)
    return a1, a2, A3_CONST * gauss


def st_loss(mu, sigma):
    """g(mu, sigma) = E exp(-|mu + z|) with z ~ N(0, sigma^2)."""
    a1, a2, _ = a_terms(mu, sigma)
    return 0.5 * (a1 + a2)


def st_loss_grad(mu, sigma):
    """Return (g, dg/dmu, dg/dsigma).

    At sigma == 0 the sigma -> 0+ limit is used: g = exp(-|mu|).
    """
    mu = float(mu)
    sigma = float(sigma)
    if sigma == 0.0:
        e = math.exp(-abs(mu))
        return e, (-e if mu >= 0 else e), 0.0
    a1, a2, a3 = a_terms(mu, sigma)
    return 0.5 * (a1 + a2), 0.5 * (a2 - a1), 0.5 * (sigma * (a1 + a2) - a3)


def alphas(mu, sigma):
    """alpha1 = A2 - A1 = 2 dg/dmu and alpha2 = A1 + A2 - A3/sigma = (2/sigma) dg/dsigma."""
    a1, a2, a3 = a_terms(mu, sigma)
    return a2 - a1, a1 + a2 - a3 / sigma


def sgn(x):
    """Sign with sgn(0) = +1."""
    return np.where(np.asarray(x) >= 0, 1.0, -1.0)
