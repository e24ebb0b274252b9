"""Two-domain Gaussian model with one invariant and one spurious block.

Source: x_in ~ N(gamma y w*, sigma_in^2 (I - w* w*^T)), x_sp = y 1.
Target: x_in as in the source, x_sp ~ N(0, sigma_sp^2 I).
"""

import math
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class Domain(str, Enum):
    SOURCE = "source"
    TARGET = "target"
    UNION = "union"


@dataclass(frozen=True)
class ModelParams:
    gamma: float = 0.5
    sigma_in: float = math.sqrt(0.05)
    sigma_sp: float = 1.0
    d_in: int = 5
    d_sp: int = 20
    w_star: tuple = None
    k: int = 2
    kappa: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.sigma_in >= 0:
            raise ValueError(f"sigma_in must be >= 0, got {self.sigma_in}")
        if not self.sigma_sp > 0:
            raise ValueError(f"sigma_sp must be > 0, got {self.sigma_sp}")
        if int(self.d_in) < 1 or int(self.d_sp) < 1:
            raise ValueError("d_in and d_sp must be positive")
        if int(self.k) < 1:
            raise ValueError("k must be positive")
        if not self.kappa > 0:
            raise ValueError("kappa must be > 0")
        if self.w_star is not None:
            w = np.asarray(self.w_star, dtype=float)
            if w.shape != (self.d_in,):
                raise ValueError(f"w_star must have length d_in={self.d_in}")
            if abs(np.linalg.norm(w) - 1.0) > 1e-12:
                raise ValueError("w_star must be a unit vector")
            object.__setattr__(self, "w_star", tuple(float(v) for v in w))

    @property
    def d(self):
        return self.d_in + self.d_sp

    @property
    def wstar(self):
        if self.w_star is None:
            return np.full(self.d_in, 1.0 / math.sqrt(self.d_in))
        return np.array(self.w_star)

    @property
    def ones_direction(self):
        """True when w* is the normalised all-ones vector."""
        return self.w_star is None or np.allclose(self.wstar, 1.0 / math.sqrt(self.d_in), atol=1e-12)

    def with_(self, **kw):
        return replace(self, **kw)


def default_params(**overrides):
    return ModelParams(**overrides)


def random_wstar(d_in, rng):
    """A uniformly random unit vector in R^d_in."""
    v = rng.standard_normal(d_in)
    return tuple(v / np.linalg.norm(v))


def _key(part):
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode())


def stream(seed, *keys):
    """Independent generator for (seed, keys...), e.g. stream(7, "phase", 3, 0)."""
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def w_inv(p):
    v = np.zeros(p.d)
    v[: p.d_in] = p.wstar
    return v


def w_spu(p):
    v = np.zeros(p.d)
    v[p.d_in:] = 1.0 / math.sqrt(p.d_sp)
    return v


@dataclass
class LabeledBatch:
    xs: np.ndarray
    ys: np.ndarray
    domain: Domain = Domain.TARGET


def sample_labeled(p, domain, n, rng):
    domain = Domain(domain)
    if domain is Domain.UNION:
        raise ValueError("sample from SOURCE or TARGET")
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    ws = p.wstar
    ys = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    g = rng.standard_normal((n, p.d_in))
    noise = p.sigma_in * (g - np.outer(g @ ws, ws))
    x_in = p.gamma * ys[:, None] * ws[None, :] + noise
    if domain is Domain.SOURCE:
        x_sp = np.repeat(ys[:, None], p.d_sp, axis=1)
    else:
        x_sp = p.sigma_sp * rng.standard_normal((n, p.d_sp))
    return LabeledBatch(np.hstack([x_in, x_sp]), ys, domain)


def population_second_moment(p, domain):
    """Exact E[x x^T] for the given domain (UNION is the average of the two)."""
    domain = Domain(domain)
    if domain is Domain.UNION:
        return 0.5 * (population_second_moment(p, Domain.SOURCE) + population_second_moment(p, Domain.TARGET))
    ws = p.wstar
    m = np.zeros((p.d, p.d))
    wwt = np.outer(ws, ws)
    m[: p.d_in, : p.d_in] = p.gamma**2 * wwt + p.sigma_in**2 * (np.eye(p.d_in) - wwt)
    if domain is Domain.SOURCE:
        cross = p.gamma * np.outer(ws, np.ones(p.d_sp))
        m[: p.d_in, p.d_in:] = cross
        m[p.d_in:, : p.d_in] = cross.T
        m[p.d_in:, p.d_in:] = 1.0
    else:
        m[p.d_in:, p.d_in:] = p.sigma_sp**2 * np.eye(p.d_sp)
    return m


def target_noise_cov(p):
    """Covariance of x given y on the target (label-independent)."""
    ws = p.wstar
    s = np.zeros((p.d, p.d))
    s[: p.d_in, : p.d_in] = p.sigma_in**2 * (np.eye(p.d_in) - np.outer(ws, ws))
    s[p.d_in:, p.d_in:] = p.sigma_sp**2 * np.eye(p.d_sp)
    return s


def source_noise_cov(p):
    ws = p.wstar
    s = np.zeros((p.d, p.d))
    s[: p.d_in, : p.d_in] = p.sigma_in**2 * (np.eye(p.d_in) - np.outer(ws, ws))
    return s


def class_mean(p, domain):
    """E[y x], identical to the class-conditional mean for y = +1."""
    m = np.zeros(p.d)
    m[: p.d_in] = p.gamma * p.wstar
    if Domain(domain) is Domain.SOURCE:
        m[p.d_in:] = 1.0
    return m


@dataclass(frozen=True)
class Decomposition:
    a_inv: float
    a_spu: float
    resid: float


def decompose(v, p):
    v = np.asarray(v, dtype=float)
    if v.shape != (p.d,):
        raise ValueError(f"expected a vector of length {p.d}, got shape {v.shape}")
    wi, ws = w_inv(p), w_spu(p)
    a, b = float(v @ wi), float(v @ ws)
    return Decomposition(a, b, float(np.linalg.norm(v - a * wi - b * ws)))
