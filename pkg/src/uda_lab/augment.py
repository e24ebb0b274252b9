"""Coordinate-scaling augmentations a = c * x with c ~ U[0, 1]^d, and their exact moments."""

import math
from dataclasses import dataclass

import numpy as np

from .model import Domain, population_second_moment


@dataclass
class AugMoments:
    sigma_a: np.ndarray
    sigma_tilde: np.ndarray


def sample_augmentation(x, rng):
    x = np.asarray(x, dtype=float)
    return rng.random(x.shape) * x


def moments_from_second_moment(m):
    """E[c_i c_j] is 1/3 on the diagonal and 1/4 off it; E[a | x] = x / 2."""
    sigma_a = 0.25 * m + np.diag(np.diag(m)) / 12.0
    return AugMoments(sigma_a, 0.25 * m)


def augmentation_moments(p, domain=Domain.UNION):
    return moments_from_second_moment(population_second_moment(p, domain))


def w_blocks(p, sp_coef=2.0 / 3.0):
    """2x2 restrictions of (Sigma_A, Sigma_tilde) to span{w_inv, w_spu} for the union moments.

    Needs w* = 1/sqrt(d_in); computed without forming d x d matrices so very
    wide spurious blocks are cheap. sp_coef is the sigma_sp^2 coefficient of
    the spurious entry (2/3 from the mask moments; 4/3 gives the variant block).
    """
    if not p.ones_direction:
        raise ValueError("W-block reduction requires w* = 1/sqrt(d_in)")
    g2, s_in2, s_sp2 = p.gamma**2, p.sigma_in**2, p.sigma_sp**2
    din, dsp = p.d_in, p.d_sp
    off = p.gamma * math.sqrt(dsp) / 2.0
    a = np.array([
        [g2 * (1 + 1 / (3 * din)) + s_in2 / 3 * (1 - 1 / din), off],
        [off, dsp / 2 + sp_coef * s_sp2 + 1 / 6],
    ]) / 4.0
    t = np.array([[g2, off], [off, (dsp + s_sp2) / 2]]) / 4.0
    return a, t
