"""Positive-definiteness repair for noisy cross-product matrices.

The released matrix must be invertible before anything can be fit, so a
diagonal shift S_H - r I is applied when needed. A matrix that is already
positive definite keeps r = 0. Otherwise r comes from a mechanism-specific
rule, and a universal fallback of r = 3 * lambda_min(S_H) (a negative
number, so the spectrum shifts up) rescues any draw the rule misses.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidParameterError
from ..params import PrivacyParams
from ..rng import RandomSource
from .perturb import NoisySufficientStatistic, WishartNoise

_PD_TOL = 1e-9


def _lambda_min(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix)[0])


def _pd_threshold(matrix: np.ndarray) -> float:
    scale = float(np.abs(matrix).max(initial=1.0))
    return max(_PD_TOL, 1e-14 * scale)


def wishart_shift(model: WishartNoise, params: PrivacyParams) -> float:
    """Analytic high-probability lower bound on lambda_min of Wishart noise.

    The smallest singular value of a (dof x d) standard normal block is at
    least sqrt(dof) - sqrt(d) - t with probability 1 - exp(-t^2 / 2), so
    with t = sqrt(2 ln(1/delta)) the shift below keeps S_H - r I positive
    definite with probability at least 1 - delta while removing the bulk of
    the Wishart location bias.
    """
    t = math.sqrt(2.0 * math.log(1.0 / params.delta)) if params.delta > 0 else 0.0
    root = math.sqrt(model.dof) - math.sqrt(model.d) - t
    return model.row_bound**2 * max(0.0, root) ** 2


def regularize(
    noisy: NoisySufficientStatistic,
    rng: RandomSource,
    p0: float = 0.99,
    n_sims: int = 1000,
) -> NoisySufficientStatistic:
    """Pick r and return the statistic with S_H^r = S_H - r I attached.

    Rules, in order:

    * S_H already positive definite: r = 0.
    * Wishart: the analytic shift above (its noise floor), checked and
      downgraded to the fallback if the draw was unlucky.
    * additive mechanisms: r is the (1 - p0) empirical quantile of
      lambda_min(H) over n_sims fresh draws of the noise law, i.e. the
      value below which H - r I stays positive definite with probability
      p0. The simulation is cached on the noise model, so repeated calls
      against the same law pay for it once.
    * fallback for anything still indefinite: r = 3 * lambda_min(S_H).
    """
    S_H = noisy.s_noisy
    tol = _pd_threshold(S_H)
    lam = _lambda_min(S_H)
    if lam > tol:
        return noisy.with_regularization(0.0, S_H.copy())

    r: float | None = None
    if isinstance(noisy.noise_model, WishartNoise):
        r = wishart_shift(noisy.noise_model, noisy.params)
    else:
        if not (0.0 < p0 < 1.0):
            raise InvalidParameterError(f"p0 must lie in (0, 1), got {p0}")
        gen = rng.generator()
        r = noisy.noise_model.min_eig_quantile(1.0 - p0, n_sims, gen)

    if r is not None and lam - r > tol:
        return noisy.with_regularization(float(r), S_H - r * np.eye(noisy.d))

    # fallback: shift the spectrum up by three times the defect
    r = 3.0 * lam
    if lam - r <= tol:  # lam was ~0: force a small explicit shift
        r = lam - 2.0 * tol
    return noisy.with_regularization(float(r), S_H - r * np.eye(noisy.d))
