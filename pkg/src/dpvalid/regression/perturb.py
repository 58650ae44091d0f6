"""Noise models for the cross-product matrix and the perturbation step.

Each mechanism is wrapped in a small model object that can draw fresh noise
matrices in batches. The same object is handed onward as the resampleable
noise law consumed by the parametric bootstrap and by the regularizer's
minimum-eigenvalue simulation, so every consumer sees exactly the
distribution that produced the released matrix.

Calibration notes. The additive mechanisms noise one slot per billed unit
of the sensitivity plan and mirror duplicates. The Wishart mechanism and the
two symmetrized full-matrix mechanisms are isolated behind their model
constructors with the contract "PSD / censorable noise at the stated
(epsilon, delta)"; their degrees-of-freedom and scale constants are
conservative documented defaults, recorded in the output metadata as
provenance "conservative-default".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import CalibrationError, InvalidParameterError
from ..mechanisms import analytic_gaussian_sigma
from ..params import GlobalSensitivity, PrivacyParams
from ..rng import RandomSource
from .plan import SensitivityPlan

MECHANISMS = (
    "laplace",
    "analytic-gaussian",
    "wishart",
    "reg-normal",
    "reg-spherical-laplace",
)

_CENSOR_FLOOR = 1e-6


class NoiseModel:
    """Resampleable law of the noise matrix H."""

    d: int

    def sample_batch(self, size: int, gen: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample(self, gen: np.random.Generator) -> np.ndarray:
        return self.sample_batch(1, gen)[0]

    def min_eig_quantile(self, q: float, n_sims: int, gen: np.random.Generator) -> float:
        """Empirical q-quantile of lambda_min(H); cached after first use."""
        key = (round(q, 12), n_sims)
        cache = getattr(self, "_eig_cache", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_eig_cache", cache)
        if key not in cache:
            draws = self.sample_batch(n_sims, gen)
            mins = np.linalg.eigvalsh(draws)[:, 0]
            cache[key] = float(np.quantile(mins, q))
        return cache[key]


@dataclass(frozen=True)
class ZeroNoise(NoiseModel):
    """Testing hook: no noise at all."""

    d: int

    def sample_batch(self, size, gen):
        return np.zeros((size, self.d, self.d))


@dataclass(frozen=True)
class PlannedEntryNoise(NoiseModel):
    """I.i.d. noise per billed slot, mirrored to duplicates, zeros skipped.

    law is "laplace" (scale = l1_total / epsilon) or "gaussian" (sigma from
    the analytic calibration at l2_total).
    """

    plan: SensitivityPlan
    law: str
    scale: float

    @property
    def d(self) -> int:
        return self.plan.d

    def sample_batch(self, size, gen):
        if self.law == "laplace":
            draws = gen.laplace(0.0, self.scale, size=(size, self.plan.n_slots))
        else:
            draws = gen.normal(0.0, self.scale, size=(size, self.plan.n_slots))
        H = np.zeros((size, self.d, self.d))
        for slot, (i, j) in enumerate(self.plan.slot_entries):
            H[:, i, j] = draws[:, slot]
            H[:, j, i] = draws[:, slot]
        for (i, j), role in self.plan.roles.items():
            if role.kind == "duplicate":
                si, sj = role.source
                H[:, i, j] = H[:, si, sj]
                H[:, j, i] = H[:, si, sj]
        return H


@dataclass(frozen=True)
class WishartNoise(NoiseModel):
    """W = B^2 V^T V with V a (dof x d) standard normal block.

    Structural zeros of the plan are re-zeroed after sampling; nothing else
    is touched, since reshaping Wishart mass would change its law.
    """

    plan: SensitivityPlan
    row_bound: float
    dof: int
    zero_mask: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        object.__setattr__(self, "zero_mask", self.plan.structural_zero_mask())

    @property
    def d(self) -> int:
        return self.plan.d

    def sample_batch(self, size, gen):
        V = gen.standard_normal((size, self.dof, self.d)) * self.row_bound
        H = np.einsum("bki,bkj->bij", V, V)
        H[:, self.zero_mask] = 0.0
        return H


@dataclass(frozen=True)
class SymmetrizedFullNoise(NoiseModel):
    """H = (G + G^T) / 2 with G a full d x d draw.

    law "normal": G entries i.i.d. N(0, sigma^2); the effective sensitivity
    of the symmetrized release works out to max ||z||_2^2, which the sigma
    is calibrated against. law "spherical-laplace": G is a spherical
    Laplace vector in d^2 dimensions (uniform direction, Gamma(d^2, b)
    radius), giving pure epsilon-DP at b = max ||z||_2^2 / epsilon by the
    usual translation argument.
    """

    d: int
    law: str
    scale: float

    def sample_batch(self, size, gen):
        m = self.d * self.d
        if self.law == "normal":
            G = gen.normal(0.0, self.scale, size=(size, self.d, self.d))
        else:
            dirs = gen.standard_normal((size, m))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            radii = gen.gamma(shape=m, scale=self.scale, size=size)
            G = (dirs * radii[:, None]).reshape(size, self.d, self.d)
        return 0.5 * (G + np.transpose(G, (0, 2, 1)))


@dataclass(frozen=True)
class NoisySufficientStatistic:
    """S + H plus everything the downstream steps need to reason about it."""

    s_noisy: np.ndarray
    plan: SensitivityPlan
    mechanism: str
    params: PrivacyParams
    noise_model: NoiseModel
    pre_censored: bool = False
    r: float | None = None
    s_reg: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return int(self.s_noisy.shape[0])

    def with_regularization(self, r: float, s_reg: np.ndarray) -> "NoisySufficientStatistic":
        return replace(self, r=r, s_reg=s_reg)


def censor_eigenvalues(matrix: np.ndarray, floor: float = _CENSOR_FLOOR) -> np.ndarray:
    """Clip eigenvalues below the floor, keeping eigenvectors."""
    vals, vecs = np.linalg.eigh(matrix)
    threshold = max(floor, floor * float(np.abs(vals).max(initial=1.0)))
    clipped = np.maximum(vals, threshold)
    return (vecs * clipped) @ vecs.T


def wishart_dof(d: int, params: PrivacyParams) -> int:
    """Conservative degrees of freedom for the Wishart mechanism."""
    return d + int(math.ceil(14.0 * math.log(4.0 / params.delta) / params.epsilon**2))


def build_noise_model(
    plan: SensitivityPlan, mechanism: str, params: PrivacyParams
) -> tuple[NoiseModel, dict]:
    """Calibrate a noise model; returns the model and calibration metadata."""
    d = plan.d
    if mechanism == "laplace":
        scale = plan.l1_total / params.epsilon
        return (
            PlannedEntryNoise(plan=plan, law="laplace", scale=scale),
            {"noise_scale": scale, "l1_total": plan.l1_total},
        )
    if mechanism == "analytic-gaussian":
        if not (0.0 < params.delta < 1.0):
            raise InvalidParameterError("analytic-gaussian needs delta in (0, 1)")
        sigma = analytic_gaussian_sigma(GlobalSensitivity(l2=plan.l2_total), params)
        return (
            PlannedEntryNoise(plan=plan, law="gaussian", scale=sigma),
            {"noise_sigma": sigma, "l2_total": plan.l2_total},
        )
    if mechanism == "wishart":
        if params.epsilon >= 1.0:
            raise CalibrationError(
                f"the Wishart mechanism is only calibrated for epsilon < 1 "
                f"(got {params.epsilon}); use an additive mechanism instead"
            )
        if not (0.0 < params.delta < 1.0):
            raise InvalidParameterError("wishart needs delta in (0, 1)")
        dof = wishart_dof(d, params)
        return (
            WishartNoise(plan=plan, row_bound=plan.row_l2_bound, dof=dof),
            {
                "dof": dof,
                "row_bound": plan.row_l2_bound,
                "provenance": "conservative-default",
            },
        )
    if mechanism == "reg-normal":
        if not (0.0 < params.delta < 1.0):
            raise InvalidParameterError("reg-normal needs delta in (0, 1)")
        sens = plan.max_row_sq_norm
        sigma = analytic_gaussian_sigma(GlobalSensitivity(l2=sens), params)
        return (
            SymmetrizedFullNoise(d=d, law="normal", scale=sigma),
            {
                "noise_sigma": sigma,
                "matrix_l2_sens": sens,
                "provenance": "conservative-default",
            },
        )
    if mechanism == "reg-spherical-laplace":
        sens = plan.max_row_sq_norm
        b = sens / params.epsilon
        return (
            SymmetrizedFullNoise(d=d, law="spherical-laplace", scale=b),
            {
                "noise_scale": b,
                "matrix_l2_sens": sens,
                "provenance": "conservative-default",
            },
        )
    raise InvalidParameterError(f"unknown mechanism {mechanism!r}; choose one of {MECHANISMS}")


def perturb_S(
    S: np.ndarray,
    plan: SensitivityPlan,
    mechanism: str,
    params: PrivacyParams,
    rng: RandomSource,
    noise_off: bool = False,
) -> NoisySufficientStatistic:
    """Release S + H under the requested mechanism.

    The two censored mechanisms (reg-normal, reg-spherical-laplace) apply
    their eigenvalue censoring here, so their output is already positive
    definite and the regularizer will leave it alone. noise_off is the
    documented testing hook: it swaps in the zero noise model while keeping
    the rest of the pipeline identical.
    """
    S = np.asarray(S, dtype=float)
    if S.shape != (plan.d, plan.d):
        raise InvalidParameterError(
            f"S has shape {S.shape}, plan expects {(plan.d, plan.d)}"
        )
    if noise_off:
        model: NoiseModel = ZeroNoise(d=plan.d)
        meta: dict = {"noise_off": True}
        s_noisy = S.copy()
        pre_censored = False
    else:
        model, meta = build_noise_model(plan, mechanism, params)
        gen = rng.generator()
        s_noisy = S + model.sample(gen)
        pre_censored = mechanism in ("reg-normal", "reg-spherical-laplace")
        if pre_censored:
            s_noisy = censor_eigenvalues(s_noisy)
    meta = {"mechanism": mechanism, **meta}
    return NoisySufficientStatistic(
        s_noisy=s_noisy,
        plan=plan,
        mechanism=mechanism,
        params=params,
        noise_model=model,
        pre_censored=pre_censored,
        metadata=meta,
    )
