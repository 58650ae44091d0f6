"""Design construction and unit rescaling for regression on noisy
sufficient statistics.

All variables are affinely mapped onto [0, 1] before the cross-product
matrix is formed, so every entry of a data row lies in the unit interval and
sensitivity bookkeeping stays uniform. Estimates are mapped back to original
units exactly afterwards; the map is linear in the coefficient vector, so
interval endpoints and coefficient covariances transport exactly as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..columns import BoundedColumn, CategoricalColumn
from ..errors import InvalidParameterError


@dataclass(frozen=True)
class ColumnInfo:
    """One column of the scaled [X, y] matrix."""

    name: str
    kind: str  # "intercept" | "numeric" | "dummy" | "response"
    lower: float = 0.0
    width: float = 1.0
    categorical: str | None = None  # owning categorical for dummies
    level: str | None = None


@dataclass(frozen=True)
class DesignSpec:
    """A regression request: response, predictors, intercept flag.

    Design column order is intercept (if any), numeric predictors in the
    given order, then one dummy block per categorical (reference level
    dropped, remaining levels in declared order). The response is always the
    final column of the combined matrix.
    """

    response: BoundedColumn
    numeric: tuple[BoundedColumn, ...] = ()
    categorical: tuple[CategoricalColumn, ...] = ()
    intercept: bool = True

    def __post_init__(self):
        ns = {self.response.n} | {c.n for c in self.numeric} | {c.n for c in self.categorical}
        if len(ns) != 1:
            raise InvalidParameterError("all design columns must have equal length")
        names = [self.response.name] + [c.name for c in self.numeric] + [c.name for c in self.categorical]
        if len(set(names)) != len(names):
            raise InvalidParameterError("design column names must be distinct")

    @property
    def n(self) -> int:
        return self.response.n

    @property
    def p(self) -> int:
        """Number of regression coefficients."""
        return (
            (1 if self.intercept else 0)
            + len(self.numeric)
            + sum(len(c.levels) - 1 for c in self.categorical)
        )


@dataclass(frozen=True)
class ScaledDesign:
    """The unit-scaled [X, y] matrix plus everything needed to undo it."""

    matrix: np.ndarray  # n x (p + 1), response last
    columns: tuple[ColumnInfo, ...]  # length p + 1, response last
    intercept: bool

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def p(self) -> int:
        return int(self.matrix.shape[1] - 1)

    # -- exact scale-back ----------------------------------------------

    def beta_transform(self) -> tuple[np.ndarray, np.ndarray]:
        """Affine map (T, c) with beta_original = T @ beta_scaled + c.

        Derivation: with y = Ly + Wy * y_s and x_j = Lj + Wj * x_sj, the
        scaled model y_s = sum_j b_sj x_sj turns into
        y = [Ly + Wy*b_s0 - Wy * sum_j b_sj Lj / Wj] + sum_j (Wy b_sj / Wj) x_j,
        where the bracketed constant lands on the intercept. Without an
        intercept the constant has nowhere to go, so rescale_design only
        permits centerless (all lower bounds zero) designs in that case and
        the map is purely diagonal.
        """
        resp = self.columns[-1]
        design = self.columns[:-1]
        p = len(design)
        T = np.zeros((p, p))
        c = np.zeros(p)
        for j, info in enumerate(design):
            if info.kind == "intercept":
                T[j, j] = resp.width
                c[j] = resp.lower
                for k, other in enumerate(design):
                    if k != j and other.kind != "intercept":
                        T[j, k] = -resp.width * other.lower / other.width
            else:
                T[j, j] = resp.width / info.width
        return T, c


def rescale_design(spec: DesignSpec) -> ScaledDesign:
    """Build the unit-scaled [X, y] matrix for a design.

    Numeric columns map through (x - lower) / (upper - lower); dummies are
    already in {0, 1}; the response scales the same way and sits in the last
    column. No-intercept designs are accepted only when every bound's lower
    end is zero, which keeps the scale-back exact (see beta_transform).
    """
    cols: list[np.ndarray] = []
    infos: list[ColumnInfo] = []
    if spec.intercept:
        cols.append(np.ones(spec.n))
        infos.append(ColumnInfo(name="(intercept)", kind="intercept"))
    else:
        offenders = [c.name for c in (spec.response, *spec.numeric) if c.lower != 0.0]
        if offenders:
            raise InvalidParameterError(
                "no-intercept designs need all-zero lower bounds for an exact "
                f"scale-back; offending columns: {offenders}"
            )
    for col in spec.numeric:
        cols.append((col.values - col.lower) / col.width)
        infos.append(ColumnInfo(name=col.name, kind="numeric", lower=col.lower, width=col.width))
    for cat in spec.categorical:
        for level in cat.levels[1:]:
            cols.append((cat.values == level).astype(float))
            infos.append(
                ColumnInfo(
                    name=f"{cat.name}[{level}]",
                    kind="dummy",
                    categorical=cat.name,
                    level=level,
                )
            )
    resp = spec.response
    cols.append((resp.values - resp.lower) / resp.width)
    infos.append(ColumnInfo(name=resp.name, kind="response", lower=resp.lower, width=resp.width))
    matrix = np.column_stack(cols)
    return ScaledDesign(matrix=matrix, columns=tuple(infos), intercept=spec.intercept)


def compute_S(scaled: ScaledDesign) -> np.ndarray:
    """Cross-product matrix S = Z^T Z of the scaled [X, y]."""
    Z = scaled.matrix
    return Z.T @ Z
