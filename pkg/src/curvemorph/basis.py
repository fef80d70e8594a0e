"""Cubic B-spline basis construction and least-squares smoothing of 3D curves."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from curvemorph.curvetools import SampledCurve


@dataclass
class BSplineBasis:
    """Open-uniform B-spline basis on [0, 1] (order 4 = cubic)."""

    order: int
    n_basis: int
    knots: np.ndarray

    def design_matrix(self, grid: np.ndarray) -> np.ndarray:
        grid = np.asarray(grid, dtype=float)
        if grid.size == 0:
            return np.zeros((0, self.n_basis))
        if np.any(grid < 0.0) or np.any(grid > 1.0):
            raise ValueError("evaluation grid must lie in [0, 1]")
        return BSpline.design_matrix(grid, self.knots, self.order - 1, extrapolate=False).toarray()


@dataclass
class FunctionalObject:
    """A 3D curve expressed by basis coefficients, one column per coordinate."""

    basis: BSplineBasis
    coefficients: np.ndarray  # (n_basis, 3)

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (self.basis.n_basis, 3):
            raise ValueError("coefficients must be n_basis x 3")
        if not np.all(np.isfinite(coef)):
            raise ValueError("non-finite coefficients")
        self.coefficients = coef


def build_basis(n_basis: int = 10, order: int = 4) -> BSplineBasis:
    """Open-uniform knots: endpoint multiplicity = order, equally spaced interior knots."""
    if n_basis < order:
        raise ValueError("n_basis must be at least the order")
    interior = np.linspace(0.0, 1.0, n_basis - order + 2)[1:-1]
    knots = np.concatenate([np.zeros(order), interior, np.ones(order)])
    return BSplineBasis(order=order, n_basis=n_basis, knots=knots)


def smooth(curve: SampledCurve, basis: BSplineBasis) -> FunctionalObject:
    """Per-coordinate ordinary least-squares fit of the basis to the samples."""
    if curve.n_samples < basis.n_basis:
        raise ValueError("underdetermined smoothing")
    design = basis.design_matrix(curve.params)
    coef, _, _, sing = np.linalg.lstsq(design, curve.values, rcond=None)
    if sing[-1] <= 0 or sing[0] / sing[-1] > 1e12:
        raise ValueError("ill-conditioned smoothing design")
    return FunctionalObject(basis=basis, coefficients=coef)


def evaluate(f: FunctionalObject, grid: np.ndarray) -> np.ndarray:
    """Basis matrix times coefficients at the requested grid points."""
    return f.basis.design_matrix(grid) @ f.coefficients
