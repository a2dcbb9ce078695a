"""
Phase-space views of single-mode states.

Convention: x = (a + a†)/√2, vacuum variance 1/2, ∬ W dx dp = 1, so the
vacuum peaks at 1/π and |n> takes the value (-1)ⁿ/π at the origin.
Grids are indexed ``values[i, j] = W(x_i, p_j)``.
"""
import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre, gammaln

from fock_core import DensityOperator, StateValidationError

logger = logging.getLogger(__name__)

COVERAGE_TOL = 1e-4
_RESCALE_AT = 1e150
_COVERAGE_STEP = 0.01


class GridCoverageError(ValueError):
    """The phase-space grid misses a non-negligible part of the state."""


@dataclass(frozen=True)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x_axis[1] - self.x_axis[0]) if self.x_axis.size > 1 else 1.0

    @property
    def dp(self) -> float:
        return float(self.p_axis[1] - self.p_axis[0]) if self.p_axis.size > 1 else 1.0

    def minimum(self) -> Tuple[float, float, float]:
        """Most negative value and where it sits, as (W, x, p)."""
        i, j = np.unravel_index(int(np.argmin(self.values)), self.values.shape)
        return float(self.values[i, j]), float(self.x_axis[i]), float(self.p_axis[j])

    def integral(self) -> float:
        return float(self.values.sum() * self.dx * self.dp)

    def x_marginal(self) -> np.ndarray:
        """∫ W dp on the x axis; equals the homodyne density at phase 0."""
        return trapezoid(self.values, self.p_axis, axis=1)

    def p_marginal(self) -> np.ndarray:
        """∫ W dx on the p axis; equals the homodyne density at phase π/2."""
        return trapezoid(self.values, self.x_axis, axis=0)


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Number-state wavefunctions ψ_0..ψ_{n_max} evaluated at ``x``.

    Upward recurrence ψ_{n+1} = √(2/(n+1)) x ψ_n - √(n/(n+1)) ψ_{n-1} with
    the Gaussian factor carried as a per-point log scale, so high orders
    neither overflow nor underflow prematurely.

    Returns:
        Array of shape (n_max + 1, len(x)).
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    out = np.empty((n_max + 1, x.size))
    log_scale = -0.5 * x ** 2
    prev = np.zeros_like(x)
    cur = np.full_like(x, math.pi ** -0.25)
    out[0] = cur * np.exp(log_scale)
    for n in range(n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * x * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE_AT
        if np.any(big):
            cur[big] /= _RESCALE_AT
            prev[big] /= _RESCALE_AT
            log_scale[big] += math.log(_RESCALE_AT)
        out[n + 1] = cur * np.exp(log_scale)
    return out


def _single_mode(rho: DensityOperator) -> np.ndarray:
    if rho.modes != 1:
        raise StateValidationError("phase-space functions are defined for single-mode states")
    return np.asarray(rho.matrix)


def quadrature_pdf(rho: DensityOperator, phase: float, x_values: np.ndarray) -> np.ndarray:
    """Homodyne density p(x|φ) = Σ ρ_mn ψ_m(x) ψ_n(x) e^{i(n-m)φ}."""
    matrix = _single_mode(rho)
    x_values = np.asarray(x_values, dtype=float)
    n = np.arange(rho.cutoff.dim)
    vectors = hermite_functions(rho.cutoff.n_max, x_values) * np.exp(1j * n * phase)[:, None]
    pdf = np.einsum("mx,mn,nx->x", vectors.conj(), matrix, vectors).real
    return pdf.reshape(x_values.shape)


def _mass_outside(rho: DensityOperator, phase: float, low: float, high: float) -> float:
    count = max(int(math.ceil((high - low) / _COVERAGE_STEP)), 2) + 1
    inner = np.linspace(low, high, count)
    return 1.0 - float(trapezoid(quadrature_pdf(rho, phase, inner), inner))


def check_coverage(rho: DensityOperator, x_axis: np.ndarray, p_axis: np.ndarray,
                   tol: float = COVERAGE_TOL) -> None:
    """Raise ``GridCoverageError`` when either marginal leaks more than ``tol``."""
    outside_x = _mass_outside(rho, 0.0, float(x_axis[0]), float(x_axis[-1]))
    outside_p = _mass_outside(rho, math.pi / 2, float(p_axis[0]), float(p_axis[-1]))
    worst = max(outside_x, outside_p)
    if worst > tol:
        raise GridCoverageError(f"grid misses {worst:.2e} of the marginal mass (limit {tol:.0e})")


def wigner(rho: DensityOperator, x_axis: np.ndarray, p_axis: np.ndarray,
           coverage_tol: float = COVERAGE_TOL) -> WignerGrid:
    """Wigner function on the grid ``x_axis`` × ``p_axis`` from the Laguerre expansion."""
    matrix = _single_mode(rho)
    x_axis = np.asarray(x_axis, dtype=float)
    p_axis = np.asarray(p_axis, dtype=float)
    check_coverage(rho, x_axis, p_axis, coverage_tol)

    xx, pp = np.meshgrid(x_axis, p_axis, indexing="ij")
    amp = (xx + 1j * pp) / math.sqrt(2.0)
    radial = 4.0 * np.abs(amp) ** 2
    total = np.zeros(xx.shape)
    dim = rho.cutoff.dim
    for m in range(dim):
        sign = -1.0 if m % 2 else 1.0
        if abs(matrix[m, m]) > 0.0:
            total += sign * matrix[m, m].real * eval_genlaguerre(m, 0, radial)
        for n in range(m + 1, dim):
            if matrix[m, n] == 0.0:
                continue
            scale = math.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)))
            term = matrix[m, n] * (2.0 * amp) ** (n - m) * eval_genlaguerre(m, n - m, radial)
            total += 2.0 * sign * scale * term.real
    values = np.exp(-0.5 * radial) * total / math.pi
    values.setflags(write=False)
    return WignerGrid(x_axis, p_axis, values)


def lossy_wigner_convolution(grid: WignerGrid, eta: float) -> WignerGrid:
    """Wigner function after pure loss, by direct convolution on the grid.

    W_η(x, p) = ∬ W(x', p') G(x - √η x') G(p - √η p') dx' dp' with G a
    normalized Gaussian of variance (1-η)/2.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta!r}")
    if eta == 1.0:
        return grid
    spread = 1.0 - eta
    root = math.sqrt(eta)

    def kernel(axis: np.ndarray, step: float) -> np.ndarray:
        gap = axis[:, None] - root * axis[None, :]
        return np.exp(-gap ** 2 / spread) / math.sqrt(math.pi * spread) * step

    values = kernel(grid.x_axis, grid.dx) @ grid.values @ kernel(grid.p_axis, grid.dp).T
    values.setflags(write=False)
    return WignerGrid(grid.x_axis, grid.p_axis, values)


def ring_minimum(grid: WignerGrid) -> Tuple[float, float]:
    """Most negative value of the grid and its squared radius x² + p²."""
    value, x, p = grid.minimum()
    return value, x * x + p * p
