"""
Squeezed coherent-state superpositions and fidelity landscapes.

Targets are built from their quadrature wavefunctions: each squeezed
coherent component is a real Gaussian in x, the superposition is formed
pointwise and projected onto the number-state wavefunctions. This keeps
the Fock amplitudes exact at any size and squeezing, with no truncated
matrix exponential involved.
"""
import enum
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from fock_core import Cutoff, DensityOperator, FockVector, State, as_density, check_leakage
from gaussian_ops import LossBudget, SqueezeParam, dephase_channel, phase_rotation
from herald import (
    Detector,
    HeraldScenario,
    MixingParam,
    core_state,
    core_weights,
    herald_pnr,
)
from wigner import hermite_functions

logger = logging.getLogger(__name__)

QUAD_STEP = 0.02
_SPREAD_WIDTHS = 12.0
_SMALL_ALPHA = 1e-4
_REFINE_XATOL = 1e-5


class Parity(enum.Enum):
    EVEN = "even"
    ODD = "odd"

    @property
    def sign(self) -> float:
        return 1.0 if self is Parity.EVEN else -1.0


class SqueezeAxis(enum.Enum):
    """Quadrature compressed by the target's squeezing (X is the cat's axis)."""
    X = "x"
    P = "p"


@dataclass(frozen=True)
class CssTarget:
    alpha: complex
    squeeze_db: float
    parity: Parity
    axis: SqueezeAxis = SqueezeAxis.X

    def __post_init__(self):
        if not self.squeeze_db >= 0:
            raise ValueError(f"squeeze_db must be >= 0, got {self.squeeze_db!r}")

    @property
    def size(self) -> float:
        return abs(self.alpha) ** 2


def grid_axis(low: float, high: float, step: float) -> np.ndarray:
    """Inclusive uniform axis from ``low`` to ``high``, rounded to absorb float drift."""
    count = int(math.floor((high - low) / step + 1e-9)) + 1
    return np.round(low + step * np.arange(count), 10)


@dataclass(frozen=True)
class GridSpec:
    alpha_sq_min: float = 0.2
    alpha_sq_max: float = 6.0
    alpha_sq_step: float = 0.05
    db_min: float = 0.0
    db_max: float = 8.0
    db_step: float = 0.1
    axis: SqueezeAxis = SqueezeAxis.X

    def __post_init__(self):
        if self.alpha_sq_step <= 0 or self.db_step <= 0:
            raise ValueError("grid steps must be positive")
        if not 0 <= self.alpha_sq_min <= self.alpha_sq_max:
            raise ValueError("need 0 <= alpha_sq_min <= alpha_sq_max")
        if not 0 <= self.db_min <= self.db_max:
            raise ValueError("need 0 <= db_min <= db_max")

    @property
    def alpha_sq_grid(self) -> np.ndarray:
        return grid_axis(self.alpha_sq_min, self.alpha_sq_max, self.alpha_sq_step)

    @property
    def db_grid(self) -> np.ndarray:
        return grid_axis(self.db_min, self.db_max, self.db_step)

    def to_dict(self) -> dict:
        return {
            "alpha_sq_min": self.alpha_sq_min, "alpha_sq_max": self.alpha_sq_max,
            "alpha_sq_step": self.alpha_sq_step, "db_min": self.db_min,
            "db_max": self.db_max, "db_step": self.db_step, "axis": self.axis.value,
        }


@dataclass(frozen=True)
class FidelityLandscape:
    alpha_sq_grid: np.ndarray
    db_grid: np.ndarray
    values: np.ndarray
    argmax: Tuple[float, float, float]
    grid_spec: GridSpec

    @property
    def grid_max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class CurvePoint:
    ratio: float
    fidelity_star: float
    alpha_sq_star: float
    db_star: float
    w_low: float
    w_n: float


# ── Targets ───────────────────────────────────────────────────────────────────

def _spread(squeeze_db: float, axis: SqueezeAxis) -> float:
    """Variance factor s_x of the x quadrature: variance is s_x / 2."""
    s = SqueezeParam.from_db(squeeze_db).s
    return s if axis is SqueezeAxis.X else 1.0 / s


class _Projector:
    """Number-state wavefunctions tabulated on one symmetric x grid."""

    def __init__(self, n_max: int, half_range: float):
        count = int(math.ceil(half_range / QUAD_STEP))
        self.x = QUAD_STEP * np.arange(-count, count + 1)
        self.table = hermite_functions(n_max, self.x)

    @classmethod
    def covering(cls, n_max: int, max_alpha_sq: float, max_db: float) -> "_Projector":
        widest = max(_spread(max_db, SqueezeAxis.P), 1.0)
        half = math.sqrt(2.0 * max_alpha_sq * widest) + _SPREAD_WIDTHS * math.sqrt(widest / 2.0)
        return cls(n_max, half)

    def amplitudes(self, alpha_abs: float, squeeze_db: float, parity: Parity,
                   axis: SqueezeAxis) -> np.ndarray:
        """Exact Fock amplitudes 0..n_max of the target for real α >= 0."""
        spread = _spread(squeeze_db, axis)
        gauss = lambda centre: np.exp(-(self.x - centre) ** 2 / (2.0 * spread))  # noqa: E731
        prefactor = (math.pi * spread) ** -0.25
        if alpha_abs < _SMALL_ALPHA:
            if parity is Parity.EVEN:
                psi = prefactor * gauss(0.0)
            else:
                psi = prefactor * math.sqrt(2.0 / spread) * self.x * gauss(0.0)
        else:
            centre = math.sqrt(2.0 * spread) * alpha_abs
            overlap = math.exp(-2.0 * alpha_abs ** 2)
            norm = 1.0 / math.sqrt(2.0 * (1.0 + parity.sign * overlap))
            psi = norm * prefactor * (gauss(centre) + parity.sign * gauss(-centre))
        amps = self.table @ psi * QUAD_STEP
        wrong = 1 if parity is Parity.EVEN else 0
        amps[wrong::2] = 0.0
        return amps


def target_amplitudes(target: CssTarget, n_max: int) -> np.ndarray:
    """Untruncated-normalization Fock amplitudes 0..n_max of ``target`` at real α = |α|."""
    projector = _Projector.covering(n_max, target.size, target.squeeze_db)
    return projector.amplitudes(abs(target.alpha), target.squeeze_db, target.parity, target.axis)


def squeezed_css(target: CssTarget, cutoff: Cutoff) -> FockVector:
    """Ŝ(ξ)(|α> ± |-α>)/√(2(1 ± e^{-2|α|²})), squeezing applied after the superposition."""
    amps = target_amplitudes(target, cutoff.n_max)
    pops = np.abs(amps) ** 2
    first = 0 if target.parity is Parity.EVEN else 1
    top = cutoff.n_max if (cutoff.n_max - first) % 2 == 0 else cutoff.n_max - 1
    if pops[top] >= cutoff.leakage_bound:
        wide = 4 * cutoff.n_max + 40
        probe = np.abs(target_amplitudes(target, wide)) ** 2
        index = np.arange(wide + 1)
        fits = np.nonzero((index > cutoff.n_max) & ((index - first) % 2 == 0) & (probe < cutoff.leakage_bound))[0]
        check_leakage(pops[: top + 1], cutoff, int(fits[0]) if fits.size else wide)
    # the phase of α rotates the whole state, squeezing axis included
    return phase_rotation(FockVector(amps, cutoff).normalize(), float(np.angle(target.alpha)))


# ── Landscapes ────────────────────────────────────────────────────────────────

def _overlap(matrix: np.ndarray, amps: np.ndarray) -> float:
    return float(min(max(np.vdot(amps, matrix @ amps).real, 0.0), 1.0))


def best_fit_css(state: State, parity: Parity, grid: GridSpec = GridSpec(),
                 workers: int = 1) -> FidelityLandscape:
    """Fidelity of ``state`` with every squeezed cat on ``grid`` and the refined optimum.

    The grid argmax breaks ties towards the smallest size, then the smallest
    squeezing. The optimum is refined by a bounded scalar search along each
    axis inside the neighbouring grid cells and never falls below the grid
    maximum.
    """
    rho = as_density(state)
    matrix = np.asarray(rho.matrix)
    alpha_sq = grid.alpha_sq_grid
    db = grid.db_grid
    projector = _Projector.covering(rho.cutoff.n_max, float(alpha_sq[-1]), float(db[-1]))

    def fidelity_at(a_sq: float, d: float) -> float:
        amps = projector.amplitudes(math.sqrt(a_sq), d, parity, grid.axis)
        return _overlap(matrix, amps)

    def row(i: int) -> np.ndarray:
        return np.array([fidelity_at(float(alpha_sq[i]), float(d)) for d in db])

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        values = np.vstack(list(pool.map(row, range(alpha_sq.size))))
    values.setflags(write=False)

    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    best = (float(alpha_sq[i]), float(db[j]), float(values[i, j]))
    refined = _refine(fidelity_at, best, alpha_sq, db)
    logger.debug("grid max %.6f at (%.2f, %.1f dB), refined %.6f", best[2], best[0], best[1], refined[2])
    return FidelityLandscape(alpha_sq, db, values, refined if refined[2] >= best[2] else best, grid)


def _refine(fidelity_at, start: Tuple[float, float, float], alpha_sq: np.ndarray,
            db: np.ndarray) -> Tuple[float, float, float]:
    """Bounded line searches inside the neighbouring cells, never past the tabulated axes."""
    a_sq, d, value = start
    a_step = float(alpha_sq[1] - alpha_sq[0]) if alpha_sq.size > 1 else 0.0
    d_step = float(db[1] - db[0]) if db.size > 1 else 0.0
    lo, hi = max(float(alpha_sq[0]), a_sq - a_step), min(float(alpha_sq[-1]), a_sq + a_step)
    if hi > lo:
        found = minimize_scalar(lambda v: -fidelity_at(v, d), bounds=(lo, hi), method="bounded",
                                options={"xatol": _REFINE_XATOL})
        if -found.fun > value:
            a_sq, value = float(found.x), float(-found.fun)
    lo, hi = max(float(db[0]), d - d_step), min(float(db[-1]), d + d_step)
    if hi > lo:
        found = minimize_scalar(lambda v: -fidelity_at(a_sq, v), bounds=(lo, hi), method="bounded",
                                options={"xatol": _REFINE_XATOL})
        if -found.fun > value:
            d, value = float(found.x), float(-found.fun)
    return a_sq, d, value


def default_parity(n: int) -> Parity:
    return Parity.EVEN if n % 2 == 0 else Parity.ODD


def protocol_fidelity_curve(n: int, ratio_grid: Sequence[float], lam: float,
                            parity: Optional[Parity] = None, grid: GridSpec = GridSpec(),
                            workers: int = 1) -> List[CurvePoint]:
    """Best squeezed-cat fidelity of the core state along ε/λ."""
    parity = parity or default_parity(n)
    cutoff = Cutoff(max(n, 1))
    points = []
    for ratio in ratio_grid:
        epsilon = float(ratio) * lam
        state = core_state(n, epsilon, lam, cutoff)
        landscape = best_fit_css(state, parity, grid, workers)
        a_sq, d, value = landscape.argmax
        w_low, w_n = core_weights(n, epsilon, lam)
        points.append(CurvePoint(float(ratio), value, a_sq, d, w_low, w_n))
        logger.info("ratio %.4f: F*=%.4f at |α|²=%.3f, %.2f dB", ratio, value, a_sq, d)
    return points


# ── Parameter inference ───────────────────────────────────────────────────────

def lossless_scenario(theta_deg: float, lam: float, n: int, cutoff: Cutoff) -> HeraldScenario:
    return HeraldScenario(
        squeeze=SqueezeParam.from_lambda(lam),
        mixing=MixingParam.from_theta_deg(theta_deg),
        n_herald=n,
        detector=Detector.PNR,
        losses=LossBudget.perfect(),
        cutoff=cutoff,
    )


def infer_lambda(theta_deg: float, alpha_sq_target: float, n: int = 2,
                 grid: GridSpec = GridSpec(), cutoff: Cutoff = Cutoff(12),
                 lam_range: Tuple[float, float] = (0.02, 0.45), scan_points: int = 12,
                 workers: int = 1) -> float:
    """Squeezing λ at which the lossless heralded state best-fits a cat of size ``alpha_sq_target``.

    The best-fit size grows with λ at fixed θ; a coarse scan brackets the
    crossing and ``brentq`` pins it down.
    """
    parity = default_parity(n)

    def mismatch(lam: float) -> float:
        outcome = herald_pnr(lossless_scenario(theta_deg, lam, n, cutoff))
        return best_fit_css(outcome.state, parity, grid, workers).argmax[0] - alpha_sq_target

    lams = np.linspace(lam_range[0], lam_range[1], scan_points)
    previous = mismatch(float(lams[0]))
    if previous == 0.0:
        return float(lams[0])
    for low, high in zip(lams[:-1], lams[1:]):
        current = mismatch(float(high))
        if current == 0.0:
            return float(high)
        if np.sign(current) != np.sign(previous):
            lam = brentq(mismatch, float(low), float(high), xtol=1e-4)
            logger.info("inferred lambda %.4f for theta %.2f deg", lam, theta_deg)
            return float(lam)
        previous = current
    raise ValueError(f"no lambda in {lam_range} gives a best-fit size of {alpha_sq_target}")


def fit_phase_noise(state: DensityOperator, parity: Parity, target_fidelity: float,
                    grid: GridSpec = GridSpec(), sigma_max: float = 1.5, workers: int = 1) -> float:
    """Phase jitter σ_φ (rad) that lowers the best-fit fidelity to ``target_fidelity``."""
    def excess(sigma: float) -> float:
        return best_fit_css(dephase_channel(state, sigma), parity, grid, workers).argmax[2] - target_fidelity

    start = excess(0.0)
    if start <= 0.0:
        logger.warning("state already below the target fidelity without phase noise")
        return 0.0
    if excess(sigma_max) > 0.0:
        raise ValueError(f"phase noise up to {sigma_max} rad cannot reach fidelity {target_fidelity}")
    return float(brentq(excess, 0.0, sigma_max, xtol=1e-4))
