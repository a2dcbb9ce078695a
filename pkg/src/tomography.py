"""
Homodyne sampling and maximum-likelihood state reconstruction.

Samples are drawn by inverse-CDF lookup of the exact quadrature density.
Reconstruction bins the samples per phase and quadrature interval, builds
one POVM element per bin, optionally folds the detection efficiency into
the POVM, and runs the R·ρ·R fixed-point iteration with step control so
the log-likelihood never decreases.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from tqdm import tqdm

from fock_core import Cutoff, DensityOperator
from gaussian_ops import loss_kraus
from wigner import hermite_functions, quadrature_pdf

logger = logging.getLogger(__name__)

SAMPLE_RANGE = 8.0
SAMPLE_STEP = 0.005
_GAUSS_NODES = 8
_PHASE_DECIMALS = 9
_MIN_STEP = 1.0 / 1024


@dataclass(frozen=True)
class QuadratureSamples:
    """Homodyne record: ``values[k]`` was measured at ``phases[k]``."""
    phases: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        phases = np.asarray(self.phases, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if phases.shape != values.shape:
            raise ValueError("phases and values must have the same length")
        if not (np.all(np.isfinite(phases)) and np.all(np.isfinite(values))):
            raise ValueError("samples must be finite")
        for array in (phases, values):
            array.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


def uniform_phases(count: int) -> np.ndarray:
    """``count`` equally spaced phases in [0, π)."""
    if count < 1:
        raise ValueError("need at least one phase")
    return math.pi * np.arange(count) / count


def sample_homodyne(rho: DensityOperator, phases: np.ndarray, n_samples: int, seed: int) -> QuadratureSamples:
    """Draw ``n_samples`` quadrature values, assigned round-robin to ``phases``.

    Every phase draws from its own child of ``SeedSequence(seed)``, so the
    stream for one phase does not depend on how many samples the others get.
    """
    phases = np.asarray(phases, dtype=float).reshape(-1)
    if phases.size == 0:
        raise ValueError("phases must not be empty")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    grid = np.arange(-SAMPLE_RANGE, SAMPLE_RANGE + SAMPLE_STEP / 2, SAMPLE_STEP)
    assignment = np.arange(n_samples) % phases.size
    streams = np.random.SeedSequence(seed).spawn(phases.size)
    values = np.empty(n_samples)
    for k, phase in enumerate(phases):
        slots = assignment == k
        count = int(np.count_nonzero(slots))
        if count == 0:
            continue
        pdf = np.clip(quadrature_pdf(rho, phase, grid), 0.0, None)
        cdf = cumulative_trapezoid(pdf, grid, initial=0.0)
        cdf /= cdf[-1]
        uniform = np.random.default_rng(streams[k]).random(count)
        values[slots] = np.interp(uniform, cdf, grid)
    logger.debug("drew %d samples over %d phases", n_samples, phases.size)
    return QuadratureSamples(phases[assignment], values)


# ── Reconstruction ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MleConfig:
    cutoff: Cutoff
    eta: float = 1.0
    phase_bins: int = 12
    quad_bin_width: float = 0.1
    quad_range: float = 6.0
    max_iters: int = 2000
    tol: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta!r}")
        if self.phase_bins < 1:
            raise ValueError("phase_bins must be >= 1")
        if not 0.0 < self.quad_bin_width <= self.quad_range:
            raise ValueError("quad_bin_width must be positive and no wider than quad_range")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0.0:
            raise ValueError("tol must be > 0")

    @property
    def quad_edges(self) -> np.ndarray:
        count = int(round(2.0 * self.quad_range / self.quad_bin_width))
        return np.linspace(-self.quad_range, self.quad_range, count + 1)


@dataclass(frozen=True)
class MleResult:
    state: DensityOperator
    converged: bool
    iterations: int
    log_likelihood: Tuple[float, ...]


def _phase_groups(phases: np.ndarray, phase_bins: int) -> Tuple[np.ndarray, np.ndarray]:
    """Representative phase per group and each sample's group index."""
    rounded = np.round(np.mod(phases, 2.0 * math.pi), _PHASE_DECIMALS)
    unique, index = np.unique(rounded, return_inverse=True)
    if unique.size <= phase_bins:
        return unique, index
    # too many distinct phases: fold onto [0, π) and bin uniformly
    folded = np.mod(phases, math.pi)
    index = np.minimum((folded / math.pi * phase_bins).astype(int), phase_bins - 1)
    centers = (np.arange(phase_bins) + 0.5) * math.pi / phase_bins
    used = np.unique(index)
    remap = np.full(phase_bins, -1)
    remap[used] = np.arange(used.size)
    return centers[used], remap[index]


def _bin_povms(phase: float, edges: np.ndarray, cutoff: Cutoff) -> np.ndarray:
    """∫_bin |x_φ><x_φ| dx for every quadrature bin, shape (bins, d, d)."""
    nodes, weights = np.polynomial.legendre.leggauss(_GAUSS_NODES)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    points = (mid[:, None] + half[:, None] * nodes[None, :]).reshape(-1)
    n = np.arange(cutoff.dim)
    vectors = hermite_functions(cutoff.n_max, points) * np.exp(1j * n * phase)[:, None]
    vectors = vectors.reshape(cutoff.dim, mid.size, _GAUSS_NODES)
    scaled = vectors * (half[:, None] * weights[None, :])[None, :, :]
    return np.einsum("abq,cbq->bac", scaled, vectors.conj())


def build_povms(samples: QuadratureSamples, config: MleConfig) -> Tuple[np.ndarray, np.ndarray]:
    """POVM elements of the occupied bins and their sample counts."""
    edges = config.quad_edges
    inside = (samples.values >= edges[0]) & (samples.values < edges[-1])
    dropped = len(samples) - int(np.count_nonzero(inside))
    if dropped:
        logger.warning("%d sample(s) outside ±%.2f ignored", dropped, config.quad_range)
    group_phases, group_index = _phase_groups(samples.phases[inside], config.phase_bins)
    quad_index = np.digitize(samples.values[inside], edges) - 1
    n_quad = edges.size - 1
    counts = np.bincount(group_index * n_quad + quad_index, minlength=group_phases.size * n_quad)

    kraus = loss_kraus(config.eta, config.cutoff) if config.eta < 1.0 else None
    elements: List[np.ndarray] = []
    occupied: List[int] = []
    for g, phase in enumerate(group_phases):
        block = counts[g * n_quad:(g + 1) * n_quad]
        povms = _bin_povms(phase, edges, config.cutoff)
        for b in np.nonzero(block)[0]:
            element = povms[b]
            if kraus is not None:
                element = sum(op.T @ element @ op for op in kraus)
            elements.append(element)
            occupied.append(int(block[b]))
    empty = group_phases.size * n_quad - len(occupied)
    logger.debug("%d occupied bins, %d empty bins dropped", len(occupied), empty)
    return np.asarray(elements), np.asarray(occupied, dtype=float)


def _log_likelihood(povms: np.ndarray, counts: np.ndarray, rho: np.ndarray) -> Tuple[float, np.ndarray]:
    probs = np.clip(np.einsum("jab,ba->j", povms, rho).real, 1e-300, None)
    return float(np.dot(counts, np.log(probs))), probs


def _step(rho: np.ndarray, operator: np.ndarray) -> np.ndarray:
    out = operator @ rho @ operator.conj().T
    out = 0.5 * (out + out.conj().T)
    return out / np.trace(out).real


def mle_reconstruct(samples: QuadratureSamples, config: MleConfig) -> MleResult:
    """Iterative maximum-likelihood estimate of the pre-detection state.

    Each iteration first tries the plain R·ρ·R update and falls back to the
    diluted (1 + μR)·ρ·(1 + μR) with μ = 1, 1/2, ... until the
    log-likelihood does not decrease. The run stops when the largest change
    of a diagonal element drops below ``tol``.
    """
    if len(samples) == 0:
        raise ValueError("samples must not be empty")
    povms, counts = build_povms(samples, config)
    if counts.size == 0:
        raise ValueError("no samples fall inside the quadrature range")
    total = counts.sum()
    dim = config.cutoff.dim
    identity = np.eye(dim)
    rho = identity.astype(np.complex128) / dim
    log_l, probs = _log_likelihood(povms, counts, rho)
    history = [log_l]
    converged = False
    iterations = 0

    with tqdm(total=config.max_iters, desc="MLE", disable=None, leave=False) as progress:
        while iterations < config.max_iters:
            r_op = np.einsum("j,jab->ab", counts / (total * probs), povms)
            candidate = _step(rho, r_op)
            new_l, new_probs = _log_likelihood(povms, counts, candidate)
            mu = 1.0
            while new_l < log_l and mu >= _MIN_STEP:
                candidate = _step(rho, identity + mu * r_op)
                new_l, new_probs = _log_likelihood(povms, counts, candidate)
                mu /= 2.0
            if new_l < log_l:
                # no step improves the likelihood: already at the maximum
                converged = True
                break
            iterations += 1
            progress.update(1)
            change = float(np.max(np.abs(np.diag(candidate) - np.diag(rho))))
            rho, log_l, probs = candidate, new_l, new_probs
            history.append(log_l)
            if change < config.tol:
                converged = True
                break

    if not converged:
        logger.warning("MLE did not converge in %d iterations", config.max_iters)
    logger.info("MLE finished after %d iterations, log-likelihood %.6f", iterations, log_l)
    return MleResult(DensityOperator.from_matrix(rho, config.cutoff), converged, iterations, tuple(history))
