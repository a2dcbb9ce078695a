"""
Gaussian resources and channels for CatSynth.

Conventions used everywhere in the project:

  x = (a + a†)/√2,  p = (a - a†)/(i√2),  [x, p] = i,  vacuum variance 1/2.

Squeezing in dB always refers to the squeezed quadrature, so 4 dB means
s = e^{-2ξ} = 10^{-0.4} and a squeezed-quadrature variance of s/2.
"""
import functools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.special import comb, gammaln
from scipy.stats import poisson

from fock_core import (
    Cutoff,
    DensityOperator,
    FockVector,
    Mode,
    StateValidationError,
    check_leakage,
    ladder_matrices,
    merge_modes,
    partial_trace,
    split_modes,
    tensor,
)

logger = logging.getLogger(__name__)

DEFAULT_PAD = 10
_DB_PER_NEPER = 20.0 / math.log(10.0)


# ── Parameters ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class SqueezeParam:
    """Squeezing strength in all the parametrizations the protocol uses.

    Build it with one of the ``from_*`` constructors; the remaining fields
    are derived so that λ = tanh ξ, s = e^{-2ξ} and db = -10·log10(s).
    """
    xi: float
    lam: float
    s: float
    db: float

    @classmethod
    def from_xi(cls, xi: float) -> "SqueezeParam":
        if not xi >= 0:
            raise ValueError(f"squeezing parameter must be >= 0, got {xi!r}")
        xi = float(xi)
        return cls(xi=xi, lam=math.tanh(xi), s=math.exp(-2.0 * xi), db=xi * _DB_PER_NEPER)

    @classmethod
    def from_lambda(cls, lam: float) -> "SqueezeParam":
        if not 0 <= lam < 1:
            raise ValueError(f"lambda must lie in [0, 1), got {lam!r}")
        return cls.from_xi(math.atanh(lam))

    @classmethod
    def from_s(cls, s: float) -> "SqueezeParam":
        if not 0 < s <= 1:
            raise ValueError(f"squeezing factor s must lie in (0, 1], got {s!r}")
        return cls.from_xi(-0.5 * math.log(s))

    @classmethod
    def from_db(cls, db: float) -> "SqueezeParam":
        if not db >= 0:
            raise ValueError(f"squeezing in dB must be >= 0, got {db!r}")
        return cls.from_xi(db / _DB_PER_NEPER)


@dataclass(frozen=True)
class LossBudget:
    """Efficiencies of the OPO escape, homodyne detection and heralding path."""
    eta_opo: float = 1.0
    eta_det: float = 1.0
    eta_herald: float = 1.0

    def __post_init__(self):
        for name in ("eta_opo", "eta_det", "eta_herald"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")

    @classmethod
    def perfect(cls) -> "LossBudget":
        return cls(1.0, 1.0, 1.0)

    @property
    def is_lossless(self) -> bool:
        return self.eta_opo == 1.0 and self.eta_det == 1.0 and self.eta_herald == 1.0


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def quadrature_matrices(cutoff: Cutoff) -> Tuple[np.ndarray, np.ndarray]:
    """Return the (x, p) matrices at ``cutoff``."""
    a, a_dag, _ = ladder_matrices(cutoff)
    return (a + a_dag) / math.sqrt(2.0), (a - a_dag) / (1j * math.sqrt(2.0))


# ── States ────────────────────────────────────────────────────────────────────

def _poisson_cutoff(mean: float, bound: float) -> int:
    """Smallest index above the mean whose Poisson weight drops below ``bound``."""
    start = int(math.ceil(mean))
    ns = np.arange(start, start + 20 * int(mean + 10) + 200)
    below = np.nonzero(poisson.pmf(ns, mean) < bound)[0]
    return int(ns[below[0]]) if below.size else int(ns[-1])


def coherent(alpha: complex, cutoff: Cutoff) -> FockVector:
    """Coherent state |α>, renormalized after truncation."""
    n = np.arange(cutoff.dim)
    magnitude = abs(alpha)
    if magnitude == 0.0:
        return FockVector.basis(0, cutoff)
    log_amp = -0.5 * magnitude ** 2 + n * math.log(magnitude) - 0.5 * gammaln(n + 1)
    amps = np.exp(log_amp) * np.exp(1j * n * np.angle(alpha))
    suggested = _poisson_cutoff(magnitude ** 2, cutoff.leakage_bound)
    return FockVector(amps, cutoff).check_leakage(suggested).normalize()


def _squeezed_vacuum_amplitudes(xi: float, phase: float, dim: int) -> np.ndarray:
    amps = np.zeros(dim, dtype=np.complex128)
    k = np.arange((dim + 1) // 2)
    log_mag = 0.5 * gammaln(2 * k + 1) - k * math.log(2.0) - gammaln(k + 1)
    ratio = -np.exp(1j * phase) * math.tanh(xi)
    amps[0::2] = np.exp(log_mag) * ratio ** k / math.sqrt(math.cosh(xi))
    return amps


def _squeezed_vacuum_cutoff(xi: float, bound: float) -> int:
    probe = _squeezed_vacuum_amplitudes(xi, 0.0, 2000)
    below = np.nonzero((np.abs(probe) ** 2 < bound) & (np.arange(2000) % 2 == 0))[0]
    return int(below[below > 0][0]) if below.size > 1 else 2000


def squeezed_vacuum(param: SqueezeParam, phase: float, cutoff: Cutoff) -> FockVector:
    """Closed-form Ŝ(ξ, φ)|0>, renormalized after truncation."""
    amps = _squeezed_vacuum_amplitudes(param.xi, phase, cutoff.dim)
    # the top index may be odd and therefore empty; guard on the top even index
    pops = np.abs(amps) ** 2
    top_even = cutoff.n_max - (cutoff.n_max % 2)
    check_leakage(pops[: top_even + 1], cutoff.with_n_max(max(top_even, 1)),
                  _squeezed_vacuum_cutoff(param.xi, cutoff.leakage_bound))
    return FockVector(amps, cutoff).normalize()


@functools.lru_cache(maxsize=256)
def _squeeze_matrix(xi: float, phase: float, n_max: int, pad: int) -> np.ndarray:
    padded = Cutoff(n_max + pad)
    a, a_dag, _ = ladder_matrices(padded)
    generator = 0.5 * xi * (np.exp(-1j * phase) * (a @ a) - np.exp(1j * phase) * (a_dag @ a_dag))
    dim = n_max + 1
    return _read_only(np.ascontiguousarray(expm(generator)[:dim, :dim]))


def squeeze_unitary(param: SqueezeParam, phase: float, cutoff: Cutoff,
                    pad: int = DEFAULT_PAD) -> np.ndarray:
    """Ŝ(ξ, φ) = exp[(ξ/2)(e^{-iφ}a² - e^{iφ}a†²)] at ``cutoff``.

    The exponential is taken at ``n_max + pad`` and cropped so that the
    truncation error stays in the discarded block.
    """
    squeezed_vacuum(param, phase, cutoff)  # leakage precondition
    return _squeeze_matrix(param.xi, float(phase), cutoff.n_max, int(pad))


def two_mode_squeezed_vacuum(lam: float, cutoff: Cutoff) -> FockVector:
    """√(1-λ²) Σ λⁿ |n, n>, renormalized after truncation."""
    if not 0 <= lam < 1:
        raise ValueError(f"lambda must lie in [0, 1), got {lam!r}")
    d = cutoff.dim
    grid = np.zeros((d, d), dtype=np.complex128)
    n = np.arange(d)
    grid[n, n] = math.sqrt(1.0 - lam ** 2) * lam ** n
    if lam > 0:
        suggested = int(math.ceil(math.log(cutoff.leakage_bound / (1.0 - lam ** 2)) / (2.0 * math.log(lam))))
    else:
        suggested = 1
    return FockVector(merge_modes(grid), cutoff, modes=2).check_leakage(suggested).normalize()


# ── Two-mode mixing ───────────────────────────────────────────────────────────

@functools.lru_cache(maxsize=256)
def _beamsplitter_matrix(transmittance: float, phase: float, n_max: int) -> np.ndarray:
    d = n_max + 1
    theta = math.acos(transmittance)
    unitary = np.zeros((d * d, d * d), dtype=np.complex128)
    for total in range(2 * n_max + 1):
        k = np.arange(total + 1)
        generator = np.zeros((total + 1, total + 1), dtype=np.complex128)
        # a b† : |k, N-k> -> √k √(N-k+1) |k-1, N-k+1>
        generator[k[1:] - 1, k[1:]] += theta * np.exp(1j * phase) * np.sqrt(k[1:] * (total - k[1:] + 1))
        # -a† b : |k, N-k> -> -√(k+1) √(N-k) |k+1, N-k-1>
        generator[k[:-1] + 1, k[:-1]] -= theta * np.exp(-1j * phase) * np.sqrt((k[:-1] + 1) * (total - k[:-1]))
        block = expm(generator)
        kept = k[(k <= n_max) & (total - k <= n_max)]
        flat = kept * d + (total - kept)
        unitary[np.ix_(flat, flat)] = block[np.ix_(kept, kept)]
    return _read_only(unitary)


def beamsplitter_unitary(transmittance_amplitude: float, phase: float, cutoff: Cutoff) -> np.ndarray:
    """Two-mode mixing unitary exp[θ(e^{iφ} a b† - e^{-iφ} a† b)], cos θ = t.

    Each total-photon sector is exponentiated in full and then cropped to
    the cutoff, so sectors with N <= n_max are exactly unitary and the
    matrix commutes with the total photon number by construction.
    """
    if not 0.0 <= transmittance_amplitude <= 1.0:
        raise ValueError(f"transmittance amplitude must lie in [0, 1], got {transmittance_amplitude!r}")
    return _beamsplitter_matrix(float(transmittance_amplitude), float(phase), cutoff.n_max)


def two_squeezer_source(param: SqueezeParam, cutoff: Cutoff) -> FockVector:
    """Two single-mode squeezed vacua mixed on a balanced splitter.

    The signal is squeezed at phase π and the idler at phase 0 (a π/2 offset
    in optical phase); the output is the two-mode squeezed vacuum with
    λ = tanh ξ.
    """
    joint = tensor(squeezed_vacuum(param, math.pi, cutoff), squeezed_vacuum(param, 0.0, cutoff))
    unitary = beamsplitter_unitary(math.sqrt(0.5), 0.0, cutoff)
    return FockVector(unitary @ joint.amplitudes, cutoff, modes=2).normalize()


# ── Channels ──────────────────────────────────────────────────────────────────

@functools.lru_cache(maxsize=256)
def _loss_kraus(eta: float, dim: int) -> Tuple[np.ndarray, ...]:
    ops = []
    for k in range(dim):
        op = np.zeros((dim, dim))
        n = np.arange(k, dim)
        op[n - k, n] = np.sqrt(comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
        if np.any(op):
            ops.append(_read_only(op))
    return tuple(ops)


def loss_kraus(eta: float, cutoff: Cutoff) -> List[np.ndarray]:
    """Kraus operators of the pure-loss channel: A_k|n> = √(C(n,k) η^{n-k} (1-η)^k) |n-k>."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta!r}")
    return list(_loss_kraus(float(eta), cutoff.dim))


def apply_kraus(matrix: np.ndarray, kraus: List[np.ndarray], cutoff: Cutoff,
                modes: int = 1, mode: Optional[Mode] = None) -> np.ndarray:
    """Σ_k A_k ρ A_k† on a raw matrix, acting on ``mode`` for two-mode input."""
    if modes == 1:
        return sum(op @ matrix @ op.conj().T for op in kraus)
    tensor4 = split_modes(matrix, cutoff)
    if mode is Mode.SIGNAL:
        out = sum(np.einsum("xa,aibj,yb->xiyj", op, tensor4, op.conj()) for op in kraus)
    elif mode is Mode.IDLER:
        out = sum(np.einsum("xa,iajb,yb->ixjy", op, tensor4, op.conj()) for op in kraus)
    else:
        raise ValueError("a two-mode channel needs the target mode")
    return merge_modes(out)


def loss_channel(rho: DensityOperator, eta: float, mode: Optional[Mode] = None) -> DensityOperator:
    """Pure-loss (Bernoulli) channel with efficiency ``eta``."""
    out = apply_kraus(np.asarray(rho.matrix), loss_kraus(eta, rho.cutoff), rho.cutoff, rho.modes, mode)
    return DensityOperator.from_matrix(out, rho.cutoff, rho.modes)


def loss_channel_ancilla(rho: DensityOperator, eta: float) -> DensityOperator:
    """Pure loss realized as a beamsplitter onto a vacuum ancilla, then traced out."""
    if rho.modes != 1:
        raise StateValidationError("ancilla loss is defined for single-mode states")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta!r}")
    joint = tensor(rho, DensityOperator.fock(0, rho.cutoff))
    unitary = beamsplitter_unitary(math.sqrt(eta), 0.0, rho.cutoff)
    mixed = unitary @ joint.matrix @ unitary.conj().T
    return partial_trace(DensityOperator.from_matrix(mixed, rho.cutoff, modes=2), Mode.SIGNAL)


def dephase_channel(rho: DensityOperator, sigma_phi: float) -> DensityOperator:
    """Average over a Gaussian phase jitter of standard deviation ``sigma_phi`` (rad)."""
    if sigma_phi < 0:
        raise ValueError(f"phase noise must be >= 0, got {sigma_phi!r}")
    if rho.modes != 1:
        raise StateValidationError("dephasing is defined for single-mode states")
    n = np.arange(rho.cutoff.dim)
    gap = n[:, None] - n[None, :]
    damping = np.exp(-0.5 * sigma_phi ** 2 * gap ** 2)
    return DensityOperator.from_matrix(rho.matrix * damping, rho.cutoff)


def phase_rotation(vector: FockVector, angle: float) -> FockVector:
    """Rotate a single-mode state in phase space: |n> -> e^{i n angle}|n>."""
    n = np.arange(vector.cutoff.dim)
    return FockVector(vector.amplitudes * np.exp(1j * n * angle), vector.cutoff)
