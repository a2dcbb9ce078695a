"""
Truncated number-basis linear algebra for CatSynth.

Every state in the simulator is an explicit complex array over the Fock
basis |0>, |1>, ..., |n_max> of one or two modes.  Two-mode objects are
flattened signal-major: the joint index of |s, i> is ``s * dim + i``.  That
convention is fixed project-wide; ``split_modes``/``merge_modes`` are the only
places that reshape between the flat and the 4-index form.
"""
import enum
import json
import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.linalg import eigh

logger = logging.getLogger(__name__)

NORM_TOL = 1e-10
HERMITIAN_TOL = 1e-10
EIGEN_FLOOR = -1e-9
INPUT_NORM_TOL = 1e-8
IMPOSSIBLE_PROBABILITY = 1e-300
DEFAULT_LEAKAGE_BOUND = 1e-8


# ── Errors ────────────────────────────────────────────────────────────────────

class CutoffError(ValueError):
    """Operands disagree on the cutoff, or the cutoff itself is invalid."""


class CutoffTooSmallError(CutoffError):
    """A constructed state leaks population into the top retained index."""

    def __init__(self, cutoff: "Cutoff", top_population: float, suggested_cutoff: int):
        self.cutoff = cutoff
        self.top_population = top_population
        self.suggested_cutoff = suggested_cutoff
        super().__init__(
            f"cutoff too small: population {top_population:.3e} at index {cutoff.n_max} "
            f"exceeds leakage bound {cutoff.leakage_bound:.1e}; "
            f"use a cutoff of at least {suggested_cutoff}"
        )


class ImpossibleOutcomeError(ValueError):
    """A projective outcome has (numerically) zero probability."""


class StateValidationError(ValueError):
    """A matrix or vector fails the physical-state invariants."""


class Mode(enum.Enum):
    SIGNAL = "signal"
    IDLER = "idler"


# ── Cutoff ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Cutoff:
    """Highest retained Fock index per mode."""
    n_max: int
    leakage_bound: float = DEFAULT_LEAKAGE_BOUND

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise CutoffError(f"n_max must be an integer >= 1, got {self.n_max!r}")
        if not 0 < self.leakage_bound < 1:
            raise CutoffError(f"leakage bound must lie in (0, 1), got {self.leakage_bound!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def with_n_max(self, n_max: int) -> "Cutoff":
        return Cutoff(n_max, self.leakage_bound)


def check_leakage(populations: np.ndarray, cutoff: Cutoff, suggested_cutoff: int) -> None:
    """Raise ``CutoffTooSmallError`` when the top index holds too much population.

    Args:
        populations: Single-mode (marginal) populations of length ``cutoff.dim``.
        cutoff: The cutoff the state was built at.
        suggested_cutoff: Smallest cutoff the caller expects to pass the check.
    """
    top = float(populations[-1])
    if top >= cutoff.leakage_bound:
        logger.debug("leakage %.3e at n_max=%d", top, cutoff.n_max)
        raise CutoffTooSmallError(cutoff, top, max(suggested_cutoff, cutoff.n_max + 1))


def _require_same_cutoff(a: Cutoff, b: Cutoff) -> None:
    if a.n_max != b.n_max:
        raise CutoffError(f"cutoff mismatch: {a.n_max} vs {b.n_max}")


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


# ── States ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class FockVector:
    """Pure state as complex amplitudes over the truncated basis."""
    amplitudes: np.ndarray
    cutoff: Cutoff
    modes: int = 1

    def __post_init__(self):
        if self.modes not in (1, 2):
            raise StateValidationError(f"modes must be 1 or 2, got {self.modes}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        expected = self.cutoff.dim ** self.modes
        if amps.size != expected:
            raise StateValidationError(
                f"expected {expected} amplitudes for {self.modes} mode(s), got {amps.size}"
            )
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @classmethod
    def basis(cls, n: int, cutoff: Cutoff) -> "FockVector":
        if not 0 <= n <= cutoff.n_max:
            raise CutoffError(f"Fock index {n} outside cutoff {cutoff.n_max}")
        amps = np.zeros(cutoff.dim, dtype=np.complex128)
        amps[n] = 1.0
        return cls(amps, cutoff)

    @classmethod
    def joint_basis(cls, s: int, i: int, cutoff: Cutoff) -> "FockVector":
        return tensor(cls.basis(s, cutoff), cls.basis(i, cutoff))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "FockVector":
        norm = self.norm
        if norm == 0.0:
            raise StateValidationError("cannot normalize the zero vector")
        return FockVector(self.amplitudes / norm, self.cutoff, self.modes)

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def marginal_populations(self, mode: Mode = Mode.SIGNAL) -> np.ndarray:
        if self.modes == 1:
            return self.populations()
        grid = split_modes(self.populations(), self.cutoff)
        return grid.sum(axis=1) if mode is Mode.SIGNAL else grid.sum(axis=0)

    def check_leakage(self, suggested_cutoff: int) -> "FockVector":
        """Apply the truncation guard to every mode; returns self for chaining."""
        if self.modes == 1:
            check_leakage(self.populations(), self.cutoff, suggested_cutoff)
        else:
            for mode in Mode:
                check_leakage(self.marginal_populations(mode), self.cutoff, suggested_cutoff)
        return self


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive matrix over the truncated basis."""
    matrix: np.ndarray
    cutoff: Cutoff
    modes: int = 1

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.complex128)
        dim = self.cutoff.dim ** self.modes
        if mat.shape != (dim, dim):
            raise StateValidationError(f"expected a {dim}x{dim} matrix, got {mat.shape}")
        if np.max(np.abs(mat - mat.conj().T)) > HERMITIAN_TOL:
            raise StateValidationError("density matrix is not Hermitian")
        trace = np.trace(mat).real
        if abs(trace - 1.0) > NORM_TOL:
            raise StateValidationError(f"density matrix trace {trace!r} is not 1")
        lowest = np.linalg.eigvalsh(mat).min()
        if lowest < EIGEN_FLOOR:
            raise StateValidationError(f"density matrix has eigenvalue {lowest:.3e} < 0")
        object.__setattr__(self, "matrix", _frozen(mat))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, cutoff: Cutoff, modes: int = 1) -> "DensityOperator":
        """Symmetrize and renormalize a matrix produced by a channel, then validate."""
        mat = np.asarray(matrix, dtype=np.complex128)
        mat = 0.5 * (mat + mat.conj().T)
        trace = np.trace(mat).real
        if trace <= 0.0:
            raise StateValidationError("cannot normalize a matrix with non-positive trace")
        return cls(mat / trace, cutoff, modes)

    @classmethod
    def from_vector(cls, vector: FockVector) -> "DensityOperator":
        psi = vector.normalize().amplitudes
        return cls.from_matrix(np.outer(psi, psi.conj()), vector.cutoff, vector.modes)

    @classmethod
    def fock(cls, n: int, cutoff: Cutoff) -> "DensityOperator":
        return cls.from_vector(FockVector.basis(n, cutoff))

    @classmethod
    def mixture(cls, weights, states) -> "DensityOperator":
        states = list(states)
        for other in states[1:]:
            _require_same_cutoff(states[0].cutoff, other.cutoff)
        mat = sum(w * s.matrix for w, s in zip(weights, states))
        return cls.from_matrix(mat, states[0].cutoff, states[0].modes)

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diag(self.matrix).real, 0.0, None)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    # ── Serialization ─────────────────────────────────────────────────────────

    def to_dict(self) -> dict:
        return {
            "cutoff": self.cutoff.n_max,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "DensityOperator":
        cutoff = Cutoff(int(data["cutoff"]))
        raw = np.asarray(data["matrix"], dtype=float)
        mat = raw[..., 0] + 1j * raw[..., 1]
        modes = 1 if mat.shape[0] == cutoff.dim else 2
        return cls(mat, cutoff, modes)

    @classmethod
    def from_json(cls, text: str) -> "DensityOperator":
        return cls.from_dict(json.loads(text))


State = Union[FockVector, DensityOperator]


# ── Index convention ──────────────────────────────────────────────────────────

def split_modes(array: np.ndarray, cutoff: Cutoff) -> np.ndarray:
    """Reshape a flat two-mode vector to (s, i) or a matrix to (s, i, s', i')."""
    d = cutoff.dim
    if array.ndim == 1:
        return array.reshape(d, d)
    return array.reshape(d, d, d, d)


def merge_modes(array: np.ndarray) -> np.ndarray:
    """Inverse of ``split_modes``."""
    if array.ndim == 2:
        return array.reshape(-1)
    d = array.shape[0]
    return array.reshape(d * d, d * d)


# ── Operations ────────────────────────────────────────────────────────────────

def ladder_matrices(cutoff: Cutoff) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (lowering, raising, number) matrices at ``cutoff``."""
    lowering = np.diag(np.sqrt(np.arange(1, cutoff.dim, dtype=float)), k=1).astype(np.complex128)
    raising = lowering.conj().T
    number = np.diag(np.arange(cutoff.dim, dtype=float)).astype(np.complex128)
    return lowering, raising, number


def tensor(a: State, b: State) -> State:
    """Kronecker composition of two single-mode objects (signal ⊗ idler)."""
    if type(a) is not type(b):
        raise TypeError("tensor operands must both be FockVector or both DensityOperator")
    if a.modes != 1 or b.modes != 1:
        raise StateValidationError("tensor operands must be single-mode")
    _require_same_cutoff(a.cutoff, b.cutoff)
    if isinstance(a, FockVector):
        return FockVector(np.kron(a.amplitudes, b.amplitudes), a.cutoff, modes=2)
    mat = np.kron(a.matrix, b.matrix)
    return DensityOperator(0.5 * (mat + mat.conj().T), a.cutoff, modes=2)


def condition_on_fock(joint: FockVector, mode: Mode, n: int) -> Tuple[FockVector, float]:
    """Project one mode of a two-mode pure state onto |n>.

    Returns:
        The normalized single-mode state of the other mode and the
        probability of the outcome.
    """
    if joint.modes != 2:
        raise StateValidationError("condition_on_fock needs a two-mode state")
    if not 0 <= n <= joint.cutoff.n_max:
        raise CutoffError(f"Fock index {n} outside cutoff {joint.cutoff.n_max}")
    grid = split_modes(np.asarray(joint.amplitudes), joint.cutoff)
    branch = grid[:, n] if mode is Mode.IDLER else grid[n, :]
    probability = float(np.vdot(branch, branch).real)
    if probability < IMPOSSIBLE_PROBABILITY:
        raise ImpossibleOutcomeError(f"{mode.value} = {n} has probability {probability:.3e}")
    return FockVector(branch / np.sqrt(probability), joint.cutoff), min(probability, 1.0)


def _check_normalized(state: State) -> None:
    if isinstance(state, FockVector):
        deviation = abs(state.norm ** 2 - 1.0)
    else:
        deviation = abs(np.trace(state.matrix).real - 1.0)
    if deviation > INPUT_NORM_TOL:
        raise StateValidationError(f"input is not normalized (deviation {deviation:.3e})")


def fidelity(state: State, target: State) -> float:
    """Fidelity of ``state`` with ``target``.

    Pure target: <t|rho|t> (|<t|psi>|^2 for pure states).  A mixed target
    gives the Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
    """
    _require_same_cutoff(state.cutoff, target.cutoff)
    if state.modes != target.modes:
        raise StateValidationError("fidelity operands have different mode counts")
    _check_normalized(state)
    _check_normalized(target)

    if isinstance(target, FockVector):
        t = target.amplitudes
        if isinstance(state, FockVector):
            value = abs(np.vdot(t, state.amplitudes)) ** 2
        else:
            value = np.vdot(t, state.matrix @ t).real
    elif isinstance(state, FockVector):
        return fidelity(target, state)
    else:
        weights, vectors = eigh(state.matrix)
        root = (vectors * np.sqrt(np.clip(weights, 0.0, None))) @ vectors.conj().T
        inner = eigh(root @ target.matrix @ root, eigvals_only=True)
        value = np.sum(np.sqrt(np.clip(inner, 0.0, None))) ** 2
    return float(min(max(value, 0.0), 1.0))


def partial_trace(joint: DensityOperator, keep: Mode) -> DensityOperator:
    """Trace out one mode of a two-mode density operator."""
    if joint.modes != 2:
        raise StateValidationError("partial_trace needs a two-mode state")
    tensor4 = split_modes(np.asarray(joint.matrix), joint.cutoff)
    if keep is Mode.SIGNAL:
        reduced = np.einsum("ajbj->ab", tensor4)
    else:
        reduced = np.einsum("jajb->ab", tensor4)
    return DensityOperator.from_matrix(reduced, joint.cutoff)


def expectation(state: State, operator: np.ndarray) -> complex:
    if isinstance(state, FockVector):
        psi = state.amplitudes
        return complex(np.vdot(psi, operator @ psi))
    return complex(np.trace(state.matrix @ operator))


def mean_photon_number(state: State) -> float:
    if state.modes != 1:
        raise StateValidationError("mean_photon_number is defined for single-mode states")
    _, _, number = ladder_matrices(state.cutoff)
    return float(expectation(state, number).real)


def as_density(state: State) -> DensityOperator:
    return state if isinstance(state, DensityOperator) else DensityOperator.from_vector(state)
