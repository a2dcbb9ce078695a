"""
Heralded core-state synthesis.

A two-mode squeezed vacuum is mixed by a weakly asymmetric two-mode
rotation (reflection amplitude ε) and the idler is measured. Detecting n
photons leaves the signal, at low squeezing, in

    |Ψ> ∝ ε√(n(n-1)) |n-2> + λ |n>.

Losses are applied in the order of the optical chain: OPO escape on both
modes before mixing, the heralding path on the idler after mixing, and
homodyne detection on the signal last (see ``output_loss``).
"""
import enum
import functools
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Dict, Iterable, Tuple

import numpy as np

from fock_core import (
    Cutoff,
    DensityOperator,
    FockVector,
    Mode,
    split_modes,
)
from gaussian_ops import (
    LossBudget,
    SqueezeParam,
    apply_kraus,
    beamsplitter_unitary,
    loss_channel,
    loss_kraus,
    two_mode_squeezed_vacuum,
)

logger = logging.getLogger(__name__)

NEGLIGIBLE_PROBABILITY = 1e-15


class NegligibleProbabilityError(ValueError):
    """The requested herald outcome essentially never happens."""


class ScenarioError(ValueError):
    """A herald scenario is inconsistent or malformed."""


class DegenerateSuperpositionWarning(UserWarning):
    """The core state collapsed to a single Fock state (n < 2)."""


# ── Parameters ────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MixingParam:
    """Mixing strength set by the half-wave-plate angle θ (degrees).

    ε = sin 2θ is the reflection amplitude used by the pipeline and
    r = √((1+ε)/2) is the equivalent splitter of the two-squeezer picture.
    """
    theta: float
    epsilon: float
    r: float

    @classmethod
    def from_theta_deg(cls, theta: float) -> "MixingParam":
        if not 0.0 <= theta <= 45.0:
            raise ScenarioError(f"theta must lie in [0, 45] degrees, got {theta!r}")
        epsilon = math.sin(2.0 * math.radians(theta))
        return cls(float(theta), epsilon, math.sqrt((1.0 + epsilon) / 2.0))

    @classmethod
    def from_epsilon(cls, epsilon: float) -> "MixingParam":
        if not 0.0 <= epsilon <= 1.0:
            raise ScenarioError(f"epsilon must lie in [0, 1], got {epsilon!r}")
        theta = math.degrees(math.asin(epsilon)) / 2.0
        return cls(theta, float(epsilon), math.sqrt((1.0 + epsilon) / 2.0))

    @property
    def transmittance(self) -> float:
        return math.sqrt(1.0 - self.epsilon ** 2)


class Detector(enum.Enum):
    PNR = "pnr"
    COINCIDENCE_ONOFF = "coincidence_onoff"


_SCENARIO_KEYS = {
    "lambda", "theta_deg", "epsilon", "n_herald", "detector", "eta_opo",
    "eta_det", "eta_herald", "cutoff", "bs_phase", "dark_click_prob",
}


@dataclass(frozen=True)
class HeraldScenario:
    """Everything that defines one heralding experiment.

    ``bs_phase`` is stored in radians; its JSON form is in degrees.
    """
    squeeze: SqueezeParam
    mixing: MixingParam
    n_herald: int
    detector: Detector
    losses: LossBudget
    cutoff: Cutoff
    bs_phase: float = 0.0
    dark_click_prob: float = 0.0

    def __post_init__(self):
        if int(self.n_herald) != self.n_herald or self.n_herald < 1:
            raise ScenarioError(f"n_herald must be an integer >= 1, got {self.n_herald!r}")
        if self.n_herald > self.cutoff.n_max:
            raise ScenarioError(f"n_herald={self.n_herald} exceeds the cutoff {self.cutoff.n_max}")
        if self.detector is Detector.COINCIDENCE_ONOFF and self.n_herald != 2:
            raise ScenarioError("coincidence heralding is only defined for n_herald = 2")
        if not 0.0 <= self.dark_click_prob < 1.0:
            raise ScenarioError(f"dark_click_prob must lie in [0, 1), got {self.dark_click_prob!r}")

    @property
    def lam(self) -> float:
        return self.squeeze.lam

    def to_dict(self) -> dict:
        return {
            "lambda": self.squeeze.lam,
            "epsilon": self.mixing.epsilon,
            "n_herald": self.n_herald,
            "detector": self.detector.value,
            "eta_opo": self.losses.eta_opo,
            "eta_det": self.losses.eta_det,
            "eta_herald": self.losses.eta_herald,
            "cutoff": self.cutoff.n_max,
            "bs_phase": math.degrees(self.bs_phase),
            "dark_click_prob": self.dark_click_prob,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HeraldScenario":
        unknown = set(data) - _SCENARIO_KEYS
        if unknown:
            raise ScenarioError(f"unknown scenario field(s): {', '.join(sorted(unknown))}")
        if ("theta_deg" in data) == ("epsilon" in data):
            raise ScenarioError("give exactly one of theta_deg or epsilon")
        for key in ("lambda", "n_herald", "cutoff"):
            if key not in data:
                raise ScenarioError(f"missing scenario field: {key}")
        try:
            mixing = (MixingParam.from_theta_deg(float(data["theta_deg"])) if "theta_deg" in data
                      else MixingParam.from_epsilon(float(data["epsilon"])))
            return cls(
                squeeze=SqueezeParam.from_lambda(float(data["lambda"])),
                mixing=mixing,
                n_herald=int(data["n_herald"]),
                detector=Detector(data.get("detector", Detector.PNR.value)),
                losses=LossBudget(
                    float(data.get("eta_opo", 1.0)),
                    float(data.get("eta_det", 1.0)),
                    float(data.get("eta_herald", 1.0)),
                ),
                cutoff=Cutoff(int(data["cutoff"])),
                bs_phase=math.radians(float(data.get("bs_phase", 0.0))),
                dark_click_prob=float(data.get("dark_click_prob", 0.0)),
            )
        except ScenarioError:
            raise
        except (TypeError, ValueError) as e:
            raise ScenarioError(str(e)) from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HeraldScenario":
        return cls.from_dict(json.loads(text))

    def scenario_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class HeraldOutcome:
    state: DensityOperator
    herald_probability: float
    scenario: HeraldScenario


# ── Closed form ───────────────────────────────────────────────────────────────

def core_weights(n: int, epsilon: float, lam: float) -> Tuple[float, float]:
    """Populations of |n-2> and |n> in the core state."""
    if epsilon == 0.0 and lam == 0.0:
        raise ValueError("core state is undefined for epsilon = lambda = 0")
    low = n * (n - 1) * epsilon ** 2
    high = lam ** 2
    if low + high == 0.0:
        return 0.0, 1.0
    return low / (low + high), high / (low + high)


def core_state(n: int, epsilon: float, lam: float, cutoff: Cutoff) -> FockVector:
    """ε√(n(n-1))|n-2> + λ|n>, normalized."""
    if epsilon == 0.0 and lam == 0.0:
        raise ValueError("core state is undefined for epsilon = lambda = 0")
    if not 0 <= n <= cutoff.n_max:
        raise ScenarioError(f"n={n} outside cutoff {cutoff.n_max}")
    if n < 2:
        logger.warning("core state with n=%d is the single Fock state |%d>", n, n)
        warnings.warn(f"degenerate superposition: n={n} gives |{n}>", DegenerateSuperpositionWarning, stacklevel=2)
        return FockVector.basis(n, cutoff)
    amps = np.zeros(cutoff.dim, dtype=np.complex128)
    amps[n - 2] = epsilon * math.sqrt(n * (n - 1))
    amps[n] = lam
    return FockVector(amps, cutoff).normalize()


# ── Pipeline ──────────────────────────────────────────────────────────────────

@functools.lru_cache(maxsize=64)
def _pre_detection(scenario: HeraldScenario) -> np.ndarray:
    """Two-mode density matrix just before the idler detector."""
    cutoff = scenario.cutoff
    psi = two_mode_squeezed_vacuum(scenario.lam, cutoff).amplitudes
    rho = np.outer(psi, psi.conj())
    eta_opo = scenario.losses.eta_opo
    if eta_opo < 1.0:
        kraus = loss_kraus(eta_opo, cutoff)
        rho = apply_kraus(rho, kraus, cutoff, modes=2, mode=Mode.SIGNAL)
        rho = apply_kraus(rho, kraus, cutoff, modes=2, mode=Mode.IDLER)
    unitary = beamsplitter_unitary(scenario.mixing.transmittance, scenario.bs_phase, cutoff)
    rho = unitary @ rho @ unitary.conj().T
    eta_herald = scenario.losses.eta_herald
    if eta_herald < 1.0:
        rho = apply_kraus(rho, loss_kraus(eta_herald, cutoff), cutoff, modes=2, mode=Mode.IDLER)
    rho.setflags(write=False)
    return rho


def _conditioned(scenario: HeraldScenario, idler_weights: np.ndarray) -> HeraldOutcome:
    """Signal state given a POVM diagonal in the idler photon number."""
    tensor4 = split_modes(_pre_detection(scenario), scenario.cutoff)
    block = np.einsum("m,ambm->ab", idler_weights, tensor4)
    probability = float(np.trace(block).real)
    if probability < NEGLIGIBLE_PROBABILITY:
        raise NegligibleProbabilityError(
            f"herald probability {probability:.3e} for scenario {scenario.scenario_hash()[:12]}"
        )
    state = DensityOperator.from_matrix(block, scenario.cutoff)
    return HeraldOutcome(state, min(probability, 1.0), scenario)


@functools.lru_cache(maxsize=64)
def herald_pnr(scenario: HeraldScenario) -> HeraldOutcome:
    """Condition on exactly ``n_herald`` photons in the idler."""
    weights = np.zeros(scenario.cutoff.dim)
    weights[scenario.n_herald] = 1.0
    outcome = _conditioned(scenario, weights)
    logger.debug("pnr herald n=%d p=%.3e", scenario.n_herald, outcome.herald_probability)
    return outcome


@functools.lru_cache(maxsize=16)
def coincidence_weights(cutoff: Cutoff, dark_click_prob: float = 0.0) -> np.ndarray:
    """P(both arms click | m idler photons) for m = 0..n_max.

    The photons are split on a balanced beamsplitter; each arm clicks when
    it receives at least one photon or, with ``dark_click_prob``, when it
    receives none.
    """
    d = cutoff.dim
    unitary = beamsplitter_unitary(math.sqrt(0.5), 0.0, cutoff)
    k = np.arange(d)
    click = np.where(k == 0, dark_click_prob, 1.0)
    both = np.outer(click, click).reshape(-1)
    weights = np.empty(d)
    for m in range(d):
        split = np.abs(unitary[:, m * d]) ** 2
        weights[m] = float(np.dot(split, both))
    weights.setflags(write=False)
    return weights


@functools.lru_cache(maxsize=64)
def herald_coincidence(scenario: HeraldScenario) -> HeraldOutcome:
    """Condition on a coincidence of two on-off detectors behind a 50/50 split."""
    if scenario.detector is not Detector.COINCIDENCE_ONOFF:
        raise ScenarioError("herald_coincidence needs detector = coincidence_onoff")
    weights = coincidence_weights(scenario.cutoff, scenario.dark_click_prob)
    outcome = _conditioned(scenario, weights)
    logger.debug("coincidence herald p=%.3e", outcome.herald_probability)
    return outcome


def herald(scenario: HeraldScenario) -> HeraldOutcome:
    if scenario.detector is Detector.COINCIDENCE_ONOFF:
        return herald_coincidence(scenario)
    return herald_pnr(scenario)


def herald_distribution(scenario: HeraldScenario, n_values: Iterable[int]) -> Dict[int, float]:
    """Probability of detecting each n in ``n_values`` photons in the idler."""
    tensor4 = split_modes(_pre_detection(scenario), scenario.cutoff)
    idler = np.einsum("amam->m", tensor4).real
    out = {}
    for n in n_values:
        if not 0 <= n <= scenario.cutoff.n_max:
            raise ScenarioError(f"n={n} outside cutoff {scenario.cutoff.n_max}")
        out[int(n)] = float(max(idler[n], 0.0))
    return out


def output_loss(outcome: HeraldOutcome, losses: LossBudget, include_detection: bool) -> DensityOperator:
    """The heralded state as seen by the homodyne detector.

    With ``include_detection`` the detection efficiency is applied (the
    uncorrected view); otherwise the state is returned as is (the view
    corrected for detection losses).
    """
    if not include_detection or losses.eta_det == 1.0:
        return outcome.state
    return loss_channel(outcome.state, losses.eta_det)
