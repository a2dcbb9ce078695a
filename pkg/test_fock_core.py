"""
Tests for the truncated Fock-space core.
"""
import math
import os
import sys
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from fock_core import (
    Cutoff,
    CutoffError,
    CutoffTooSmallError,
    DensityOperator,
    FockVector,
    ImpossibleOutcomeError,
    Mode,
    StateValidationError,
    as_density,
    check_leakage,
    condition_on_fock,
    expectation,
    fidelity,
    ladder_matrices,
    mean_photon_number,
    partial_trace,
    tensor,
)

DIM = 4
CUTOFF = Cutoff(DIM - 1)

_components = st.floats(min_value=-1.0, max_value=1.0, allow_nan=False, allow_infinity=False)
_vectors = st.lists(_components, min_size=2 * DIM, max_size=2 * DIM).filter(
    lambda xs: np.linalg.norm(xs) > 1e-2
)


def _state(xs) -> FockVector:
    xs = np.asarray(xs)
    return FockVector(xs[:DIM] + 1j * xs[DIM:], CUTOFF).normalize()


def _mixed(xs, ys) -> DensityOperator:
    return DensityOperator.mixture([0.3, 0.7], [as_density(_state(xs)), as_density(_state(ys))])


class TestCutoff(unittest.TestCase):
    def test_dim_is_n_max_plus_one(self):
        self.assertEqual(Cutoff(5).dim, 6)

    def test_invalid_cutoff_rejected(self):
        with self.assertRaises(CutoffError):
            Cutoff(0)
        with self.assertRaises(CutoffError):
            Cutoff(4, leakage_bound=0.0)

    def test_leakage_guard_reports_suggestion(self):
        populations = np.array([0.5, 0.3, 0.2])
        with self.assertRaises(CutoffTooSmallError) as ctx:
            check_leakage(populations, Cutoff(2), suggested_cutoff=9)
        self.assertEqual(ctx.exception.suggested_cutoff, 9)

    def test_leakage_guard_passes_small_tail(self):
        check_leakage(np.array([1.0, 0.0, 1e-12]), Cutoff(2), suggested_cutoff=3)


class TestLadder(unittest.TestCase):
    def test_number_is_raising_times_lowering(self):
        lowering, raising, number = ladder_matrices(Cutoff(5))
        np.testing.assert_allclose(raising @ lowering, number, atol=1e-14)

    def test_commutator_up_to_truncation(self):
        lowering, raising, _ = ladder_matrices(Cutoff(5))
        commutator = lowering @ raising - raising @ lowering
        np.testing.assert_allclose(np.diag(commutator).real, [1, 1, 1, 1, 1, -5], atol=1e-14)
        np.testing.assert_allclose(commutator - np.diag(np.diag(commutator)), 0.0, atol=1e-14)

    def test_expectation_pure_and_mixed(self):
        lowering, _, number = ladder_matrices(Cutoff(3))
        plus = FockVector(np.array([1.0, 1.0, 0.0, 0.0]), Cutoff(3)).normalize()
        self.assertAlmostEqual(expectation(plus, lowering), 0.5, places=12)
        self.assertAlmostEqual(expectation(as_density(plus), lowering), 0.5, places=12)
        self.assertAlmostEqual(expectation(as_density(plus), number), 0.5, places=12)


class TestStates(unittest.TestCase):
    def test_wrong_length_rejected(self):
        with self.assertRaises(StateValidationError):
            FockVector(np.ones(3), Cutoff(3))

    def test_amplitudes_are_read_only(self):
        psi = FockVector.basis(1, Cutoff(3))
        with self.assertRaises(ValueError):
            psi.amplitudes[0] = 1.0

    def test_density_validation(self):
        cutoff = Cutoff(1)
        with self.assertRaises(StateValidationError):
            DensityOperator(np.array([[0.5, 0.5], [0.0, 0.5]]), cutoff)
        with self.assertRaises(StateValidationError):
            DensityOperator(np.diag([0.6, 0.6]), cutoff)
        with self.assertRaises(StateValidationError):
            DensityOperator(np.diag([1.5, -0.5]), cutoff)

    def test_json_round_trip(self):
        rho = DensityOperator.from_vector(FockVector(np.array([0.6, 0.8j, 0.0]), Cutoff(2)))
        restored = DensityOperator.from_json(rho.to_json())
        np.testing.assert_allclose(restored.matrix, rho.matrix, atol=0)
        self.assertEqual(restored.modes, 1)

    def test_mean_photon_number(self):
        self.assertAlmostEqual(mean_photon_number(FockVector.basis(3, Cutoff(5))), 3.0, places=12)

    def test_purity(self):
        cutoff = Cutoff(1)
        mixed = DensityOperator.mixture([0.5, 0.5], [DensityOperator.fock(0, cutoff), DensityOperator.fock(1, cutoff)])
        self.assertAlmostEqual(mixed.purity(), 0.5, places=12)


class TestOperations(unittest.TestCase):
    def test_fock_fidelities(self):
        cutoff = Cutoff(3)
        self.assertAlmostEqual(fidelity(FockVector.basis(2, cutoff), FockVector.basis(2, cutoff)), 1.0, places=12)
        self.assertEqual(fidelity(FockVector.basis(1, cutoff), FockVector.basis(2, cutoff)), 0.0)

    def test_fidelity_cutoff_mismatch(self):
        with self.assertRaises(CutoffError):
            fidelity(FockVector.basis(0, Cutoff(2)), FockVector.basis(0, Cutoff(3)))

    def test_fidelity_rejects_unnormalized_input(self):
        raw = FockVector(np.array([1.0, 1.0]), Cutoff(1))
        with self.assertRaises(StateValidationError):
            fidelity(raw, FockVector.basis(0, Cutoff(1)))

    def test_signal_major_index(self):
        joint = FockVector.joint_basis(1, 2, Cutoff(2))
        self.assertEqual(int(np.argmax(np.abs(joint.amplitudes))), 1 * 3 + 2)

    def test_opposite_coherent_states_overlap(self):
        cutoff = Cutoff(30)
        alpha = math.sqrt(2.0)
        n = np.arange(cutoff.dim)
        amps = math.exp(-alpha ** 2 / 2) * alpha ** n / np.array([math.sqrt(math.factorial(k)) for k in n])
        plus = FockVector(amps, cutoff).normalize()
        minus = FockVector(amps * (-1.0) ** n, cutoff).normalize()
        self.assertAlmostEqual(fidelity(plus, minus), math.exp(-8.0), delta=1e-10)
        self.assertAlmostEqual(fidelity(plus, minus), 3.3546e-4, delta=1e-8)

    def test_tmsv_idler_outcomes(self):
        lam, cutoff = 0.2, Cutoff(8)
        amps = np.zeros(cutoff.dim ** 2)
        for n in range(cutoff.dim):
            amps[n * cutoff.dim + n] = math.sqrt(1 - lam ** 2) * lam ** n
        joint = FockVector(amps, cutoff, modes=2).normalize()
        probabilities = [condition_on_fock(joint, Mode.IDLER, n)[1] for n in range(cutoff.dim)]
        self.assertAlmostEqual(sum(probabilities), 1.0, places=9)
        self.assertAlmostEqual(probabilities[2], 0.001536, places=9)
        signal, _ = condition_on_fock(joint, Mode.IDLER, 2)
        self.assertAlmostEqual(fidelity(signal, FockVector.basis(2, cutoff)), 1.0, places=12)

    def test_condition_on_fock(self):
        joint = FockVector.joint_basis(1, 2, Cutoff(3))
        signal, probability = condition_on_fock(joint, Mode.IDLER, 2)
        self.assertAlmostEqual(probability, 1.0, places=12)
        self.assertAlmostEqual(fidelity(signal, FockVector.basis(1, Cutoff(3))), 1.0, places=12)
        idler, _ = condition_on_fock(joint, Mode.SIGNAL, 1)
        self.assertAlmostEqual(fidelity(idler, FockVector.basis(2, Cutoff(3))), 1.0, places=12)

    def test_condition_on_impossible_outcome(self):
        with self.assertRaises(ImpossibleOutcomeError):
            condition_on_fock(FockVector.joint_basis(1, 2, Cutoff(3)), Mode.IDLER, 0)

    def test_tensor_type_mismatch(self):
        cutoff = Cutoff(2)
        with self.assertRaises(TypeError):
            tensor(FockVector.basis(0, cutoff), DensityOperator.fock(0, cutoff))

    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(_vectors, _vectors)
    def test_partial_trace_undoes_tensor(self, xs, ys):
        a, b = as_density(_state(xs)), as_density(_state(ys))
        joint = tensor(a, b)
        np.testing.assert_allclose(partial_trace(joint, Mode.SIGNAL).matrix, a.matrix, atol=1e-12)
        np.testing.assert_allclose(partial_trace(joint, Mode.IDLER).matrix, b.matrix, atol=1e-12)

    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(_vectors, _vectors)
    def test_pure_fidelity_symmetric_and_bounded(self, xs, ys):
        a, b = _state(xs), _state(ys)
        value = fidelity(a, b)
        self.assertGreaterEqual(value, 0.0)
        self.assertLessEqual(value, 1.0)
        self.assertAlmostEqual(value, fidelity(b, a), places=12)
        self.assertAlmostEqual(value, fidelity(as_density(a), b), places=10)

    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(_vectors, _vectors, st.floats(min_value=0.0, max_value=2 * math.pi))
    def test_fidelity_ignores_global_phase(self, xs, ys, phase):
        psi, target = _state(xs), _state(ys)
        rotated = FockVector(np.exp(1j * phase) * psi.amplitudes, CUTOFF)
        self.assertAlmostEqual(fidelity(rotated, target), fidelity(psi, target), places=12)
        self.assertAlmostEqual(fidelity(as_density(rotated), target), fidelity(psi, target), places=12)

    @settings(max_examples=25, deadline=None, derandomize=True)
    @given(_vectors, _vectors, _vectors)
    def test_uhlmann_fidelity(self, xs, ys, zs):
        rho = _mixed(xs, ys)
        self.assertAlmostEqual(fidelity(rho, rho), 1.0, places=6)
        target = _state(zs)
        self.assertAlmostEqual(fidelity(rho, as_density(target)), fidelity(rho, target), places=6)
        other = _mixed(zs, xs)
        self.assertAlmostEqual(fidelity(rho, other), fidelity(other, rho), places=6)


if __name__ == '__main__':
    unittest.main()
