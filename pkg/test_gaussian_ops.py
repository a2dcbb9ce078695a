"""
Tests for the Gaussian building blocks and loss channels.
"""
import math
import os
import sys
import unittest

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from fock_core import Cutoff, CutoffTooSmallError, DensityOperator, FockVector, Mode, fidelity, mean_photon_number, partial_trace, tensor
from gaussian_ops import (
    LossBudget,
    SqueezeParam,
    beamsplitter_unitary,
    coherent,
    dephase_channel,
    loss_channel,
    loss_channel_ancilla,
    phase_rotation,
    quadrature_matrices,
    squeeze_unitary,
    squeezed_vacuum,
    two_mode_squeezed_vacuum,
    two_squeezer_source,
)


def _expect(vector: FockVector, operator: np.ndarray) -> float:
    psi = vector.amplitudes
    return float(np.vdot(psi, operator @ psi).real)


class TestParameters(unittest.TestCase):
    def test_db_conversion(self):
        param = SqueezeParam.from_db(4.0)
        self.assertAlmostEqual(param.s, 10 ** -0.4, places=12)
        self.assertAlmostEqual(param.lam, math.tanh(param.xi), places=14)
        self.assertAlmostEqual(SqueezeParam.from_lambda(param.lam).xi, param.xi, places=12)
        self.assertAlmostEqual(SqueezeParam.from_s(param.s).db, 4.0, places=12)

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            SqueezeParam.from_lambda(1.0)
        with self.assertRaises(ValueError):
            SqueezeParam.from_db(-1.0)
        with self.assertRaises(ValueError):
            LossBudget(eta_opo=1.2)

    def test_lossless_budget(self):
        self.assertTrue(LossBudget.perfect().is_lossless)
        self.assertFalse(LossBudget(0.9, 1.0, 1.0).is_lossless)


class TestStates(unittest.TestCase):
    def test_coherent_mean_photon_number(self):
        self.assertAlmostEqual(mean_photon_number(coherent(1.5, Cutoff(30))), 2.25, places=8)

    def test_coherent_cutoff_too_small(self):
        with self.assertRaises(CutoffTooSmallError) as ctx:
            coherent(3.0, Cutoff(5))
        self.assertGreater(ctx.exception.suggested_cutoff, 5)

    def test_squeezed_vacuum_variance(self):
        cutoff = Cutoff(30)
        param = SqueezeParam.from_db(4.0)
        x, p = quadrature_matrices(cutoff)
        psi = squeezed_vacuum(param, 0.0, cutoff)
        self.assertAlmostEqual(_expect(psi, x @ x), 0.199053, places=5)
        self.assertAlmostEqual(_expect(psi, p @ p), 0.5 / param.s, places=5)

    def test_squeezed_vacuum_is_even(self):
        psi = squeezed_vacuum(SqueezeParam.from_db(3.0), 0.0, Cutoff(24))
        self.assertTrue(np.all(psi.amplitudes[1::2] == 0))
        self.assertLess(psi.amplitudes[2].real, 0.0)

    def test_unitary_matches_closed_form(self):
        cutoff = Cutoff(24)
        param = SqueezeParam.from_db(4.0)
        for phase in (0.0, 0.7):
            unitary = squeeze_unitary(param, phase, cutoff, pad=20)
            vacuum = FockVector.basis(0, cutoff).amplitudes
            np.testing.assert_allclose(unitary @ vacuum, squeezed_vacuum(param, phase, cutoff).amplitudes, atol=1e-6)

    def test_tmsv_reduced_state_is_thermal(self):
        lam = 0.3
        reduced = partial_trace(DensityOperator.from_vector(two_mode_squeezed_vacuum(lam, Cutoff(12))), Mode.SIGNAL)
        self.assertAlmostEqual(mean_photon_number(reduced), lam ** 2 / (1 - lam ** 2), places=9)
        self.assertAlmostEqual(reduced.purity(), (1 - lam ** 2) / (1 + lam ** 2), places=9)

    def test_zero_squeezing_is_identity(self):
        unitary = squeeze_unitary(SqueezeParam.from_xi(0.0), 0.4, Cutoff(6))
        np.testing.assert_allclose(unitary, np.eye(7), atol=1e-14)

    def test_two_mode_squeezed_vacuum(self):
        psi = two_mode_squeezed_vacuum(0.2, Cutoff(10))
        pops = psi.marginal_populations(Mode.SIGNAL)
        np.testing.assert_allclose(pops[:4], 0.96 * 0.04 ** np.arange(4), atol=1e-12)
        np.testing.assert_allclose(pops, psi.marginal_populations(Mode.IDLER), atol=1e-15)


class TestBeamsplitter(unittest.TestCase):
    def test_unitary_on_low_sectors(self):
        cutoff = Cutoff(5)
        unitary = beamsplitter_unitary(0.8, 0.3, cutoff)
        d = cutoff.dim
        for s in range(d):
            for i in range(d - s):
                column = unitary[:, s * d + i]
                self.assertAlmostEqual(float(np.vdot(column, column).real), 1.0, places=12)

    def test_full_transmission_is_identity(self):
        np.testing.assert_allclose(beamsplitter_unitary(1.0, 0.0, Cutoff(4)), np.eye(25), atol=1e-14)

    def test_single_photon_transfer_amplitude(self):
        cutoff = Cutoff(3)
        d = cutoff.dim
        for phase in (0.0, math.pi / 3):
            unitary = beamsplitter_unitary(0.8, phase, cutoff)
            amplitude = unitary[0 * d + 2, 1 * d + 1]
            expected = math.sqrt(2.0) * 0.6 * 0.8 * np.exp(1j * phase)
            self.assertAlmostEqual(complex(amplitude), complex(expected), places=12)

    def test_balanced_two_photon_interference(self):
        cutoff = Cutoff(3)
        d = cutoff.dim
        unitary = beamsplitter_unitary(math.sqrt(0.5), 0.0, cutoff)
        self.assertAlmostEqual(abs(unitary[1 * d + 1, 1 * d + 1]), 0.0, places=12)

    def test_commutes_with_total_photon_number(self):
        cutoff = Cutoff(4)
        unitary = beamsplitter_unitary(0.8, 0.3, cutoff)
        number = np.diag(np.arange(cutoff.dim, dtype=float))
        total = np.kron(number, np.eye(cutoff.dim)) + np.kron(np.eye(cutoff.dim), number)
        np.testing.assert_allclose(unitary @ total, total @ unitary, atol=1e-12)

    def test_two_squeezers_make_tmsv(self):
        cutoff = Cutoff(14)
        param = SqueezeParam.from_lambda(0.2)
        source = two_squeezer_source(param, cutoff)
        self.assertGreater(fidelity(source, two_mode_squeezed_vacuum(0.2, cutoff)), 1 - 1e-8)


class TestChannels(unittest.TestCase):
    def setUp(self):
        self.cutoff = Cutoff(6)
        amps = np.array([0.5, 0.3j, 0.6, 0.0, 0.2 - 0.1j, 0.0, 0.0])
        self.rho = DensityOperator.from_vector(FockVector(amps, self.cutoff))

    def test_two_photon_loss(self):
        lossy = loss_channel(DensityOperator.fock(2, Cutoff(2)), 0.765)
        np.testing.assert_allclose(lossy.probabilities(), [0.055225, 0.35955, 0.585225], atol=1e-12)

    def test_loss_semigroup(self):
        twice = loss_channel(loss_channel(self.rho, 0.9), 0.85)
        np.testing.assert_allclose(twice.matrix, loss_channel(self.rho, 0.765).matrix, atol=1e-12)

    def test_ancilla_model_agrees(self):
        for eta in (0.0, 0.3, 0.85, 1.0):
            np.testing.assert_allclose(loss_channel_ancilla(self.rho, eta).matrix,
                                       loss_channel(self.rho, eta).matrix, atol=1e-10)

    def test_two_mode_loss_acts_on_one_mode(self):
        cutoff = Cutoff(2)
        joint = tensor(DensityOperator.fock(2, cutoff), DensityOperator.fock(1, cutoff))
        lossy = loss_channel(joint, 0.765, Mode.SIGNAL)
        np.testing.assert_allclose(partial_trace(lossy, Mode.SIGNAL).probabilities(),
                                   [0.055225, 0.35955, 0.585225], atol=1e-12)
        np.testing.assert_allclose(partial_trace(lossy, Mode.IDLER).probabilities(), [0, 1, 0], atol=1e-12)

    def test_loss_needs_mode_for_two_mode_state(self):
        joint = tensor(DensityOperator.fock(0, Cutoff(2)), DensityOperator.fock(1, Cutoff(2)))
        with self.assertRaises(ValueError):
            loss_channel(joint, 0.5)

    def test_dephasing_damps_coherence(self):
        plus = DensityOperator.from_vector(FockVector(np.array([1.0, 1.0, 0.0]), Cutoff(2)))
        damped = dephase_channel(plus, 0.4)
        self.assertAlmostEqual(damped.matrix[0, 1].real, 0.5 * math.exp(-0.08), places=12)
        np.testing.assert_allclose(damped.probabilities(), plus.probabilities(), atol=1e-15)

    def test_phase_rotation_of_coherent_state(self):
        cutoff = Cutoff(20)
        rotated = phase_rotation(coherent(1.2, cutoff), math.pi / 2)
        self.assertGreater(fidelity(rotated, coherent(1.2j, cutoff)), 1 - 1e-12)


if __name__ == '__main__':
    unittest.main()
