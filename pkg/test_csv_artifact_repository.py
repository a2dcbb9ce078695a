"""
Tests for the CSV artifact repository.
"""
import hashlib
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from artifact_repository import RunManifest
from csv_artifact_repository import CURVE_HEADERS, MANIFEST_FILE, CSVArtifactRepository
from css_fidelity import CurvePoint, FidelityLandscape, GridSpec, SqueezeAxis
from fock_core import Cutoff, DensityOperator, FockVector
from tomography import QuadratureSamples
from wigner import WignerGrid


class TestCSVArtifactRepository(unittest.TestCase):
    """Test cases for CSVArtifactRepository"""

    def setUp(self):
        """Set up test fixtures"""
        self.test_dir = tempfile.mkdtemp()
        self.output_dir = os.path.join(self.test_dir, "run")
        self.repo = CSVArtifactRepository(self.output_dir)
        self.assertTrue(self.repo.initialize())

    def tearDown(self):
        """Clean up test fixtures"""
        shutil.rmtree(self.test_dir)

    def _read(self, filename: str) -> bytes:
        with open(os.path.join(self.output_dir, filename), 'rb') as f:
            return f.read()

    def test_initialize_creates_directory(self):
        self.assertTrue(os.path.isdir(self.output_dir))

    def test_density_round_trip(self):
        rho = DensityOperator.from_vector(FockVector(np.array([0.6, 0.0, 0.8j]), Cutoff(2)))
        self.assertTrue(self.repo.save_density("state", rho))
        loaded = self.repo.load_density("state")
        np.testing.assert_array_equal(loaded.matrix, rho.matrix)

    def test_landscape_round_trip(self):
        grid = GridSpec(1.0, 2.0, 1.0, 0.0, 2.0, 1.0, SqueezeAxis.P)
        values = np.array([[0.1, 0.2, 0.3], [0.4, 0.9, 0.5]])
        landscape = FidelityLandscape(grid.alpha_sq_grid, grid.db_grid, values, (2.01, 1.02, 0.91), grid)
        self.assertTrue(self.repo.save_landscape("landscape", landscape))
        header = self._read("landscape.csv").decode('utf-8').splitlines()[0]
        self.assertEqual(header, "alpha_sq,db,fidelity")
        loaded = self.repo.load_landscape("landscape")
        np.testing.assert_array_equal(loaded.values, values)
        self.assertEqual(loaded.argmax, (2.01, 1.02, 0.91))
        self.assertEqual(loaded.grid_spec, grid)

    def test_wigner_round_trip(self):
        axis = np.array([-1.0, 0.0, 1.0])
        values = np.arange(9.0).reshape(3, 3) / 100.0 - 0.02
        self.assertTrue(self.repo.save_wigner("wigner", WignerGrid(axis, axis, values)))
        loaded = self.repo.load_wigner("wigner")
        np.testing.assert_array_equal(loaded.values, values)
        np.testing.assert_array_equal(loaded.x_axis, axis)

    def test_samples_round_trip(self):
        samples = QuadratureSamples(np.array([0.0, 0.5, 1.0]), np.array([-0.123456789012345, 2.5, 1e-17]))
        self.assertTrue(self.repo.save_samples("samples", samples))
        loaded = self.repo.load_samples("samples")
        np.testing.assert_array_equal(loaded.values, samples.values)
        np.testing.assert_array_equal(loaded.phases, samples.phases)

    def test_curve_round_trip(self):
        points = [CurvePoint(0.0, 0.8, 2.1, 3.3, 0.0, 1.0), CurvePoint(0.5, 0.97, 2.9, 4.1, 0.2, 0.8)]
        self.assertTrue(self.repo.save_curve("fig1_n2", points))
        header = self._read("fig1_n2.csv").decode('utf-8').splitlines()[0]
        self.assertEqual(header, ",".join(CURVE_HEADERS))
        self.assertEqual(self.repo.load_curve("fig1_n2"), points)

    def test_sweep_missing_values(self):
        rows = [
            {"theta_deg": 1.0, "epsilon": 0.0349, "fidelity_star": 0.9, "alpha_sq_star": 2.0,
             "db_star": 3.0, "wigner_min": -0.05},
            {"theta_deg": 2.0, "epsilon": 0.0698, "fidelity_star": 0.8, "alpha_sq_star": 1.5,
             "db_star": 2.0, "wigner_min": None},
        ]
        self.assertTrue(self.repo.save_sweep("sweep_summary", rows))
        self.assertEqual(self.repo.load_sweep("sweep_summary"), rows)

    def test_checksums_match_file_bytes(self):
        self.repo.save_density("state", DensityOperator.fock(1, Cutoff(2)))
        self.repo.save_report("report", {"b": 1, "a": [1.5, 2.5]})
        files = self.repo.written_files()
        self.assertEqual(set(files), {"state.json", "report.json"})
        for name, digest in files.items():
            self.assertEqual(hashlib.sha256(self._read(name)).hexdigest(), digest)

    def test_report_keys_sorted(self):
        self.repo.save_report("report", {"b": 1, "a": 2})
        text = self._read("report.json").decode('utf-8')
        self.assertLess(text.index('"a"'), text.index('"b"'))

    def test_manifest_written_atomically(self):
        self.repo.save_density("state", DensityOperator.fock(0, Cutoff(2)))
        manifest = RunManifest("abc", [7], {"catsynth": "0.1.0"}, {"herald": 0.5}, self.repo.written_files(),
                               [{"theta_deg": "1.0", "stage": "wigner", "error": "boom"}])
        self.assertTrue(self.repo.save_manifest(manifest))
        self.assertEqual(self.repo.load_manifest(), manifest)
        leftovers = [name for name in os.listdir(self.output_dir) if name.startswith(".manifest-")]
        self.assertEqual(leftovers, [])
        self.assertNotIn(MANIFEST_FILE, self.repo.written_files())

    def test_discard_removes_written_files(self):
        self.repo.save_density("state", DensityOperator.fock(0, Cutoff(2)))
        self.repo.save_samples("samples", QuadratureSamples(np.zeros(2), np.ones(2)))
        self.repo.discard()
        self.assertEqual(os.listdir(self.output_dir), [])
        self.assertEqual(self.repo.written_files(), {})

    def test_missing_artifacts(self):
        self.assertIsNone(self.repo.load_density("absent"))
        self.assertIsNone(self.repo.load_landscape("absent"))
        self.assertIsNone(self.repo.load_manifest())
        self.assertEqual(self.repo.load_curve("absent"), [])


if __name__ == '__main__':
    unittest.main()
