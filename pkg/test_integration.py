"""
Integration test for the command-line pipeline.
Runs the CLI end to end on small configs in a temp directory.
"""
import contextlib
import io
import json
import os
import shutil
import sys
import tempfile

import numpy as np

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from CatSynth import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main
from csv_artifact_repository import CSVArtifactRepository


def _config(out_dir, **blocks):
    data = {
        "schema_version": 1,
        "output_dir": out_dir,
        "seed": 17,
        "workers": 2,
        "scenario": {"lambda": 0.2, "theta_deg": 1.0, "n_herald": 2, "cutoff": 6},
        "landscape": {"alpha_sq_min": 0.5, "alpha_sq_max": 3.0, "alpha_sq_step": 0.25,
                      "db_min": 0.0, "db_max": 4.0, "db_step": 0.5},
        "wigner": {"half_range": 4.0, "step": 0.1},
    }
    data.update(blocks)
    return data


def _write(temp_dir, name, data):
    path = os.path.join(temp_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f)
    return path


def _cli(*argv):
    with contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
        return main(list(argv))


def _manifest(out_dir):
    return CSVArtifactRepository(out_dir).load_manifest()


def test_integration():
    """Run, rerun, sweep, fig1 and the failure paths through the CLI"""
    print("Running integration tests...")
    temp_dir = tempfile.mkdtemp()

    try:
        tomography = {"n_phases": 6, "n_samples": 3000, "max_iters": 200}
        path = _write(temp_dir, "scenario.json", _config(os.path.join(temp_dir, "unused"), tomography=tomography))

        # Full run
        first = os.path.join(temp_dir, "first")
        assert _cli("run", "--config", path, "--out", first) == EXIT_OK
        manifest = _manifest(first)
        expected = {"state.json", "landscape.csv", "landscape.json", "wigner.csv", "wigner.json",
                    "samples.csv", "reconstruction.json", "report.json"}
        assert set(manifest.files) == expected, f"unexpected files {sorted(manifest.files)}"
        assert manifest.seeds == [17]
        assert "herald" in manifest.stage_seconds
        print("✓ Full run wrote every artifact and the manifest")

        with open(os.path.join(first, "report.json"), encoding="utf-8") as f:
            report = json.load(f)
        assert 0.0 < report["herald_probability"] < 1.0
        assert abs(sum(report["herald_distribution"].values()) - 1.0) < 1e-9
        assert report["wigner_min"]["w"] < 0.0, "heralded two-photon state should be non-classical"
        assert report["fidelity_star"] >= 0.0
        print("✓ Report holds herald, landscape and Wigner summaries")

        # Same config and seed give identical artifacts
        second = os.path.join(temp_dir, "second")
        assert _cli("run", "--config", path, "--out", second) == EXIT_OK
        assert _manifest(second).files == manifest.files, "rerun produced different artifacts"
        print("✓ Rerun is bit-identical")

        # Overriding the seed changes only the sampled artifacts
        third = os.path.join(temp_dir, "third")
        assert _cli("run", "--config", path, "--out", third, "--seed", "18") == EXIT_OK
        changed = {name for name, digest in _manifest(third).files.items() if manifest.files[name] != digest}
        assert {"samples.csv", "reconstruction.json"} <= changed
        assert "state.json" not in changed and "landscape.csv" not in changed
        print("✓ Seed override only touches the tomography artifacts")

        # One-angle sweep matches the direct run
        sweep_path = _write(temp_dir, "sweep.json", _config(os.path.join(temp_dir, "sweep"),
                                                            sweep={"thetas_deg": [1.0]}))
        direct = os.path.join(temp_dir, "direct")
        assert _cli("run", "--config", sweep_path, "--out", direct) == EXIT_OK
        assert _cli("sweep-theta", "--config", sweep_path) == EXIT_OK
        sweep_manifest = _manifest(os.path.join(temp_dir, "sweep"))
        for name, digest in _manifest(direct).files.items():
            assert sweep_manifest.files[f"theta_1.000/{name}"] == digest, f"{name} differs between sweep and run"
        rows = CSVArtifactRepository(os.path.join(temp_dir, "sweep")).load_sweep("sweep_summary")
        assert len(rows) == 1 and rows[0]["theta_deg"] == 1.0
        assert sweep_manifest.failures == []
        print("✓ Single-angle sweep reproduces the direct run")

        # Fidelity-curve command
        fig1_out = os.path.join(temp_dir, "fig1")
        fig1_path = _write(temp_dir, "fig1.json", _config(
            fig1_out, fig1={"n": 2, "lambda": 0.05, "ratio_min": 0.0, "ratio_max": 0.2, "ratio_step": 0.1}))
        assert _cli("fig1", "--config", fig1_path) == EXIT_OK
        points = CSVArtifactRepository(fig1_out).load_curve("fig1_n2")
        assert [p.ratio for p in points] == [0.0, 0.1, 0.2]
        assert points[0].w_low == 0.0 and points[0].w_n == 1.0
        print("✓ fig1 wrote the fidelity curve")

        # Wigner command with a cutoff override
        wigner_out = os.path.join(temp_dir, "wigner_only")
        assert _cli("wigner", "--config", path, "--out", wigner_out, "--cutoff", "8") == EXIT_OK
        grid = CSVArtifactRepository(wigner_out).load_wigner("wigner")
        assert grid.values.shape == (81, 81)
        assert np.isclose(grid.integral(), 1.0, atol=1e-3)
        assert "landscape.csv" not in _manifest(wigner_out).files
        print("✓ wigner command tabulated the grid")

        # Config errors exit with code 2
        bad = _write(temp_dir, "bad.json", {"schema_version": 1, "scenario": {"lambda": 0.2}})
        assert _cli("run", "--config", bad, "--out", os.path.join(temp_dir, "bad")) == EXIT_CONFIG
        no_tomo = _write(temp_dir, "no_tomo.json", _config(os.path.join(temp_dir, "no_tomo")))
        assert _cli("tomo", "--config", no_tomo) == EXIT_CONFIG
        print("✓ Invalid configs exit with code 2")

        # A failing stage exits with code 3 and leaves no partial artifacts
        failing_out = os.path.join(temp_dir, "failing")
        failing = _write(temp_dir, "failing.json", _config(failing_out, wigner={"half_range": 0.5, "step": 0.1}))
        assert _cli("run", "--config", failing) == EXIT_STAGE
        assert os.listdir(failing_out) == [], "failed run left files behind"
        print("✓ Stage failure exits with code 3 and cleans up")

        print("\n✅ All integration tests passed!")
    finally:
        # Cleanup
        shutil.rmtree(temp_dir, ignore_errors=True)


if __name__ == '__main__':
    try:
        test_integration()
    except AssertionError as e:
        print(f"\n❌ Test failed: {e}")
        sys.exit(1)
    sys.exit(0)
