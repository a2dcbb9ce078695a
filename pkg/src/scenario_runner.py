"""
Pipeline orchestration for CatSynth runs.

Each run walks the stages herald → output loss → phase noise → landscape →
Wigner → tomography, writes the artifacts its config asks for and writes
the manifest last. A failing stage removes everything the run wrote and
surfaces as ``StageError`` naming the stage.
"""
import contextlib
import logging
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy
from tqdm import tqdm

from artifact_repository import ArtifactRepository, RunManifest
from css_fidelity import (
    GridSpec,
    best_fit_css,
    default_parity,
    fit_phase_noise,
    grid_axis,
    infer_lambda,
    protocol_fidelity_curve,
)
from csv_artifact_repository import CSVArtifactRepository
from fock_core import DensityOperator, fidelity
from gaussian_ops import SqueezeParam, dephase_channel
from herald import Detector, MixingParam, herald, herald_distribution, output_loss
from settings_manager import Fig1Spec, ScenarioConfig, WignerSpec
from tomography import mle_reconstruct, sample_homodyne, uniform_phases
from wigner import wigner

logger = logging.getLogger(__name__)

# a PyInstaller bundle unpacks VERSION next to the modules
_ROOT = getattr(sys, "_MEIPASS", os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
VERSION_FILE = os.path.join(_ROOT, "VERSION")
SWEEP_SUMMARY = "sweep_summary"


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it and ``cause`` is the original error."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")


def read_version() -> str:
    try:
        with open(VERSION_FILE, "r", encoding="utf-8") as f:
            return f.read().strip()
    except OSError:
        return "unknown"


def code_versions() -> Dict[str, str]:
    return {
        "catsynth": read_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


@contextlib.contextmanager
def _stage(name: str, timings: Dict[str, float]) -> Iterator[None]:
    start = time.perf_counter()
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as e:
        logger.error("stage %s failed: %s", name, e)
        raise StageError(name, e) from e
    finally:
        timings[name] = round(time.perf_counter() - start, 6)


def _saved(ok: bool, what: str) -> None:
    if not ok:
        raise OSError(f"could not write {what}")


def _landscape_grid(config: ScenarioConfig) -> GridSpec:
    return config.landscape.grid if config.landscape is not None else GridSpec()


def _parity(config: ScenarioConfig):
    if config.landscape is not None and config.landscape.parity is not None:
        return config.landscape.parity
    return default_parity(config.scenario.n_herald)


def resolve_lambda(config: ScenarioConfig) -> ScenarioConfig:
    """Replace λ by the inferred value when the config asks for inference."""
    spec = config.lambda_inference
    if spec is None:
        return config
    scenario = config.scenario
    theta = spec.theta_deg if spec.theta_deg is not None else scenario.mixing.theta
    lam = infer_lambda(theta, spec.alpha_sq_target, n=scenario.n_herald, grid=_landscape_grid(config),
                       cutoff=scenario.cutoff, lam_range=spec.lambda_range, workers=config.workers)
    resolved = replace(scenario, squeeze=SqueezeParam.from_lambda(lam))
    return replace(config.with_scenario(resolved), lambda_inference=None)


def _execute(config: ScenarioConfig, repo: ArtifactRepository, timings: Dict[str, float]) -> Dict:
    """Run every configured stage and return the run report."""
    report: Dict = {}

    if config.lambda_inference is not None:
        with _stage("lambda_inference", timings):
            config = resolve_lambda(config)
        report["inferred_lambda"] = config.scenario.lam
    scenario = config.scenario
    report["scenario"] = scenario.to_dict()
    report["scenario_hash"] = scenario.scenario_hash()

    with _stage("herald", timings):
        outcome = herald(scenario)
        report["herald_probability"] = outcome.herald_probability
        if scenario.detector is Detector.PNR:
            n_values = range(0, scenario.cutoff.n_max + 1)
            report["herald_distribution"] = {str(n): p for n, p in herald_distribution(scenario, n_values).items()}

    state = outcome.state
    if config.include_detection is not None:
        with _stage("output_loss", timings):
            state = output_loss(outcome, scenario.losses, config.include_detection)
        report["include_detection"] = config.include_detection

    if config.phase_noise is not None:
        with _stage("phase_noise", timings):
            sigma = config.phase_noise.sigma_phi
            if sigma is None:
                sigma = fit_phase_noise(state, _parity(config), config.phase_noise.target_fidelity,
                                        _landscape_grid(config), workers=config.workers)
            state = dephase_channel(state, sigma)
        report["sigma_phi"] = sigma

    report["populations"] = [float(p) for p in state.probabilities()]
    report["purity"] = state.purity()
    if "density" in config.emit:
        with _stage("write_density", timings):
            _saved(repo.save_density("state", state), "state")

    if config.landscape is not None:
        with _stage("landscape", timings):
            landscape = best_fit_css(state, _parity(config), config.landscape.grid, config.workers)
            if "landscape" in config.emit:
                _saved(repo.save_landscape("landscape", landscape), "landscape")
        a_sq, db, value = landscape.argmax
        report.update(fidelity_star=value, alpha_sq_star=a_sq, db_star=db, grid_max=landscape.grid_max)

    if config.wigner is not None:
        with _stage("wigner", timings):
            axis = grid_axis(-config.wigner.half_range, config.wigner.half_range, config.wigner.step)
            grid = wigner(state, axis, axis)
            if "wigner" in config.emit:
                _saved(repo.save_wigner("wigner", grid), "wigner")
        value, x, p = grid.minimum()
        report["wigner_min"] = {"w": value, "x": x, "p": p}

    if config.tomography is not None:
        report["tomography"] = _tomography(config, state, repo, timings)
    return report


def _tomography(config: ScenarioConfig, state: DensityOperator, repo: ArtifactRepository,
                timings: Dict[str, float]) -> Dict:
    spec = config.tomography
    with _stage("sample_homodyne", timings):
        samples = sample_homodyne(state, uniform_phases(spec.n_phases), spec.n_samples, config.seed)
        if "samples" in config.emit:
            _saved(repo.save_samples("samples", samples), "samples")
    with _stage("mle_reconstruct", timings):
        result = mle_reconstruct(samples, spec.mle)
        if "reconstruction" in config.emit:
            _saved(repo.save_density("reconstruction", result.state), "reconstruction")
    summary = {
        "converged": result.converged,
        "iterations": result.iterations,
        "log_likelihood": result.log_likelihood[-1],
        "populations": [float(p) for p in result.state.probabilities()],
    }
    if result.state.cutoff.n_max == state.cutoff.n_max:
        summary["fidelity_with_source"] = fidelity(result.state, state)
    return summary


def run_scenario(config: ScenarioConfig, repository: Optional[ArtifactRepository] = None) -> RunManifest:
    """Execute one configured run and write its artifacts and manifest."""
    return _run(config, repository)[0]


def _run(config: ScenarioConfig, repository: Optional[ArtifactRepository] = None) -> Tuple[RunManifest, Dict]:
    repo = repository or CSVArtifactRepository(config.output_dir)
    if not repo.initialize():
        raise StageError("initialize", OSError(f"cannot create {config.output_dir}"))
    timings: Dict[str, float] = {}
    try:
        report = _execute(config, repo, timings)
        if "report" in config.emit:
            with _stage("write_report", timings):
                _saved(repo.save_report("report", report), "report")
        manifest = RunManifest(
            config_hash=config.config_hash(),
            seeds=[config.seed] if config.tomography is not None else [],
            versions=code_versions(),
            stage_seconds=timings,
            files=repo.written_files(),
        )
        with _stage("manifest", timings):
            _saved(repo.save_manifest(manifest), "manifest")
    except StageError:
        repo.discard()
        raise
    logger.info("run finished: %d file(s) in %s", len(manifest.files), config.output_dir)
    return manifest, report


def run_tomography(config: ScenarioConfig) -> RunManifest:
    """Herald, then sample and reconstruct; skips the landscape and Wigner stages."""
    if config.tomography is None:
        raise ValueError("the config has no 'tomography' block")
    return run_scenario(replace(config, landscape=None, wigner=None))


def run_wigner(config: ScenarioConfig) -> RunManifest:
    """Herald, then tabulate the Wigner function (default grid ±5, step 0.05)."""
    spec = config.wigner or WignerSpec(5.0, 0.05)
    return run_scenario(replace(config, landscape=None, tomography=None, wigner=spec))


# ── Sweeps ────────────────────────────────────────────────────────────────────

def _theta_dir(theta: float) -> str:
    return f"theta_{theta:.3f}"


def sweep_theta(base: ScenarioConfig, thetas: Optional[Sequence[float]] = None,
                workers: Optional[int] = None) -> RunManifest:
    """One run per half-wave-plate angle with shared λ and losses, plus a summary CSV.

    A failing angle is recorded in the manifest and the sweep carries on.
    """
    thetas = list(thetas if thetas is not None else base.thetas_deg)
    if not thetas:
        raise ValueError("thetas must not be empty")
    workers = workers or base.workers
    timings: Dict[str, float] = {}
    with _stage("lambda_inference", timings):
        base = resolve_lambda(base)

    def one(theta: float) -> Tuple[float, Optional[Tuple[RunManifest, Dict]], Optional[StageError]]:
        scenario = replace(base.scenario, mixing=MixingParam.from_theta_deg(theta))
        config = replace(base.with_scenario(scenario), output_dir=os.path.join(base.output_dir, _theta_dir(theta)),
                         workers=1 if workers > 1 else base.workers)
        try:
            return theta, _run(config), None
        except StageError as e:
            return theta, None, e

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(tqdm(pool.map(one, thetas), total=len(thetas), desc="sweep", disable=None))

    repo = CSVArtifactRepository(base.output_dir)
    if not repo.initialize():
        raise StageError("initialize", OSError(f"cannot create {base.output_dir}"))
    rows: List[Dict] = []
    files: Dict[str, str] = {}
    failures: List[Dict[str, str]] = []
    for theta, outcome, error in results:
        if error is not None:
            failures.append({"theta_deg": repr(theta), "stage": error.stage, "error": str(error.cause)})
            continue
        manifest, report = outcome
        wigner_min = report.get("wigner_min")
        rows.append({
            "theta_deg": theta,
            "epsilon": MixingParam.from_theta_deg(theta).epsilon,
            "fidelity_star": report.get("fidelity_star"),
            "alpha_sq_star": report.get("alpha_sq_star"),
            "db_star": report.get("db_star"),
            "wigner_min": wigner_min["w"] if wigner_min else None,
        })
        files.update({f"{_theta_dir(theta)}/{name}": digest for name, digest in manifest.files.items()})
        timings[_theta_dir(theta)] = round(sum(manifest.stage_seconds.values()), 6)

    try:
        with _stage("write_summary", timings):
            _saved(repo.save_sweep(SWEEP_SUMMARY, rows), SWEEP_SUMMARY)
        files.update(repo.written_files())
        manifest = RunManifest(base.config_hash(), [base.seed] if base.tomography else [],
                               code_versions(), timings, files, failures)
        with _stage("manifest", timings):
            _saved(repo.save_manifest(manifest), "manifest")
    except StageError:
        repo.discard()
        raise
    if failures:
        logger.warning("%d of %d sweep run(s) failed", len(failures), len(thetas))
    return manifest


def fig1_curves(n: int, lam: float, ratio_grid: Sequence[float], output_dir: str,
                grid: GridSpec = GridSpec(), workers: int = 1, config_hash: str = "") -> RunManifest:
    """Best-fit fidelity of the core state along ε/λ, written as ``fig1_n<n>.csv``."""
    repo = CSVArtifactRepository(output_dir)
    if not repo.initialize():
        raise StageError("initialize", OSError(f"cannot create {output_dir}"))
    timings: Dict[str, float] = {}
    try:
        with _stage("fidelity_curve", timings):
            points = protocol_fidelity_curve(n, ratio_grid, lam, grid=grid, workers=workers)
            _saved(repo.save_curve(f"fig1_n{n}", points), "curve")
        manifest = RunManifest(config_hash, [], code_versions(), timings, repo.written_files())
        with _stage("manifest", timings):
            _saved(repo.save_manifest(manifest), "manifest")
    except StageError:
        repo.discard()
        raise
    best = max(points, key=lambda p: p.fidelity_star)
    logger.info("n=%d best F*=%.4f at ratio %.3f (|α|²=%.3f)", n, best.fidelity_star, best.ratio, best.alpha_sq_star)
    return manifest


def run_fig1(config: ScenarioConfig) -> RunManifest:
    spec = config.fig1 or Fig1Spec(2, 0.05, tuple(float(r) for r in grid_axis(0.0, 2.0, 0.05)))
    return fig1_curves(spec.n, spec.lam, spec.ratios, config.output_dir, _landscape_grid(config),
                       config.workers, config.config_hash())
