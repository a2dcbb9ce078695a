"""
CSV-based implementation of the artifact repository.
"""
import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from typing import Dict, List, Optional

import numpy as np

from artifact_repository import SWEEP_HEADERS, ArtifactRepository, RunManifest
from css_fidelity import CurvePoint, FidelityLandscape, GridSpec, SqueezeAxis
from fock_core import DensityOperator
from tomography import QuadratureSamples
from wigner import WignerGrid

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"
CURVE_HEADERS = ["ratio", "fidelity_star", "alpha_sq_star", "db_star", "w_vacuum", "w_nphoton"]


def _fmt(value) -> str:
    """Shortest round-tripping text for a number; empty for missing values."""
    if value is None:
        return ""
    return repr(float(value))


class CSVArtifactRepository(ArtifactRepository):
    """File-based artifact store under one output directory.

    Every write goes through ``_write_text`` so the repository knows which
    files belong to the run and their checksums.
    """

    def __init__(self, output_dir: str):
        """
        Initialize the repository.

        Args:
            output_dir: Directory that receives every artifact of the run.
        """
        self.output_dir = output_dir
        self._files: Dict[str, str] = {}

    # ── Internal helpers ──────────────────────────────────────────────────────

    def _path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def _write_text(self, filename: str, text: str) -> bool:
        try:
            with open(self._path(filename), mode='w', newline='', encoding='utf-8') as file:
                file.write(text)
            self._files[filename] = hashlib.sha256(text.encode('utf-8')).hexdigest()
            return True
        except OSError as e:
            logger.error("Error writing %s: %s", filename, e)
            return False

    def _write_rows(self, filename: str, headers: List[str], rows) -> bool:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(headers)
        writer.writerows(rows)
        return self._write_text(filename, buffer.getvalue())

    def _read_rows(self, filename: str) -> Optional[List[Dict[str, str]]]:
        try:
            with open(self._path(filename), mode='r', newline='', encoding='utf-8') as file:
                return list(csv.DictReader(file))
        except FileNotFoundError:
            return None
        except OSError as e:
            logger.error("Error reading %s: %s", filename, e)
            return None

    def _read_json(self, filename: str) -> Optional[dict]:
        try:
            with open(self._path(filename), mode='r', encoding='utf-8') as file:
                return json.load(file)
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as e:
            logger.error("Error reading %s: %s", filename, e)
            return None

    def _write_json(self, filename: str, data: dict) -> bool:
        return self._write_text(filename, json.dumps(data, indent=2, sort_keys=True) + "\n")

    # ── Public interface ──────────────────────────────────────────────────────

    def initialize(self) -> bool:
        """Create the output directory if it doesn't exist."""
        try:
            os.makedirs(self.output_dir, exist_ok=True)
            return True
        except OSError as e:
            logger.error("Error creating output directory %s: %s", self.output_dir, e)
            return False

    def save_density(self, name: str, rho: DensityOperator) -> bool:
        return self._write_json(f"{name}.json", rho.to_dict())

    def load_density(self, name: str) -> Optional[DensityOperator]:
        data = self._read_json(f"{name}.json")
        return None if data is None else DensityOperator.from_dict(data)

    def save_landscape(self, name: str, landscape: FidelityLandscape) -> bool:
        """Row-major ``alpha_sq,db,fidelity`` CSV plus a JSON sidecar with the argmax."""
        rows = (
            (_fmt(a), _fmt(d), _fmt(landscape.values[i, j]))
            for i, a in enumerate(landscape.alpha_sq_grid)
            for j, d in enumerate(landscape.db_grid)
        )
        if not self._write_rows(f"{name}.csv", ["alpha_sq", "db", "fidelity"], rows):
            return False
        a_sq, d, value = landscape.argmax
        sidecar = {
            "argmax": {"alpha_sq": a_sq, "db": d, "fidelity": value},
            "grid_max": landscape.grid_max,
            "grid_spec": landscape.grid_spec.to_dict(),
        }
        return self._write_json(f"{name}.json", sidecar)

    def load_landscape(self, name: str) -> Optional[FidelityLandscape]:
        rows = self._read_rows(f"{name}.csv")
        sidecar = self._read_json(f"{name}.json")
        if rows is None or sidecar is None:
            return None
        alpha_sq = np.unique([float(r["alpha_sq"]) for r in rows])
        db = np.unique([float(r["db"]) for r in rows])
        values = np.array([float(r["fidelity"]) for r in rows]).reshape(alpha_sq.size, db.size)
        spec = dict(sidecar["grid_spec"])
        spec["axis"] = SqueezeAxis(spec["axis"])
        best = sidecar["argmax"]
        return FidelityLandscape(alpha_sq, db, values, (best["alpha_sq"], best["db"], best["fidelity"]),
                                 GridSpec(**spec))

    def save_wigner(self, name: str, grid: WignerGrid) -> bool:
        """Row-major ``x,p,w`` CSV plus a JSON sidecar with the axes and the minimum."""
        rows = (
            (_fmt(x), _fmt(p), _fmt(grid.values[i, j]))
            for i, x in enumerate(grid.x_axis)
            for j, p in enumerate(grid.p_axis)
        )
        if not self._write_rows(f"{name}.csv", ["x", "p", "w"], rows):
            return False
        value, x, p = grid.minimum()
        sidecar = {
            "x_axis": [float(v) for v in grid.x_axis],
            "p_axis": [float(v) for v in grid.p_axis],
            "minimum": {"w": value, "x": x, "p": p},
            "integral": grid.integral(),
        }
        return self._write_json(f"{name}.json", sidecar)

    def load_wigner(self, name: str) -> Optional[WignerGrid]:
        rows = self._read_rows(f"{name}.csv")
        sidecar = self._read_json(f"{name}.json")
        if rows is None or sidecar is None:
            return None
        x_axis = np.array(sidecar["x_axis"])
        p_axis = np.array(sidecar["p_axis"])
        values = np.array([float(r["w"]) for r in rows]).reshape(x_axis.size, p_axis.size)
        return WignerGrid(x_axis, p_axis, values)

    def save_samples(self, name: str, samples: QuadratureSamples) -> bool:
        rows = ((_fmt(phi), _fmt(x)) for phi, x in zip(samples.phases, samples.values))
        return self._write_rows(f"{name}.csv", ["phase_rad", "quadrature"], rows)

    def load_samples(self, name: str) -> Optional[QuadratureSamples]:
        rows = self._read_rows(f"{name}.csv")
        if rows is None:
            return None
        return QuadratureSamples(
            np.array([float(r["phase_rad"]) for r in rows]),
            np.array([float(r["quadrature"]) for r in rows]),
        )

    def save_curve(self, name: str, points: List[CurvePoint]) -> bool:
        rows = (
            (_fmt(p.ratio), _fmt(p.fidelity_star), _fmt(p.alpha_sq_star), _fmt(p.db_star),
             _fmt(p.w_low), _fmt(p.w_n))
            for p in points
        )
        return self._write_rows(f"{name}.csv", CURVE_HEADERS, rows)

    def load_curve(self, name: str) -> List[CurvePoint]:
        rows = self._read_rows(f"{name}.csv") or []
        return [
            CurvePoint(float(r["ratio"]), float(r["fidelity_star"]), float(r["alpha_sq_star"]),
                       float(r["db_star"]), float(r["w_vacuum"]), float(r["w_nphoton"]))
            for r in rows
        ]

    def save_sweep(self, name: str, rows: List[Dict]) -> bool:
        lines = ([_fmt(row.get(key)) for key in SWEEP_HEADERS] for row in rows)
        return self._write_rows(f"{name}.csv", SWEEP_HEADERS, lines)

    def load_sweep(self, name: str) -> List[Dict]:
        rows = self._read_rows(f"{name}.csv") or []
        return [{key: (float(r[key]) if r[key] != "" else None) for key in SWEEP_HEADERS} for r in rows]

    def save_report(self, name: str, data: Dict) -> bool:
        return self._write_json(f"{name}.json", data)

    def save_manifest(self, manifest: RunManifest) -> bool:
        """Write ``manifest.json`` through a temp file and an atomic rename."""
        text = json.dumps(manifest.to_dict(), indent=2, sort_keys=True) + "\n"
        try:
            fd, tmp_path = tempfile.mkstemp(prefix=".manifest-", dir=self.output_dir)
            with os.fdopen(fd, mode='w', encoding='utf-8') as file:
                file.write(text)
            os.replace(tmp_path, self._path(MANIFEST_FILE))
            return True
        except OSError as e:
            logger.error("Error writing manifest: %s", e)
            return False

    def load_manifest(self) -> Optional[RunManifest]:
        data = self._read_json(MANIFEST_FILE)
        return None if data is None else RunManifest.from_dict(data)

    def written_files(self) -> Dict[str, str]:
        return dict(self._files)

    def discard(self):
        for filename in list(self._files):
            try:
                os.remove(self._path(filename))
            except FileNotFoundError:
                pass
            except OSError as e:
                logger.error("Error removing %s: %s", filename, e)
        self._files.clear()
