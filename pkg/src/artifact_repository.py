"""
Abstract artifact repository for run outputs.
This allows for different storage back ends (CSV files today, a database
or object store later) behind one interface.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from css_fidelity import CurvePoint, FidelityLandscape
from fock_core import DensityOperator
from tomography import QuadratureSamples
from wigner import WignerGrid


SWEEP_HEADERS = ["theta_deg", "epsilon", "fidelity_star", "alpha_sq_star", "db_star", "wigner_min"]


@dataclass
class RunManifest:
    """Provenance record written last by every run."""
    config_hash: str
    seeds: List[int] = field(default_factory=list)
    versions: Dict[str, str] = field(default_factory=dict)
    stage_seconds: Dict[str, float] = field(default_factory=dict)
    files: Dict[str, str] = field(default_factory=dict)
    failures: List[Dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seeds": list(self.seeds),
            "versions": dict(self.versions),
            "stage_seconds": dict(self.stage_seconds),
            "files": dict(sorted(self.files.items())),
            "failures": list(self.failures),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunManifest":
        return cls(
            config_hash=data["config_hash"],
            seeds=list(data.get("seeds", [])),
            versions=dict(data.get("versions", {})),
            stage_seconds=dict(data.get("stage_seconds", {})),
            files=dict(data.get("files", {})),
            failures=list(data.get("failures", [])),
        )


class ArtifactRepository(ABC):
    """Abstract base class for artifact stores"""

    @abstractmethod
    def initialize(self) -> bool:
        """Prepare the store (e.g., create the output directory)"""
        pass

    @abstractmethod
    def save_density(self, name: str, rho: DensityOperator) -> bool:
        """
        Store a density operator.

        Args:
            name: Artifact name without extension
            rho: The state to store

        Returns:
            bool: True if successful, False otherwise
        """
        pass

    @abstractmethod
    def load_density(self, name: str) -> Optional[DensityOperator]:
        pass

    @abstractmethod
    def save_landscape(self, name: str, landscape: FidelityLandscape) -> bool:
        """
        Store a fidelity landscape with its argmax and grid description.

        Args:
            name: Artifact name without extension
            landscape: Result of a best-fit search

        Returns:
            bool: True if successful, False otherwise
        """
        pass

    @abstractmethod
    def load_landscape(self, name: str) -> Optional[FidelityLandscape]:
        pass

    @abstractmethod
    def save_wigner(self, name: str, grid: WignerGrid) -> bool:
        pass

    @abstractmethod
    def load_wigner(self, name: str) -> Optional[WignerGrid]:
        pass

    @abstractmethod
    def save_samples(self, name: str, samples: QuadratureSamples) -> bool:
        pass

    @abstractmethod
    def load_samples(self, name: str) -> Optional[QuadratureSamples]:
        pass

    @abstractmethod
    def save_curve(self, name: str, points: List[CurvePoint]) -> bool:
        pass

    @abstractmethod
    def load_curve(self, name: str) -> List[CurvePoint]:
        pass

    @abstractmethod
    def save_sweep(self, name: str, rows: List[Dict]) -> bool:
        """
        Store one summary row per swept angle.

        Args:
            name: Artifact name without extension
            rows: Dictionaries keyed by ``SWEEP_HEADERS``; a missing value
                  is written as an empty field

        Returns:
            bool: True if successful, False otherwise
        """
        pass

    @abstractmethod
    def load_sweep(self, name: str) -> List[Dict]:
        pass

    @abstractmethod
    def save_report(self, name: str, data: Dict) -> bool:
        pass

    @abstractmethod
    def save_manifest(self, manifest: RunManifest) -> bool:
        """
        Write the manifest atomically; it must be the last write of a run.

        Returns:
            bool: True if successful, False otherwise
        """
        pass

    @abstractmethod
    def load_manifest(self) -> Optional[RunManifest]:
        pass

    @abstractmethod
    def written_files(self) -> Dict[str, str]:
        """Relative path -> SHA-256 of every artifact written so far."""
        pass

    @abstractmethod
    def discard(self):
        """Remove every artifact written so far (used when a run fails)."""
        pass
