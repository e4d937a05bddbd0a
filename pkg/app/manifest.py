"""Run manifests and atomic report writers.

A manifest records what a command ran on (config snapshot, input digests) and
what it wrote. Its digest covers everything except stage timings, so two runs
over the same inputs carry the same digest in every output header.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd

from ingest.store import atomic_write
from model.config import PipelineConfig

MANIFEST_FILE = "manifest.json"


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class RunManifest:
    command: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = field(default_factory=dict)
    parameters: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)

    @classmethod
    def start(cls, command: str, cfg: PipelineConfig, **parameters: Any) -> "RunManifest":
        return cls(command, cfg.snapshot(), parameters={k: v for k, v in sorted(parameters.items())})

    def add_input(self, name: str, digest: str) -> None:
        self.inputs[name] = digest

    @property
    def digest(self) -> str:
        """sha256 over command, config, parameters and inputs."""
        payload = _canonical({
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "parameters": self.parameters,
        })
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def header(self) -> str:
        return f"# manifest={self.digest}\n"

    def as_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config": self.config,
            "digest": self.digest,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
            "parameters": self.parameters,
            "timings": {k: round(v, 6) for k, v in sorted(self.timings.items())},
        }

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / MANIFEST_FILE
        atomic_write(path, (json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8"))
        return path


def write_csv(path: Path, frame: pd.DataFrame, manifest: RunManifest) -> Path:
    """Write a table with the manifest comment line on top."""
    body = frame.to_csv(index=False, lineterminator="\n", float_format="%.6f")
    atomic_write(Path(path), (manifest.header() + body).encode("utf-8"))
    manifest.outputs.append(str(path))
    return Path(path)


def write_geojson(path: Path, features: List[Dict[str, Any]], manifest: RunManifest) -> Path:
    """Write a FeatureCollection carrying the manifest digest as a top-level member."""
    collection = {"type": "FeatureCollection", "manifest": manifest.digest, "features": features}
    text = json.dumps(collection, sort_keys=True, separators=(",", ":"), allow_nan=False)
    atomic_write(Path(path), (text + "\n").encode("utf-8"))
    manifest.outputs.append(str(path))
    return Path(path)
