"""
Run manifests: the fully resolved inputs of every CLI invocation, written
next to its outputs so the directory can be reproduced.
"""
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Union

from src.models.inputs import PipelineConfig, SceneParams
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
PACKAGE_VERSION = "1.0.0"


def build_manifest(
    subcommand: str,
    seed: int,
    pipeline: Optional[PipelineConfig] = None,
    scene: Optional[SceneParams] = None,
    duration_s: Optional[float] = None,
    extra: Optional[dict[str, Any]] = None,
) -> dict[str, Any]:
    return {
        "version": PACKAGE_VERSION,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "subcommand": subcommand,
        "seed": seed,
        "duration_s": duration_s,
        "pipeline": pipeline.model_dump(mode="json") if pipeline is not None else None,
        "scene": scene.model_dump(mode="json") if scene is not None else None,
        **(extra or {}),
    }


def write_manifest(out_dir: Union[str, Path], manifest: dict[str, Any]) -> Path:
    path = Path(out_dir) / MANIFEST_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.debug(f"Wrote manifest {path}")
    return path


def read_manifest(path: Union[str, Path]) -> dict[str, Any]:
    """
    Load a manifest file, or the manifest inside a run directory.

    Raises:
        ConfigError: If the file is not a manifest
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(data, dict) or "subcommand" not in data:
        raise ConfigError(f"{path} is not a run manifest")
    return data
