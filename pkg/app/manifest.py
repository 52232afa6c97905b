"""Run manifests: one JSON file per command invocation."""

import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, Field

from stereo import __version__

logger = logging.getLogger(__name__)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunManifest(BaseModel):
    """Everything needed to repeat a run: resolved settings, seed and outputs."""

    command: str
    config: Dict[str, Any]
    seed: int
    threads: int = 1
    code_version: str = __version__
    started_at: str = Field(default_factory=_now)
    finished_at: Optional[str] = None
    outputs: Dict[str, str] = Field(default_factory=dict)
    status: str = "running"

    def finish(self, status: str = "ok", **outputs: Union[str, Path]) -> "RunManifest":
        self.finished_at = _now()
        self.status = status
        self.outputs.update({key: str(value) for key, value in outputs.items()})
        return self

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2) + "\n")
        logger.info("wrote run manifest %s", path)
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunManifest":
        return cls.model_validate_json(Path(path).read_text())


def manifest_path_for(output: Union[str, Path]) -> Path:
    """``model.svlt`` -> ``model.manifest.json`` next to it; directories get ``manifest.json``."""
    output = Path(output)
    if output.suffix:
        return output.with_suffix(".manifest.json")
    return output / "manifest.json"
