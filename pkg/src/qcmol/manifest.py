from typing import Dict, List
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging

from .errors import ConfigurationError

log = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest"


@dataclass
class RunManifest:
    command: str
    argv: List[str]
    version: str
    settings: Dict[str, object] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    extra: Dict[str, object] = field(default_factory=dict)
    started: str = ""
    wall_clock: float = 0.0
    exit_code: int = 0

    def to_text(self) -> str:
        lines = []
        for key in ("command", "argv", "version", "started", "wall_clock",
                    "exit_code", "inputs", "outputs"):
            lines.append(f"{key} = {json.dumps(getattr(self, key))}")
        for prefix, values in (("setting", self.settings),
                               ("seed", self.seeds),
                               ("extra", self.extra)):
            for k in sorted(values):
                lines.append(f"{prefix}.{k} = "
                             f"{json.dumps(values[k], sort_keys=True)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunManifest":
        top: Dict[str, object] = {}
        groups: Dict[str, Dict[str, object]] = {
            "setting": {}, "seed": {}, "extra": {}}
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            key, sep, value = line.partition(" = ")
            if not sep:
                raise ConfigurationError(f"manifest line {lineno}: no '='")
            try:
                decoded = json.loads(value)
            except ValueError as e:
                raise ConfigurationError(f"manifest line {lineno}: {e}")
            prefix, dot, name = key.partition(".")
            if dot and prefix in groups:
                groups[prefix][name] = decoded
            else:
                top[key] = decoded
        missing = {"command", "argv", "version"} - set(top)
        if missing:
            raise ConfigurationError(f"manifest lacks {sorted(missing)}")
        return cls(command=top["command"], argv=list(top["argv"]),
                   version=top["version"], settings=groups["setting"],
                   seeds=groups["seed"], inputs=top.get("inputs", []),
                   outputs=top.get("outputs", []), extra=groups["extra"],
                   started=top.get("started", ""),
                   wall_clock=top.get("wall_clock", 0.0),
                   exit_code=top.get("exit_code", 0))


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + MANIFEST_SUFFIX)


def write_manifest(out: Path, manifest: RunManifest) -> Path:
    path = manifest_path(out)
    path.parent.mkdir(exist_ok=True, parents=True)
    path.write_text(manifest.to_text())
    return path


def read_manifest(path: Path) -> RunManifest:
    if not path.exists():
        raise ConfigurationError(f"no manifest at {path}")
    return RunManifest.from_text(path.read_text())
