"""Run manifests: everything needed to reproduce a run under scripted backends.

Paths inside a manifest are relative to the manifest's directory so that
two runs into different directories with the same inputs produce identical
manifest bytes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .records import dumps_canonical


@dataclass
class RunManifest:
    command: str
    config_digest: str
    template_checksums: dict[str, str] = field(default_factory=dict)
    backend_id: str = ""
    input_digests: dict[str, str] = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "kind": "run_manifest",
            "command": self.command,
            "config_digest": self.config_digest,
            "template_checksums": dict(sorted(self.template_checksums.items())),
            "backend_id": self.backend_id,
            "input_digests": dict(sorted(self.input_digests.items())),
            "outputs": sorted(self.outputs),
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(dumps_canonical(self.to_record()) + "\n", encoding="utf-8")


def digest_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def digest_file(path: str | Path) -> str:
    return digest_bytes(Path(path).read_bytes())


def digest_config(config: dict) -> str:
    return digest_bytes(dumps_canonical(config).encode("utf-8"))


def build_manifest(command: str, config: dict, inputs: list[str | Path],
                   outputs: list[str | Path], base_dir: str | Path,
                   template_checksums: dict[str, str] | None = None,
                   backend_id: str = "") -> RunManifest:
    base = Path(base_dir).resolve()

    def rel(p: str | Path) -> str:
        rp = Path(p).resolve()
        try:
            return rp.relative_to(base).as_posix()
        except ValueError:
            return rp.name  # inputs outside the run dir: name only, digest pins content

    return RunManifest(
        command=command,
        config_digest=digest_config(config),
        template_checksums=template_checksums or {},
        backend_id=backend_id,
        input_digests={rel(p): digest_file(p) for p in inputs if Path(p).exists()},
        outputs=[rel(p) for p in outputs],
    )
