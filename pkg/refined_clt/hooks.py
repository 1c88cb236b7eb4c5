"""Command decorator that writes a run manifest next to the outputs.

Design goals:
  - Commands stay plain: they return a CommandOutcome and the decorator does the rest
  - The manifest echoes the validated config and carries a SHA-256 digest per output
  - Re-running with the embedded config and seed reproduces the digested files
"""

from __future__ import annotations

import functools
import hashlib
import logging
import time
from collections.abc import Callable
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from refined_clt.config import settings
from refined_clt.models import CommandOutcome, RunManifest

logger = logging.getLogger(__name__)

CommandFn = Callable[..., CommandOutcome]


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def manifest_path(out_dir: Path, command: str) -> Path:
    return out_dir / f"{command}_manifest.json"


def write_manifest_on_complete(command: str) -> Callable[[CommandFn], CommandFn]:
    """Decorator: after the command returns, write ``<command>_manifest.json``.

    Args:
        command: Subcommand name used for the manifest file and the ``command`` field.
    """

    def decorator(func: CommandFn) -> CommandFn:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> CommandOutcome:
            started_at = datetime.now(timezone.utc)
            started = time.perf_counter()
            outcome = func(*args, **kwargs)

            config = outcome.config
            out_dir = Path(config.out_dir)
            manifest = RunManifest(
                command=command,
                app_version=settings.app_version,
                config=config.model_dump(mode="json"),
                seed=config.seed,
                replicate_counts=outcome.replicate_counts,
                clamp_counts=outcome.clamp_counts,
                started_at=started_at.isoformat(),
                finished_at=datetime.now(timezone.utc).isoformat(),
                wall_time_s=round(time.perf_counter() - started, 6),
                outputs={path.name: file_digest(path) for path in outcome.outputs},
            )
            path = manifest_path(out_dir, command)
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                path.write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
                logger.info(f"🧾 Wrote {path}")
            except OSError as e:
                logger.warning(f"write_manifest_on_complete failed: {e}, path: {path}")
            return outcome

        return wrapper

    return decorator
