"""Adapter that drives an external command-line codec.

Templates name an encoder and decoder with {in}, {out} and optional {q}
placeholders. Each round trip uses a fresh temp directory so concurrent
calls never share paths.
"""

from __future__ import annotations

import functools
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from ..images import Image, read_image, write_image
from .base import CodecError, CompressedBlob


class ExternalConfigError(CodecError):
    """Template or binary problems found before anything runs."""


class ExternalRunError(RuntimeError):
    """The external tool ran and failed."""


@functools.lru_cache(maxsize=32)
def _tool_version(tool_path: str) -> str:
    try:
        proc = subprocess.run(
            [tool_path, "--version"], capture_output=True, text=True, timeout=10,
        )
        text = (proc.stdout or proc.stderr).strip()
        return text.splitlines()[0] if text else "unknown"
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"


def _check_template(template: str, label: str) -> str:
    for placeholder in ("{in}", "{out}"):
        if placeholder not in template:
            raise ExternalConfigError(
                f"{label} template must contain {placeholder}: {template!r}"
            )
    tool = shlex.split(template)[0]
    if shutil.which(tool) is None:
        raise ExternalConfigError(f"{label} binary not found: {tool!r}")
    return tool


def _run(template: str, mapping: dict, label: str) -> None:
    command = template
    for key, value in mapping.items():
        command = command.replace("{" + key + "}", str(value))
    proc = subprocess.run(shlex.split(command), capture_output=True, text=True)
    if proc.returncode != 0:
        raise ExternalRunError(
            f"{label} command failed ({proc.returncode}): {command}\n{proc.stderr}"
        )


@dataclass(frozen=True)
class ExternalCodec:
    name: str
    encode_template: str
    decode_template: str
    quality: int = 75
    kind: str = "external"

    def __post_init__(self):
        _check_template(self.encode_template, "encode")
        _check_template(self.decode_template, "decode")

    @property
    def rate_param(self) -> dict:
        return {"q": self.quality, "flag": self.name}

    def roundtrip(self, image: Image) -> tuple[Image, CompressedBlob]:
        tool = shlex.split(self.encode_template)[0]
        tool_path = shutil.which(tool)
        workdir = Path(tempfile.mkdtemp(prefix="scbench-ext-"))
        try:
            source = workdir / "input.png"
            encoded = workdir / "encoded.bin"
            decoded = workdir / "decoded.png"
            write_image(image, source)
            _run(self.encode_template,
                 {"in": source, "out": encoded, "q": self.quality}, "encode")
            if not encoded.exists():
                raise ExternalRunError(f"encoder produced no output: {encoded}")
            exact_bits = 8 * encoded.stat().st_size
            _run(self.decode_template,
                 {"in": encoded, "out": decoded, "q": self.quality}, "decode")
            recon = read_image(decoded)
            if recon.shape != image.shape:
                raise ExternalRunError(
                    f"decoded shape {recon.shape} != input shape {image.shape}"
                )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

        blob = CompressedBlob(
            kind=self.kind,
            shape=image.shape,
            rate_param=self.rate_param,
            n_symbols=0,
            exact_bits=exact_bits,
            entropy_bits=float(exact_bits),
            meta={
                "tool": tool,
                "tool_path": tool_path or "",
                "version": _tool_version(tool_path) if tool_path else "unknown",
            },
        )
        return recon, blob
