"""CSV emission/parsing with embedded run manifests.

Every output file starts with `#`-prefixed header lines carrying the full
manifest (tool version, seed, config hash and the canonical config JSON), so
the data rows can be reproduced from the file alone. Data rows are
`freq_mhz,intensity` at 6 significant digits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import canonical_json, config_hash
from .ensemble import SimulationConfig, Spectrum


@dataclass
class RunManifest:
    config_hash: str
    seed: int
    version: str
    timestamp: str
    config_json: str
    outputs: list[str] = field(default_factory=list)

    @classmethod
    def for_config(cls, config: SimulationConfig) -> "RunManifest":
        return cls(
            config_hash=config_hash(config),
            seed=config.seed,
            version=__version__,
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
            config_json=canonical_json(config),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_hash": self.config_hash,
                "seed": self.seed,
                "version": self.version,
                "timestamp": self.timestamp,
                "config": json.loads(self.config_json),
                "outputs": self.outputs,
            },
            indent=2,
        )


def spectrum_header(manifest: RunManifest, extra: dict | None = None) -> list[str]:
    lines = [
        f"# nvodmr spectrum v{manifest.version}",
        f"# timestamp: {manifest.timestamp}",
        f"# config_hash: {manifest.config_hash}",
        f"# seed: {manifest.seed}",
        f"# config_json: {manifest.config_json}",
    ]
    for key, value in (extra or {}).items():
        lines.append(f"# {key}: {json.dumps(value) if not isinstance(value, str) else value}")
    lines.append("# columns: freq_mhz,intensity")
    return lines


def write_spectrum_csv(
    path: str | Path,
    spectrum: Spectrum,
    manifest: RunManifest,
    extra: dict | None = None,
) -> None:
    meta = spectrum.metadata
    header_extra = {
        "backend": meta.get("backend", ""),
        "field_gauss": meta.get("field_gauss", []),
        "total_weight": float(meta.get("total_weight", 0.0)),
    }
    header_extra.update(extra or {})
    rows = (
        f"{f:.6g},{i:.6g}" for f, i in zip(spectrum.bin_centers, spectrum.intensity)
    )
    text = "\n".join([*spectrum_header(manifest, header_extra), *rows]) + "\n"
    Path(path).write_text(text)


def read_curve_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, dict]:
    """Parse a two-column CSV; `#` header lines come back as a metadata dict.

    Accepts our own spectrum files and plain experimental freq,value dumps
    (an optional non-numeric first row is treated as a column header).
    """
    header: dict = {}
    freqs: list[float] = []
    values: list[float] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ": " in body:
                key, _, value = body.partition(": ")
                header[key.strip()] = value.strip()
            continue
        parts = line.split(",")
        if len(parts) < 2:
            raise ValueError(f"{path}: expected freq,value rows, got {line!r}")
        try:
            f, v = float(parts[0]), float(parts[1])
        except ValueError:
            if not freqs:
                continue
            raise ValueError(f"{path}: non-numeric data row {line!r}") from None
        freqs.append(f)
        values.append(v)
    if not freqs:
        raise ValueError(f"{path}: no data rows found")
    if "config_json" in header:
        header["config"] = json.loads(header["config_json"])
    return np.asarray(freqs), np.asarray(values), header


def data_rows_bytes(path: str | Path) -> bytes:
    """The data-row portion of a CSV, byte-exact (headers stripped)."""
    lines = [
        line
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.startswith("#")
    ]
    return ("\n".join(lines) + "\n").encode()
