"""Config-file parsing and canonical hashing.

Run configurations live in a single TOML file with sections mirroring
SimulationConfig; any omitted key falls back to its default. The canonical
JSON echo of a config (sorted keys, full precision) is what gets hashed into
manifests and embedded in output headers, so a run is reproducible from its
header alone.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from .bath import BathModel, BathParams, NearCatalogEntry
from .ensemble import HistogramSpec, SimulationConfig
from .presets import get_preset
from .spincore import FieldSpec, HyperfineCoupling

PRESET_DIR_ENV = "NVODMR_PRESET_DIR"


def config_from_dict(data: dict) -> SimulationConfig:
    """Build a SimulationConfig from plain data (parsed TOML/JSON)."""
    zfs = data.get("zfs", {})
    sample = data.get("sample", {})
    run = data.get("run", {})
    options = data.get("options", {})
    hist = data.get("histogram", {})
    field = data.get("field", {})
    bath_data = data.get("bath", {})

    catalog = tuple(
        NearCatalogEntry(
            label=entry["label"],
            a_mhz=float(entry["a_mhz"]),
            multiplicity=int(entry.get("multiplicity", 1)),
        )
        for entry in bath_data.get("catalog", [])
    )
    params = BathParams(
        xi_mhz_a3=float(bath_data.get("xi_mhz_a3", BathParams.xi_mhz_a3)),
        rho_per_a3=float(bath_data.get("rho_per_a3", BathParams.rho_per_a3)),
        r0_angstrom=float(bath_data.get("r0_angstrom", BathParams.r0_angstrom)),
        spin_sigma=float(bath_data.get("spin_sigma", BathParams.spin_sigma)),
    )
    bath = BathModel(
        params=params,
        catalog=catalog,
        threshold_mhz=float(bath_data.get("threshold_mhz", BathModel.threshold_mhz)),
    )

    sites = []
    for site in data.get("explicit_sites", []):
        tensor = site.get("full_tensor_mhz")
        sites.append(
            HyperfineCoupling(
                label=site["label"],
                a_row=tuple(float(x) for x in site["a_row_mhz"]),
                full_tensor=tuple(tuple(float(x) for x in row) for row in tensor) if tensor else None,
            )
        )

    histogram = HistogramSpec(
        f_min_mhz=float(hist.get("f_min_mhz", 2370.0)),
        f_max_mhz=float(hist.get("f_max_mhz", 3370.0)),
        bin_width_mhz=float(hist.get("bin_width_mhz", 1.0)),
    )
    field_spec = FieldSpec(
        b_crystal_gauss=tuple(float(x) for x in field.get("b_crystal_gauss", (0.0, 0.0, 0.0))),
        gamma_e_mhz_per_g=float(field.get("gamma_e_mhz_per_g", 2.8025)),
    )
    override = bath_data.get("background_override_mhz")
    return SimulationConfig(
        zfs_d_mhz=float(zfs.get("d_mhz", 2870.0)),
        delta_e_mhz=float(zfs.get("delta_e_mhz", 1.0)),
        bath=bath,
        explicit_sites=tuple(sites),
        enrichment=float(sample.get("enrichment", 1.0)),
        field_spec=field_spec,
        orientation_weights=tuple(sample.get("orientation_weights", (1.0, 1.0, 1.0, 1.0))),
        n_samples=int(run.get("n_samples", 100_000)),
        histogram=histogram,
        backend=str(run.get("backend", "auto")),
        seed=int(run.get("seed", 20260810)),
        nucleus_cap=int(options.get("nucleus_cap", 12)),
        include_nuclear_zeeman=bool(options.get("include_nuclear_zeeman", False)),
        lorentz_fwhm_mhz=float(options.get("lorentz_fwhm_mhz", 0.0)),
        background_override_mhz=float(override) if override is not None else None,
    )


def config_from_flat_dict(data: dict) -> SimulationConfig:
    """Rebuild a SimulationConfig from its as_dict() echo (manifest layout)."""
    nested = {
        "zfs": {"d_mhz": data["zfs_d_mhz"], "delta_e_mhz": data["delta_e_mhz"]},
        "bath": {
            **{k: v for k, v in data["bath"].items() if k != "catalog"},
            "catalog": data["bath"]["catalog"],
            "background_override_mhz": data.get("background_override_mhz"),
        },
        "explicit_sites": data["explicit_sites"],
        "sample": {
            "enrichment": data["enrichment"],
            "orientation_weights": data["orientation_weights"],
        },
        "field": data["field"],
        "run": {
            "n_samples": data["n_samples"],
            "backend": data["backend"],
            "seed": data["seed"],
        },
        "histogram": data["histogram"],
        "options": {
            "nucleus_cap": data["nucleus_cap"],
            "include_nuclear_zeeman": data["include_nuclear_zeeman"],
            "lorentz_fwhm_mhz": data["lorentz_fwhm_mhz"],
        },
    }
    return config_from_dict(nested)


def load_config_file(path: str | Path) -> SimulationConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))


def resolve_config(name_or_path: str) -> SimulationConfig:
    """Resolve a CLI/service config argument.

    Order: an existing file path wins; then `<name>.toml` under the preset
    directory named by NVODMR_PRESET_DIR; then the bundled preset names.
    """
    path = Path(name_or_path)
    if path.is_file():
        return load_config_file(path)
    preset_dir = os.environ.get(PRESET_DIR_ENV)
    if preset_dir:
        candidate = Path(preset_dir) / f"{name_or_path}.toml"
        if candidate.is_file():
            return load_config_file(candidate)
    try:
        return get_preset(name_or_path)
    except KeyError:
        raise FileNotFoundError(
            f"no config file or preset named {name_or_path!r} "
            f"(searched literal path, ${PRESET_DIR_ENV}, bundled presets)"
        ) from None


def canonical_json(config: SimulationConfig) -> str:
    return json.dumps(config.as_dict(), sort_keys=True, separators=(",", ":"))


def config_hash(config: SimulationConfig) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()[:16]
