"""Command-line front end.

The CLI is a thin client of the simulation service: every command builds a
request, sends it through an in-process ASGI transport (default) or to a
remote instance given by --server / NVODMR_SERVER, and writes the returned
data to files. All commands are non-interactive; exit codes are 0 on
success, 2 for unusable inputs (missing config, bad grid), 3 for
insufficient curve overlap in `compare`, 1 otherwise.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click
import httpx
import numpy as np

from . import __version__
from .config import PRESET_DIR_ENV, load_config_file
from .presets import PRESETS

SERVER_ENV = "NVODMR_SERVER"


def _call(method: str, path: str, payload: dict | None, server: str | None) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=3600.0) as client:
            return client.request(method, path, json=payload)

    from .service.app import create_app

    async def go():
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://nvodmr.local", timeout=None
        ) as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(go())


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _check(resp: httpx.Response) -> dict:
    if resp.status_code == 200:
        return resp.json()
    try:
        detail = resp.json().get("detail", {})
    except json.JSONDecodeError:
        detail = {}
    kind = detail.get("kind", "") if isinstance(detail, dict) else ""
    message = detail.get("message", resp.text) if isinstance(detail, dict) else str(detail)
    if kind == "overlap_error":
        _fail(message, 3)
    if kind in ("unknown_preset", "invalid_config", "dimension_limit", "invalid_curve", "invalid_plot"):
        _fail(message, 2)
    _fail(f"service returned {resp.status_code}: {message}", 1)
    raise AssertionError("unreachable")


def _config_payload(config_arg: str) -> dict:
    """Resolve --config into a request payload: file path or env-dir preset
    becomes an inline config; otherwise the name is sent as a preset."""
    path = Path(config_arg)
    candidates = [path]
    preset_dir = os.environ.get(PRESET_DIR_ENV)
    if preset_dir:
        candidates.append(Path(preset_dir) / f"{config_arg}.toml")
    for candidate in candidates:
        if candidate.is_file():
            try:
                cfg = load_config_file(candidate)
            except (ValueError, KeyError) as exc:
                _fail(f"cannot parse config {candidate}: {exc}", 2)
            return {"config": _flat_to_wire(cfg.as_dict())}
    if config_arg in PRESETS:
        return {"preset": config_arg}
    _fail(
        f"no config file or preset named {config_arg!r} "
        f"(searched literal path, ${PRESET_DIR_ENV}, bundled presets)",
        2,
    )
    raise AssertionError("unreachable")


def _flat_to_wire(flat: dict) -> dict:
    """SimulationConfig.as_dict() layout -> ConfigModel wire layout."""
    return {
        "zfs_d_mhz": flat["zfs_d_mhz"],
        "delta_e_mhz": flat["delta_e_mhz"],
        "bath": {
            **{k: v for k, v in flat["bath"].items()},
            "background_override_mhz": flat.get("background_override_mhz"),
        },
        "explicit_sites": flat["explicit_sites"],
        "enrichment": flat["enrichment"],
        "b_crystal_gauss": flat["field"]["b_crystal_gauss"],
        "gamma_e_mhz_per_g": flat["field"]["gamma_e_mhz_per_g"],
        "orientation_weights": flat["orientation_weights"],
        "n_samples": flat["n_samples"],
        "f_min_mhz": flat["histogram"]["f_min_mhz"],
        "f_max_mhz": flat["histogram"]["f_max_mhz"],
        "bin_width_mhz": flat["histogram"]["bin_width_mhz"],
        "backend": flat["backend"],
        "seed": flat["seed"],
        "nucleus_cap": flat["nucleus_cap"],
        "include_nuclear_zeeman": flat["include_nuclear_zeeman"],
        "lorentz_fwhm_mhz": flat["lorentz_fwhm_mhz"],
    }


def _write_spectrum_files(spectrum: dict, out_path: Path, extra: dict | None = None) -> list[str]:
    from .config import config_from_flat_dict
    from .ensemble import Spectrum
    from .iocsv import RunManifest, write_spectrum_csv

    cfg = config_from_flat_dict(spectrum["config"])
    manifest = RunManifest.for_config(cfg)
    spec = Spectrum(
        bin_centers=np.asarray(spectrum["bin_centers_mhz"]),
        intensity=np.asarray(spectrum["intensity"]),
        metadata={
            "backend": spectrum["backend"],
            "field_gauss": spectrum["field_gauss"],
            "total_weight": spectrum["total_weight"],
            "histogram": spectrum["config"]["histogram"],
        },
    )
    write_spectrum_csv(out_path, spec, manifest, extra)
    manifest.outputs.append(str(out_path))
    manifest_path = out_path.with_suffix(out_path.suffix + ".manifest.json")
    manifest_path.write_text(manifest.to_json() + "\n")
    return [str(out_path), str(manifest_path)]


@click.group()
@click.version_option(version=__version__, prog_name="nvodmr")
@click.option("--server", envvar=SERVER_ENV, default=None, help="Remote service URL (default: in-process).")
@click.pass_context
def main(ctx, server):
    """Simulate and analyze ODMR spectra of NV ensembles in 13C-enriched diamond."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--config", "config_arg", required=True, help="Config TOML path or preset name.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--threads", type=int, default=1, show_default=True, help="Worker threads (never changes results).")
@click.option("--n-samples", type=int, default=None, help="Override the config sample count.")
@click.pass_context
def simulate(ctx, config_arg, seed, out_path, threads, n_samples):
    """Run one ensemble simulation and write a spectrum CSV plus manifest."""
    if threads < 1:
        _fail("--threads must be at least 1", 2)
    payload = _config_payload(config_arg)
    payload.update({"seed": seed, "n_samples": n_samples, "threads": threads})
    data = _check(_call("POST", "/simulate", payload, ctx.obj["server"]))
    outputs = _write_spectrum_files(data["spectrum"], out_path)
    click.echo(f"wrote {', '.join(outputs)}")


@main.command()
@click.option("--config", "config_arg", required=True)
@click.option("--direction", nargs=3, type=float, required=True, help="Crystal-frame sweep direction, e.g. 1 0 0.")
@click.option("--start", "b_start", type=float, default=0.0, show_default=True, help="First field value, Gauss.")
@click.option("--stop", "b_stop", type=float, required=True, help="Last field value, Gauss (inclusive).")
@click.option("--step", "b_step", type=float, required=True, help="Field increment, Gauss.")
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--n-samples", type=int, default=None)
@click.pass_context
def sweep(ctx, config_arg, direction, b_start, b_stop, b_step, out_dir, seed, threads, n_samples):
    """Sweep the field magnitude; one CSV per value plus an index file."""
    if b_step <= 0:
        _fail("--step must be positive", 2)
    if b_stop < b_start:
        _fail("--stop must be >= --start", 2)
    if threads < 1:
        _fail("--threads must be at least 1", 2)
    payload = _config_payload(config_arg)
    payload.update(
        {
            "seed": seed,
            "n_samples": n_samples,
            "threads": threads,
            "direction": list(direction),
            "b_start_gauss": b_start,
            "b_stop_gauss": b_stop,
            "b_step_gauss": b_step,
        }
    )
    data = _check(_call("POST", "/sweep", payload, ctx.obj["server"]))
    out_dir.mkdir(parents=True, exist_ok=True)
    index_rows = []
    for spectrum, magnitude in zip(data["spectra"], data["magnitudes_gauss"]):
        name = f"spectrum_B{magnitude:08.2f}G.csv"
        _write_spectrum_files(
            spectrum,
            out_dir / name,
            extra={"sweep_magnitude_gauss": magnitude, "sweep_direction": list(direction)},
        )
        index_rows.append(f"{magnitude:.6g},{name}")
    index_path = out_dir / "index.csv"
    index_path.write_text("# columns: b_gauss,filename\n" + "\n".join(index_rows) + "\n")
    click.echo(f"wrote {len(index_rows)} spectra and {index_path}")


@main.command()
@click.option("--config", "config_arg", required=True)
@click.pass_context
def background(ctx, config_arg):
    """Print the near/far/total background field standard deviations."""
    payload = _config_payload(config_arg)
    data = _check(_call("POST", "/background", payload, ctx.obj["server"]))
    click.echo(f"near:  {data['near_mhz']:.3f} MHz")
    click.echo(f"far:   {data['far_mhz']:.3f} MHz")
    click.echo(f"total: {data['total_mhz']:.3f} MHz")


@main.command()
@click.argument("sim_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("exp_csv", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--invert", is_flag=True, help="Treat the experimental curve as fluorescence dips (compare 1 - f).")
@click.option("--min-prominence", type=float, default=0.05, show_default=True)
@click.pass_context
def compare(ctx, sim_csv, exp_csv, invert, min_prominence):
    """Affine-fit an experimental curve against a simulated spectrum CSV."""
    from .iocsv import read_curve_csv

    try:
        sim_f, sim_v, _ = read_curve_csv(sim_csv)
        exp_f, exp_v, _ = read_curve_csv(exp_csv)
    except ValueError as exc:
        _fail(str(exc), 2)
    payload = {
        "simulated": {"freq_mhz": sim_f.tolist(), "values": sim_v.tolist()},
        "experimental": {"freq_mhz": exp_f.tolist(), "values": exp_v.tolist()},
        "min_prominence": min_prominence,
        "invert_experimental": invert,
    }
    data = _check(_call("POST", "/compare", payload, ctx.obj["server"]))
    click.echo(f"rms_residual: {data['rms_residual']:.6g}")
    click.echo(f"scale:        {data['scale']:.6g}")
    click.echo(f"offset:       {data['offset']:.6g}")
    click.echo(f"matched peaks ({len(data['matched_peaks'])}):")
    for match in data["matched_peaks"]:
        s, e = match["simulated"], match["experimental"]
        click.echo(
            f"  sim {s['center_mhz']:9.2f} MHz (fwhm {s['fwhm_mhz']:6.2f})"
            f"  exp {e['center_mhz']:9.2f} MHz (fwhm {e['fwhm_mhz']:6.2f})"
            f"  delta {match['delta_center_mhz']:+7.2f} MHz"
        )


@main.command()
@click.argument("csv_paths", nargs=-1, type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(dir_okay=False, path_type=Path), required=True)
@click.option("--dips", is_flag=True, help="Render in the fluorescence-dip convention.")
@click.option("--contrast", type=float, default=0.3, show_default=True)
@click.pass_context
def plot(ctx, csv_paths, out_path, dips, contrast):
    """Render one or more spectrum CSVs as vertically offset traces (SVG)."""
    from .iocsv import read_curve_csv

    if not csv_paths:
        _fail("at least one CSV path is required", 2)
    series = []
    for path in csv_paths:
        if not path.is_file():
            _fail(f"no such file: {path}", 2)
        try:
            freqs, values, _ = read_curve_csv(path)
        except ValueError as exc:
            _fail(str(exc), 2)
        series.append({"label": path.stem, "freq_mhz": freqs.tolist(), "values": values.tolist()})
    payload = {"series": series, "dips": dips, "contrast": contrast}
    resp = _call("POST", "/plot", payload, ctx.obj["server"])
    if resp.status_code != 200:
        _check(resp)
    out_path.write_bytes(resp.content)
    click.echo(f"wrote {out_path}")


@main.command()
@click.pass_context
def presets(ctx):
    """List bundled presets."""
    data = _check(_call("GET", "/presets", None, ctx.obj["server"]))
    for preset in data:
        click.echo(f"{preset['name']:22s} {preset['note']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the simulation service under uvicorn."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
