"""FastAPI service wrapping the simulator core.

All endpoints are stateless pure compute: a request fully determines the
response (fixed seeds included), so the service can sit behind any number of
workers. Error mapping: unknown presets are 404, domain validation errors are
400 with a `kind` marker the CLI turns into its exit codes.
"""

from __future__ import annotations

import io
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, HTTPException, Response

from .. import __version__
from ..analysis import OverlapError, compare, find_peaks
from ..bath import background_sigma
from ..config import config_from_dict, config_hash
from ..ensemble import SimulationConfig, Spectrum, simulate_spectrum, sweep_field
from ..plotting import plot_traces
from ..presets import PRESET_NOTES, PRESETS, get_preset
from ..spincore import DimensionLimitError
from . import schemas


def _error(status: int, kind: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"kind": kind, "message": message})


def _resolve_config(preset: str | None, config: schemas.ConfigModel | None) -> SimulationConfig:
    try:
        if preset is not None:
            return get_preset(preset)
        return config_from_dict(config.to_nested_dict())
    except KeyError as exc:
        raise _error(404, "unknown_preset", str(exc)) from exc
    except ValueError as exc:
        raise _error(400, "invalid_config", str(exc)) from exc


def _apply_overrides(cfg: SimulationConfig, req: schemas.RunRequest) -> SimulationConfig:
    if req.seed is not None:
        cfg = replace(cfg, seed=req.seed)
    if req.n_samples is not None:
        cfg = replace(cfg, n_samples=req.n_samples)
    return cfg


def _curve_spectrum(curve: schemas.CurveModel, bin_width: float | None = None) -> Spectrum:
    freqs = np.asarray(curve.freq_mhz, dtype=float)
    values = np.asarray(curve.values, dtype=float)
    if freqs.size < 2:
        raise _error(400, "invalid_curve", "curve needs at least two samples")
    order = np.argsort(freqs)
    freqs, values = freqs[order], values[order]
    width = bin_width if bin_width else float(np.median(np.diff(freqs)))
    if width <= 0:
        raise _error(400, "invalid_curve", "curve frequencies must not repeat everywhere")
    histogram = {"bin_width_mhz": width}
    return Spectrum(bin_centers=freqs, intensity=values, metadata={"histogram": histogram})


def create_app() -> FastAPI:
    app = FastAPI(title="nvodmr", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/presets", response_model=list[schemas.PresetInfo])
    def presets():
        return [
            schemas.PresetInfo(name=name, note=PRESET_NOTES.get(name, ""))
            for name in sorted(PRESETS)
        ]

    @app.get("/presets/{name}")
    def preset_detail(name: str):
        try:
            return get_preset(name).as_dict()
        except KeyError as exc:
            raise _error(404, "unknown_preset", str(exc)) from exc

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        cfg = _apply_overrides(_resolve_config(req.preset, req.config), req)
        try:
            spectrum = simulate_spectrum(cfg, threads=req.threads)
        except DimensionLimitError as exc:
            raise _error(400, "dimension_limit", str(exc)) from exc
        except ValueError as exc:
            raise _error(400, "invalid_config", str(exc)) from exc
        return schemas.SimulateResponse(
            spectrum=schemas.SpectrumModel.from_spectrum(spectrum, config_hash(cfg)),
            version=__version__,
        )

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep(req: schemas.SweepRequest):
        cfg = _apply_overrides(_resolve_config(req.preset, req.config), req)
        if req.magnitudes_gauss is not None:
            magnitudes = [float(b) for b in req.magnitudes_gauss]
        else:
            count = int(np.floor((req.b_stop_gauss - req.b_start_gauss) / req.b_step_gauss)) + 1
            magnitudes = [req.b_start_gauss + k * req.b_step_gauss for k in range(count)]
        try:
            spectra = sweep_field(cfg, magnitudes, req.direction, threads=req.threads)
        except DimensionLimitError as exc:
            raise _error(400, "dimension_limit", str(exc)) from exc
        except ValueError as exc:
            raise _error(400, "invalid_config", str(exc)) from exc
        cfg_hash = config_hash(cfg)
        return schemas.SweepResponse(
            spectra=[schemas.SpectrumModel.from_spectrum(s, cfg_hash) for s in spectra],
            magnitudes_gauss=magnitudes,
            direction=req.direction,
            version=__version__,
        )

    @app.post("/background", response_model=schemas.BackgroundResponse)
    def background(req: schemas.BackgroundRequest):
        cfg = _resolve_config(req.preset, req.config)
        model = replace(cfg.bath, params=replace(cfg.bath.params, enrichment=cfg.enrichment))
        near, far, total = background_sigma(model, cfg.explicit_labels)
        return schemas.BackgroundResponse(near_mhz=near, far_mhz=far, total_mhz=total)

    @app.post("/peaks", response_model=list[schemas.PeakModel])
    def peaks(req: schemas.PeaksRequest):
        spectrum = _curve_spectrum(req.curve, req.bin_width_mhz)
        try:
            found = find_peaks(spectrum, min_prominence=req.min_prominence)
        except ValueError as exc:
            raise _error(400, "invalid_curve", str(exc)) from exc
        return [schemas.PeakModel.from_peak(p) for p in found]

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare_curves(req: schemas.CompareRequest):
        simulated = _curve_spectrum(req.simulated)
        exp_values = np.asarray(req.experimental.values, dtype=float)
        if req.invert_experimental:
            exp_values = 1.0 - exp_values
        try:
            report = compare(
                simulated,
                np.asarray(req.experimental.freq_mhz, dtype=float),
                exp_values,
                min_prominence=req.min_prominence,
            )
        except OverlapError as exc:
            raise _error(400, "overlap_error", str(exc)) from exc
        except ValueError as exc:
            raise _error(400, "invalid_curve", str(exc)) from exc
        return schemas.CompareResponse.from_report(report)

    @app.post("/plot")
    def plot(req: schemas.PlotRequest):
        if not req.series:
            raise _error(400, "invalid_plot", "at least one trace is required")
        buffer = io.BytesIO()
        plot_traces(
            [
                (t.label, np.asarray(t.freq_mhz), np.asarray(t.values))
                for t in req.series
            ],
            buffer,
            dips=req.dips,
            contrast=req.contrast,
        )
        return Response(content=buffer.getvalue(), media_type="image/svg+xml")

    return app


app = create_app()
