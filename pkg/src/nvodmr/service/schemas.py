"""Pydantic request/response models for the simulation service."""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from ..analysis import ComparisonReport, Peak
from ..ensemble import Spectrum


class CatalogEntryModel(BaseModel):
    label: str
    a_mhz: float
    multiplicity: int = 1


class BathSchema(BaseModel):
    xi_mhz_a3: float = 19.9
    rho_per_a3: float = 0.177
    r0_angstrom: float = 6.0
    spin_sigma: float = 0.5
    threshold_mhz: float = 8.0
    catalog: list[CatalogEntryModel] = Field(default_factory=list)
    background_override_mhz: float | None = None


class SiteModel(BaseModel):
    label: str
    a_row_mhz: tuple[float, float, float]
    full_tensor_mhz: list[list[float]] | None = None


class ConfigModel(BaseModel):
    """Wire form of SimulationConfig; every field optional with defaults."""

    zfs_d_mhz: float = 2870.0
    delta_e_mhz: float = 1.0
    bath: BathSchema = Field(default_factory=BathSchema)
    explicit_sites: list[SiteModel] = Field(default_factory=list)
    enrichment: float = 1.0
    b_crystal_gauss: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gamma_e_mhz_per_g: float = 2.8025
    orientation_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    n_samples: int = 100_000
    f_min_mhz: float = 2370.0
    f_max_mhz: float = 3370.0
    bin_width_mhz: float = 1.0
    backend: str = "auto"
    seed: int = 20260810
    nucleus_cap: int = 12
    include_nuclear_zeeman: bool = False
    lorentz_fwhm_mhz: float = 0.0

    def to_nested_dict(self) -> dict:
        return {
            "zfs": {"d_mhz": self.zfs_d_mhz, "delta_e_mhz": self.delta_e_mhz},
            "bath": {
                "xi_mhz_a3": self.bath.xi_mhz_a3,
                "rho_per_a3": self.bath.rho_per_a3,
                "r0_angstrom": self.bath.r0_angstrom,
                "spin_sigma": self.bath.spin_sigma,
                "threshold_mhz": self.bath.threshold_mhz,
                "catalog": [e.model_dump() for e in self.bath.catalog],
                "background_override_mhz": self.bath.background_override_mhz,
            },
            "explicit_sites": [
                {k: v for k, v in s.model_dump().items() if v is not None}
                for s in self.explicit_sites
            ],
            "sample": {
                "enrichment": self.enrichment,
                "orientation_weights": list(self.orientation_weights),
            },
            "field": {
                "b_crystal_gauss": list(self.b_crystal_gauss),
                "gamma_e_mhz_per_g": self.gamma_e_mhz_per_g,
            },
            "run": {"n_samples": self.n_samples, "backend": self.backend, "seed": self.seed},
            "histogram": {
                "f_min_mhz": self.f_min_mhz,
                "f_max_mhz": self.f_max_mhz,
                "bin_width_mhz": self.bin_width_mhz,
            },
            "options": {
                "nucleus_cap": self.nucleus_cap,
                "include_nuclear_zeeman": self.include_nuclear_zeeman,
                "lorentz_fwhm_mhz": self.lorentz_fwhm_mhz,
            },
        }


class RunRequest(BaseModel):
    """Common simulate/sweep request base: a preset name or an inline config,
    plus optional overrides applied on top."""

    preset: str | None = None
    config: ConfigModel | None = None
    seed: int | None = None
    n_samples: int | None = Field(default=None, ge=1)
    threads: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.preset is None) == (self.config is None):
            raise ValueError("provide exactly one of 'preset' or 'config'")
        return self


class SimulateRequest(RunRequest):
    pass


class SweepRequest(RunRequest):
    direction: tuple[float, float, float]
    b_start_gauss: float = 0.0
    b_stop_gauss: float = 0.0
    b_step_gauss: float | None = None
    magnitudes_gauss: list[float] | None = None

    @model_validator(mode="after")
    def _grid_or_list(self):
        if self.magnitudes_gauss is None:
            if self.b_step_gauss is None or self.b_step_gauss <= 0:
                raise ValueError("b_step_gauss must be positive when magnitudes are not given")
            if self.b_stop_gauss < self.b_start_gauss:
                raise ValueError("b_stop_gauss must be >= b_start_gauss")
        return self


class SpectrumModel(BaseModel):
    bin_centers_mhz: list[float]
    intensity: list[float]
    seed: int
    config_hash: str
    backend: str
    background_sigma_mhz: float
    total_weight: float
    field_gauss: list[float]
    sweep_magnitude_gauss: float | None = None
    config: dict

    @classmethod
    def from_spectrum(cls, spectrum: Spectrum, cfg_hash: str) -> "SpectrumModel":
        meta = spectrum.metadata
        return cls(
            bin_centers_mhz=[float(x) for x in spectrum.bin_centers],
            intensity=[float(x) for x in spectrum.intensity],
            seed=int(meta["seed"]),
            config_hash=cfg_hash,
            backend=meta["backend"],
            background_sigma_mhz=float(meta["background_sigma_mhz"]),
            total_weight=float(meta["total_weight"]),
            field_gauss=[float(x) for x in meta["field_gauss"]],
            sweep_magnitude_gauss=meta.get("sweep_magnitude_gauss"),
            config=meta["config"],
        )


class SimulateResponse(BaseModel):
    spectrum: SpectrumModel
    version: str


class SweepResponse(BaseModel):
    spectra: list[SpectrumModel]
    magnitudes_gauss: list[float]
    direction: tuple[float, float, float]
    version: str


class BackgroundRequest(BaseModel):
    preset: str | None = None
    config: ConfigModel | None = None

    @model_validator(mode="after")
    def _exactly_one_source(self):
        if (self.preset is None) == (self.config is None):
            raise ValueError("provide exactly one of 'preset' or 'config'")
        return self


class BackgroundResponse(BaseModel):
    near_mhz: float
    far_mhz: float
    total_mhz: float


class CurveModel(BaseModel):
    freq_mhz: list[float]
    values: list[float]

    @model_validator(mode="after")
    def _lengths_match(self):
        if len(self.freq_mhz) != len(self.values):
            raise ValueError("freq_mhz and values must have equal length")
        return self


class PeaksRequest(BaseModel):
    curve: CurveModel
    min_prominence: float = 0.05
    bin_width_mhz: float | None = None


class PeakModel(BaseModel):
    center_mhz: float
    height: float
    fwhm_mhz: float

    @classmethod
    def from_peak(cls, peak: Peak) -> "PeakModel":
        return cls(center_mhz=peak.center_mhz, height=peak.height, fwhm_mhz=peak.fwhm_mhz)


class CompareRequest(BaseModel):
    simulated: CurveModel
    experimental: CurveModel
    min_prominence: float = 0.05
    invert_experimental: bool = False


class MatchedPeakModel(BaseModel):
    simulated: PeakModel
    experimental: PeakModel
    delta_center_mhz: float


class CompareResponse(BaseModel):
    rms_residual: float
    scale: float
    offset: float
    matched_peaks: list[MatchedPeakModel]

    @classmethod
    def from_report(cls, report: ComparisonReport) -> "CompareResponse":
        return cls(
            rms_residual=report.rms_residual,
            scale=report.scale,
            offset=report.offset,
            matched_peaks=[
                MatchedPeakModel(
                    simulated=PeakModel.from_peak(s),
                    experimental=PeakModel.from_peak(e),
                    delta_center_mhz=d,
                )
                for s, e, d in report.matched_peaks
            ],
        )


class PlotTraceModel(BaseModel):
    label: str = ""
    freq_mhz: list[float]
    values: list[float]

    @model_validator(mode="after")
    def _lengths_match(self):
        if len(self.freq_mhz) != len(self.values):
            raise ValueError("freq_mhz and values must have equal length")
        return self


class PlotRequest(BaseModel):
    series: list[PlotTraceModel]
    dips: bool = False
    contrast: float = 0.3


class PresetInfo(BaseModel):
    name: str
    note: str


class HealthResponse(BaseModel):
    status: str
    version: str
