import json

import numpy as np
import pytest

from nvodmr.config import (
    canonical_json,
    config_from_dict,
    config_from_flat_dict,
    config_hash,
    load_config_file,
    resolve_config,
)
from nvodmr.ensemble import SimulationConfig, simulate_spectrum
from nvodmr.iocsv import RunManifest, data_rows_bytes, read_curve_csv, write_spectrum_csv
from nvodmr.presets import get_preset

FULL_TOML = """
[zfs]
d_mhz = 2870.0
delta_e_mhz = 0.5

[field]
b_crystal_gauss = [10.0, 0.0, 0.0]
gamma_e_mhz_per_g = 2.8025

[sample]
enrichment = 0.999
orientation_weights = [1.0, 1.0, 0.0, 0.0]

[run]
n_samples = 250
seed = 5
backend = "exact"

[histogram]
f_min_mhz = 2400.0
f_max_mhz = 3400.0
bin_width_mhz = 2.0

[bath]
threshold_mhz = 8.0

[[bath.catalog]]
label = "shell_13p7"
a_mhz = 13.7
multiplicity = 6

[[explicit_sites]]
label = "first_shell"
a_row_mhz = [0.0, 0.0, 130.0]

[options]
lorentz_fwhm_mhz = 1.5
"""


@pytest.fixture
def toml_path(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(FULL_TOML)
    return path


class TestConfigParsing:
    def test_full_file(self, toml_path):
        cfg = load_config_file(toml_path)
        assert cfg.delta_e_mhz == 0.5
        assert cfg.field_spec.b_crystal_gauss == (10.0, 0.0, 0.0)
        assert cfg.orientation_weights == (1.0, 1.0, 0.0, 0.0)
        assert cfg.n_samples == 250
        assert cfg.histogram.n_bins == 500
        assert cfg.bath.catalog[0].multiplicity == 6
        assert cfg.explicit_sites[0].magnitude == 130.0
        assert cfg.lorentz_fwhm_mhz == 1.5

    def test_defaults_from_empty(self):
        cfg = config_from_dict({})
        assert cfg == SimulationConfig()

    def test_flat_round_trip(self):
        for name in ("trace2_zero_field", "natural_abundance"):
            cfg = get_preset(name)
            assert config_from_flat_dict(cfg.as_dict()) == cfg

    def test_invalid_values_raise(self):
        with pytest.raises(ValueError):
            config_from_dict({"run": {"backend": "warp"}})


class TestResolve:
    def test_path_wins(self, toml_path):
        assert resolve_config(str(toml_path)).n_samples == 250

    def test_env_preset_dir(self, tmp_path, monkeypatch, toml_path):
        monkeypatch.setenv("NVODMR_PRESET_DIR", str(toml_path.parent))
        assert resolve_config("run").n_samples == 250
        # env preset shadows nothing built in here, but builtin still works
        assert resolve_config("trace2_zero_field").enrichment == 0.999

    def test_builtin_preset(self):
        assert resolve_config("natural_abundance").enrichment == 0.011

    def test_unknown_raises(self):
        with pytest.raises(FileNotFoundError, match="no_such_thing"):
            resolve_config("no_such_thing")


class TestHashing:
    def test_stable_and_sensitive(self):
        a = get_preset("trace2_zero_field")
        b = get_preset("trace2_zero_field")
        assert config_hash(a) == config_hash(b)
        c = SimulationConfig(seed=a.seed + 1)
        assert config_hash(a) != config_hash(c)

    def test_canonical_json_parses(self):
        data = json.loads(canonical_json(get_preset("trace4_zero_field")))
        assert data["n_samples"] == 100_000


class TestCsvRoundTrip:
    def test_write_and_read(self, tmp_path):
        cfg = SimulationConfig(
            n_samples=50, seed=2, delta_e_mhz=0.0, background_override_mhz=0.0
        )
        spectrum = simulate_spectrum(cfg)
        manifest = RunManifest.for_config(cfg)
        out = tmp_path / "spec.csv"
        write_spectrum_csv(out, spectrum, manifest)

        freqs, values, header = read_curve_csv(out)
        assert np.allclose(freqs, spectrum.bin_centers, rtol=1e-5)
        assert np.allclose(values, spectrum.intensity, rtol=1e-5, atol=1e-9)
        assert header["config_hash"] == manifest.config_hash
        assert header["seed"] == "2"
        assert header["config"]["n_samples"] == 50

    def test_manifest_reproduces_rows(self, tmp_path):
        cfg = SimulationConfig(n_samples=120, seed=9, background_override_mhz=12.0)
        manifest = RunManifest.for_config(cfg)
        first = tmp_path / "a.csv"
        write_spectrum_csv(first, simulate_spectrum(cfg), manifest)

        recovered = config_from_flat_dict(json.loads(manifest.config_json))
        assert recovered == cfg
        second = tmp_path / "b.csv"
        write_spectrum_csv(second, simulate_spectrum(recovered), RunManifest.for_config(recovered))
        assert data_rows_bytes(first) == data_rows_bytes(second)

    def test_six_significant_digits(self, tmp_path):
        cfg = SimulationConfig(n_samples=10, seed=4, background_override_mhz=20.0)
        out = tmp_path / "spec.csv"
        write_spectrum_csv(out, simulate_spectrum(cfg), RunManifest.for_config(cfg))
        rows = [l for l in out.read_text().splitlines() if l and not l.startswith("#")]
        assert len(rows) == cfg.histogram.n_bins
        for row in rows[:50]:
            freq, value = row.split(",")
            assert len(freq.replace(".", "").replace("-", "").lstrip("0")) <= 6
            assert len(value.split("e")[0].replace(".", "").replace("-", "").lstrip("0")) <= 6

    def test_plain_two_column_file(self, tmp_path):
        path = tmp_path / "exp.csv"
        path.write_text("freq,fluor\n2850.0,0.98\n2860.0,0.95\n2870.0,0.90\n")
        freqs, values, header = read_curve_csv(path)
        assert freqs.tolist() == [2850.0, 2860.0, 2870.0]
        assert values[2] == 0.90
        assert header == {}

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# nothing\n")
        with pytest.raises(ValueError, match="no data rows"):
            read_curve_csv(path)
