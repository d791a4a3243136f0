import numpy as np
import pytest
from fastapi.testclient import TestClient

from nvodmr.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


SMALL_RUN = {"preset": "trace2_zero_field", "n_samples": 400, "seed": 12}


class TestMeta:
    def test_health(self, client):
        data = client.get("/health").json()
        assert data["status"] == "ok"

    def test_preset_listing(self, client):
        names = [p["name"] for p in client.get("/presets").json()]
        assert "trace2_zero_field" in names
        assert "natural_abundance" in names

    def test_preset_detail(self, client):
        data = client.get("/presets/trace4_zero_field").json()
        assert len(data["explicit_sites"]) == 11
        assert client.get("/presets/bogus").status_code == 404


class TestSimulate:
    def test_small_run(self, client):
        resp = client.post("/simulate", json=SMALL_RUN)
        assert resp.status_code == 200
        spec = resp.json()["spectrum"]
        assert len(spec["intensity"]) == len(spec["bin_centers_mhz"]) == 1000
        assert max(spec["intensity"]) == 1.0
        assert spec["seed"] == 12
        assert spec["backend"] == "exact"
        assert spec["config"]["n_samples"] == 400

    def test_deterministic_across_calls_and_threads(self, client):
        a = client.post("/simulate", json=SMALL_RUN).json()["spectrum"]["intensity"]
        b = client.post("/simulate", json={**SMALL_RUN, "threads": 3}).json()["spectrum"]["intensity"]
        assert a == b

    def test_inline_config(self, client):
        payload = {
            "config": {
                "n_samples": 50,
                "seed": 1,
                "delta_e_mhz": 0.0,
                "bath": {"background_override_mhz": 0.0},
            }
        }
        spec = client.post("/simulate", json=payload).json()["spectrum"]
        intensity = np.asarray(spec["intensity"])
        assert np.flatnonzero(intensity).tolist() == [500]

    def test_requires_exactly_one_source(self, client):
        assert client.post("/simulate", json={}).status_code == 422
        assert (
            client.post(
                "/simulate", json={"preset": "trace2_zero_field", "config": {"seed": 1}}
            ).status_code
            == 422
        )

    def test_bad_overrides_rejected(self, client):
        assert client.post("/simulate", json={**SMALL_RUN, "threads": 0}).status_code == 422
        assert client.post("/simulate", json={**SMALL_RUN, "n_samples": 0}).status_code == 422

    def test_mismatched_curve_rejected(self, client):
        bad = {"freq_mhz": [1.0, 2.0], "values": [1.0]}
        assert client.post("/peaks", json={"curve": bad}).status_code == 422

    def test_dimension_limit_maps_to_400(self, client):
        sites = [{"label": f"s{k}", "a_row_mhz": [0.0, 0.0, 10.0]} for k in range(4)]
        payload = {
            "config": {"explicit_sites": sites, "nucleus_cap": 3, "backend": "exact", "n_samples": 1}
        }
        resp = client.post("/simulate", json=payload)
        assert resp.status_code == 400
        assert resp.json()["detail"]["kind"] == "dimension_limit"


class TestBackground:
    @pytest.mark.parametrize(
        "preset,total", [("trace2_zero_field", 24.0), ("trace3_zero_field", 17.0), ("trace4_zero_field", 15.0)]
    )
    def test_calibrated_presets(self, client, preset, total):
        data = client.post("/background", json={"preset": preset}).json()
        assert data["total_mhz"] == pytest.approx(total, abs=0.5)
        assert data["far_mhz"] == pytest.approx(1.165, abs=0.01)

    def test_inline_zero_enrichment(self, client):
        data = client.post("/background", json={"config": {"enrichment": 0.0}}).json()
        assert data == {"near_mhz": 0.0, "far_mhz": 0.0, "total_mhz": 0.0}


class TestSweep:
    def test_grid_counts(self, client):
        payload = {
            **SMALL_RUN,
            "n_samples": 60,
            "direction": [1.0, 0.0, 0.0],
            "b_start_gauss": 0.0,
            "b_stop_gauss": 60.0,
            "b_step_gauss": 30.0,
        }
        data = client.post("/sweep", json=payload).json()
        assert data["magnitudes_gauss"] == [0.0, 30.0, 60.0]
        assert len(data["spectra"]) == 3
        assert data["spectra"][2]["sweep_magnitude_gauss"] == 60.0

    def test_bad_step_rejected(self, client):
        payload = {**SMALL_RUN, "direction": [1.0, 0.0, 0.0], "b_stop_gauss": 10.0, "b_step_gauss": 0.0}
        assert client.post("/sweep", json=payload).status_code == 422

    def test_111_sweep_grid_has_192_points(self, client):
        # 3 G increments up to 575 G: 0, 3, ..., 573
        payload = {
            "preset": "trace2_zero_field",
            "n_samples": 1,
            "seed": 1,
            "direction": [1.0, 1.0, 1.0],
            "b_start_gauss": 0.0,
            "b_stop_gauss": 575.0,
            "b_step_gauss": 3.0,
        }
        data = client.post("/sweep", json=payload).json()
        assert len(data["magnitudes_gauss"]) == 192
        assert data["magnitudes_gauss"][0] == 0.0
        assert data["magnitudes_gauss"][-1] == 573.0
        assert len(data["spectra"]) == 192


class TestAnalysisEndpoints:
    def _gaussian(self):
        f = np.arange(2370.5, 3370.0, 1.0)
        y = np.exp(-((f - 2870.0) ** 2) / 200.0)
        return {"freq_mhz": f.tolist(), "values": y.tolist()}

    def test_peaks(self, client):
        peaks = client.post("/peaks", json={"curve": self._gaussian()}).json()
        assert len(peaks) == 1
        assert peaks[0]["center_mhz"] == pytest.approx(2870.0, abs=1.0)

    def test_compare_identity_and_invert(self, client):
        curve = self._gaussian()
        data = client.post(
            "/compare", json={"simulated": curve, "experimental": curve}
        ).json()
        assert data["rms_residual"] < 1e-12
        assert data["scale"] == pytest.approx(1.0)

        dipped = {"freq_mhz": curve["freq_mhz"], "values": (1.0 - np.asarray(curve["values"])).tolist()}
        data = client.post(
            "/compare",
            json={"simulated": curve, "experimental": dipped, "invert_experimental": True},
        ).json()
        assert data["rms_residual"] < 1e-12
        assert data["scale"] == pytest.approx(1.0)

    def test_compare_overlap_error(self, client):
        curve = self._gaussian()
        far = {"freq_mhz": [9000.0, 9001.0], "values": [0.0, 1.0]}
        resp = client.post("/compare", json={"simulated": curve, "experimental": far})
        assert resp.status_code == 400
        assert resp.json()["detail"]["kind"] == "overlap_error"


class TestPlot:
    def test_svg_response(self, client):
        f = list(np.arange(2800.0, 2900.0, 1.0))
        series = [{"label": "a", "freq_mhz": f, "values": [0.5] * len(f)}]
        resp = client.post("/plot", json={"series": series})
        assert resp.status_code == 200
        assert resp.headers["content-type"].startswith("image/svg+xml")
        assert resp.content.startswith(b"<?xml")

    def test_empty_series_rejected(self, client):
        assert client.post("/plot", json={"series": []}).status_code == 400
