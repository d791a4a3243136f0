"""Monte Carlo ensemble simulation of ODMR spectra.

Each instance draws strain, a quasistatic background field, explicit-site
occupancy and an NV orientation, builds its transition lines (dense exact or
secular factorized backend) and deposits them into a shared frequency
histogram. Instance RNG streams are keyed by (seed, draw_index) through a
counter-based generator, and per-block partial histograms are reduced in
block order, so results are bit-identical for a given seed regardless of the
worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .bath import BathModel, background_sigma
from .constants import GAMMA_C13_MHZ_PER_G, NV_FRAMES, S1X, S1Y, S1Z
from .spincore import (
    FieldSpec,
    HyperfineCoupling,
    ZfsParams,
    _grouped_shift_distribution,
    build_register,
    electron_hamiltonian,
    embed_operator,
    hyperfine_term,
    pair_weight_arrays,
    WEIGHT_FLOOR,
)

# Largest register the dense backend handles by default (3 * 2^8).
EXACT_BACKEND_MAX_DIM = 768

# Distinguishes instance streams from any other Philox use of the same seed.
_STREAM_SALT = 0x6E766F646D72

_BLOCK_TARGET_BYTES = 48 * 2**20


@dataclass(frozen=True)
class HistogramSpec:
    f_min_mhz: float = 2370.0
    f_max_mhz: float = 3370.0
    bin_width_mhz: float = 1.0

    def __post_init__(self):
        if self.bin_width_mhz <= 0:
            raise ValueError("bin width must be positive")
        if not self.f_min_mhz < self.f_max_mhz:
            raise ValueError("f_min must lie below f_max")

    @property
    def n_bins(self) -> int:
        return int(np.floor((self.f_max_mhz - self.f_min_mhz) / self.bin_width_mhz))

    @property
    def bin_centers(self) -> np.ndarray:
        return self.f_min_mhz + (np.arange(self.n_bins) + 0.5) * self.bin_width_mhz


@dataclass(frozen=True)
class SimulationConfig:
    """Full description of one ensemble run.

    `enrichment` is the single 13C occupation probability: it thins the
    explicit-site occupancy and rescales the bath background (the bath
    model's own enrichment field is overridden by this value).
    """

    zfs_d_mhz: float = 2870.0
    delta_e_mhz: float = 1.0
    bath: BathModel = field(default_factory=BathModel)
    explicit_sites: tuple[HyperfineCoupling, ...] = ()
    enrichment: float = 1.0
    field_spec: FieldSpec = field(default_factory=FieldSpec)
    orientation_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    n_samples: int = 100_000
    histogram: HistogramSpec = field(default_factory=HistogramSpec)
    backend: str = "auto"
    seed: int = 20260810
    nucleus_cap: int = 12
    include_nuclear_zeeman: bool = False
    lorentz_fwhm_mhz: float = 0.0
    background_override_mhz: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "explicit_sites", tuple(self.explicit_sites))
        object.__setattr__(self, "orientation_weights", tuple(float(w) for w in self.orientation_weights))
        if self.zfs_d_mhz <= 0:
            raise ValueError("zfs_d_mhz must be positive")
        if self.delta_e_mhz < 0:
            raise ValueError("delta_e_mhz must be nonnegative")
        if not 0.0 <= self.enrichment <= 1.0:
            raise ValueError("enrichment must lie in [0, 1]")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if len(self.orientation_weights) != 4 or min(self.orientation_weights) < 0:
            raise ValueError("orientation_weights must be 4 nonnegative values")
        if sum(self.orientation_weights) <= 0:
            raise ValueError("orientation_weights must not all vanish")
        if self.backend not in ("exact", "factorized", "auto"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.lorentz_fwhm_mhz < 0:
            raise ValueError("lorentz_fwhm_mhz must be nonnegative")

    @property
    def explicit_labels(self) -> frozenset[str]:
        return frozenset(s.label for s in self.explicit_sites)

    def background_sigma_mhz(self) -> float:
        """Per-component std of the Gaussian background field, MHz."""
        if self.background_override_mhz is not None:
            if self.background_override_mhz < 0:
                raise ValueError("background override must be nonnegative")
            return self.background_override_mhz
        model = replace(self.bath, params=replace(self.bath.params, enrichment=self.enrichment))
        return background_sigma(model, self.explicit_labels)[2]

    def resolved_backend(self) -> str:
        if self.backend != "auto":
            return self.backend
        dim = 3 * 2 ** len(self.explicit_sites)
        return "exact" if dim <= EXACT_BACKEND_MAX_DIM else "factorized"

    def as_dict(self) -> dict:
        """Plain-data echo of every field, suitable for JSON round trips."""
        return {
            "zfs_d_mhz": self.zfs_d_mhz,
            "delta_e_mhz": self.delta_e_mhz,
            "bath": {
                "xi_mhz_a3": self.bath.params.xi_mhz_a3,
                "rho_per_a3": self.bath.params.rho_per_a3,
                "r0_angstrom": self.bath.params.r0_angstrom,
                "spin_sigma": self.bath.params.spin_sigma,
                "threshold_mhz": self.bath.threshold_mhz,
                "catalog": [
                    {"label": e.label, "a_mhz": e.a_mhz, "multiplicity": e.multiplicity}
                    for e in self.bath.catalog
                ],
            },
            "explicit_sites": [
                {
                    "label": s.label,
                    "a_row_mhz": list(s.a_row),
                    **({"full_tensor_mhz": [list(r) for r in s.full_tensor]} if s.full_tensor else {}),
                }
                for s in self.explicit_sites
            ],
            "enrichment": self.enrichment,
            "field": {
                "b_crystal_gauss": list(self.field_spec.b_crystal_gauss),
                "gamma_e_mhz_per_g": self.field_spec.gamma_e_mhz_per_g,
            },
            "orientation_weights": list(self.orientation_weights),
            "n_samples": self.n_samples,
            "histogram": {
                "f_min_mhz": self.histogram.f_min_mhz,
                "f_max_mhz": self.histogram.f_max_mhz,
                "bin_width_mhz": self.histogram.bin_width_mhz,
            },
            "backend": self.backend,
            "seed": self.seed,
            "nucleus_cap": self.nucleus_cap,
            "include_nuclear_zeeman": self.include_nuclear_zeeman,
            "lorentz_fwhm_mhz": self.lorentz_fwhm_mhz,
            "background_override_mhz": self.background_override_mhz,
        }


@dataclass(frozen=True)
class InstanceParams:
    e_mhz: float
    b_background_mhz: tuple[float, float, float]
    occupancy: int
    orientation: int


@dataclass
class Spectrum:
    """Binned line strength vs MW frequency, normalized to unit maximum."""

    bin_centers: np.ndarray
    intensity: np.ndarray
    metadata: dict

    @property
    def bin_width_mhz(self) -> float:
        return float(self.metadata["histogram"]["bin_width_mhz"])


def instance_rng(seed: int, draw_index: int) -> np.random.Generator:
    """Counter-based stream for one instance; pure in (seed, draw_index)."""
    if draw_index < 0:
        raise ValueError("draw_index must be nonnegative")
    key = [seed & 0xFFFFFFFFFFFFFFFF, _STREAM_SALT]
    return np.random.Generator(np.random.Philox(key=key, counter=[0, draw_index, 0, 0]))


def orientation_field(
    b_crystal_gauss: Sequence[float], orientation: int, gamma_e_mhz_per_g: float
) -> np.ndarray:
    """External field in the NV frame of one orientation, frequency units (MHz)."""
    if orientation not in (0, 1, 2, 3):
        raise ValueError(f"orientation must be 0..3, got {orientation}")
    return gamma_e_mhz_per_g * (NV_FRAMES[orientation] @ np.asarray(b_crystal_gauss, dtype=float))


def sample_instance(config: SimulationConfig, draw_index: int) -> InstanceParams:
    """Draw one instance's strain, background field, occupancy and orientation.

    Draw order is fixed (strain, background, occupancy, orientation) so the
    stream layout is part of the determinism contract.
    """
    sigma = config.background_sigma_mhz()
    cum = np.cumsum(config.orientation_weights)
    return _sample_with(config, draw_index, sigma, cum / cum[-1])


def _sample_with(
    config: SimulationConfig, draw_index: int, sigma: float, cum_weights: np.ndarray
) -> InstanceParams:
    g = instance_rng(config.seed, draw_index)
    e = float(g.normal(0.0, config.delta_e_mhz))
    b = g.normal(0.0, sigma, size=3)
    n = len(config.explicit_sites)
    occupancy = 0
    if n:
        hits = g.random(n) < config.enrichment
        occupancy = int(np.sum(hits.astype(np.uint64) << np.arange(n, dtype=np.uint64)))
    orientation = int(np.searchsorted(cum_weights, g.random(), side="right"))
    return InstanceParams(
        e_mhz=e,
        b_background_mhz=tuple(float(x) for x in b),
        occupancy=occupancy,
        orientation=min(orientation, 3),
    )


_ELECTRON_STACK = np.array([S1X, S1Y, S1Z])
_S1Z2 = S1Z @ S1Z
_STRAIN3 = S1X @ S1X - S1Y @ S1Y


def _electron_blocks(d_mhz: float, e: np.ndarray, b_nv: np.ndarray) -> np.ndarray:
    """Batched 3x3 electron Hamiltonians for strain samples e and fields b_nv."""
    return (
        d_mhz * _S1Z2
        + e[:, None, None] * _STRAIN3
        + np.einsum("bc,cij->bij", b_nv, _ELECTRON_STACK)
    )


class _ExactEngine:
    """Exact backend on the full composite space.

    With z-row-only couplings every nuclear operator a·s commutes with the
    Hamiltonian, which therefore splits exactly into 3x3 electron blocks
    H_el + delta·Sz over the nuclear shift configurations delta; the engine
    diagonalizes those blocks (cheap, batched) instead of the dense
    3·2^n-dimensional matrix. Full hyperfine tensors or nuclear Zeeman terms
    break the commutation, so those fall back to the dense pipeline. Both
    paths reproduce build_hamiltonian → eigendecompose → extract_transitions
    to rounding.
    """

    def __init__(self, config: SimulationConfig, force_dense: bool = False):
        n = len(config.explicit_sites)
        self.register = build_register(n, cap=config.nucleus_cap)
        self.config = config
        self.magnitudes = np.array([c.magnitude for c in config.explicit_sites])
        self.structured = (
            not force_dense
            and not config.include_nuclear_zeeman
            and all(c.full_tensor is None for c in config.explicit_sites)
        )
        if self.structured:
            return
        reg = self.register
        self.sx = embed_operator(S1X, 0, reg)
        self.sy = embed_operator(S1Y, 0, reg)
        self.sz = embed_operator(S1Z, 0, reg)
        self.sz2 = self.sz @ self.sz
        self.strain = embed_operator(S1X @ S1X - S1Y @ S1Y, 0, reg)
        self.spin_stack = np.array([self.sx, self.sy, self.sz])
        self.site_terms = np.array(
            [hyperfine_term(c, k + 1, reg) for k, c in enumerate(config.explicit_sites)]
        ).reshape(n, reg.dim, reg.dim)
        if config.include_nuclear_zeeman:
            from .constants import SHX, SHY, SHZ

            self.nuclear_ops = np.array(
                [
                    [embed_operator(s, k + 1, reg) for s in (SHX, SHY, SHZ)]
                    for k in range(n)
                ]
            ).reshape(n, 3, reg.dim, reg.dim)
        else:
            self.nuclear_ops = None

    def lines(self, params: _BlockParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self.structured:
            return self._lines_structured(params)
        return self._lines_dense(params)

    def _lines_structured(self, params: _BlockParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = len(self.magnitudes)
        n_batch = len(params.e)
        if n:
            codes = params.occ.astype(np.int64) @ (1 << np.arange(n, dtype=np.int64))
        else:
            codes = np.zeros(n_batch, dtype=np.int64)
        h_el = _electron_blocks(self.config.zfs_d_mhz, params.e, params.b_nv)
        out_f, out_w, out_i = [], [], []
        for code in np.unique(codes):
            sel = np.flatnonzero(codes == code)
            mags = self.magnitudes[[(int(code) >> k) & 1 == 1 for k in range(n)]]
            offsets, counts = _grouped_shift_distribution(mags, 0.5)
            # unoccupied sites keep their doublet degeneracy in the register
            counts = counts * 2.0 ** (n - mags.size)
            n_shift = offsets.size
            h = h_el[sel][:, None, :, :] + offsets[None, :, None, None] * S1Z
            values, vectors = np.linalg.eigh(h.reshape(len(sel) * n_shift, 3, 3))
            freqs, weights = self._electron_pair_weights(values, vectors)
            weights = weights * np.tile(counts, len(sel))[:, None, None]
            positive = freqs > 0
            wmax = (
                np.where(positive, weights, 0.0)
                .reshape(len(sel), n_shift * 9)
                .max(axis=1)
            )
            keep = positive & (weights >= WEIGHT_FLOOR * np.repeat(wmax, n_shift)[:, None, None])
            keep &= weights > 0
            rows = np.broadcast_to(
                np.arange(len(sel) * n_shift)[:, None, None], freqs.shape
            )[keep]
            out_f.append(freqs[keep])
            out_w.append(weights[keep])
            out_i.append(np.repeat(sel, n_shift)[rows])
        return np.concatenate(out_f), np.concatenate(out_w), np.concatenate(out_i)

    @staticmethod
    def _electron_pair_weights(values: np.ndarray, vectors: np.ndarray):
        pop = np.abs(vectors[:, 1, :]) ** 2
        vh = vectors.conj().swapaxes(1, 2)
        drive = 0.5 * (np.abs(vh @ (S1X @ vectors)) ** 2 + np.abs(vh @ (S1Y @ vectors)) ** 2)
        weights = pop[:, :, None] * drive
        freqs = values[:, None, :] - values[:, :, None]
        return freqs, weights

    def _lines_dense(self, params: _BlockParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        cfg = self.config
        b_nv = params.b_nv
        h = (
            cfg.zfs_d_mhz * self.sz2
            + params.e[:, None, None] * self.strain
            + np.einsum("bc,cij->bij", b_nv, self.spin_stack)
        )
        if self.site_terms.size:
            h += np.einsum("bk,kij->bij", params.occ, self.site_terms)
        if self.nuclear_ops is not None and self.site_terms.size:
            b_nuc = b_nv * (GAMMA_C13_MHZ_PER_G / cfg.field_spec.gamma_e_mhz_per_g)
            h += np.einsum("bk,bj,kjpq->bpq", params.occ, b_nuc, self.nuclear_ops)
        values, vectors = np.linalg.eigh(h)
        freqs, weights = pair_weight_arrays(values, vectors, self.sx, self.sy, self.register.ms0_block)
        positive = freqs > 0
        wmax = np.where(positive, weights, 0.0).max(axis=(1, 2))
        keep = positive & (weights >= WEIGHT_FLOOR * wmax[:, None, None]) & (weights > 0)
        batch_idx = np.broadcast_to(
            np.arange(len(params.e))[:, None, None], freqs.shape
        )[keep]
        return freqs[keep], weights[keep], batch_idx


class _FactorizedEngine:
    """Secular pipeline: batched 3x3 electron blocks plus nuclear shift convolution."""

    def __init__(self, config: SimulationConfig):
        self.config = config
        self.magnitudes = np.array([c.magnitude for c in config.explicit_sites])

    def lines(self, params: _BlockParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        h = _electron_blocks(self.config.zfs_d_mhz, params.e, params.b_nv)
        values, vectors = np.linalg.eigh(h)
        pop = np.abs(vectors[:, 1, :]) ** 2
        sz_vec = np.einsum("ij,bjk->bik", S1Z, vectors)
        sz_exp = np.real(np.einsum("bik,bik->bk", vectors.conj(), sz_vec))
        vh = vectors.conj().swapaxes(1, 2)
        drive = 0.5 * (
            np.abs(vh @ (S1X @ vectors)) ** 2 + np.abs(vh @ (S1Y @ vectors)) ** 2
        )
        base_weight = pop[:, :, None] * drive

        all_freqs, all_weights, all_idx = [], [], []
        occ_bits = params.occ.astype(bool)
        n_sites = len(self.magnitudes)
        for b in range(len(params.e)):
            mags = self.magnitudes[occ_bits[b]]
            degeneracy = 2.0 ** (n_sites - mags.size)
            wmax = 0.0
            inst_freqs, inst_weights = [], []
            for k in range(3):
                for l in range(3):
                    if k == l or base_weight[b, k, l] <= 0:
                        continue
                    offsets, counts = _grouped_shift_distribution(
                        mags, 0.5 * (sz_exp[b, l] - sz_exp[b, k])
                    )
                    freqs = (values[b, l] - values[b, k]) + offsets
                    pos = freqs > 0
                    if np.any(pos):
                        w = degeneracy * base_weight[b, k, l] * counts[pos]
                        inst_freqs.append(freqs[pos])
                        inst_weights.append(w)
                        wmax = max(wmax, w.max())
            if not inst_freqs:
                continue
            freqs = np.concatenate(inst_freqs)
            weights = np.concatenate(inst_weights)
            keep = weights >= WEIGHT_FLOOR * wmax
            all_freqs.append(freqs[keep])
            all_weights.append(weights[keep])
            all_idx.append(np.full(int(keep.sum()), b))
        if not all_freqs:
            empty = np.empty(0)
            return empty, empty.copy(), np.empty(0, dtype=int)
        return (
            np.concatenate(all_freqs),
            np.concatenate(all_weights),
            np.concatenate(all_idx),
        )


@dataclass
class _BlockParams:
    e: np.ndarray
    b_nv: np.ndarray
    occ: np.ndarray
    orientation: np.ndarray


def _sample_block(
    config: SimulationConfig, start: int, count: int, sigma: float, cum_weights: np.ndarray
) -> _BlockParams:
    """Stack `count` instance draws starting at `start`.

    Reuses one Philox bit generator, rewinding its counter to [0, draw_index]
    before each instance; the streams (and therefore the values) are exactly
    those of sample_instance.
    """
    n = len(config.explicit_sites)
    e = np.empty(count)
    b_bg = np.empty((count, 3))
    occ = np.zeros((count, n))
    orientation = np.empty(count, dtype=int)
    bitgen = np.random.Philox(key=[config.seed & 0xFFFFFFFFFFFFFFFF, _STREAM_SALT])
    g = np.random.Generator(bitgen)
    template = bitgen.state
    for i in range(count):
        template["state"]["counter"][1] = start + i
        template["buffer_pos"] = 4
        bitgen.state = template
        e[i] = g.normal(0.0, config.delta_e_mhz)
        b_bg[i] = g.normal(0.0, sigma, size=3)
        if n:
            occ[i] = g.random(n) < config.enrichment
        orientation[i] = min(np.searchsorted(cum_weights, g.random(), side="right"), 3)
    gamma = config.field_spec.gamma_e_mhz_per_g
    b_ext = gamma * np.einsum(
        "bij,j->bi", NV_FRAMES[orientation], np.asarray(config.field_spec.b_crystal_gauss)
    )
    return _BlockParams(e=e, b_nv=b_ext + b_bg, occ=occ, orientation=orientation)


def _block_size(config: SimulationConfig) -> int:
    dim = 3 * 2 ** len(config.explicit_sites) if config.resolved_backend() == "exact" else 3
    per_instance = 16 * dim * dim * 6
    return int(np.clip(_BLOCK_TARGET_BYTES // per_instance, 1, 2048))


def _run_block(engine, config, start, count, sigma, cum_weights):
    hist = config.histogram
    params = _sample_block(config, start, count, sigma, cum_weights)
    freqs, weights, batch_idx = engine.lines(params)
    partials = np.zeros((4, hist.n_bins))
    sq = np.zeros(hist.n_bins)
    if freqs.size:
        bins = np.floor((freqs - hist.f_min_mhz) / hist.bin_width_mhz).astype(np.int64)
        in_range = (bins >= 0) & (bins < hist.n_bins)
        bins = bins[in_range]
        w = weights[in_range]
        orient = params.orientation[batch_idx[in_range]]
        flat = np.bincount(orient * hist.n_bins + bins, weights=w, minlength=4 * hist.n_bins)
        partials = flat.reshape(4, hist.n_bins)
        sq = np.bincount(bins, weights=w * w, minlength=hist.n_bins)
    return partials, sq


def _lorentz_smooth(total: np.ndarray, fwhm_mhz: float, bin_width: float) -> np.ndarray:
    half = fwhm_mhz / 2.0
    reach = int(np.ceil(30 * half / bin_width))
    x = np.arange(-reach, reach + 1) * bin_width
    kernel = half / (np.pi * (x**2 + half**2))
    kernel /= kernel.sum()
    return np.convolve(total, kernel, mode="same")


def simulate_spectrum(config: SimulationConfig, threads: int = 1, draw_offset: int = 0) -> Spectrum:
    """Run the Monte Carlo ensemble and histogram all transition lines.

    `threads` only parallelizes block evaluation; partial histograms are
    reduced in block order, so the result is identical for any thread count.
    `draw_offset` shifts the instance counter (used by field sweeps to give
    every field value its own slice of the stream).
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    hist = config.histogram
    sigma = config.background_sigma_mhz()
    cum = np.cumsum(config.orientation_weights)
    cum_weights = cum / cum[-1]
    backend = config.resolved_backend()
    engine = _ExactEngine(config) if backend == "exact" else _FactorizedEngine(config)

    block = _block_size(config)
    starts = list(range(0, config.n_samples, block))
    jobs = [(draw_offset + s, min(block, config.n_samples - s)) for s in starts]

    def run(job):
        return _run_block(engine, config, job[0], job[1], sigma, cum_weights)

    if threads == 1 or len(jobs) == 1:
        results = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))

    partials = np.zeros((4, hist.n_bins))
    sq = np.zeros(hist.n_bins)
    for block_partials, block_sq in results:
        partials += block_partials
        sq += block_sq

    total = partials.sum(axis=0)
    total_weight = float(total.sum())
    smoothed = (
        _lorentz_smooth(total, config.lorentz_fwhm_mhz, hist.bin_width_mhz)
        if config.lorentz_fwhm_mhz > 0
        else total
    )
    peak = smoothed.max()
    intensity = smoothed / peak if peak > 0 else np.zeros_like(smoothed)
    metadata = {
        "config": config.as_dict(),
        "histogram": config.as_dict()["histogram"],
        "seed": config.seed,
        "draw_offset": draw_offset,
        "backend": backend,
        "background_sigma_mhz": sigma,
        "total_weight": total_weight,
        "raw_weights": total,
        "raw_weight_sq": sq,
        "orientation_partials": partials,
        "field_gauss": list(config.field_spec.b_crystal_gauss),
    }
    return Spectrum(bin_centers=hist.bin_centers, intensity=intensity, metadata=metadata)


def sweep_field(
    config: SimulationConfig,
    magnitudes_gauss: Sequence[float],
    direction_crystal: Sequence[float],
    threads: int = 1,
) -> list[Spectrum]:
    """One spectrum per field magnitude along a crystal-frame direction.

    Every field value consumes its own disjoint slice of the instance stream
    (offset k * n_samples), so sweeps are reproducible and per-field results
    independent.
    """
    direction = np.asarray(direction_crystal, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("sweep direction must be nonzero")
    direction = direction / norm
    spectra = []
    for k, magnitude in enumerate(magnitudes_gauss):
        field_spec = FieldSpec(
            b_crystal_gauss=tuple(magnitude * direction),
            gamma_e_mhz_per_g=config.field_spec.gamma_e_mhz_per_g,
        )
        cfg = replace(config, field_spec=field_spec)
        spectrum = simulate_spectrum(cfg, threads=threads, draw_offset=k * config.n_samples)
        spectrum.metadata["sweep_magnitude_gauss"] = float(magnitude)
        spectrum.metadata["sweep_direction"] = [float(x) for x in direction]
        spectra.append(spectrum)
    return spectra
