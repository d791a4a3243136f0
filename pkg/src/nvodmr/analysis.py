"""Peak extraction and simulation-vs-experiment comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .ensemble import Spectrum


class OverlapError(ValueError):
    """Experimental curve covers too little of the simulated range."""


@dataclass(frozen=True)
class Peak:
    center_mhz: float
    height: float
    fwhm_mhz: float


@dataclass
class ComparisonReport:
    rms_residual: float
    scale: float
    offset: float
    matched_peaks: list[tuple[Peak, Peak, float]]


def find_peaks(spectrum: Spectrum, min_prominence: float = 0.05) -> list[Peak]:
    """Local maxima with topographic prominence above a fraction of the max.

    Widths are measured at half prominence by linear interpolation, which for
    an isolated line on a flat baseline is the FWHM.
    """
    if not 0.0 < min_prominence < 1.0:
        raise ValueError("min_prominence must lie in (0, 1)")
    y = np.asarray(spectrum.intensity, dtype=float)
    if y.size == 0:
        raise ValueError("spectrum is empty")
    top = y.max()
    if top <= 0:
        return []
    indices, props = scipy.signal.find_peaks(y, prominence=min_prominence * top)
    if indices.size == 0:
        return []
    widths = scipy.signal.peak_widths(
        y,
        indices,
        rel_height=0.5,
        prominence_data=(props["prominences"], props["left_bases"], props["right_bases"]),
    )[0]
    centers = np.asarray(spectrum.bin_centers, dtype=float)
    try:
        bin_width = spectrum.bin_width_mhz
    except (KeyError, TypeError):
        bin_width = float(centers[1] - centers[0]) if centers.size > 1 else 1.0
    return [
        Peak(center_mhz=float(centers[i]), height=float(y[i]), fwhm_mhz=float(w * bin_width))
        for i, w in zip(indices, widths)
    ]


def _match_peaks(
    sim_peaks: list[Peak], exp_peaks: list[Peak]
) -> list[tuple[Peak, Peak, float]]:
    """Greedy nearest-center pairing, closest pairs first, each peak used once."""
    candidates = sorted(
        ((abs(s.center_mhz - e.center_mhz), i, j) for i, s in enumerate(sim_peaks) for j, e in enumerate(exp_peaks)),
        key=lambda t: t[0],
    )
    used_s, used_e, matched = set(), set(), []
    for _, i, j in candidates:
        if i in used_s or j in used_e:
            continue
        used_s.add(i)
        used_e.add(j)
        matched.append((sim_peaks[i], exp_peaks[j], sim_peaks[i].center_mhz - exp_peaks[j].center_mhz))
    matched.sort(key=lambda t: t[0].center_mhz)
    return matched


def compare(
    simulated: Spectrum,
    exp_freq_mhz: np.ndarray,
    exp_values: np.ndarray,
    min_prominence: float = 0.05,
) -> ComparisonReport:
    """Affine-fit the experimental curve to the simulated spectrum.

    The experimental curve (line strength vs MHz) is resampled onto the
    simulation bins by linear interpolation; scale and offset minimizing the
    squared residual of scale*sim + offset against it are reported together
    with the rms residual and greedily matched peak pairs. Requires the
    experimental support to cover at least half of the simulated bins.
    """
    exp_freq = np.asarray(exp_freq_mhz, dtype=float)
    exp_values = np.asarray(exp_values, dtype=float)
    if exp_freq.size < 2 or exp_freq.size != exp_values.size:
        raise ValueError("experimental curve needs at least two (freq, value) samples")
    order = np.argsort(exp_freq)
    exp_freq, exp_values = exp_freq[order], exp_values[order]

    centers = np.asarray(simulated.bin_centers, dtype=float)
    inside = (centers >= exp_freq[0]) & (centers <= exp_freq[-1])
    if inside.sum() < 0.5 * centers.size:
        raise OverlapError(
            f"experimental support covers {inside.sum()} of {centers.size} simulated bins "
            "(need at least half)"
        )
    sim = np.asarray(simulated.intensity, dtype=float)[inside]
    resampled = np.interp(centers[inside], exp_freq, exp_values)

    design = np.column_stack([sim, np.ones_like(sim)])
    (scale, offset), *_ = np.linalg.lstsq(design, resampled, rcond=None)
    rms = float(np.sqrt(np.mean((scale * sim + offset - resampled) ** 2)))

    sim_peaks = find_peaks(simulated, min_prominence)
    exp_peaks: list[Peak] = []
    if resampled.max() > resampled.min():
        pseudo = Spectrum(
            bin_centers=centers[inside],
            intensity=(resampled - resampled.min()) / (resampled.max() - resampled.min()),
            metadata={"histogram": simulated.metadata["histogram"]},
        )
        exp_peaks = find_peaks(pseudo, min_prominence)
    return ComparisonReport(
        rms_residual=rms,
        scale=float(scale),
        offset=float(offset),
        matched_peaks=_match_peaks(sim_peaks, exp_peaks),
    )
