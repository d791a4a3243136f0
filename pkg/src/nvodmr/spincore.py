"""Spin Hamiltonian construction, diagonalization and MW transition extraction.

The composite space is the NV electron triplet tensored with one spin-1/2
doublet per explicitly treated 13C nucleus (electron slot first, nuclei in
catalog order). Energies are in MHz throughout; magnetic fields enter already
converted to frequency units (MHz) in the NV frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np

from .constants import S1X, S1Y, S1Z, SHX, SHY, SHZ

DEFAULT_NUCLEUS_CAP = 12

# Lines weaker than this fraction of the strongest line are numerical noise.
WEIGHT_FLOOR = 1e-6

_NUCLEAR_SPINS = (SHX, SHY, SHZ)
_ELECTRON_SPINS = (S1X, S1Y, S1Z)


class DimensionLimitError(ValueError):
    """Requested register exceeds the configured nucleus cap."""


class EigensolverError(RuntimeError):
    """Eigendecomposition failed or did not meet the accuracy contract."""


@dataclass(frozen=True)
class SpinRegister:
    """Dimensional bookkeeping for the electron ⊗ nuclei product space."""

    n_nuclei: int
    dim: int

    @property
    def nuclear_dim(self) -> int:
        return 2**self.n_nuclei

    @property
    def ms0_block(self) -> slice:
        """Rows spanned by the m_s = 0 electron sublevel (basis order +1, 0, -1)."""
        return slice(self.nuclear_dim, 2 * self.nuclear_dim)


def build_register(n_nuclei: int, cap: int = DEFAULT_NUCLEUS_CAP) -> SpinRegister:
    """Build the register for one electron triplet plus `n_nuclei` 13C doublets."""
    if n_nuclei < 0:
        raise ValueError(f"n_nuclei must be nonnegative, got {n_nuclei}")
    if n_nuclei > cap:
        raise DimensionLimitError(
            f"{n_nuclei} nuclei would need dimension {3 * 2**n_nuclei} "
            f"(cap {cap} nuclei, dimension {3 * 2**cap})"
        )
    return SpinRegister(n_nuclei=n_nuclei, dim=3 * 2**n_nuclei)


@dataclass(frozen=True)
class ZfsParams:
    """Zero-field splitting: axial D and transverse strain E, MHz."""

    d_mhz: float
    e_mhz: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.d_mhz) or not np.isfinite(self.e_mhz):
            raise ValueError("ZFS parameters must be finite")
        if self.d_mhz <= 0:
            raise ValueError(f"D must be positive, got {self.d_mhz}")
        if abs(self.e_mhz) >= self.d_mhz:
            raise ValueError(f"|E| = {abs(self.e_mhz)} must be below D = {self.d_mhz}")


@dataclass(frozen=True)
class FieldSpec:
    """External magnetic field in the cubic crystal frame, Gauss."""

    b_crystal_gauss: tuple[float, float, float] = (0.0, 0.0, 0.0)
    gamma_e_mhz_per_g: float = 2.8025

    def __post_init__(self):
        if len(self.b_crystal_gauss) != 3 or not np.all(np.isfinite(self.b_crystal_gauss)):
            raise ValueError("b_crystal_gauss must be a finite 3-vector")
        if not self.gamma_e_mhz_per_g > 0:
            raise ValueError("gamma_e must be positive")
        object.__setattr__(self, "b_crystal_gauss", tuple(float(x) for x in self.b_crystal_gauss))


@dataclass(frozen=True)
class HyperfineCoupling:
    """One explicit 13C site.

    `a_row` is the electron-z row of the hyperfine tensor in the NV frame
    (sufficient under the [111] projection); a full 3x3 tensor may be supplied
    instead, in which case its z-row must equal `a_row`.
    """

    label: str
    a_row: tuple[float, float, float]
    full_tensor: tuple[tuple[float, float, float], ...] | None = None

    def __post_init__(self):
        if len(self.a_row) != 3 or not np.all(np.isfinite(self.a_row)):
            raise ValueError(f"site {self.label!r}: a_row must be a finite 3-vector")
        object.__setattr__(self, "a_row", tuple(float(x) for x in self.a_row))
        if self.full_tensor is not None:
            tensor = np.asarray(self.full_tensor, dtype=float)
            if tensor.shape != (3, 3) or not np.all(np.isfinite(tensor)):
                raise ValueError(f"site {self.label!r}: full_tensor must be a finite 3x3 matrix")
            if not np.allclose(tensor[2], self.a_row, atol=1e-9):
                raise ValueError(
                    f"site {self.label!r}: full_tensor z-row {tuple(tensor[2])} "
                    f"does not match a_row {self.a_row}"
                )
            object.__setattr__(
                self, "full_tensor", tuple(tuple(float(x) for x in row) for row in tensor)
            )

    @property
    def magnitude(self) -> float:
        """Euclidean norm of the z-row, MHz (recomputed, never cached)."""
        return float(np.linalg.norm(self.a_row))


@dataclass(frozen=True)
class TransitionLine:
    freq_mhz: float
    weight: float


@dataclass
class Eigensystem:
    """Sorted eigenvalues (MHz) and column eigenvectors of one Hamiltonian."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.values)


def embed_operator(op: np.ndarray, slot: int, register: SpinRegister) -> np.ndarray:
    """Kronecker-embed `op` at `slot` (0 = electron, 1..n = nuclei) with identities elsewhere."""
    op = np.asarray(op, dtype=complex)
    if slot < 0 or slot > register.n_nuclei:
        raise ValueError(f"slot {slot} out of range for register with {register.n_nuclei} nuclei")
    expected = 3 if slot == 0 else 2
    if op.shape != (expected, expected):
        raise ValueError(f"operator at slot {slot} must be {expected}x{expected}, got {op.shape}")
    left = 3 * 2 ** (slot - 1) if slot > 0 else 1
    right = 2 ** (register.n_nuclei - slot) if slot > 0 else 2**register.n_nuclei
    out = op
    if left > 1:
        out = np.kron(np.eye(left, dtype=complex), out)
    if right > 1:
        out = np.kron(out, np.eye(right, dtype=complex))
    return out


def electron_hamiltonian(zfs: ZfsParams, b_nv_mhz: Sequence[float]) -> np.ndarray:
    """3x3 electron block: D*Sz^2 + E*(Sx^2 - Sy^2) + b·S, all in MHz."""
    b = np.asarray(b_nv_mhz, dtype=float)
    if b.shape != (3,) or not np.all(np.isfinite(b)):
        raise ValueError("b_nv_mhz must be a finite 3-vector")
    h = zfs.d_mhz * (S1Z @ S1Z) + zfs.e_mhz * (S1X @ S1X - S1Y @ S1Y)
    h = h + b[0] * S1X + b[1] * S1Y + b[2] * S1Z
    return h


def hyperfine_term(coupling: HyperfineCoupling, slot: int, register: SpinRegister) -> np.ndarray:
    """Coupling term of one occupied nucleus in the full space.

    With only the z-row available this is Sz ⊗ (a_x s_x + a_y s_y + a_z s_z);
    with a full tensor it is sum_ij alpha_ij S_i ⊗ s_j.
    """
    term = np.zeros((register.dim, register.dim), dtype=complex)
    if coupling.full_tensor is not None:
        tensor = np.asarray(coupling.full_tensor, dtype=float)
        for i in range(3):
            if not np.any(tensor[i]):
                continue
            s_el = embed_operator(_ELECTRON_SPINS[i], 0, register)
            for j in range(3):
                if tensor[i, j] != 0.0:
                    term += tensor[i, j] * (s_el @ embed_operator(_NUCLEAR_SPINS[j], slot, register))
    else:
        sz_el = embed_operator(S1Z, 0, register)
        for j in range(3):
            if coupling.a_row[j] != 0.0:
                term += coupling.a_row[j] * (sz_el @ embed_operator(_NUCLEAR_SPINS[j], slot, register))
    return term


def build_hamiltonian(
    zfs: ZfsParams,
    b_nv_mhz: Sequence[float],
    couplings: Sequence[HyperfineCoupling],
    occupancy: int,
    register: SpinRegister,
    b_nuclear_mhz: Sequence[float] | None = None,
) -> np.ndarray:
    """Assemble the full Hermitian Hamiltonian on `register`, MHz.

    `occupancy` is a bitmask over `couplings`: a cleared bit n zeroes nucleus
    n's coupling (the site holds a spinless 12C). `b_nuclear_mhz`, when given,
    adds the nuclear Zeeman term b_n·s for each occupied nucleus (off by
    default, matching the model that the electron terms dominate).
    """
    if len(couplings) != register.n_nuclei:
        raise ValueError(
            f"got {len(couplings)} couplings for a register with {register.n_nuclei} nuclei"
        )
    h = embed_operator(electron_hamiltonian(zfs, b_nv_mhz), 0, register)
    for n, coupling in enumerate(couplings):
        if not occupancy >> n & 1:
            continue
        h += hyperfine_term(coupling, n + 1, register)
        if b_nuclear_mhz is not None:
            bn = np.asarray(b_nuclear_mhz, dtype=float)
            for j in range(3):
                if bn[j] != 0.0:
                    h += bn[j] * embed_operator(_NUCLEAR_SPINS[j], n + 1, register)
    return h


def eigendecompose(h: np.ndarray, check: bool = True) -> Eigensystem:
    """Diagonalize a Hermitian matrix; eigenvalues ascending.

    Verifies the reconstruction residual and eigenvector unitarity unless
    `check=False` (hot loops that validate statistically elsewhere).
    """
    h = np.asarray(h)
    scale = max(1.0, float(np.abs(h).max()))
    if not np.all(np.isfinite(h)):
        raise ValueError("Hamiltonian contains non-finite entries")
    if np.abs(h - h.conj().T).max() > 1e-9 * scale:
        raise ValueError("matrix is not Hermitian within 1e-9")
    try:
        values, vectors = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigh failed to converge on a {h.shape[0]}x{h.shape[0]} matrix") from exc
    if check:
        residual = np.abs(h @ vectors - vectors * values[None, :]).max()
        if residual > 1e-8 * scale:
            raise EigensolverError(
                f"reconstruction residual {residual:.3e} exceeds tolerance on a "
                f"{h.shape[0]}x{h.shape[0]} matrix"
            )
        ortho = np.abs(vectors.conj().T @ vectors - np.eye(h.shape[0])).max()
        if ortho > 1e-8:
            raise EigensolverError(f"eigenvectors deviate from unitarity by {ortho:.3e}")
    return Eigensystem(values=values, vectors=vectors)


def pair_weight_arrays(
    values: np.ndarray,
    vectors: np.ndarray,
    sx_emb: np.ndarray,
    sy_emb: np.ndarray,
    ms0_block: slice,
) -> tuple[np.ndarray, np.ndarray]:
    """Transition frequencies and weights for every ordered eigenstate pair.

    Works on a single eigensystem (d, d) or a batch (..., d, d). The weight of
    i -> j is the optically pumped m_s = 0 population of state i times the
    polarization-averaged transverse MW matrix element
    (|<j|Sx|i>|^2 + |<j|Sy|i>|^2) / 2.
    """
    vh = np.conjugate(np.swapaxes(vectors, -1, -2))
    mx = vh @ (sx_emb @ vectors)
    my = vh @ (sy_emb @ vectors)
    drive = 0.5 * (np.abs(mx) ** 2 + np.abs(my) ** 2)
    pop = np.sum(np.abs(vectors[..., ms0_block, :]) ** 2, axis=-2)
    weights = pop[..., :, None] * drive
    freqs = values[..., None, :] - values[..., :, None]
    return freqs, weights


def extract_transitions(
    eig: Eigensystem,
    register: SpinRegister,
    weight_floor: float = WEIGHT_FLOOR,
) -> list[TransitionLine]:
    """MW absorption lines (freq > 0) from one eigensystem.

    Within-manifold pairs drop out through the weight rule (their MW matrix
    elements or m_s = 0 populations vanish); no frequency cut besides > 0.
    """
    if eig.dim != register.dim:
        raise ValueError(f"eigensystem dimension {eig.dim} does not match register {register.dim}")
    sx_emb = embed_operator(S1X, 0, register)
    sy_emb = embed_operator(S1Y, 0, register)
    freqs, weights = pair_weight_arrays(eig.values, eig.vectors, sx_emb, sy_emb, register.ms0_block)
    mask = freqs > 0
    if not np.any(mask):
        return []
    cutoff = weight_floor * weights[mask].max()
    mask &= (weights >= cutoff) & (weights > 0)
    order = np.argsort(freqs[mask], kind="stable")
    return [
        TransitionLine(freq_mhz=float(f), weight=float(w))
        for f, w in zip(freqs[mask][order], weights[mask][order])
    ]


def _grouped_shift_distribution(
    magnitudes: np.ndarray, half_delta_sz: float
) -> tuple[np.ndarray, np.ndarray]:
    """Frequency offsets and configuration counts of independent ±1/2 nuclei.

    Sites with equal coupling magnitude are convolved binomially; distinct
    groups combine by outer sum. Counts total 2^n over n sites.
    """
    offsets = np.array([0.0])
    counts = np.array([1.0])
    if magnitudes.size == 0:
        return offsets, counts
    rounded = np.round(magnitudes, 9)
    for a in np.unique(rounded):
        g = int(np.sum(rounded == a))
        group_offsets = (g - 2 * np.arange(g + 1)) * (a * half_delta_sz)
        group_counts = np.array([comb(g, j) for j in range(g + 1)], dtype=float)
        offsets = (offsets[:, None] + group_offsets[None, :]).ravel()
        counts = (counts[:, None] * group_counts[None, :]).ravel()
    return offsets, counts


def factorized_transitions(
    zfs: ZfsParams,
    b_nv_mhz: Sequence[float],
    couplings: Sequence[HyperfineCoupling],
    occupancy: int,
    weight_floor: float = WEIGHT_FLOOR,
) -> list[TransitionLine]:
    """Secular backend: exact 3x3 electron block, independent nuclear shifts.

    The dominant D term pins the electron quantization axis, so each occupied
    nucleus splits an electron level k by ±<Sz>_k |a|/2 about it. A transition
    k -> l therefore shifts by ±(<Sz>_l - <Sz>_k) |a|/2 per nucleus (the
    nuclear state is frozen during the MW transition); the per-nucleus shift
    distributions convolve into the line set at O(n·L) cost instead of an
    O(8^n) diagonalization.
    """
    h_el = electron_hamiltonian(zfs, b_nv_mhz)
    values, vectors = np.linalg.eigh(h_el)
    pop = np.abs(vectors[1, :]) ** 2
    sz_exp = np.real(np.einsum("ki,kl,li->i", vectors.conj(), S1Z, vectors))
    mx = vectors.conj().T @ S1X @ vectors
    my = vectors.conj().T @ S1Y @ vectors
    drive = 0.5 * (np.abs(mx) ** 2 + np.abs(my) ** 2)

    magnitudes = np.array(
        [c.magnitude for n, c in enumerate(couplings) if occupancy >> n & 1]
    )
    # decoupled (12C) sites still double the register: degeneracy 2 apiece
    degeneracy = 2.0 ** (len(couplings) - magnitudes.size)
    all_freqs: list[np.ndarray] = []
    all_weights: list[np.ndarray] = []
    for k in range(3):
        for l in range(3):
            if k == l:
                continue
            base_weight = degeneracy * pop[k] * drive[k, l]
            if base_weight <= 0.0:
                continue
            offsets, counts = _grouped_shift_distribution(
                magnitudes, 0.5 * (sz_exp[l] - sz_exp[k])
            )
            freqs = (values[l] - values[k]) + offsets
            keep = freqs > 0
            if np.any(keep):
                all_freqs.append(freqs[keep])
                all_weights.append(base_weight * counts[keep])
    if not all_freqs:
        return []
    freqs = np.concatenate(all_freqs)
    weights = np.concatenate(all_weights)
    cutoff = weight_floor * weights.max()
    keep = (weights >= cutoff) & (weights > 0)
    order = np.argsort(freqs[keep], kind="stable")
    return [
        TransitionLine(freq_mhz=float(f), weight=float(w))
        for f, w in zip(freqs[keep][order], weights[keep][order])
    ]


def coalesce_lines(lines: Sequence[TransitionLine], freq_tol: float = 1e-7) -> list[TransitionLine]:
    """Merge lines whose frequencies agree within `freq_tol`, summing weights."""
    if not lines:
        return []
    ordered = sorted(lines, key=lambda ln: ln.freq_mhz)
    merged: list[list[float]] = [[ordered[0].freq_mhz, ordered[0].weight]]
    for ln in ordered[1:]:
        if ln.freq_mhz - merged[-1][0] <= freq_tol:
            total = merged[-1][1] + ln.weight
            merged[-1][0] = (merged[-1][0] * merged[-1][1] + ln.freq_mhz * ln.weight) / total
            merged[-1][1] = total
        else:
            merged.append([ln.freq_mhz, ln.weight])
    return [TransitionLine(freq_mhz=f, weight=w) for f, w in merged]
