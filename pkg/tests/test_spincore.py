import itertools

import numpy as np
import pytest

from nvodmr.constants import S1X, S1Z
from nvodmr.spincore import (
    DimensionLimitError,
    FieldSpec,
    HyperfineCoupling,
    SpinRegister,
    ZfsParams,
    build_hamiltonian,
    build_register,
    coalesce_lines,
    eigendecompose,
    embed_operator,
    extract_transitions,
    factorized_transitions,
)

D = 2870.0


def axial_site(a_mhz, label="c13"):
    return HyperfineCoupling(label=label, a_row=(0.0, 0.0, a_mhz))


def exact_lines(zfs, b_nv, couplings, occupancy=None):
    register = build_register(len(couplings))
    if occupancy is None:
        occupancy = (1 << len(couplings)) - 1
    h = build_hamiltonian(zfs, b_nv, couplings, occupancy, register)
    return extract_transitions(eigendecompose(h), register)


def merged(lines, tol=1e-6):
    """Coalesced (freq, weight) pairs with weights normalized to unit sum."""
    out = coalesce_lines(lines, freq_tol=tol)
    total = sum(ln.weight for ln in out)
    return [(ln.freq_mhz, ln.weight / total) for ln in out]


def enumerate_axial_oracle(d, a_values):
    """Brute-force line set for axial couplings at E=0, b=0.

    Independent of the matrix pipeline: each nuclear product state shifts the
    m_s = ±1 branches by ±sum(a_n m_n); both MW branches carry weight 1/2.
    """
    lines = {}
    for signs in itertools.product((0.5, -0.5), repeat=len(a_values)):
        shift = sum(a * m for a, m in zip(a_values, signs))
        for branch in (1.0, -1.0):
            freq = round(d + branch * shift, 9)
            lines[freq] = lines.get(freq, 0.0) + 0.5
    total = sum(lines.values())
    return sorted((f, w / total) for f, w in lines.items())


class TestRegister:
    @pytest.mark.parametrize("n,dim", [(0, 3), (3, 24), (11, 6144)])
    def test_dims(self, n, dim):
        assert build_register(n).dim == dim

    def test_cap_error_names_dimension(self):
        with pytest.raises(DimensionLimitError, match=str(3 * 2**13)):
            build_register(13)
        build_register(13, cap=13)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            build_register(-1)


class TestEmbed:
    def test_identity_any_slot(self):
        reg = build_register(2)
        for slot, d in [(0, 3), (1, 2), (2, 2)]:
            assert np.allclose(embed_operator(np.eye(d), slot, reg), np.eye(reg.dim))

    def test_sz_with_one_nucleus(self):
        reg = build_register(1)
        expected = np.diag([1, 1, 0, 0, -1, -1]).astype(complex)
        assert np.allclose(embed_operator(S1Z, 0, reg), expected)

    def test_trace_identity(self):
        reg = build_register(3)
        rng = np.random.default_rng(7)
        op = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        emb = embed_operator(op, 2, reg)
        assert np.isclose(np.trace(emb), np.trace(op) * reg.dim / 2)

    def test_slot_and_shape_errors(self):
        reg = build_register(1)
        with pytest.raises(ValueError, match="slot"):
            embed_operator(np.eye(2), 2, reg)
        with pytest.raises(ValueError, match="3x3"):
            embed_operator(np.eye(2), 0, reg)


class TestZfsAndField:
    def test_zfs_validation(self):
        with pytest.raises(ValueError):
            ZfsParams(d_mhz=-1.0)
        with pytest.raises(ValueError):
            ZfsParams(d_mhz=100.0, e_mhz=100.0)
        ZfsParams(d_mhz=100.0, e_mhz=-99.0)

    def test_field_validation(self):
        with pytest.raises(ValueError):
            FieldSpec(gamma_e_mhz_per_g=0.0)
        assert FieldSpec().gamma_e_mhz_per_g == pytest.approx(2.8025)

    def test_hyperfine_magnitude_recomputed(self):
        site = HyperfineCoupling(label="a", a_row=(3.0, 0.0, 4.0))
        assert site.magnitude == pytest.approx(5.0)

    def test_full_tensor_row_consistency(self):
        tensor = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 130.0))
        HyperfineCoupling(label="ok", a_row=(0.0, 0.0, 130.0), full_tensor=tensor)
        with pytest.raises(ValueError, match="z-row"):
            HyperfineCoupling(label="bad", a_row=(0.0, 0.0, 1.0), full_tensor=tensor)


class TestHamiltonian:
    def test_bare_nv_strain(self):
        reg = build_register(0)
        h = build_hamiltonian(ZfsParams(D, 5.0), (0, 0, 0), [], 0, reg)
        assert np.allclose(np.linalg.eigvalsh(h), [0.0, 2865.0, 2875.0], atol=1e-9)

    def test_single_nucleus_axial(self):
        # analytic oracle: m_s = ±1 levels shift by ±a_z m_I = ±65 MHz
        reg = build_register(1)
        h = build_hamiltonian(ZfsParams(D), (0, 0, 0), [axial_site(130.0)], 1, reg)
        expected = sorted([0.0, 0.0, D - 65.0, D - 65.0, D + 65.0, D + 65.0])
        assert np.allclose(np.linalg.eigvalsh(h), expected, atol=1e-9)

    def test_unoccupied_site_decouples(self):
        reg = build_register(1)
        h = build_hamiltonian(ZfsParams(D), (0, 0, 0), [axial_site(130.0)], 0, reg)
        assert np.allclose(np.linalg.eigvalsh(h), [0, 0, D, D, D, D], atol=1e-9)

    def test_axial_zeeman(self):
        reg = build_register(0)
        h = build_hamiltonian(ZfsParams(D), (0, 0, 28.025), [], 0, reg)
        assert np.allclose(np.linalg.eigvalsh(h), [0.0, 2841.975, 2898.025], atol=1e-9)

    def test_hermiticity_and_trace_random(self):
        rng = np.random.default_rng(11)
        for n in range(4):
            reg = build_register(n)
            sites = [
                HyperfineCoupling(label=f"s{k}", a_row=tuple(rng.normal(0, 50, 3)))
                for k in range(n)
            ]
            occupancy = int(rng.integers(0, 2**n)) if n else 0
            zfs = ZfsParams(D, rng.normal(0, 3))
            h = build_hamiltonian(zfs, rng.normal(0, 30, 3), sites, occupancy, reg)
            assert np.abs(h - h.conj().T).max() < 1e-12
            assert np.isclose(np.trace(h).real, 2 * zfs.d_mhz * 2**n, atol=1e-8)

    def test_full_tensor_term(self):
        # anisotropic tensor with transverse electron rows mixes m_s manifolds
        reg = build_register(1)
        tensor = ((10.0, 0.0, 0.0), (0.0, 10.0, 0.0), (0.0, 0.0, 130.0))
        site = HyperfineCoupling(label="aniso", a_row=(0.0, 0.0, 130.0), full_tensor=tensor)
        h = build_hamiltonian(ZfsParams(D), (0, 0, 0), [site], 1, reg)
        assert np.abs(h - h.conj().T).max() < 1e-12
        axial = build_hamiltonian(ZfsParams(D), (0, 0, 0), [axial_site(130.0)], 1, reg)
        assert not np.allclose(np.linalg.eigvalsh(h), np.linalg.eigvalsh(axial))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="couplings"):
            build_hamiltonian(ZfsParams(D), (0, 0, 0), [axial_site(1.0)], 1, build_register(0))


class TestEigendecompose:
    def test_diagonal(self):
        eig = eigendecompose(np.diag([0.0, 2865.0, 2875.0]).astype(complex))
        assert np.allclose(eig.values, [0, 2865, 2875])
        assert np.allclose(np.abs(eig.vectors), np.eye(3))

    def test_matches_analytic_single_nucleus(self):
        reg = build_register(1)
        h = build_hamiltonian(ZfsParams(D), (0, 0, 0), [axial_site(130.0)], 1, reg)
        eig = eigendecompose(h)
        assert np.allclose(eig.values, [0, 0, 2805, 2805, 2935, 2935], atol=1e-9)

    def test_trace_identity_and_unitarity(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=(24, 24)) + 1j * rng.normal(size=(24, 24))
        h = (a + a.conj().T) * 100
        eig = eigendecompose(h)
        scale = max(1.0, np.abs(h).max())
        assert abs(eig.values.sum() - np.trace(h).real) < 1e-6 * scale
        assert np.abs(eig.vectors.conj().T @ eig.vectors - np.eye(24)).max() < 1e-8
        assert np.abs(h @ eig.vectors - eig.vectors * eig.values[None, :]).max() < 1e-8 * scale

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            eigendecompose(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            eigendecompose(np.array([[np.nan, 0.0], [0.0, 0.0]]))


class TestTransitions:
    def test_bare_nv_degenerate(self):
        lines = exact_lines(ZfsParams(D), (0, 0, 0), [])
        assert len(lines) == 2
        assert all(np.isclose(ln.freq_mhz, D, atol=1e-9) for ln in lines)
        assert all(np.isclose(ln.weight, 0.5, atol=1e-9) for ln in lines)

    def test_strain_split_doublet(self):
        lines = exact_lines(ZfsParams(D, 5.0), (0, 0, 0), [])
        freqs = sorted(ln.freq_mhz for ln in lines)
        assert np.allclose(freqs, [2865.0, 2875.0], atol=1e-9)
        assert np.isclose(lines[0].weight, lines[1].weight, rtol=1e-9)

    def test_first_shell_binomial_vs_enumeration(self):
        sites = [axial_site(130.0, f"fs{k}") for k in range(3)]
        got = merged(exact_lines(ZfsParams(D), (0, 0, 0), sites))
        expected = enumerate_axial_oracle(D, [130.0] * 3)
        assert len(got) == len(expected) == 4
        assert np.allclose([f for f, _ in got], [2675, 2805, 2935, 3065], atol=1e-9)
        for (f_got, w_got), (f_exp, w_exp) in zip(got, expected):
            assert np.isclose(f_got, f_exp, atol=1e-9)
            assert np.isclose(w_got, w_exp, rtol=1e-9)

    def test_projection_sum_rule_random(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            n = int(rng.integers(1, 5))
            a = float(rng.uniform(5, 150))
            got = merged(exact_lines(ZfsParams(D), (0, 0, 0), [axial_site(a, f"s{k}") for k in range(n)]))
            expected = enumerate_axial_oracle(D, [a] * n)
            assert len(got) == len(expected)
            for (f_got, w_got), (f_exp, w_exp) in zip(got, expected):
                assert np.isclose(f_got, f_exp, atol=1e-8)
                assert np.isclose(w_got, w_exp, rtol=1e-9)

    def test_decoupling_multiplicity(self):
        sites = [axial_site(130.0, f"s{k}") for k in range(2)]
        lines = merged(exact_lines(ZfsParams(D, 3.0), (0, 0, 0), sites, occupancy=0))
        bare = merged(exact_lines(ZfsParams(D, 3.0), (0, 0, 0), []))
        assert len(lines) == len(bare) == 2
        for (f_got, w_got), (f_exp, w_exp) in zip(lines, bare):
            assert np.isclose(f_got, f_exp, atol=1e-9)
            assert np.isclose(w_got, w_exp, rtol=1e-9)


class TestFactorizedBackend:
    def test_bare_nv_matches_exact(self):
        for e in (0.0, 5.0):
            for bz in (0.0, 28.025):
                exact = merged(exact_lines(ZfsParams(D, e), (0, 0, bz), []))
                fact = merged(factorized_transitions(ZfsParams(D, e), (0, 0, bz), [], 0))
                assert len(exact) == len(fact)
                for (f_a, w_a), (f_b, w_b) in zip(exact, fact):
                    assert np.isclose(f_a, f_b, atol=1e-9)
                    assert np.isclose(w_a, w_b, rtol=1e-9)

    def test_first_shell_matches_exact(self):
        sites = [axial_site(130.0, f"fs{k}") for k in range(3)]
        exact = merged(exact_lines(ZfsParams(D), (0, 0, 0), sites))
        fact = merged(factorized_transitions(ZfsParams(D), (0, 0, 0), sites, 0b111))
        assert len(exact) == len(fact) == 4
        for (f_a, w_a), (f_b, w_b) in zip(exact, fact):
            assert np.isclose(f_a, f_b, atol=1e-8)
            assert np.isclose(w_a, w_b, rtol=1e-8)

    def test_single_nucleus_axial_field(self):
        sites = [axial_site(130.0)]
        exact = merged(exact_lines(ZfsParams(D), (0, 0, 28.025), sites))
        fact = merged(factorized_transitions(ZfsParams(D), (0, 0, 28.025), sites, 1))
        assert len(exact) == len(fact)
        for (f_a, w_a), (f_b, w_b) in zip(exact, fact):
            assert abs(f_a - f_b) < 1e-6
            assert np.isclose(w_a, w_b, rtol=1e-6)

    def test_randomized_secular_equivalence(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            n = int(rng.integers(0, 5))
            sites = [
                HyperfineCoupling(label=f"r{k}", a_row=tuple(rng.normal(0, 60, 3)))
                for k in range(n)
            ]
            occupancy = int(rng.integers(0, 2**n)) if n else 0
            bz = float(rng.uniform(0, 80))
            exact = merged(exact_lines(ZfsParams(D), (0, 0, bz), sites, occupancy))
            fact = merged(factorized_transitions(ZfsParams(D), (0, 0, bz), sites, occupancy))
            assert len(exact) == len(fact)
            for (f_a, w_a), (f_b, w_b) in zip(exact, fact):
                assert abs(f_a - f_b) < 1e-6
                assert abs(w_a - w_b) < 1e-6


def test_coalesce_lines_merges_and_averages():
    from nvodmr.spincore import TransitionLine

    lines = [
        TransitionLine(100.0, 1.0),
        TransitionLine(100.0 + 5e-8, 3.0),
        TransitionLine(200.0, 2.0),
    ]
    out = coalesce_lines(lines, freq_tol=1e-7)
    assert len(out) == 2
    assert out[0].weight == pytest.approx(4.0)
    assert out[0].freq_mhz == pytest.approx(100.0 + 3 * 5e-8 / 4)
