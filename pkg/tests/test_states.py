import numpy as np
import pytest

from bippt.errors import ArityError, DomainError, ShapeError
from bippt.states import (
    Bipartition,
    DensityMatrix,
    SubsystemDims,
    check_density,
    enumerate_bipartitions,
    ghz_vector,
    make_state,
    partial_transpose,
    partial_transpose_array,
    read_state_text,
    symmetrize,
    w_vector,
    weighted_ghz_vector,
    write_state_text,
)


from oracles import pt_reference


class TestSubsystemDims:
    def test_total(self):
        assert SubsystemDims((2, 3, 2)).total == 12

    def test_rejects_one_dimensional_subsystem(self):
        with pytest.raises(DomainError):
            SubsystemDims((2, 1, 2))

    def test_rejects_empty(self):
        with pytest.raises(ArityError):
            SubsystemDims(())


class TestDensityMatrix:
    def test_rejects_asymmetric(self):
        a = np.zeros((4, 4))
        a[0, 1] = 1.0
        with pytest.raises(ShapeError):
            DensityMatrix(a, SubsystemDims((2, 2)))

    def test_rejects_dims_mismatch(self):
        with pytest.raises(ShapeError):
            DensityMatrix(np.eye(4), SubsystemDims((2, 2, 2)))

    def test_accepts_invalid_state(self):
        # not a state (trace 4), but a legal intermediate value
        DensityMatrix(np.eye(4), SubsystemDims((2, 2)))


class TestEnumerateBipartitions:
    def test_three_parties(self):
        parts = enumerate_bipartitions(3)
        assert [b.left for b in parts] == [(1,), (2,), (3,)]

    def test_pair(self):
        parts = enumerate_bipartitions(2)
        assert len(parts) == 1 and parts[0].left == (1,)

    def test_five_parties_brute_force(self):
        parts = enumerate_bipartitions(5)
        assert len(parts) == 2 ** 4 - 1 == 15
        singles = [b for b in parts if len(b.left) == 1]
        pairs = [b for b in parts if len(b.left) == 2]
        assert len(singles) == 5 and len(pairs) == 10
        # enumeration order: all singletons first, then pairs, lexicographic
        assert [b.left for b in parts[:5]] == [(i,) for i in range(1, 6)]
        # brute-force oracle with the canonicalization rule
        import itertools

        expected = []
        for size in (1, 2):
            expected.extend(itertools.combinations(range(1, 6), size))
        assert [b.left for b in parts] == expected

    def test_even_tie_rule(self):
        parts = enumerate_bipartitions(4)
        tied = [b.left for b in parts if len(b.left) == 2]
        assert tied == [(1, 2), (1, 3), (1, 4)]
        assert len(parts) == 7

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_count(self, n):
        assert len(enumerate_bipartitions(n)) == 2 ** (n - 1) - 1

    def test_invalid_arity(self):
        with pytest.raises(ArityError):
            enumerate_bipartitions(1)


class TestBipartition:
    def test_rejects_non_canonical_tie(self):
        with pytest.raises(DomainError):
            Bipartition((2, 3), 4)

    def test_rejects_large_left(self):
        with pytest.raises(DomainError):
            Bipartition((1, 2), 3)

    def test_complement(self):
        assert Bipartition((1, 3), 5).complement == (2, 4, 5)


class TestPartialTranspose:
    def test_identity_invariant(self):
        dm = DensityMatrix(np.eye(8), SubsystemDims((2, 2, 2)))
        for part in enumerate_bipartitions(3):
            assert np.array_equal(partial_transpose(dm, part).data, np.eye(8))

    def test_single_entry_two_qubits(self):
        # E at row (0,1), col (1,0); transposing subsystem 1 moves it to
        # row (1,1), col (0,0)
        a = np.zeros((4, 4))
        a[0 * 2 + 1, 1 * 2 + 0] = 1.0
        out = partial_transpose_array(a, (2, 2), [1])
        expected = np.zeros((4, 4))
        expected[1 * 2 + 1, 0 * 2 + 0] = 1.0
        assert np.array_equal(out, expected)

    def test_ghz_block_exchange(self):
        rho = make_state("ghz3")
        alpha = rho.data
        out = partial_transpose(rho, Bipartition((1,), 3)).data
        # 2x2 block structure with 4x4 blocks: off-diagonal blocks swap
        assert np.array_equal(out[0:4, 4:8], alpha[4:8, 0:4])
        assert np.array_equal(out[4:8, 0:4], alpha[0:4, 4:8])
        assert np.array_equal(out[0:4, 0:4], alpha[0:4, 0:4])
        assert np.array_equal(out[4:8, 4:8], alpha[4:8, 4:8])

    @pytest.mark.parametrize("subsystems", [(1,), (2,), (3,), (1, 3), (2, 3)])
    def test_matches_loop_oracle(self, subsystems):
        rng = np.random.default_rng(7)
        dims = (2, 3, 2)
        a = rng.standard_normal((12, 12))
        a = a + a.T
        assert np.array_equal(
            partial_transpose_array(a, dims, subsystems),
            pt_reference(a, dims, subsystems),
        )

    def test_dimension_mismatch(self):
        dm = DensityMatrix(np.eye(8) / 8, SubsystemDims((2, 2, 2)))
        with pytest.raises(ShapeError):
            partial_transpose(dm, Bipartition((1,), 4))


class TestMakeState:
    def test_w3_pure(self):
        rho = make_state("w3")
        assert np.isclose(rho.trace(), 1.0)
        # oracle: direct Kronecker construction
        e0, e1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        v = (np.kron(np.kron(e0, e0), e1) + np.kron(np.kron(e0, e1), e0)
             + np.kron(np.kron(e1, e0), e0))
        assert np.dot(v, v) == 3.0
        assert np.allclose(rho.data, np.outer(v, v) / 3.0)
        eigs = np.linalg.eigvalsh(rho.data)
        assert np.sum(eigs > 1e-12) == 1  # rank one

    def test_ghz3_with_noise(self):
        rho = make_state("ghz3", noise=1.0)
        v = ghz_vector((2, 2, 2))
        omega = np.outer(v, v) + np.eye(8)
        assert np.trace(omega) == 10.0
        assert np.allclose(rho.data, omega / 10.0)
        eigs = np.sort(np.linalg.eigvalsh(rho.data))
        assert np.allclose(eigs, [0.1] * 7 + [0.3])

    def test_mghz5_coeffs(self):
        rho = make_state("mghz5", noise=5.0, coeffs=(1.0, 1.0, 5.0))
        assert rho.d == 243
        v = weighted_ghz_vector((3, 3, 3, 3, 3), (1.0, 1.0, 5.0))
        assert np.dot(v, v) == 27.0
        omega = np.outer(v, v) + 5.0 * np.eye(243)
        assert np.allclose(rho.data, omega / np.trace(omega))
        assert np.isclose(rho.trace(), 1.0)

    def test_ghz5_support(self):
        v = ghz_vector((3, 3, 3, 3, 3), levels=(0, 2))
        assert v[0] == 1.0 and v[242] == 1.0 and np.sum(v != 0) == 2

    def test_w_vector_support(self):
        assert np.array_equal(np.flatnonzero(w_vector()), [1, 2, 4])

    def test_errors(self):
        with pytest.raises(DomainError):
            make_state("w3", noise=-0.5)
        with pytest.raises(ShapeError):
            make_state("ghz3", dims=(2, 2))
        with pytest.raises(DomainError):
            make_state("nosuch")
        with pytest.raises(ShapeError):
            make_state("custom", dims=(2, 2), vector=np.ones(3))


class TestCheckDensity:
    def test_maximally_mixed(self):
        rep = check_density(np.eye(4) / 4)
        assert rep.symmetric and rep.psd and np.isclose(rep.trace, 1.0)
        assert rep.valid_state

    def test_negative_eigenvalue(self):
        rep = check_density(np.diag([1.0, -1e-6]), tol=1e-10)
        assert not rep.psd

    def test_ghz3_noisy_is_valid(self):
        rep = check_density(make_state("ghz3", noise=1.0))
        assert rep.valid_state
        assert np.isclose(rep.min_eigenvalue, 0.1)

    def test_never_raises(self):
        a = np.zeros((3, 3))
        a[0, 1] = 5.0
        rep = check_density(a)
        assert not rep.symmetric


class TestSymmetrize:
    def test_symmetric_fixed_point(self):
        a = np.eye(3)
        assert np.array_equal(symmetrize(a), a)

    def test_half_rule(self):
        a = np.zeros((2, 2))
        a[0, 1] = 1.0
        out = symmetrize(a)
        assert out[0, 1] == 0.5 and out[1, 0] == 0.5

    def test_random_output_symmetric(self):
        rng = np.random.default_rng(3)
        out = symmetrize(rng.standard_normal((5, 5)))
        assert np.linalg.norm(out - out.T) == 0.0

    def test_density_matrix_roundtrip(self):
        dm = make_state("ghz3", noise=0.5)
        out = symmetrize(dm)
        assert isinstance(out, DensityMatrix)
        assert np.array_equal(out.data, dm.data)


class TestTextFormat:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(11)
        a = rng.standard_normal((6, 6))
        dm = DensityMatrix(a + a.T, SubsystemDims((2, 3)))
        path = tmp_path / "state.txt"
        write_state_text(path, dm)
        back = read_state_text(path)
        assert np.array_equal(back.data, dm.data)
        assert back.dims == dm.dims

    def test_format_layout(self, tmp_path):
        dm = make_state("ghz3", noise=1.0)
        path = tmp_path / "state.txt"
        write_state_text(path, dm)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "8"
        assert lines[1] == "2 2 2"
        assert len(lines) == 10

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("4\n2 2\n1 0 0 0\n")
        with pytest.raises(ShapeError):
            read_state_text(path)
