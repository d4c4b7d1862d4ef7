import numpy as np
import pytest

from bippt.errors import ShapeError
from bippt.operators import (
    AuxStack,
    ComponentStack,
    OperatorA,
    apply_A,
    apply_A_adjoint,
    mat,
    materialize_A,
    vec,
    verify_operator_identity,
)
from bippt.states import SubsystemDims, enumerate_bipartitions, partial_transpose_array


def random_stack(dims, seed=0, symmetric=True):
    rng = np.random.default_rng(seed)
    bips = enumerate_bipartitions(dims.n_subsystems)
    blocks = rng.standard_normal((len(bips), dims.total, dims.total))
    if symmetric:
        blocks = 0.5 * (blocks + blocks.transpose(0, 2, 1))
    return ComponentStack(blocks, dims, bips)


class TestVecMat:
    def test_identity(self):
        assert np.array_equal(vec(np.eye(2)), [1.0, 0.0, 0.0, 1.0])

    def test_roundtrip(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((3, 3))
        assert np.array_equal(mat(vec(a), 3), a)

    def test_column_stacking_position(self):
        # single 1 at row 1, col 2 (1-based) of a 2x2 lands at vec position
        # (j-1)*d + i = 3 (1-based)
        a = np.zeros((2, 2))
        a[0, 1] = 1.0
        v = vec(a)
        assert v[2] == 1.0 and np.sum(v != 0) == 1

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            mat(np.ones(5), 2)


class TestApplyA:
    def test_identity_blocks(self):
        dims = SubsystemDims((2, 2, 2))
        bips = enumerate_bipartitions(3)
        x = ComponentStack(np.broadcast_to(np.eye(8), (3, 8, 8)).copy(), dims, bips)
        out = apply_A(x)
        for i in range(3):
            assert np.array_equal(out.transformed[i], np.eye(8))
            assert np.array_equal(out.copies[i], np.eye(8))

    def test_three_party_ordering(self):
        dims = SubsystemDims((2, 2, 2))
        x = random_stack(dims, seed=1)
        out = apply_A(x)
        for i, part in enumerate(x.bipartitions):
            expected = partial_transpose_array(x.blocks[i], dims.dims, part.left)
            assert np.array_equal(out.transformed[i], expected)
            assert np.array_equal(out.copies[i], x.blocks[i])

    @pytest.mark.parametrize("dims", [(2, 2, 2), (2, 3, 2)])
    def test_matches_materialized(self, dims):
        sd = SubsystemDims(dims)
        bips = enumerate_bipartitions(sd.n_subsystems)
        a = materialize_A(sd, bips)
        x = random_stack(sd, seed=2)
        d = sd.total
        xv = np.concatenate([vec(b) for b in x.blocks])
        out = apply_A(x)
        ov = np.concatenate(
            [vec(b) for b in out.transformed] + [vec(b) for b in out.copies]
        )
        assert np.max(np.abs(a @ xv - ov)) <= 1e-12


class TestAdjoint:
    def test_normal_identity(self):
        dims = SubsystemDims((2, 3, 2))
        x = random_stack(dims, seed=3)
        back = apply_A_adjoint(apply_A(x))
        assert np.array_equal(back.blocks, 2.0 * x.blocks)

    def test_zero(self):
        dims = SubsystemDims((2, 2))
        bips = enumerate_bipartitions(2)
        v = AuxStack(np.zeros((1, 4, 4)), np.zeros((1, 4, 4)), dims, bips)
        assert apply_A_adjoint(v).norm() == 0.0

    def test_matches_materialized_transpose(self):
        sd = SubsystemDims((2, 3))
        bips = enumerate_bipartitions(2)
        a = materialize_A(sd, bips)
        rng = np.random.default_rng(4)
        v = AuxStack(
            rng.standard_normal((1, 6, 6)), rng.standard_normal((1, 6, 6)), sd, bips
        )
        vv = np.concatenate(
            [vec(b) for b in v.transformed] + [vec(b) for b in v.copies]
        )
        back = apply_A_adjoint(v)
        bv = np.concatenate([vec(b) for b in back.blocks])
        assert np.max(np.abs(a.T @ vv - bv)) <= 1e-12

    def test_adjoint_inner_product(self):
        dims = SubsystemDims((2, 2, 2))
        bips = enumerate_bipartitions(3)
        rng = np.random.default_rng(6)
        x = random_stack(dims, seed=7, symmetric=False)
        v = AuxStack(
            rng.standard_normal((3, 8, 8)), rng.standard_normal((3, 8, 8)), dims, bips
        )
        lhs = apply_A(x).dot(v)
        rhs = x.dot(apply_A_adjoint(v))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


class TestVerifyOperatorIdentity:
    def test_three_qubits(self):
        ok, dev = verify_operator_identity(SubsystemDims((2, 2, 2)))
        assert ok and dev == 0.0

    def test_mixed_dims(self):
        ok, dev = verify_operator_identity(SubsystemDims((2, 3)))
        assert ok and dev == 0.0

    def test_large_dims_implicit(self):
        ok, dev = verify_operator_identity(SubsystemDims((3, 3, 3, 3, 3)), probes=3)
        assert ok and dev == 0.0

    def test_materialize_guard(self):
        sd = SubsystemDims((3, 3, 3))
        with pytest.raises(ShapeError):
            materialize_A(sd, enumerate_bipartitions(3))


class TestStackShapes:
    def test_component_mismatch(self):
        dims = SubsystemDims((2, 2))
        with pytest.raises(ShapeError):
            ComponentStack(np.zeros((2, 4, 4)), dims, enumerate_bipartitions(2))

    def test_aux_mismatch(self):
        dims = SubsystemDims((2, 2))
        bips = enumerate_bipartitions(2)
        with pytest.raises(ShapeError):
            AuxStack(np.zeros((1, 4, 4)), np.zeros((1, 3, 3)), dims, bips)

    def test_operator_rejects_foreign_stack(self):
        dims = SubsystemDims((2, 2, 2))
        op = OperatorA(dims, enumerate_bipartitions(3))
        other = random_stack(SubsystemDims((2, 3)), seed=8)
        with pytest.raises(ShapeError):
            op.apply(other)
