"""Tests for chain complexes, the transfer of a self-equivalence and its self-torsion."""

from fractions import Fraction

import pytest

from fj_workbench.base.controlled import matrix, ring_domain
from fj_workbench.base.group_core import IntegerGroup, IntMatrix
from fj_workbench.base.transfer import (
    FiniteChainComplex,
    augmentation_check,
    cone_locator,
    matrix_pack,
    phi_control,
    self_torsion,
    subdivided_interval,
    support_word_bound,
    torsion_determinant,
    transfer,
    trivial_transfer_data,
    twisted_diagonal_psi,
)
from fj_workbench.errors import InconsistentData, NotAContraction, PreconditionFailed

QQ = ring_domain("QQ")


def _interval_pack(l, E):
    C = subdivided_interval(l)
    psi, psi_inv = twisted_diagonal_psi(IntMatrix.from_rows(E))
    data = trivial_transfer_data(IntegerGroup(), psi, psi_inv, C)
    return C, psi, data, transfer(psi, data, C)


def test_subdivided_interval():
    C = subdivided_interval(4)
    assert C.dimension == 1
    assert C.euler_characteristic() == 1
    assert C.boundary_control() == Fraction(1, 4)
    assert FiniteChainComplex.point().euler_characteristic() == 1
    with pytest.raises(PreconditionFailed):
        subdivided_interval(0)


def test_boundary_must_have_matching_shape():
    ZZ = ring_domain("ZZ")
    with pytest.raises(InconsistentData):
        FiniteChainComplex(ZZ, {0: ["v"], 1: ["e"]}, {1: matrix([[1], [1]], ZZ)})


def test_twisted_diagonal_is_invertible_over_the_group_ring():
    psi, psi_inv = twisted_diagonal_psi(IntMatrix.from_rows([[2, 1], [1, 1]]))
    data = trivial_transfer_data(IntegerGroup(), psi, psi_inv, subdivided_interval(2))
    data.check_consistency()
    assert data.T == [-1, 1]
    with pytest.raises(PreconditionFailed):
        twisted_diagonal_psi(IntMatrix.from_rows([[2, 0], [0, 1]]))


def test_inconsistent_transfer_data():
    psi, psi_inv = twisted_diagonal_psi(IntMatrix.identity(2))
    broken = {g: block * 2 for g, block in psi_inv.items()}
    C = subdivided_interval(2)
    data = trivial_transfer_data(IntegerGroup(), psi, broken, C)
    with pytest.raises(InconsistentData):
        transfer(psi, data, C)


@pytest.mark.parametrize("E", [[[1, 0], [0, 1]], [[2, 1], [1, 1]]])
def test_interval_transfer(E):
    C, psi, data, pack = _interval_pack(4, E)
    assert pack.validated
    assert all(r == 0 for r in pack.residuals().values())
    assert augmentation_check(pack, psi)
    assert phi_control(pack) <= C.boundary_control()

    result = self_torsion(pack)
    assert result.method == "closed_form"
    K, worst = support_word_bound(result.tau, data.T, Fraction(1, 4), cone_locator(pack))
    assert worst == Fraction(1, 8)
    assert K == 1
    assert K <= 10 * C.dimension


def test_scalar_torsion_determinant():
    pack = matrix_pack(QQ, {0: 1}, {}, {0: [[2]]}, {0: [["1/2"]]})
    assert pack.validated
    for method in ("closed_form", "solve", "auto"):
        assert torsion_determinant(self_torsion(pack, method)) == 2


def test_torsion_determinant_matches_phi():
    rows = [[1, 2], [3, 4]]
    pack = matrix_pack(QQ, {0: 2}, {}, {0: rows}, {0: [[-2, 1], ["3/2", "-1/2"]]})
    expected = Fraction(rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0])
    assert torsion_determinant(self_torsion(pack)) == expected


def test_unvalidated_pack_is_rejected():
    pack = matrix_pack(QQ, {0: 1}, {}, {0: [[2]]}, {0: [[1]]})
    assert not pack.validated
    with pytest.raises(PreconditionFailed):
        self_torsion(pack)


def test_corrupted_inverse_is_not_a_contraction():
    pack = matrix_pack(QQ, {0: 1}, {}, {0: [[2]]}, {0: [["1/2"]]})
    pack.Phi_inv = pack.Phi_inv.scale(2)
    with pytest.raises(NotAContraction):
        self_torsion(pack, "closed_form")
