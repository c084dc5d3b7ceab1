import itertools
from fractions import Fraction

import numpy as np
import pytest

from cskl_lab import msg as M
from cskl_lab.qsim import PauliString


def test_derived_convention():
    conv = M.convention()
    assert (conv.alice_parity, conv.bob_parity) == (1, 0)


def test_rows_and_columns_multiply_to_plus_or_minus_identity():
    signs_rows = [M.operator_product_sign(M.row(y)) for y in range(3)]
    signs_cols = [M.operator_product_sign(M.column(x)) for x in range(3)]
    assert all(s in (1, -1) for s in signs_rows + signs_cols)
    # Parity -1 overall is what makes the square impossible classically.
    assert np.prod(signs_rows) * np.prod(signs_cols) == -1


def test_observables_commute_within_rows_and_columns():
    for line in [M.row(y) for y in range(3)] + [M.column(x) for x in range(3)]:
        for p, q in itertools.combinations(line, 2):
            a, b = p.matrix(), q.matrix()
            assert np.allclose(a @ b, b @ a)


def test_predicate_examples():
    conv = M.convention()
    assert M.msg(0, 0, "100", "110", conv)
    assert not M.msg(0, 0, "000", "110", conv)  # Alice parity wrong
    assert not M.msg(0, 0, "100", "100", conv)  # Bob parity wrong
    assert not M.msg(1, 2, "100", "110", conv)  # a[2] != b[1]


def test_predicate_index_orientation():
    conv = M.convention()
    # a is column x, indexed by row y; b is row y, indexed by column x.
    assert M.msg(2, 0, "010", "011", conv) is False
    assert M.msg(2, 1, "010", "011", conv) is True


def test_classical_value_is_eight_ninths():
    assert M.classical_value() == Fraction(8, 9)


def test_classical_value_restricted_question_set():
    assert M.classical_value(questions=[(0, 0)]) == 1


def test_quantum_value_is_one():
    assert M.quantum_value(M.convention()) == pytest.approx(1.0, abs=1e-9)


def test_other_conventions_lose():
    for pa in (0, 1):
        for pb in (0, 1):
            if (pa, pb) != (1, 0):
                assert M.quantum_value(M.ParityConvention(pa, pb)) < 1 - 1e-6


def test_depolarized_value():
    conv = M.convention()
    assert M.depolarized_value(0.0, conv) == pytest.approx(1.0)
    assert M.depolarized_value(1.0, conv) == pytest.approx(0.5)
    assert M.depolarized_value(0.5, conv) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        M.depolarized_value(1.5, conv)


def test_sampled_play_always_wins(rng):
    conv = M.convention()
    for _ in range(200):
        q = M.MsgQuestion(int(rng.integers(0, 3)), int(rng.integers(0, 3)))
        ans = M.honest_strategy_play(q, M.shared_state(), rng)
        assert M.msg_predicate(q, ans, conv)


def test_ni_cd_referee():
    conv = M.convention()
    q = M.MsgQuestion(0, M.Z_ROW)
    ans = M.MsgAnswer("100", "000")
    assert M.ni_cd_referee(q, ans, "000", M.Z_ROW, conv)
    assert not M.ni_cd_referee(q, ans, "011", M.Z_ROW, conv)
    q2, ans2 = M.MsgQuestion(0, M.X_ROW), M.MsgAnswer("100", "110")
    assert M.ni_cd_referee(q2, ans2, "011", M.Z_ROW, conv)


def test_row_semantics():
    assert all(set(t.lstrip("-")) <= {"X", "I"} for t in M.TABLE[M.X_ROW])
    assert all(set(t.lstrip("-")) <= {"Z", "I"} for t in M.TABLE[M.Z_ROW])
    assert isinstance(M.row(M.MIXED_ROW)[2], PauliString)
