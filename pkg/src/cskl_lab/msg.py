"""Mermin-Peres magic square game.

Questions are 0-based. Alice receives column index ``x`` and answers with the
three observables of that column, Bob receives row index ``y`` and answers with
the three observables of that row. They win when both parities match the
convention and ``a[y] == b[x]``.

The parity convention is not typed in by hand: :func:`derive_convention`
searches the four candidates for the one under which the table strategy wins
with certainty, using exact outcome distributions.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterable
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .qsim import (
    PauliString,
    StateVector,
    bell_pair,
    exact_distribution,
    new_state,
    observable,
)

TABLE: tuple[tuple[str, str, str], ...] = (
    ("XI", "IX", "XX"),
    ("IZ", "ZI", "ZZ"),
    ("-XZ", "-ZX", "YY"),
)

# Row semantics used by the leasing schemes.
X_ROW = 0
Z_ROW = 1
MIXED_ROW = 2

ALICE = ("A0", "A1")
BOB = ("B0", "B1")


def h(s: str) -> int:
    return s.count("1")


def par(s: str) -> int:
    return h(s) & 1


def xor_bits(a: str, b: str) -> str:
    if len(a) != len(b):
        raise ValueError("length mismatch")
    return "".join("1" if p != q else "0" for p, q in zip(a, b))


def row(y: int) -> tuple[PauliString, ...]:
    return tuple(PauliString.parse(t) for t in TABLE[y])


def column(x: int) -> tuple[PauliString, ...]:
    return tuple(PauliString.parse(TABLE[k][x]) for k in range(3))


@dataclass(frozen=True)
class MsgQuestion:
    x: int
    y: int

    def __post_init__(self) -> None:
        if self.x not in (0, 1, 2) or self.y not in (0, 1, 2):
            raise ValueError("questions are in {0,1,2}")


@dataclass(frozen=True)
class MsgAnswer:
    a: str
    b: str

    def __post_init__(self) -> None:
        for s in (self.a, self.b):
            if len(s) != 3 or set(s) - {"0", "1"}:
                raise ValueError(f"answer must be 3 bits, got {s!r}")


@dataclass(frozen=True)
class ParityConvention:
    alice_parity: int
    bob_parity: int


def msg_predicate(q: MsgQuestion, ans: MsgAnswer, conv: ParityConvention) -> bool:
    return (
        par(ans.a) == conv.alice_parity
        and par(ans.b) == conv.bob_parity
        and ans.a[q.y] == ans.b[q.x]
    )


def msg(x: int, y: int, a: str, b: str, conv: ParityConvention) -> bool:
    return msg_predicate(MsgQuestion(x, y), MsgAnswer(a, b), conv)


def ni_cd_referee(q: MsgQuestion, ans: MsgAnswer, b_prime: str, z_row: int, conv: ParityConvention) -> bool:
    if not msg_predicate(q, ans, conv):
        return False
    return not (q.y == z_row and b_prime != ans.b)


# ---------------------------------------------------------------------------
# Classical value
# ---------------------------------------------------------------------------


def _strings(parity: int) -> list[str]:
    return [s for s in ("".join(t) for t in itertools.product("01", repeat=3)) if par(s) == parity]


def classical_value(
    conv: ParityConvention | None = None,
    alice_answers: Iterable[str] | None = None,
    bob_answers: Iterable[str] | None = None,
    questions: Iterable[tuple[int, int]] | None = None,
) -> Fraction:
    """Best average win rate of deterministic classical strategies.

    Each player picks one answer per question. Parity-violating answers always
    lose, so only parity-respecting answers are enumerated (4 per question,
    64 strategies per player). ``alice_answers``/``bob_answers`` restrict the
    allowed answer set; ``questions`` restricts the question pairs.
    """
    conv = conv or convention()
    qs = [(x, y) for x in range(3) for y in range(3)] if questions is None else list(questions)
    a_opts = [s for s in (alice_answers or _strings(conv.alice_parity)) if par(s) == conv.alice_parity]
    b_opts = [s for s in (bob_answers or _strings(conv.bob_parity)) if par(s) == conv.bob_parity]
    if not a_opts or not b_opts:
        return Fraction(0)
    best = Fraction(0)
    for alice in itertools.product(a_opts, repeat=3):
        for bob in itertools.product(b_opts, repeat=3):
            wins = sum(1 for x, y in qs if alice[x][y] == bob[y][x])
            best = max(best, Fraction(wins, len(qs)))
    return best


# ---------------------------------------------------------------------------
# Quantum strategy
# ---------------------------------------------------------------------------


def shared_state() -> StateVector:
    """Phi_00 on (A0,B0) and on (A1,B1)."""
    st = new_state({ALICE[0]: 1, ALICE[1]: 1, BOB[0]: 1, BOB[1]: 1})
    bell_pair(st, ALICE[0], BOB[0])
    bell_pair(st, ALICE[1], BOB[1])
    return st


def alice_plan(x: int, qubits=ALICE):
    return [observable(p, qubits) for p in column(x)]


def bob_plan(y: int, qubits=BOB):
    return [observable(p, qubits) for p in row(y)]


def _bit(ev: int) -> str:
    return "0" if ev == 1 else "1"


def honest_strategy_play(q: MsgQuestion, shared: StateVector, rng: np.random.Generator) -> MsgAnswer:
    if any(not shared.has(r) for r in ALICE + BOB):
        raise ValueError("shared state must hold registers A0, A1, B0, B1")
    a = "".join(_bit(shared.measure_observable(p, ALICE, rng)) for p in column(q.x))
    b = "".join(_bit(shared.measure_observable(p, BOB, rng)) for p in row(q.y))
    return MsgAnswer(a, b)


def joint_distribution(x: int, y: int, shared: StateVector | None = None):
    """Exact distribution of the 6 answer bits (a then b)."""
    st = shared if shared is not None else shared_state()
    return exact_distribution(st, alice_plan(x) + bob_plan(y))


def quantum_value(conv: ParityConvention, shared: StateVector | None = None) -> float:
    total = 0.0
    for x in range(3):
        for y in range(3):
            dist = joint_distribution(x, y, shared)
            total += sum(p for bits, p in dist.items() if msg(x, y, bits[:3], bits[3:], conv))
    return total / 9


def depolarized_value(p: float, conv: ParityConvention) -> float:
    """Table strategy on ``(1-p) |psi><psi| + p I/16``.

    The maximally mixed part is averaged over the 16 computational basis states.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    mixed = 0.0
    regs = {r: 1 for r in ALICE + BOB}
    for k in range(16):
        bits = tuple(format(k, "04b"))
        mixed += quantum_value(conv, StateVector.from_terms(regs, {bits: 1.0}))
    return (1 - p) * quantum_value(conv) + p * mixed / 16


@lru_cache(maxsize=1)
def convention() -> ParityConvention:
    """The unique parity convention under which the table strategy always wins."""
    winners = [
        ParityConvention(pa, pb)
        for pa in (0, 1)
        for pb in (0, 1)
        if abs(quantum_value(ParityConvention(pa, pb)) - 1.0) < 1e-9
    ]
    if len(winners) != 1:
        raise AssertionError(f"expected one winning convention, found {winners}")
    return winners[0]


derive_convention = convention


def operator_product_sign(ops: Iterable[PauliString]) -> int:
    """+1 or -1 if the product of the operators is +-identity."""
    ops = list(ops)
    m = ops[0].matrix()
    for o in ops[1:]:
        m = m @ o.matrix()
    eye = np.eye(m.shape[0])
    if np.allclose(m, eye):
        return 1
    if np.allclose(m, -eye):
        return -1
    raise ValueError("product is not +-identity")
