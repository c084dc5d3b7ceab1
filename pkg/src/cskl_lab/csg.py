"""Toy trapdoor claw-free functions, the claw-state generation protocol and the
inner-product extractor.

The toy family is ``f_{k,b}(x) = pi(x xor b*delta)`` for a secret permutation
``pi`` of ``{0,1}^width`` and a shift ``delta != 0``. Every functional property
(perfect claw matching, exact inversion, CHK) holds exactly; claw-freeness is
not claimed at these sizes.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .blind import random_bits
from .qsim import StateVector
from .transcript import trial_rngs


@dataclass(frozen=True)
class TcfKey:
    width: int
    table0: tuple[int, ...]
    table1: tuple[int, ...]

    def eval(self, b: int, x: int) -> int:
        return (self.table1 if b else self.table0)[x]


@dataclass(frozen=True)
class TcfTrapdoor:
    inverse: tuple[int, ...]
    delta: int


@dataclass(frozen=True)
class TcfKeyPair:
    key: TcfKey
    trapdoor: TcfTrapdoor

    @property
    def width(self) -> int:
        return self.key.width


def tcf_gen(width: int, rng: np.random.Generator) -> TcfKeyPair:
    if width < 1:
        raise ValueError("width must be at least 1")
    if width > 16:
        raise ValueError("toy family supports width <= 16")
    size = 1 << width
    perm = [int(v) for v in rng.permutation(size)]
    delta = int(rng.integers(1, size))
    inv = [0] * size
    for x, y in enumerate(perm):
        inv[y] = x
    key = TcfKey(width, tuple(perm), tuple(perm[x ^ delta] for x in range(size)))
    return TcfKeyPair(key, TcfTrapdoor(tuple(inv), delta))


def tcf_eval(key: TcfKey, b: int, x: int) -> int:
    return key.eval(b, x)


def tcf_invert(trapdoor: TcfTrapdoor, b: int, y: int) -> int:
    return trapdoor.inverse[y] ^ (trapdoor.delta if b else 0)


def tcf_chk(key: TcfKey, b: int, x: int, y: int) -> int:
    return int(key.eval(b, x) == y)


# ---------------------------------------------------------------------------
# Extractor
# ---------------------------------------------------------------------------


def extract(x: str, r: str, width: int | None = None) -> str:
    """Blockwise GF(2) inner products; one output bit per block."""
    if len(x) != len(r):
        raise ValueError("x and r must have equal length")
    width = len(x) if width is None else width
    if width < 1 or len(x) % width:
        raise ValueError("length must be a multiple of the block width")
    out = []
    for i in range(0, len(x), width):
        s = int(x[i : i + width], 2) & int(r[i : i + width], 2)
        out.append("1" if s.bit_count() & 1 else "0")
    return "".join(out)


def extract_int(x: int, r: int, blocks: int, width: int) -> int:
    """Integer form of :func:`extract` (block 0 is the most significant)."""
    mask = (1 << width) - 1
    out = 0
    for i in range(blocks):
        sh = width * (blocks - 1 - i)
        out = (out << 1) | ((((x >> sh) & (r >> sh)) & mask).bit_count() & 1)
    return out


# ---------------------------------------------------------------------------
# Claw-state generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClawRecord:
    """Sender output."""

    x0: str
    x1: str
    z: int
    width: int


@dataclass
class ClawState:
    """Receiver output: registers ``a_reg`` (1 qubit) and ``x_reg`` in ``state``."""

    state: StateVector
    a_reg: str
    x_reg: str


class SenderAbort(RuntimeError):
    pass


def csg_receive(
    state: StateVector,
    keys: Sequence[TcfKey],
    rng: np.random.Generator,
    a_reg: str = "A",
    x_reg: str = "X",
    scratch: str = "Y",
) -> list[int]:
    """Receiver side: put ``a_reg`` in |+>, then per block apply the sampler
    coherently controlled on ``a_reg`` and measure the image. Returns the images."""
    width = keys[0].width
    state.allocate(a_reg, 1)
    state.allocate(x_reg, len(keys) * width)
    state.allocate(scratch, width)
    state.apply_h(a_reg)
    mask = (1 << width) - 1
    ys = []
    for i, key in enumerate(keys):
        sh = width * (len(keys) - 1 - i)
        for q in range(i * width, (i + 1) * width):
            state.apply_h((x_reg, q))
        state.apply_oracle([a_reg, x_reg], scratch, lambda a, x, key=key, sh=sh: key.eval(a, (x >> sh) & mask))
        y = int(state.measure_computational(scratch, rng), 2)
        state.apply_x(scratch, y)
        ys.append(y)
    state.discard(scratch)
    return ys


def csg_sender_finish(pairs: Sequence[TcfKeyPair], ys: Sequence[int]) -> tuple[int, int]:
    """Sender side: invert every image under both branches."""
    if len(ys) != len(pairs):
        raise SenderAbort("wrong number of images")
    x0 = x1 = 0
    for kp, y in zip(pairs, ys):
        if not 0 <= y < 1 << kp.width:
            raise SenderAbort("image outside the range")
        x0 = (x0 << kp.width) | tcf_invert(kp.trapdoor, 0, y)
        x1 = (x1 << kp.width) | tcf_invert(kp.trapdoor, 1, y)
    return x0, x1


def csg_protocol(
    l_r: int,
    width: int,
    rng_s: np.random.Generator,
    rng_r: np.random.Generator,
    state: StateVector | None = None,
    a_reg: str = "A",
    x_reg: str = "X",
    scratch: str = "Y",
    inject_phase: bool = False,
    max_qubits: int | None = None,
) -> tuple[ClawRecord, ClawState]:
    """Run the protocol with an honest receiver.

    The toy family has no phase, so ``z = 0`` unless ``inject_phase`` asks the
    harness to apply a uniform ``Z^z`` to the receiver's control qubit,
    standing in for families whose sampling leaves a phase.
    """
    if l_r < 1:
        raise ValueError("l_r must be positive")
    pairs = [tcf_gen(width, rng_s) for _ in range(l_r)]
    if state is None:
        state = StateVector(max_qubits=max_qubits if max_qubits is not None else 1 + 2 * l_r * width + width)
    ys = csg_receive(state, [kp.key for kp in pairs], rng_r, a_reg, x_reg, scratch)
    x0, x1 = csg_sender_finish(pairs, ys)
    z = 0
    if inject_phase:
        z = int(rng_s.integers(0, 2))
        if z:
            state.apply_z(a_reg, 1)
    n = l_r * width
    rec = ClawRecord(format(x0, f"0{n}b"), format(x1, f"0{n}b"), z, width)
    return rec, ClawState(state, a_reg, x_reg)


def ideal_claw_state(rec: ClawRecord, a_reg: str = "A", x_reg: str = "X") -> StateVector:
    n = len(rec.x0)
    return StateVector.from_terms(
        {a_reg: 1, x_reg: n},
        {("0", rec.x0): 1.0, ("1", rec.x1): (-1.0) ** rec.z},
        max_qubits=1 + n,
    )


# ---------------------------------------------------------------------------
# EXTRACT(b)
# ---------------------------------------------------------------------------


class ExtractAdversary:
    """Receiver side of the extraction game."""

    def claim(self, claw: ClawState, rng) -> tuple[str, int]:
        """Return (x', c)."""
        raise NotImplementedError

    def guess(self, r: str, value: str, rng) -> int:
        raise NotImplementedError


class HonestMeasuringAdversary(ExtractAdversary):
    """Measures everything in the computational basis and tries its luck:
    guesses 1 when the received value matches Ext of its own preimage."""

    def claim(self, claw, rng):
        c = int(claw.state.measure_computational(claw.a_reg, rng))
        self.x = claw.state.measure_computational(claw.x_reg, rng)
        return self.x, c

    def guess(self, r, value, rng):
        w = len(self.x) // len(value)
        return int(extract(self.x, r, w) == value)


class WrongPreimageAdversary(HonestMeasuringAdversary):
    def claim(self, claw, rng):
        x, c = super().claim(claw, rng)
        flipped = ("1" if x[0] == "0" else "0") + x[1:]
        return flipped, c

    def guess(self, r, value, rng):
        return 1


class ZeroBitAdversary(HonestMeasuringAdversary):
    """Outputs 1 exactly when the first received bit is 0."""

    def guess(self, r, value, rng):
        return int(value[0] == "0")


def extract_game(
    b: int,
    adversary: ExtractAdversary,
    rng_c: np.random.Generator,
    rng_a: np.random.Generator,
    l_r: int = 1,
    width: int = 2,
) -> int:
    rec, claw = csg_protocol(l_r, width, rng_c, rng_a)
    x_claim, c = adversary.claim(claw, rng_a)
    if c not in (0, 1) or x_claim != (rec.x1 if c else rec.x0):
        return 0
    r = random_bits(rng_c, l_r * width)
    if b == 0:
        value = extract(rec.x0 if c else rec.x1, r, width)
    else:
        value = random_bits(rng_c, l_r)
    return int(adversary.guess(r, value, rng_a))


def extract_experiment(
    b: int,
    adversary_factory: Callable[[], ExtractAdversary],
    trials: int,
    seed: int,
    l_r: int = 1,
    width: int = 2,
) -> float:
    """Empirical Pr[adversary outputs 1] in EXTRACT(b)."""
    ones = 0
    for t in range(trials):
        rng_c, rng_a = trial_rngs(seed, t)
        ones += extract_game(b, adversary_factory(), rng_c, rng_a, l_r, width)
    return ones / trials
