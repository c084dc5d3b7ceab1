"""Pseudorandom function with a classically leased quantum evaluation key.

The two-key equivocal PRF is a truth table: ``key0`` is a uniform ``2^w``-bit
table and ``key1`` is ``key0`` with the bit at the hidden point ``s*`` flipped.
Equality off ``s*`` and difference at ``s*`` hold exactly; hiding ``s*`` is
not claimed at these sizes.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import core as C
from .csg import extract_int
from .transcript import Bus, GameTranscript, trial_rngs

DEFAULT_WIDTH = 4
MAX_WIDTH = 12


@dataclass(frozen=True)
class TeprfKeyPair:
    key0: int
    key1: int
    target: int
    width: int


def teprf_kg(target: int, width: int, rng: np.random.Generator) -> TeprfKeyPair:
    if not 1 <= width <= MAX_WIDTH:
        raise ValueError(f"input width must be in 1..{MAX_WIDTH}")
    if not 0 <= target < 1 << width:
        raise ValueError("target outside the input space")
    size = 1 << width
    table = int.from_bytes(rng.bytes((size + 7) // 8), "big") & ((1 << size) - 1)
    return TeprfKeyPair(table, table ^ (1 << target), target, width)


def teprf_eval(key: int, s: int) -> int:
    return (key >> s) & 1


class PrfHooks(C.SchemeHooks):
    name = "prf"

    def __init__(self, width: int = DEFAULT_WIDTH):
        self.width = width
        self.registers = (("SK", 1 << width),)

    def sample_pair(self, j, rng):
        kp = teprf_kg(int(rng.integers(0, 1 << self.width)), self.width, rng)
        return (kp.key0,), (kp.key1,), kp


def master_key(rec: C.LessorRecord) -> list[int]:
    return [kp.key0 for kp in rec.material]


def targets(rec: C.LessorRecord) -> list[int]:
    return [kp.target for kp in rec.material]


def cskl_eval(msk: Sequence[int], s: Sequence[int]) -> list[int]:
    if len(msk) != len(s):
        raise ValueError("input must have one block per slot")
    return [teprf_eval(k, x) for k, x in zip(msk, s)]


def cskl_leval(lessee: C.Lessee, s: Sequence[int], rng: np.random.Generator, allow_consumed: bool = False) -> list[int]:
    if lessee.consumed and not allow_consumed:
        raise RuntimeError("key already deleted")
    if len(s) != 2 * lessee.n:
        raise ValueError("input must have one block per slot")
    return [C.slot_eval(lessee, j, [f"SK{j}"], lambda k, x=x: teprf_eval(k, x), 1, rng) for j, x in enumerate(s)]


def evaluation_failure_exact(n: int, width: int) -> Fraction:
    """Pr[LEval != Eval] for uniform input: each slot hits its target with
    probability ``2^-w`` and then disagrees with probability 1/2."""
    return 1 - (1 - Fraction(1, 2 ** (width + 1))) ** (2 * n)


def target_hit_probability(n: int, width: int) -> Fraction:
    """Pr[some block of a uniform input equals its slot's target]."""
    return 1 - (1 - Fraction(1, 2**width)) ** (2 * n)


def correctness_run(
    n: int,
    rng_c: np.random.Generator,
    rng_a: np.random.Generator,
    width: int = DEFAULT_WIDTH,
    tcf_width: int = 2,
    avoid_targets: bool = False,
) -> tuple[bool, bool, bool]:
    """One honest lease on a uniform input. Returns (eval ok, some block hit its target, delvrfy ok).

    ``avoid_targets`` resamples blocks that land on their slot's target.
    """
    hooks = PrfHooks(width)
    lessee = C.Lessee(hooks, n, tcf_width, rng_a)
    rec = C.kg_protocol(hooks, n, rng_c, lessee, tcf_width)
    tg = targets(rec)
    s = [int(v) for v in rng_c.integers(0, 1 << width, size=2 * n)]
    if avoid_targets:
        for j in range(2 * n):
            while s[j] == tg[j]:
                s[j] = int(rng_c.integers(0, 1 << width))
    ok = cskl_leval(lessee, s, rng_a) == cskl_eval(master_key(rec), s)
    hit = any(x == t for x, t in zip(s, tg))
    return ok, hit, C.delvrfy(lessee.delete(), rec.dvk(), hooks)


# ---------------------------------------------------------------------------
# UPF-VRA
# ---------------------------------------------------------------------------


class UpfAdversary(C.VraAdversary):
    def guess(self, lessee: C.Lessee, s: Sequence[int], dvk: C.Dvk, rng) -> list[int]:
        raise NotImplementedError


def _from_dvk(dvk: C.Dvk, j: int, x: int) -> int | None:
    slot = dvk.slots.get(j)
    return None if slot is None else teprf_eval(slot.payload0[0], x)


class HonestDeleteAdversary(UpfAdversary):
    """Deletes honestly; evaluates opened slots from dvk and guesses the rest."""

    def guess(self, lessee, s, dvk, rng):
        out = []
        for j, x in enumerate(s):
            v = _from_dvk(dvk, j, x)
            out.append(int(rng.integers(0, 2)) if v is None else v)
        return out


class GarbageCertAdversary(UpfAdversary):
    def certificate(self, lessee, rng):
        return C.zero_certificate(lessee)

    def guess(self, lessee, s, dvk, rng):
        return cskl_leval(lessee, s, rng)


class OneBranchAdversary(HonestDeleteAdversary):
    """Measures ``A_j`` and ``R_j`` of every slot before deleting, unmasks the
    branch key it collapsed to, and evaluates with it where dvk is silent."""

    def before_delete(self, lessee, rng):
        w = lessee.tcf_width
        blocks = lessee.hooks.payload_width
        self.keys = {}
        for j in range(2 * lessee.n):
            st = lessee.state_of(j)
            c = int(st.measure_computational(f"A{j}", rng))
            x = int(st.measure_computational(f"R{j}", rng), 2)
            h0, h1, r0, r1 = lessee.view["masks"][j]
            self.keys[j] = (h1 if c else h0) ^ extract_int(x, r1 if c else r0, blocks, w)

    def guess(self, lessee, s, dvk, rng):
        out = []
        for j, x in enumerate(s):
            v = _from_dvk(dvk, j, x)
            out.append(teprf_eval(self.keys[j], x) if v is None else v)
        return out


ADVERSARIES = {
    "honest-delete": HonestDeleteAdversary,
    "garbage-cert": GarbageCertAdversary,
    "one-branch": OneBranchAdversary,
}


@dataclass
class UpfOutcome:
    success: int
    kg_ok: bool
    cert_ok: bool
    jb_size: int


def upf_vra_experiment(
    adversary: UpfAdversary,
    n: int,
    rng_c: np.random.Generator,
    rng_a: np.random.Generator,
    width: int = DEFAULT_WIDTH,
    tcf_width: int = 2,
    stress_hyb2: bool = False,
    bus: Bus | None = None,
) -> UpfOutcome:
    """Success iff the certificate verifies and the guess equals ``Eval(msk, s)``.

    ``stress_hyb2`` plants ``s_j = s*_j`` on every slot of a Z-row pair; the
    success check is unchanged.
    """
    hooks = PrfHooks(width)
    bus = bus or Bus()
    run = C.lease_and_delete(hooks, adversary, n, rng_c, rng_a, tcf_width, bus)
    if not run.cert_ok:
        bus.private("verdict", C.LESSOR, {"success": 0})
        return UpfOutcome(0, run.rec is not None, False, run.jb_size)
    rec = run.rec
    s = [int(v) for v in rng_c.integers(0, 1 << width, size=2 * n)]
    if stress_hyb2:
        tg = targets(rec)
        for j in rec.jb:
            s[j] = tg[j]
    dvk = rec.dvk()
    t = cskl_eval(master_key(rec), s)
    bus.private("expected", C.LESSOR, t)
    bus.send("challenge", C.LESSOR, {"s": s, "dvk": dvk.to_json()})
    guess = [int(v) for v in adversary.guess(run.lessee, s, dvk, rng_a)]
    bus.send("guess", C.LESSEE, guess)
    success = int(guess == t)
    bus.private("verdict", C.LESSOR, {"success": success})
    return UpfOutcome(success, True, True, run.jb_size)


def judge(transcript: GameTranscript) -> int:
    hooks = PrfHooks(int(transcript.params.get("width", DEFAULT_WIDTH)))
    certs = transcript.find("cert", C.LESSEE)
    if not certs:
        return 0
    cert = C.DeletionCertificate.from_json(certs[0])
    dvk = C.dvk_from_json(transcript.one("dvk", C.LESSOR + ":private"))
    if not C.delvrfy(cert, dvk, hooks):
        return 0
    return int(transcript.one("guess", C.LESSEE) == transcript.one("expected", C.LESSOR + ":private"))


def run_transcript(
    adversary: str, n: int, seed: int, trial: int = 0, width: int = DEFAULT_WIDTH, tcf_width: int = 2, stress_hyb2: bool = False
) -> GameTranscript:
    params = {"n": n, "adversary": adversary, "trial": trial, "width": width, "tcf_width": tcf_width, "stress_hyb2": stress_hyb2}
    t = GameTranscript("upf-vra", seed, params)
    rng_c, rng_a = trial_rngs(seed, trial)
    out = upf_vra_experiment(ADVERSARIES[adversary](), n, rng_c, rng_a, width, tcf_width, stress_hyb2, Bus(t))
    t.verdict = bool(out.success)
    return t
