"""Public-key encryption with a classically leased quantum decryption key.

The underlying scheme is textbook ElGamal over the order-``Q`` subgroup of
``Z_P^*`` with the bit encoded in the exponent. It is perfectly correct;
its IND-CPA security at these sizes is an interface contract only.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import core as C
from .transcript import Bus, GameTranscript, trial_rngs

P = 4007
Q = 2003
G = 4
SK_BITS = Q.bit_length()


@dataclass(frozen=True)
class ToyPkeKeyPair:
    pk: int
    sk: int


Ciphertext = tuple[int, int]


def pke_kg(rng: np.random.Generator) -> ToyPkeKeyPair:
    sk = int(rng.integers(1, Q))
    return ToyPkeKeyPair(pow(G, sk, P), sk)


def pke_enc(pk: int, m: int, rng: np.random.Generator) -> Ciphertext:
    if m not in (0, 1):
        raise ValueError("message must be a bit")
    k = int(rng.integers(1, Q))
    return pow(G, k, P), pow(pk, k, P) * pow(G, m, P) % P


def pke_dec(sk: int, ct: Ciphertext) -> int:
    c1, c2 = ct
    if not (0 < c1 < P and 0 < c2 < P):
        raise ValueError("malformed ciphertext")
    return int(c2 * pow(c1, -sk, P) % P != 1)


class PkeHooks(C.SchemeHooks):
    name = "pke"
    registers = (("SK", SK_BITS),)

    def sample_pair(self, j, rng):
        k0, k1 = pke_kg(rng), pke_kg(rng)
        return (k0.sk,), (k1.sk,), (k0.pk, k1.pk)


@dataclass(frozen=True)
class CsklCiphertext:
    cts: tuple[tuple[Ciphertext, Ciphertext], ...]

    def to_json(self) -> list:
        return [[list(c0), list(c1)] for c0, c1 in self.cts]


def public_key(rec: C.LessorRecord) -> list[tuple[int, int]]:
    return list(rec.material)


def cskl_enc(pk: Sequence[tuple[int, int]], m: Sequence[int], rng: np.random.Generator) -> CsklCiphertext:
    if len(m) != len(pk):
        raise ValueError("message length must equal the number of slots")
    return CsklCiphertext(tuple((pke_enc(p0, b, rng), pke_enc(p1, b, rng)) for (p0, p1), b in zip(pk, m)))


def cskl_dec(lessee: C.Lessee, ct: CsklCiphertext, rng: np.random.Generator, allow_consumed: bool = False) -> list[int]:
    """Coherent per-slot decryption controlled on ``A_j``, then measure ``OUT_j``."""
    if lessee.consumed and not allow_consumed:
        raise RuntimeError("key already deleted")
    if len(ct.cts) != 2 * lessee.n:
        raise ValueError("ciphertext shape mismatch")
    out = []
    for j, (c0, c1) in enumerate(ct.cts):

        def dec(a, sk, c0=c0, c1=c1):
            try:
                return pke_dec(sk, c1 if a else c0)
            except ValueError:
                return 0

        out.append(C.slot_eval(lessee, j, [f"A{j}", f"SK{j}"], dec, 1, rng))
    return out


# ---------------------------------------------------------------------------
# OW-VRA
# ---------------------------------------------------------------------------


class OrderViolation(RuntimeError):
    pass


class OwAdversary(C.VraAdversary):
    """Receives the public key after key generation and the challenge after
    a verified certificate. ``challenge`` raises before that point."""

    def receive_pk(self, pk, challenge) -> None:
        self.pk = pk
        self.challenge = challenge

    def guess(self, lessee: C.Lessee, ct: CsklCiphertext, dvk: C.Dvk, rng) -> list[int]:
        raise NotImplementedError


class HonestDeleteAdversary(OwAdversary):
    """Deletes honestly, then decrypts every slot the revealed dvk opens and
    guesses the rest."""

    def guess(self, lessee, ct, dvk, rng):
        out = []
        for j, (c0, _) in enumerate(ct.cts):
            s = dvk.slots.get(j)
            out.append(pke_dec(s.payload0[0], c0) if s is not None else int(rng.integers(0, 2)))
        return out


class ResidualDecryptAdversary(OwAdversary):
    """Deletes honestly, then runs decryption on whatever the key registers hold."""

    def guess(self, lessee, ct, dvk, rng):
        return cskl_dec(lessee, ct, rng, allow_consumed=True)


class DecryptFirstAdversary(HonestDeleteAdversary):
    """Tries to decrypt the challenge before deleting. The challenge is not
    available yet, so it decrypts an encryption of its own and answers with that."""

    def before_delete(self, lessee, rng):
        self.early = None
        try:
            self.early = cskl_dec(lessee, self.challenge(), rng)
        except OrderViolation:
            own = [int(b) for b in rng.integers(0, 2, size=2 * lessee.n)]
            self.early = cskl_dec(lessee, cskl_enc(self.pk, own, rng), rng)

    def guess(self, lessee, ct, dvk, rng):
        return list(self.early)


class GarbageCertAdversary(HonestDeleteAdversary):
    """Keeps the key and sends the all-zero certificate."""

    def certificate(self, lessee, rng):
        return C.zero_certificate(lessee)

    def guess(self, lessee, ct, dvk, rng):
        return cskl_dec(lessee, ct, rng)


class RandomCertAdversary(GarbageCertAdversary):
    """Keeps the key and sends a uniformly random certificate."""

    def certificate(self, lessee, rng):
        return C.random_certificate(lessee, rng)


class PremeasureAdversary(HonestDeleteAdversary):
    """Measures every control qubit before deleting."""

    def before_delete(self, lessee, rng):
        for j in range(2 * lessee.n):
            lessee.state_of(j).measure_computational(f"A{j}", rng)


ADVERSARIES = {
    "honest-delete": HonestDeleteAdversary,
    "residual-decrypt": ResidualDecryptAdversary,
    "decrypt-first": DecryptFirstAdversary,
    "garbage-cert": GarbageCertAdversary,
    "random-cert": RandomCertAdversary,
    "premeasure": PremeasureAdversary,
}


@dataclass
class OwOutcome:
    success: int
    kg_ok: bool
    cert_ok: bool
    jb_size: int
    masked_hits: int = 0
    masked_total: int = 0


def ow_vra_experiment(
    adversary: OwAdversary,
    n: int,
    rng_c: np.random.Generator,
    rng_a: np.random.Generator,
    tcf_width: int = 2,
    bus: Bus | None = None,
) -> OwOutcome:
    hooks = PkeHooks()
    bus = bus or Bus()
    state = {"open": False, "ct": None}

    def challenge():
        if not state["open"]:
            raise OrderViolation("challenge requested before a verified certificate")
        return state["ct"]

    lessee = adversary.make_lessee(hooks, n, tcf_width, rng_a)
    try:
        rec = C.kg_protocol(hooks, n, rng_c, lessee, tcf_width, bus=bus)
    except C.KgAbort:
        bus.private("verdict", C.LESSOR, {"success": 0})
        return OwOutcome(0, False, False, 0)
    pk = public_key(rec)
    bus.send("pk", C.LESSOR, [list(p) for p in pk])
    adversary.receive_pk(pk, challenge)
    adversary.before_delete(lessee, rng_a)
    cert = adversary.certificate(lessee, rng_a)
    bus.send("cert", C.LESSEE, cert.to_json())
    dvk = rec.dvk()
    ok = C.delvrfy(cert, dvk, hooks)
    bus.private("dvk", C.LESSOR, dvk.to_json())
    jb = rec.jb
    if not ok:
        bus.private("verdict", C.LESSOR, {"success": 0})
        return OwOutcome(0, True, False, len(jb))
    m = [int(b) for b in rng_c.integers(0, 2, size=2 * n)]
    ct = cskl_enc(pk, m, rng_c)
    state.update(open=True, ct=ct)
    bus.private("message", C.LESSOR, m)
    bus.send("challenge", C.LESSOR, {"ct": ct.to_json(), "dvk": dvk.to_json()})
    guess = [int(b) for b in adversary.guess(lessee, ct, dvk, rng_a)]
    bus.send("guess", C.LESSEE, guess)
    success = int(guess == m)
    bus.private("verdict", C.LESSOR, {"success": success})
    hits = sum(int(guess[j] == m[j]) for j in jb)
    return OwOutcome(success, True, True, len(jb), hits, len(jb))


def judge(transcript: GameTranscript) -> int:
    """Recompute the OW-VRA verdict from a transcript's messages and the lessor's private records."""
    hooks = PkeHooks()
    certs = transcript.find("cert", C.LESSEE)
    if not certs:
        return 0
    cert = C.DeletionCertificate.from_json(certs[0])
    dvk = C.dvk_from_json(transcript.one("dvk", C.LESSOR + ":private"))
    if not C.delvrfy(cert, dvk, hooks):
        return 0
    m = transcript.one("message", C.LESSOR + ":private")
    return int(transcript.one("guess", C.LESSEE) == m)


def run_transcript(adversary: str, n: int, seed: int, trial: int = 0, tcf_width: int = 2) -> GameTranscript:
    t = GameTranscript("ow-vra", seed, {"n": n, "adversary": adversary, "trial": trial, "tcf_width": tcf_width})
    rng_c, rng_a = trial_rngs(seed, trial)
    out = ow_vra_experiment(ADVERSARIES[adversary](), n, rng_c, rng_a, tcf_width, Bus(t))
    t.verdict = bool(out.success)
    return t


def correctness_run(n: int, rng_c: np.random.Generator, rng_a: np.random.Generator, tcf_width: int = 2, inject_phase: bool = False) -> tuple[bool, bool]:
    """One honest lease: decrypt a random message, then delete. Returns (decrypt ok, delvrfy ok)."""
    hooks = PkeHooks()
    lessee = C.Lessee(hooks, n, tcf_width, rng_a)
    rec = C.kg_protocol(hooks, n, rng_c, lessee, tcf_width, inject_phase=inject_phase)
    m = [int(b) for b in rng_c.integers(0, 2, size=2 * n)]
    dec = cskl_dec(lessee, cskl_enc(public_key(rec), m, rng_c), rng_a)
    cert = lessee.delete()
    return dec == m, C.delvrfy(cert, rec.dvk(), hooks)
