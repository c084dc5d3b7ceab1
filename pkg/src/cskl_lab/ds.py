"""Digital signatures with a classically leased quantum signing key.

The toy constrained signature scheme signs ``mu = (m, t)`` with a keyed hash
tag of ``mu`` under a per-slot master secret ``K``. A constrained key is
``K || key`` and signs only when ``Eval(key, m) = t``. Both branch keys of a
slot share ``K``, so the signature never depends on the branch when both
accept. The verification key is the public table of hashed tags over every
``mu``; with short tags and ``K`` it is brute-forceable, and selective
single-key security is not claimed.
"""

from __future__ import annotations

import hashlib
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from . import core as C
from .prf import DEFAULT_WIDTH, teprf_eval, teprf_kg
from .transcript import Bus, GameTranscript, trial_rngs

KAPPA = 16
TAU = 16


def _tag(k: int, mu: int) -> int:
    h = hashlib.blake2b(mu.to_bytes(4, "big"), key=k.to_bytes(KAPPA // 8, "big"), digest_size=TAU // 8)
    return int.from_bytes(h.digest(), "big")


def _commit(mu: int, sigma: int) -> str:
    return hashlib.blake2b(mu.to_bytes(4, "big") + sigma.to_bytes(TAU // 8, "big"), digest_size=16).hexdigest()


def encode(m: int, t: int) -> int:
    return (m << 1) | t


@dataclass(frozen=True)
class CsMaster:
    k: int
    vk: tuple[str, ...]
    width: int


@dataclass(frozen=True)
class ConstrainedSigKey:
    """``K || key``: master secret and the TEPRF key defining the constraint."""

    k: int
    key: int
    width: int

    def pack(self) -> int:
        return (self.k << (1 << self.width)) | self.key

    @classmethod
    def unpack(cls, v: int, width: int) -> ConstrainedSigKey:
        size = 1 << width
        return cls(v >> size, v & ((1 << size) - 1), width)

    def accepts(self, mu: int) -> bool:
        return teprf_eval(self.key, mu >> 1) == (mu & 1)


def cs_setup(width: int, rng: np.random.Generator) -> CsMaster:
    k = int(rng.integers(0, 1 << KAPPA))
    return CsMaster(k, tuple(_commit(mu, _tag(k, mu)) for mu in range(1 << (width + 1))), width)


def cs_constrain(msk: CsMaster, key: int) -> ConstrainedSigKey:
    return ConstrainedSigKey(msk.k, key, msk.width)


def cs_sign(sigk: ConstrainedSigKey, mu: int) -> int | None:
    """Signature on ``mu``, or None when the constraint refuses it."""
    return _tag(sigk.k, mu) if sigk.accepts(mu) else None


def cs_vrfy(vk: Sequence[str], mu: int, sigma: int | None) -> bool:
    if sigma is None or not 0 <= mu < len(vk) or not 0 <= sigma < 1 << TAU:
        return False
    return vk[mu] == _commit(mu, sigma)


class DsHooks(C.SchemeHooks):
    name = "ds"

    def __init__(self, width: int = DEFAULT_WIDTH):
        self.width = width
        self.registers = (("SK", 1 << width), ("CSK", KAPPA + (1 << width)))

    def sample_pair(self, j, rng):
        kp = teprf_kg(int(rng.integers(0, 1 << self.width)), self.width, rng)
        msk = cs_setup(self.width, rng)
        s0, s1 = cs_constrain(msk, kp.key0), cs_constrain(msk, kp.key1)
        return (kp.key0, s0.pack()), (kp.key1, s1.pack()), (kp, msk)


def svk(rec: C.LessorRecord) -> list[tuple[str, ...]]:
    return [msk.vk for _, msk in rec.material]


def targets(rec: C.LessorRecord) -> list[int]:
    return [kp.target for kp, _ in rec.material]


# ---------------------------------------------------------------------------
# Signing
# ---------------------------------------------------------------------------


class SignRefused(RuntimeError):
    pass


def qsign(lessee: C.Lessee, j: int, m: int, t: int, rng: np.random.Generator) -> int:
    """Coherent signing from ``CSK_j`` into a tag register plus an accept flag, then measured."""
    width = lessee.hooks.width
    mu = encode(m, t)

    def sign(v):
        sigma = cs_sign(ConstrainedSigKey.unpack(v, width), mu)
        return 0 if sigma is None else (1 << TAU) | sigma

    out = C.slot_eval(lessee, j, [f"CSK{j}"], sign, TAU + 1, rng, out="SIG")
    if not out >> TAU:
        raise SignRefused(f"slot {j} refused to sign")
    return out & ((1 << TAU) - 1)


def cskl_sign(lessee: C.Lessee, m: Sequence[int], rng: np.random.Generator) -> list[tuple[int, int]]:
    """Per slot: measure ``t_j = Eval(SK_j, m_j)`` first, then sign ``m_j || t_j``."""
    if lessee.consumed:
        raise RuntimeError("key already deleted")
    if len(m) != 2 * lessee.n:
        raise ValueError("message must have one block per slot")
    out = []
    for j, mj in enumerate(m):
        t = C.slot_eval(lessee, j, [f"SK{j}"], lambda k, mj=mj: teprf_eval(k, mj), 1, rng)
        out.append((t, qsign(lessee, j, mj, t, rng)))
    return out


def cskl_signvrfy(vks: Sequence[Sequence[str]], sigma: Sequence[tuple[int, int]], m: Sequence[int]) -> bool:
    if len(sigma) != len(vks) or len(m) != len(vks):
        return False
    return all(cs_vrfy(vk, encode(mj, t), s) for vk, (t, s), mj in zip(vks, sigma, m))


def random_message(rng: np.random.Generator, tg: Sequence[int], width: int, avoid_targets: bool = True) -> list[int]:
    m = [int(v) for v in rng.integers(0, 1 << width, size=len(tg))]
    if avoid_targets:
        for j, t in enumerate(tg):
            while m[j] == t:
                m[j] = int(rng.integers(0, 1 << width))
    return m


def correctness_run(
    n: int, rng_c: np.random.Generator, rng_a: np.random.Generator, signs: int = 1, width: int = DEFAULT_WIDTH, tcf_width: int = 2
) -> tuple[bool, float, bool]:
    """Honest lease, ``signs`` signatures on target-avoiding messages, then deletion.

    Returns (all signatures verify, minimum pair fidelity to the post-KG state, delvrfy ok).
    """
    hooks = DsHooks(width)
    lessee = C.Lessee(hooks, n, tcf_width, rng_a)
    rec = C.kg_protocol(hooks, n, rng_c, lessee, tcf_width)
    before = [st.copy() for st in lessee.pairs]
    ok, fid = True, 1.0
    vks, tg = svk(rec), targets(rec)
    for _ in range(signs):
        m = random_message(rng_c, tg, width)
        ok &= cskl_signvrfy(vks, cskl_sign(lessee, m, rng_a), m)
        fid = min(fid, min(a.fidelity(b) for a, b in zip(before, lessee.pairs)))
    return ok, fid, C.delvrfy(lessee.delete(), rec.dvk(), hooks)


# ---------------------------------------------------------------------------
# RUF-VRA
# ---------------------------------------------------------------------------


class RufAdversary(C.VraAdversary):
    def forge(self, lessee: C.Lessee, m: Sequence[int], vks, dvk: C.Dvk, rng) -> list[tuple[int, int]]:
        raise NotImplementedError


class HonestDeleteAdversary(RufAdversary):
    """Deletes honestly; signs opened slots with the dvk keys and guesses the rest."""

    def forge(self, lessee, m, vks, dvk, rng):
        width = lessee.hooks.width
        out = []
        for j, mj in enumerate(m):
            slot = dvk.slots.get(j)
            if slot is None:
                out.append((int(rng.integers(0, 2)), int(rng.integers(0, 1 << TAU))))
                continue
            key, packed = slot.payload0
            t = teprf_eval(key, mj)
            out.append((t, cs_sign(ConstrainedSigKey.unpack(packed, width), encode(mj, t))))
        return out


class GarbageCertAdversary(RufAdversary):
    """Keeps the key, sends the all-zero certificate, signs with the kept key."""

    def certificate(self, lessee, rng):
        return C.zero_certificate(lessee)

    def forge(self, lessee, m, vks, dvk, rng):
        return cskl_sign(lessee, m, rng)


class KeepKeyAdversary(GarbageCertAdversary):
    """Skips deletion and sends a uniformly random certificate."""

    def certificate(self, lessee, rng):
        return C.random_certificate(lessee, rng)


ADVERSARIES = {
    "honest-delete": HonestDeleteAdversary,
    "garbage-cert": GarbageCertAdversary,
    "keep-key": KeepKeyAdversary,
}


@dataclass
class RufOutcome:
    success: int
    kg_ok: bool
    cert_ok: bool
    jb_size: int


def ruf_vra_experiment(
    adversary: RufAdversary,
    n: int,
    rng_c: np.random.Generator,
    rng_a: np.random.Generator,
    width: int = DEFAULT_WIDTH,
    tcf_width: int = 2,
    bus: Bus | None = None,
) -> RufOutcome:
    hooks = DsHooks(width)
    bus = bus or Bus()
    run = C.lease_and_delete(hooks, adversary, n, rng_c, rng_a, tcf_width, bus)
    if not run.cert_ok:
        bus.private("verdict", C.LESSOR, {"success": 0})
        return RufOutcome(0, run.rec is not None, False, run.jb_size)
    rec = run.rec
    m = [int(v) for v in rng_c.integers(0, 1 << width, size=2 * n)]
    vks, dvk = svk(rec), rec.dvk()
    bus.private("svk", C.LESSOR, [list(v) for v in vks])
    bus.send("challenge", C.LESSOR, {"m": m, "dvk": dvk.to_json()})
    try:
        sigma = [(int(t), None if s is None else int(s)) for t, s in adversary.forge(run.lessee, m, vks, dvk, rng_a)]
    except SignRefused:
        sigma = []
    bus.send("forgery", C.LESSEE, sigma)
    success = int(cskl_signvrfy(vks, sigma, m))
    bus.private("verdict", C.LESSOR, {"success": success})
    return RufOutcome(success, True, True, run.jb_size)


def judge(transcript: GameTranscript) -> int:
    hooks = DsHooks(int(transcript.params.get("width", DEFAULT_WIDTH)))
    certs = transcript.find("cert", C.LESSEE)
    if not certs:
        return 0
    cert = C.DeletionCertificate.from_json(certs[0])
    dvk = C.dvk_from_json(transcript.one("dvk", C.LESSOR + ":private"))
    if not C.delvrfy(cert, dvk, hooks):
        return 0
    m = transcript.one("challenge", C.LESSOR)["m"]
    vks = transcript.one("svk", C.LESSOR + ":private")
    sigma = [tuple(x) for x in transcript.one("forgery", C.LESSEE)]
    return int(cskl_signvrfy(vks, sigma, m))


def run_transcript(adversary: str, n: int, seed: int, trial: int = 0, width: int = DEFAULT_WIDTH, tcf_width: int = 2) -> GameTranscript:
    t = GameTranscript("ruf-vra", seed, {"n": n, "adversary": adversary, "trial": trial, "width": width, "tcf_width": tcf_width})
    rng_c, rng_a = trial_rngs(seed, trial)
    out = ruf_vra_experiment(ADVERSARIES[adversary](), n, rng_c, rng_a, width, tcf_width, Bus(t))
    t.verdict = bool(out.success)
    return t
