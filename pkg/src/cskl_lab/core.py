"""Machinery shared by the three leasing schemes.

A leased key consists of ``2n`` slots. Slot ``j`` holds a control qubit
``A{j}``, payload registers (``SK{j}``, and ``CSK{j}`` for signatures) and a
claw register ``R{j}``. Slots ``2i`` and ``2i+1`` live in one state vector
because the compiled game may entangle them.

Key generation runs in four stages:

1. per slot, the lessor draws a payload pair and both parties run claw-state
   generation, leaving the lessee with ``(|0,x0> + (-1)^z |1,x1>)/sqrt2``;
2. per pair, the lessee copies both control qubits onto fresh qubits ``B`` and
   the lessor runs Bob's row measurement on them blindly (SimBob);
3. per slot, a blind copy circuit copies ``R{j}`` exactly on the slots of Z-row
   pairs, and the lessor checks the returned copy against its claw record;
4. the lessor sends masked payloads; the lessee writes
   ``Ext(x_A, r_A) xor h_A`` into the payload registers, controlled on ``A``.

Bob's row observables act on ``(B{2i}, B{2i+1})`` with the first tensor factor on
slot ``2i``. On a Z-row pair the all-Z row therefore fixes slot ``2i`` to
``b[1]`` and slot ``2i+1`` to ``b[0]``, so the lessor's check for slot ``j``
uses ``b[1 - j % 2]``.
"""

from __future__ import annotations

import enum
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import msg as M
from .blind import BobRowCircuit, CopyCircuit, ServerView, random_bits, run_cbqc
from .csg import (
    SenderAbort,
    TcfKey,
    csg_receive,
    csg_sender_finish,
    extract_int,
    tcf_gen,
)
from .qsim import StateVector
from .transcript import Bus

LESSOR = "lessor"
LESSEE = "lessee"
PAIR_MAX_QUBITS = 4096


class Case(enum.Enum):
    SUPERPOSED = "superposed"
    COMPUTATIONAL = "computational"
    MIXED = "mixed"


def case_of(q_b: int) -> Case:
    """Case of a pair from the semantics of Bob's row."""
    labels = M.TABLE[q_b]
    if all(set(t.lstrip("-")) <= {"X", "I"} for t in labels):
        return Case.SUPERPOSED
    if all(set(t.lstrip("-")) <= {"Z", "I"} for t in labels):
        return Case.COMPUTATIONAL
    return Case.MIXED


def z_row() -> int:
    return next(y for y in range(3) if case_of(y) is Case.COMPUTATIONAL)


def jb_set(q_bs: Sequence[int]) -> set[int]:
    """Slots whose pair was asked the all-Z row."""
    return {j for i, q in enumerate(q_bs) if case_of(q) is Case.COMPUTATIONAL for j in (2 * i, 2 * i + 1)}


def c_index(j: int) -> int:
    """Position of slot ``j``'s branch bit in Bob's Z-row answer."""
    return 1 - (j % 2)


def postprocessing_a(q_a: int, a: str, e0: int, e1: int) -> str:
    """Undo Z errors ``e0`` (slot 2i) and ``e1`` (slot 2i+1) on Alice's column answer.

    Only the two observables with an X or Y factor on an affected qubit flip;
    the middle entry of every column is Z-type and never does.
    """
    if q_a not in (0, 1, 2):
        raise ValueError("q_a must be 0, 1 or 2")
    f = (e0, e1, e0 ^ e1)[q_a]
    if not f:
        return a
    flip = {"0": "1", "1": "0"}
    return flip[a[0]] + a[1] + flip[a[2]]


def dot(u: int, v: int) -> int:
    return (u & v).bit_count() & 1


def b_prime(b: str, q_a: int, rng: np.random.Generator) -> str:
    """Keep ``b[q_a]``; flip the other two positions by one shared uniform bit."""
    u = int(rng.integers(0, 2))
    return "".join(ch if k == q_a else str(int(ch) ^ u) for k, ch in enumerate(b))


# ---------------------------------------------------------------------------
# Scheme hooks
# ---------------------------------------------------------------------------


class SchemeHooks:
    """What a scheme plugs into key generation.

    ``registers`` lists the payload registers (name prefix, width) in the order
    they are concatenated into the masked payload.
    """

    name = "scheme"
    registers: tuple[tuple[str, int], ...] = ()

    @property
    def payload_width(self) -> int:
        return sum(w for _, w in self.registers)

    def sample_pair(self, j: int, rng: np.random.Generator) -> tuple[tuple[int, ...], tuple[int, ...], object]:
        """Return (payload for branch 0, payload for branch 1, lessor-side material)."""
        raise NotImplementedError

    def pack(self, parts: Sequence[int]) -> int:
        v = 0
        for (_, w), p in zip(self.registers, parts, strict=True):
            v = (v << w) | p
        return v


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SlotSecret:
    j: int
    payload0: tuple[int, ...]
    payload1: tuple[int, ...]
    x0: int
    x1: int
    z: int
    e_x: str
    e_z: str
    r0: int
    r1: int
    h0: int
    h1: int

    @property
    def e_z1(self) -> int:
        w = len(self.e_z) // 2
        return int(self.e_z[w:], 2)

    @property
    def e_x1(self) -> int:
        w = len(self.e_x) // 2
        return int(self.e_x[w:], 2)


@dataclass(frozen=True)
class DvkSlot:
    payload0: tuple[int, ...]
    payload1: tuple[int, ...]
    e_z1: int
    z: int
    x0: int
    x1: int


@dataclass(frozen=True)
class Dvk:
    q_b: tuple[int, ...]
    b_prime: tuple[str, ...]
    q_a: tuple[int, ...]
    slots: dict[int, DvkSlot]

    def to_json(self) -> dict:
        return {
            "q_b": list(self.q_b),
            "b_prime": list(self.b_prime),
            "q_a": list(self.q_a),
            "slots": {
                str(j): {
                    "payload0": [format(p, "x") for p in s.payload0],
                    "payload1": [format(p, "x") for p in s.payload1],
                    "e_z1": format(s.e_z1, "x"),
                    "z": s.z,
                    "x0": format(s.x0, "x"),
                    "x1": format(s.x1, "x"),
                }
                for j, s in sorted(self.slots.items())
            },
        }


@dataclass(frozen=True)
class DeletionCertificate:
    """``a[i]`` per pair; per slot the Hadamard outcomes of every payload
    register (``d``) and of the claw register (``d_r``)."""

    a: tuple[str, ...]
    d: tuple[tuple[str, ...], ...]
    d_r: tuple[str, ...]

    def to_json(self) -> dict:
        return {"a": list(self.a), "d": [list(x) for x in self.d], "d_r": list(self.d_r)}

    @classmethod
    def from_json(cls, data: dict) -> DeletionCertificate:
        return cls(tuple(data["a"]), tuple(tuple(x) for x in data["d"]), tuple(data["d_r"]))


class KgAbort(RuntimeError):
    pass


@dataclass
class LessorRecord:
    """Everything the lessor keeps. Classical data only."""

    hooks: SchemeHooks
    n: int
    tcf_width: int
    q_a: list[int]
    q_b: list[int]
    b: list[str]
    b_prime: list[str]
    slots: list[SlotSecret]
    material: list[object]

    @property
    def jb(self) -> set[int]:
        return jb_set(self.q_b)

    def dvk(self) -> Dvk:
        jb = self.jb
        return Dvk(
            tuple(self.q_b),
            tuple(self.b_prime),
            tuple(self.q_a),
            {
                s.j: DvkSlot(s.payload0, s.payload1, s.e_z1, s.z, s.x0, s.x1)
                for s in self.slots
                if s.j not in jb
            },
        )


# ---------------------------------------------------------------------------
# Lessee
# ---------------------------------------------------------------------------


class Lessee:
    """Honest lessee. Subclasses override single steps to deviate."""

    def __init__(self, hooks: SchemeHooks, n: int, tcf_width: int, rng: np.random.Generator):
        self.hooks = hooks
        self.n = n
        self.tcf_width = tcf_width
        self.rng = rng
        self.pairs: list[StateVector] = [StateVector(max_qubits=PAIR_MAX_QUBITS) for _ in range(n)]
        self.q_a: list[int] = []
        self.consumed = False
        self.view: dict[str, dict] = {"masks": {}, "omega": {}, "simbob": {}}

    def state_of(self, j: int) -> StateVector:
        return self.pairs[j // 2]

    @property
    def r_width(self) -> int:
        return self.hooks.payload_width * self.tcf_width

    # stage 1 --------------------------------------------------------------
    def csg_receive(self, j: int, keys: Sequence[TcfKey]) -> list[int]:
        return csg_receive(self.state_of(j), keys, self.rng, f"A{j}", f"R{j}", "Y")

    def phase_kick(self, j: int, z: int) -> None:
        """Test harness hook: a phase left by the sampler lands on ``A{j}``."""
        if z:
            self.state_of(j).apply_z(f"A{j}", 1)

    # stage 2 --------------------------------------------------------------
    def simbob_prepare(self, i: int) -> tuple[StateVector, tuple[str, str]]:
        st = self.pairs[i]
        for j in (2 * i, 2 * i + 1):
            st.allocate(f"B{j}", 1)
            st.apply_cnot(f"A{j}", f"B{j}")
        return st, (f"B{2 * i}", f"B{2 * i + 1}")

    def simbob_reply(self, i: int, view: ServerView) -> str:
        st = self.pairs[i]
        (w,) = view.outputs
        r = st.measure_computational(w, self.rng)
        self.view["simbob"][i] = r
        st.discard(w)
        st.discard(f"B{2 * i}", f"B{2 * i + 1}")
        return r

    def receive_question(self, i: int, q_a: int) -> None:
        self.q_a.append(q_a)

    # stage 3 --------------------------------------------------------------
    def copy_input(self, j: int) -> tuple[StateVector, str]:
        return self.state_of(j), f"R{j}"

    def copy_reply(self, j: int, view: ServerView) -> str:
        st = self.state_of(j)
        copy = view.outputs[0]
        omega = st.measure_computational(copy, self.rng)
        self.view["omega"][j] = omega
        st.discard(copy)
        return omega

    def apply_masks(self, j: int, h0: int, h1: int, r0: int, r1: int) -> None:
        self.view["masks"][j] = (h0, h1, r0, r1)
        st = self.state_of(j)
        blocks, w = self.hooks.payload_width, self.tcf_width
        regs = self.hooks.registers
        shift = self.hooks.payload_width
        for name, width in regs:
            st.allocate(f"{name}{j}", width)
        for name, width in regs:
            shift -= width
            m = (1 << width) - 1
            st.apply_oracle(
                [f"A{j}", f"R{j}"],
                f"{name}{j}",
                lambda a, x, sh=shift, m=m: ((extract_int(x, r1 if a else r0, blocks, w) ^ (h1 if a else h0)) >> sh) & m,
            )

    # deletion -------------------------------------------------------------
    def delete(self) -> DeletionCertificate:
        if self.consumed:
            raise RuntimeError("key already deleted")
        a_list, d_list, dr_list = [], [], []
        for i, st in enumerate(self.pairs):
            qubits = (f"A{2 * i}", f"A{2 * i + 1}")
            a = "".join("0" if st.measure_observable(p, qubits, self.rng) == 1 else "1" for p in M.column(self.q_a[i]))
            a_list.append(a)
            for j in (2 * i, 2 * i + 1):
                d_list.append(tuple(st.measure_hadamard(f"{name}{j}", self.rng) for name, _ in self.hooks.registers))
                dr_list.append(st.measure_hadamard(f"R{j}", self.rng))
        self.consumed = True
        return DeletionCertificate(tuple(a_list), tuple(d_list), tuple(dr_list))


def slot_eval(lessee: Lessee, j: int, inputs: Sequence[str], fn, width: int, rng: np.random.Generator, out: str = "OUT") -> int:
    """Write ``fn(inputs)`` into a fresh register coherently, measure it and drop it."""
    st = lessee.state_of(j)
    name = f"{out}{j}"
    st.allocate(name, width)
    st.apply_oracle(list(inputs), name, fn)
    v = int(st.measure_computational(name, rng), 2)
    st.discard(name)
    return v


# ---------------------------------------------------------------------------
# Key generation
# ---------------------------------------------------------------------------


def kg_protocol(
    hooks: SchemeHooks,
    n: int,
    rng_lessor: np.random.Generator,
    lessee: Lessee,
    tcf_width: int = 2,
    conv: M.ParityConvention | None = None,
    bus: Bus | None = None,
    inject_phase: bool = False,
) -> LessorRecord:
    """Run key generation. Raises :class:`KgAbort` if the lessor's copy check fails."""
    conv = conv or M.convention()
    bus = bus or Bus()
    rng = rng_lessor
    L = hooks.payload_width

    # stage 1
    pays, claws, material = [], [], []
    for j in range(2 * n):
        p0, p1, pub = hooks.sample_pair(j, rng)
        pays.append((p0, p1))
        material.append(pub)
        kps = [tcf_gen(tcf_width, rng) for _ in range(L)]
        bus.send("csg-keys", LESSOR, {"j": j, "keys": [[list(k.key.table0), list(k.key.table1)] for k in kps]})
        ys = bus.send("csg-images", LESSEE, lessee.csg_receive(j, [k.key for k in kps]))
        try:
            x0, x1 = csg_sender_finish(kps, ys)
        except SenderAbort as exc:
            raise KgAbort(str(exc)) from exc
        z = int(rng.integers(0, 2)) if inject_phase else 0
        lessee.phase_kick(j, z)
        claws.append((x0, x1, z))

    # stage 2
    q_b = [int(v) for v in rng.integers(0, 3, size=n)]
    q_a = [int(v) for v in rng.integers(0, 3, size=n)]
    bs, bps = [], []
    for i in range(n):
        st, inputs = lessee.simbob_prepare(i)
        view, session = run_cbqc(BobRowCircuit(f"W{i}"), q_b[i], st, inputs, rng)
        bus.private("simbob", LESSOR, {"i": i, "q_b": q_b[i], "e_x": session.e_x})
        bus.send("simbob", LESSOR, {"i": i, "outputs": list(view.outputs)})
        r = bus.send("simbob-reply", LESSEE, lessee.simbob_reply(i, view))
        if len(r) != 3 or set(r) - {"0", "1"}:
            raise KgAbort("malformed reply")
        b = M.xor_bits(r, session.e_x)
        bs.append(b)
        bps.append(b_prime(b, q_a[i], rng))
        lessee.receive_question(i, bus.send("question", LESSOR, {"i": i, "q_a": q_a[i]})["q_a"])

    # stage 3
    jb = jb_set(q_b)
    rw = L * tcf_width
    slots = []
    for j in range(2 * n):
        i = j // 2
        st, src = lessee.copy_input(j)
        circ = CopyCircuit(f"Rc{j}")
        view, session = run_cbqc(circ, int(j in jb), st, [src], rng)
        bus.send("copy", LESSOR, {"j": j, "outputs": list(view.outputs)})
        omega = bus.send("copy-reply", LESSEE, lessee.copy_reply(j, view))
        if len(omega) != rw or set(omega) - {"0", "1"}:
            raise KgAbort("malformed copy reply")
        x0, x1, z = claws[j]
        e_x1 = int(session.e_x[rw:], 2)
        if j in jb:
            expect = x1 if bs[i][c_index(j)] == "1" else x0
            if int(omega, 2) ^ e_x1 != expect:
                bus.private("abort", LESSOR, {"j": j})
                raise KgAbort(f"copy check failed on slot {j}")
        r0 = int(random_bits(rng, rw), 2)
        r1 = int(random_bits(rng, rw), 2)
        h0 = extract_int(x0, r0, L, tcf_width) ^ hooks.pack(pays[j][0])
        h1 = extract_int(x1, r1, L, tcf_width) ^ hooks.pack(pays[j][1])
        bus.send("masks", LESSOR, {"j": j, "h0": format(h0, "x"), "h1": format(h1, "x"), "r0": format(r0, "x"), "r1": format(r1, "x")})
        lessee.apply_masks(j, h0, h1, r0, r1)
        slots.append(SlotSecret(j, pays[j][0], pays[j][1], x0, x1, z, session.e_x, session.e_z, r0, r1, h0, h1))

    rec = LessorRecord(hooks, n, tcf_width, q_a, q_b, bs, bps, slots, material)
    bus.private("kg", LESSOR, {"b": bs, "b_prime": bps, "q_a": q_a, "q_b": q_b})
    return rec


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def z_error_correct(cert: DeletionCertificate, dvk: Dvk, hooks: SchemeHooks) -> list[tuple[int, int]]:
    """Z error on each slot of each pair, from the Hadamard outcomes.

    Slots without dvk material (Z-row pairs) get 0: their Z errors act as a
    global phase and only Z-type answers are checked there.
    """
    widths = [w for _, w in hooks.registers]
    out = []
    for i in range(len(dvk.q_b)):
        es = []
        for j in (2 * i, 2 * i + 1):
            s = dvk.slots.get(j)
            if s is None:
                es.append(0)
                continue
            e = s.z
            for d, w, p0, p1 in zip(cert.d[j], widths, s.payload0, s.payload1, strict=True):
                if len(d) != w:
                    raise ValueError("certificate width mismatch")
                e ^= dot(int(d, 2), p0 ^ p1)
            e ^= dot(int(cert.d_r[j], 2) ^ s.e_z1, s.x0 ^ s.x1)
            es.append(e)
        out.append((es[0], es[1]))
    return out


def delvrfy(cert: DeletionCertificate, dvk: Dvk, hooks: SchemeHooks, conv: M.ParityConvention | None = None) -> bool:
    conv = conv or M.convention()
    n = len(dvk.q_b)
    try:
        if len(cert.a) != n or len(cert.d) != 2 * n or len(cert.d_r) != 2 * n:
            return False
        if any(len(a) != 3 or set(a) - {"0", "1"} for a in cert.a):
            return False
        errs = z_error_correct(cert, dvk, hooks)
    except (ValueError, TypeError):
        return False
    for i in range(n):
        a2 = postprocessing_a(dvk.q_a[i], cert.a[i], *errs[i])
        if not M.msg(dvk.q_a[i], dvk.q_b[i], a2, dvk.b_prime[i], conv):
            return False
    return True


# ---------------------------------------------------------------------------
# Ideal key state
# ---------------------------------------------------------------------------


def logical_pair(q_b: int, b: str) -> np.ndarray:
    """Alice-side pair left by Bob's row-``q_b`` outcome ``b`` on two Phi_00 pairs.

    It is the joint eigenstate of the row observables with eigenvalues
    ``(-1)^b[k]`` (the row observables equal their transposes). Basis order
    |a_{2i} a_{2i+1}>.
    """
    proj = np.eye(4, dtype=complex)
    for k, p in enumerate(M.row(q_b)):
        proj = proj @ (np.eye(4) + (-1) ** int(b[k]) * p.matrix()) / 2
    vals, vecs = np.linalg.eigh((proj + proj.conj().T) / 2)
    if abs(vals[-1] - 1) > 1e-9 or abs(vals[-2]) > 1e-9:
        raise ValueError(f"outcome {b} impossible for row {q_b}")
    return vecs[:, -1]


def ideal_pair_state(rec: LessorRecord, i: int, vec: np.ndarray | None = None) -> StateVector:
    """The ideal two-slot key state of pair ``i`` from lessor secrets.

    ``vec`` overrides the logical pair (default :func:`logical_pair`).
    """
    hooks = rec.hooks
    if vec is None:
        vec = logical_pair(rec.q_b[i], rec.b[i])
    regs: dict[str, int] = {}
    for j in (2 * i, 2 * i + 1):
        regs[f"A{j}"] = 1
        regs[f"R{j}"] = hooks.payload_width * rec.tcf_width
        for name, w in hooks.registers:
            regs[f"{name}{j}"] = w
    terms = {}
    s0, s1 = rec.slots[2 * i], rec.slots[2 * i + 1]
    for a0 in (0, 1):
        for a1 in (0, 1):
            amp = vec[2 * a0 + a1]
            if abs(amp) < 1e-14:
                continue
            bits = []
            for s, a in ((s0, a0), (s1, a1)):
                x = s.x1 if a else s.x0
                amp *= (-1) ** ((s.z & a) ^ dot(s.e_z1, x))
                bits.append(str(a))
                bits.append(format(x, f"0{regs[f'R{s.j}']}b"))
                for (_, w), p in zip(hooks.registers, s.payload1 if a else s.payload0):
                    bits.append(format(p, f"0{w}b"))
            terms[tuple(bits)] = amp
    order = []
    for j in (2 * i, 2 * i + 1):
        order += [f"A{j}", f"R{j}"] + [f"{name}{j}" for name, _ in hooks.registers]
    return StateVector.from_terms({r: regs[r] for r in order}, terms, max_qubits=PAIR_MAX_QUBITS)


def ideal_case_state(rec: LessorRecord, i: int) -> StateVector | None:
    """Closed-form key state for the superposed and computational cases.

    Superposed: slot ``2i`` carries sign ``b[0]``, slot ``2i+1`` sign ``b[1]``.
    Computational: slot ``2i`` holds branch ``b[1]``, slot ``2i+1`` branch ``b[0]``.
    Returns None for the mixed case.
    """
    case = case_of(rec.q_b[i])
    b = rec.b[i]
    if case is Case.MIXED:
        return None
    if case is Case.SUPERPOSED:
        vec = np.array([1, (-1) ** int(b[1]), (-1) ** int(b[0]), (-1) ** (int(b[0]) + int(b[1]))]) / 2
    else:
        vec = np.zeros(4)
        vec[2 * int(b[1]) + int(b[0])] = 1
    return ideal_pair_state(rec, i, vec.astype(complex))


# ---------------------------------------------------------------------------
# Leasing experiments
# ---------------------------------------------------------------------------


class VraAdversary:
    """Lessee side of a leasing experiment. Defaults behave honestly."""

    def make_lessee(self, hooks: SchemeHooks, n: int, tcf_width: int, rng: np.random.Generator) -> Lessee:
        return Lessee(hooks, n, tcf_width, rng)

    def before_delete(self, lessee: Lessee, rng: np.random.Generator) -> None:
        """Anything done with the key before the certificate is produced."""

    def certificate(self, lessee: Lessee, rng: np.random.Generator) -> DeletionCertificate:
        return lessee.delete()


@dataclass
class LeaseRun:
    rec: LessorRecord | None
    lessee: Lessee
    cert: DeletionCertificate | None
    cert_ok: bool

    @property
    def jb_size(self) -> int:
        return len(self.rec.jb) if self.rec is not None else 0


def lease_and_delete(
    hooks: SchemeHooks,
    adversary: VraAdversary,
    n: int,
    rng_c: np.random.Generator,
    rng_a: np.random.Generator,
    tcf_width: int = 2,
    bus: Bus | None = None,
    inject_phase: bool = False,
) -> LeaseRun:
    """Key generation against ``adversary`` followed by deletion and DelVrfy."""
    bus = bus or Bus()
    lessee = adversary.make_lessee(hooks, n, tcf_width, rng_a)
    try:
        rec = kg_protocol(hooks, n, rng_c, lessee, tcf_width, bus=bus, inject_phase=inject_phase)
    except KgAbort:
        return LeaseRun(None, lessee, None, False)
    adversary.before_delete(lessee, rng_a)
    cert = adversary.certificate(lessee, rng_a)
    bus.send("cert", LESSEE, cert.to_json())
    dvk = rec.dvk()
    bus.private("dvk", LESSOR, dvk.to_json())
    ok = delvrfy(cert, dvk, hooks)
    bus.private("delvrfy", LESSOR, {"ok": ok})
    return LeaseRun(rec, lessee, cert, ok)


def dvk_from_json(data: dict) -> Dvk:
    return Dvk(
        tuple(data["q_b"]),
        tuple(data["b_prime"]),
        tuple(data["q_a"]),
        {
            int(j): DvkSlot(
                tuple(int(p, 16) for p in s["payload0"]),
                tuple(int(p, 16) for p in s["payload1"]),
                int(s["e_z1"], 16),
                int(s["z"]),
                int(s["x0"], 16),
                int(s["x1"], 16),
            )
            for j, s in data["slots"].items()
        },
    )


def zero_certificate(lessee: Lessee) -> DeletionCertificate:
    """All-zero certificate. Every ``a_i`` has even parity, so it never verifies."""
    n, hooks = lessee.n, lessee.hooks
    d = tuple(tuple("0" * w for _, w in hooks.registers) for _ in range(2 * n))
    return DeletionCertificate(("000",) * n, d, ("0" * lessee.r_width,) * (2 * n))


def random_certificate(lessee: Lessee, rng) -> DeletionCertificate:
    n, hooks = lessee.n, lessee.hooks
    a = tuple(format(int(v), "03b") for v in rng.integers(0, 8, size=n))
    d = tuple(tuple(random_bits(rng, w) for _, w in hooks.registers) for _ in range(2 * n))
    d_r = tuple(random_bits(rng, lessee.r_width) for _ in range(2 * n))
    return DeletionCertificate(a, d, d_r)



# ---------------------------------------------------------------------------
# Exact deletion failure of a lessee that measures every control qubit
# ---------------------------------------------------------------------------


def premeasured_pair_failure(q_b: int, q_a: int, b: str, conv: M.ParityConvention | None = None) -> Fraction:
    """Probability that DelVrfy rejects pair ``i`` after its control qubits were
    measured in the computational basis.

    Once collapsed, the Hadamard outcomes leave uniform independent Z-error
    estimates ``e0, e1``. Computed over the logical pair with exact outcome
    distributions.
    """
    from .qsim import Observable, exact_distribution

    conv = conv or M.convention()
    vec = logical_pair(q_b, b)
    fail = Fraction(0)
    for a0 in (0, 1):
        for a1 in (0, 1):
            p_branch = Fraction(round(abs(vec[2 * a0 + a1]) ** 2 * 2**20), 2**20)
            if p_branch == 0:
                continue
            st = StateVector.from_terms({"A0": 1, "A1": 1}, {(str(a0), str(a1)): 1.0})
            plan = [Observable(p, ("A0", "A1")) for p in M.column(q_a)]
            dist = exact_distribution(st, plan)
            for a, pa in dist.items():
                pa = Fraction(round(pa * 2**20), 2**20)
                for e0 in (0, 1):
                    for e1 in (0, 1):
                        # b' agrees with b where the check reads it and has the same parity
                        if not M.msg(q_a, q_b, postprocessing_a(q_a, a, e0, e1), b, conv):
                            fail += p_branch * pa / 4
    return fail


def premeasured_failure_rate(n: int, conv: M.ParityConvention | None = None) -> Fraction:
    """Exact DelVrfy rejection rate over uniform questions and honest Bob outcomes."""
    conv = conv or M.convention()
    per_pair = Fraction(0)
    for q_b in range(3):
        outcomes = M._strings(conv.bob_parity)
        for b in outcomes:
            for q_a in range(3):
                per_pair += premeasured_pair_failure(q_b, q_a, b, conv) / (3 * len(outcomes) * 3)
    return 1 - (1 - per_pair) ** n
