import inspect
import itertools

import numpy as np
import pytest

from cskl_lab import core as C
from cskl_lab import msg as M
from cskl_lab.blind import random_bits
from cskl_lab.csg import extract_int
from cskl_lab.pke import PkeHooks
from cskl_lab.prf import PrfHooks
from cskl_lab.qsim import StateVector
from cskl_lab.transcript import Bus, GameTranscript, trial_rngs


def lease(n, seed, trial=0, hooks=None, lessee_cls=C.Lessee, inject_phase=False, bus=None):
    hooks = hooks or PkeHooks()
    rng_c, rng_a = trial_rngs(seed, trial)
    lessee = lessee_cls(hooks, n, 2, rng_a)
    rec = C.kg_protocol(hooks, n, rng_c, lessee, 2, bus=bus, inject_phase=inject_phase)
    return rec, lessee


# --- case helpers -----------------------------------------------------------


def test_case_tags_from_row_semantics():
    assert [C.case_of(y) for y in range(3)] == [C.Case.SUPERPOSED, C.Case.COMPUTATIONAL, C.Case.MIXED]
    assert C.z_row() == M.Z_ROW


def test_jb_set():
    assert C.jb_set([0, 1, 2, 1]) == {2, 3, 6, 7}
    assert C.jb_set([0, 2]) == set()


def test_postprocessing_examples():
    assert C.postprocessing_a(0, "110", 1, 0) == "011"
    assert C.postprocessing_a(1, "101", 0, 1) == "000"
    assert C.postprocessing_a(2, "000", 1, 1) == "000"
    with pytest.raises(ValueError):
        C.postprocessing_a(3, "000", 0, 0)


def test_postprocessing_preserves_parity_exhaustively():
    inputs = list(itertools.product(range(3), ["".join(t) for t in itertools.product("01", repeat=3)], (0, 1), (0, 1)))
    assert len(inputs) == 96
    assert all(M.par(C.postprocessing_a(*x)) == M.par(x[1]) for x in inputs)


def test_postprocessing_undoes_z_errors_on_column_outcomes():
    # Z on an A qubit flips exactly the column observables with an X or Y factor there.
    for q_a in range(3):
        col = M.column(q_a)
        for e0, e1 in itertools.product((0, 1), repeat=2):
            z = np.kron(np.diag([1, -1]) if e0 else np.eye(2), np.diag([1, -1]) if e1 else np.eye(2))
            flips = "".join("0" if np.allclose(z @ p.matrix() @ z, p.matrix()) else "1" for p in col)
            assert C.postprocessing_a(q_a, "000", e0, e1) == flips


def test_b_prime_keeps_intersection_and_parity(rng):
    for _ in range(200):
        b = rng.choice(["000", "011", "101", "110"])
        q_a = int(rng.integers(0, 3))
        bp = C.b_prime(b, q_a, rng)
        assert bp[q_a] == b[q_a] and M.par(bp) == M.par(b)


# --- key generation -----------------------------------------------------------


@pytest.mark.parametrize("hooks", [PkeHooks(), PrfHooks(3)], ids=["pke", "prf"])
def test_kg_reaches_ideal_key_state(hooks):
    for t in range(40):
        rec, lessee = lease(2, 17, t, hooks)
        for i in range(2):
            assert lessee.pairs[i].fidelity(C.ideal_pair_state(rec, i)) >= 1 - 1e-9
            closed = C.ideal_case_state(rec, i)
            if closed is not None:
                assert lessee.pairs[i].fidelity(closed) >= 1 - 1e-9


def test_all_cases_covered_by_kg():
    seen = set()
    for t in range(40):
        rec, _ = lease(1, 3, t)
        seen.add(C.case_of(rec.q_b[0]))
    assert seen == set(C.Case)


def test_mixed_logical_pair_is_maximally_entangled():
    for b in ["000", "011", "101", "110"]:
        v = C.logical_pair(M.MIXED_ROW, b)
        m = v.reshape(2, 2)
        assert np.allclose(m @ m.conj().T, np.eye(2) / 2)
    with pytest.raises(ValueError):
        C.logical_pair(M.MIXED_ROW, "100")


def test_branch_index_in_z_row_answer():
    # Slot 2i holds branch b[1], slot 2i+1 branch b[0].
    assert [C.c_index(j) for j in range(4)] == [1, 0, 1, 0]


class RandomOmegaLessee(C.Lessee):
    def copy_reply(self, j, view):
        omega = super().copy_reply(j, view)
        return random_bits(self.rng, len(omega))


def test_random_omega_aborts_at_expected_rate():
    width = PkeHooks().payload_width * 2
    aborts = trials = 0
    for t in range(400):
        rng_c, rng_a = trial_rngs(21, t)
        lessee = RandomOmegaLessee(PkeHooks(), 1, 2, rng_a)
        try:
            rec = C.kg_protocol(PkeHooks(), 1, rng_c, lessee, 2)
        except C.KgAbort:
            aborts += 1
            trials += 1
            continue
        if rec.jb:
            trials += 1
    assert trials > 80
    assert aborts / trials >= 1 - 2.0**-width - 4 * np.sqrt(1 / trials)


def test_honest_lessee_never_aborts():
    for t in range(100):
        lease(2, 23, t)


def test_kg_transcript_is_deterministic():
    def run():
        t = GameTranscript("kg", 7)
        lease(2, 7, 0, bus=Bus(t))
        return t.dumps()

    assert run() == run()


def test_lessor_record_holds_classical_data_only():
    rec, _ = lease(2, 5)

    def walk(x):
        assert not isinstance(x, (StateVector, C.Lessee))
        if isinstance(x, (list, tuple, set)):
            for y in x:
                walk(y)
        elif isinstance(x, dict):
            for y in x.values():
                walk(y)
        elif hasattr(x, "__dataclass_fields__"):
            for f in x.__dataclass_fields__:
                walk(getattr(x, f))

    walk(rec)


def test_lessor_code_never_touches_quantum_state():
    forbidden = ("measure", "amplitudes", "fidelity", "reduced_density", ".pairs", ".apply_x", ".apply_z", ".apply_h", ".apply_cnot", ".apply_oracle")
    for fn in (C.kg_protocol, C.delvrfy, C.z_error_correct, C.LessorRecord.dvk):
        src = inspect.getsource(fn)
        for word in forbidden:
            assert word not in src, (fn.__name__, word)


def test_masking_hides_the_unexposed_payload():
    # Reusing the known preimage on the other branch predicts each payload bit at chance.
    hooks = PrfHooks(3)
    hits = total = 0
    for t in range(300):
        rec, _lessee = lease(1, 31, t, hooks)
        for j in rec.jb:
            s = rec.slots[j]
            c = int(rec.b[0][C.c_index(j)])
            x_c = s.x1 if c else s.x0
            h_o, r_o = (s.h0, s.r0) if c else (s.h1, s.r1)
            true_o = hooks.pack(s.payload0 if c else s.payload1)
            guess = h_o ^ extract_int(x_c, r_o, hooks.payload_width, 2)
            for k in range(hooks.payload_width):
                hits += ((guess ^ true_o) >> k) & 1 == 0
                total += 1
    assert total > 500
    assert abs(hits / total - 0.5) <= 4 * np.sqrt(0.25 / total)


# --- deletion -----------------------------------------------------------------


def test_honest_deletion_verifies_for_every_question_tuple():
    for n in (1, 2):
        needed = set(itertools.product(itertools.product(range(3), repeat=n), repeat=2))
        t = 0
        while needed and t < 4000:
            rec, lessee = lease(n, 40 + n, t, inject_phase=True)
            assert C.delvrfy(lessee.delete(), rec.dvk(), rec.hooks)
            needed.discard((tuple(rec.q_a), tuple(rec.q_b)))
            t += 1
        assert not needed


def test_honest_deletion_verifies_up_to_n6():
    for n in range(1, 7):
        for t in range(15):
            rec, lessee = lease(n, 50, t, inject_phase=True)
            assert C.delvrfy(lessee.delete(), rec.dvk(), rec.hooks)


def test_z_error_correct_matches_statevector_phases():
    hooks = PkeHooks()
    checked = 0
    for t in range(60):
        rec, lessee = lease(1, 61, t, inject_phase=True)
        if C.case_of(rec.q_b[0]) is C.Case.COMPUTATIONAL:
            continue
        st = lessee.pairs[0]
        d = tuple((st.measure_hadamard(f"SK{j}", lessee.rng),) for j in (0, 1))
        dr = tuple(st.measure_hadamard(f"R{j}", lessee.rng) for j in (0, 1))
        st.discard("SK0", "R0", "SK1", "R1")
        cert = C.DeletionCertificate(("000",), d, dr)
        (e0, e1), = C.z_error_correct(cert, rec.dvk(), hooks)
        vec = C.logical_pair(rec.q_b[0], rec.b[0]).copy()
        for a0, a1 in itertools.product((0, 1), repeat=2):
            vec[2 * a0 + a1] *= (-1) ** (e0 * a0 + e1 * a1)
        terms = {(str(a0), str(a1)): vec[2 * a0 + a1] for a0, a1 in itertools.product((0, 1), repeat=2)}
        assert st.fidelity(StateVector.from_terms({"A0": 1, "A1": 1}, terms)) >= 1 - 1e-9
        checked += 1
    assert checked > 20


def non_z_row_lease(seed):
    for t in range(100):
        rec, lessee = lease(1, seed, t)
        if C.case_of(rec.q_b[0]) is not C.Case.COMPUTATIONAL:
            return rec, lessee
    raise AssertionError("no non-Z-row lease found")


def test_z_error_trivial_cases():
    rec, lessee = non_z_row_lease(70)
    dvk = rec.dvk()
    plain = {j: C.DvkSlot(s.payload0, s.payload1, 0, s.z, s.x0, s.x1) for j, s in dvk.slots.items()}
    dvk0 = C.Dvk(dvk.q_b, dvk.b_prime, dvk.q_a, plain)
    zero = C.zero_certificate(lessee)
    assert C.z_error_correct(zero, dvk0, rec.hooks) == [(dvk.slots[0].z, dvk.slots[1].z)]
    same = C.DvkSlot((5,), (5,), 0, 1, 0, 0)
    fake = C.Dvk(dvk.q_b, dvk.b_prime, dvk.q_a, {0: same, 1: same})
    cert = C.DeletionCertificate(("000",), (("1" * 11,), ("1" * 11,)), ("1" * 22,) * 2)
    assert C.z_error_correct(cert, fake, rec.hooks) == [(1, 1)]


def test_z_error_width_mismatch():
    rec, _lessee = non_z_row_lease(71)
    bad = C.DeletionCertificate(("000",), (("0",), ("0",)), ("0" * 22,) * 2)
    with pytest.raises(ValueError):
        C.z_error_correct(bad, rec.dvk(), rec.hooks)
    assert not C.delvrfy(bad, rec.dvk(), rec.hooks)


def test_flipped_answer_bit_fails():
    for t in range(20):
        rec, lessee = lease(2, 80, t)
        cert = lessee.delete()
        a = list(cert.a)
        a[1] = ("1" if a[1][0] == "0" else "0") + a[1][1:]
        bad = C.DeletionCertificate(tuple(a), cert.d, cert.d_r)
        assert not C.delvrfy(bad, rec.dvk(), rec.hooks)


def test_malformed_certificates_rejected():
    rec, lessee = lease(2, 81)
    cert = lessee.delete()
    dvk = rec.dvk()
    assert not C.delvrfy(C.DeletionCertificate(cert.a[:1], cert.d, cert.d_r), dvk, rec.hooks)
    assert not C.delvrfy(C.DeletionCertificate(("01x", cert.a[1]), cert.d, cert.d_r), dvk, rec.hooks)
    assert not C.delvrfy(C.zero_certificate(lessee), dvk, rec.hooks)


def test_certificate_roundtrip():
    rec, lessee = lease(2, 82)
    cert = lessee.delete()
    assert C.DeletionCertificate.from_json(cert.to_json()) == cert
    dvk = rec.dvk()
    assert C.dvk_from_json(dvk.to_json()) == dvk


def test_delete_twice_refused():
    _, lessee = lease(1, 83)
    lessee.delete()
    with pytest.raises(RuntimeError):
        lessee.delete()


def test_unrelated_certificate_mostly_rejected():
    n, trials, ok = 4, 300, 0
    for t in range(trials):
        rec, _ = lease(n, 90, t)
        _, other = lease(n, 91, t)
        ok += C.delvrfy(other.delete(), rec.dvk(), rec.hooks)
    assert 1 - ok / trials >= 1 - (8 / 9 + 0.05) ** n


def test_premeasured_failure_exact_values():
    from fractions import Fraction

    for b in ["000", "011", "101", "110"]:
        for q_a in range(3):
            assert C.premeasured_pair_failure(M.Z_ROW, q_a, b) == 0
            assert C.premeasured_pair_failure(M.X_ROW, q_a, b) == Fraction(1, 2)
            assert C.premeasured_pair_failure(M.MIXED_ROW, q_a, b) == Fraction(1, 2)
    assert C.premeasured_failure_rate(1) == Fraction(1, 3)
    assert C.premeasured_failure_rate(4) == 1 - Fraction(2, 3) ** 4
