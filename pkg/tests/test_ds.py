import itertools

import numpy as np
import pytest

from cskl_lab import core as C
from cskl_lab import ds
from cskl_lab.prf import teprf_eval, teprf_kg
from cskl_lab.qsim import StateVector
from cskl_lab.transcript import trial_rngs


def sigma_bound(p, n, k=4):
    return k * np.sqrt(max(p * (1 - p), 1e-12) / n)


def lease(n, seed, trial=0, width=4, inject_phase=False):
    rng_c, rng_a = trial_rngs(seed, trial)
    hooks = ds.DsHooks(width)
    lessee = C.Lessee(hooks, n, 2, rng_a)
    rec = C.kg_protocol(hooks, n, rng_c, lessee, 2, inject_phase=inject_phase)
    return rec, lessee, rng_c, rng_a


def keys(rng, width=4):
    kp = teprf_kg(int(rng.integers(0, 1 << width)), width, rng)
    msk = ds.cs_setup(width, rng)
    return kp, msk


def test_constrained_sign_and_verify(rng):
    for _ in range(100):
        kp, msk = keys(rng)
        m = int(rng.integers(0, 16))
        t = teprf_eval(kp.key0, m)
        sk = ds.cs_constrain(msk, kp.key0)
        sig = ds.cs_sign(sk, ds.encode(m, t))
        assert ds.cs_vrfy(msk.vk, ds.encode(m, t), sig)
        assert ds.cs_sign(sk, ds.encode(m, 1 - t)) is None


def test_flipped_signature_bit_rejected(rng):
    for _ in range(100):
        kp, msk = keys(rng)
        m = int(rng.integers(0, 16))
        mu = ds.encode(m, teprf_eval(kp.key0, m))
        sig = ds.cs_sign(ds.cs_constrain(msk, kp.key0), mu)
        bit = int(rng.integers(0, ds.TAU))
        assert not ds.cs_vrfy(msk.vk, mu, sig ^ (1 << bit))


def test_branch_keys_sign_identically_off_target(rng):
    kp, msk = keys(rng)
    s0, s1 = ds.cs_constrain(msk, kp.key0), ds.cs_constrain(msk, kp.key1)
    for m in range(16):
        for t in (0, 1):
            mu = ds.encode(m, t)
            if m != kp.target:
                assert ds.cs_sign(s0, mu) == ds.cs_sign(s1, mu)
            else:
                assert (ds.cs_sign(s0, mu) is None) != (ds.cs_sign(s1, mu) is None)


def test_vrfy_malformed(rng):
    _, msk = keys(rng)
    assert not ds.cs_vrfy(msk.vk, 0, None)
    assert not ds.cs_vrfy(msk.vk, 1 << 10, 0)
    assert not ds.cs_vrfy(msk.vk, 0, -1)


def test_key_packing_roundtrip(rng):
    kp, msk = keys(rng)
    sk = ds.cs_constrain(msk, kp.key1)
    assert ds.ConstrainedSigKey.unpack(sk.pack(), 4) == sk


def test_end_to_end_signing():
    for t in range(100):
        ok, fid, del_ok = ds.correctness_run(4, *trial_rngs(300, t))
        assert ok and del_ok and fid >= 1 - 1e-9


def test_fifty_signatures_keep_key_state():
    ok, fid, del_ok = ds.correctness_run(4, *trial_rngs(301, 0), signs=50)
    assert ok and del_ok and fid >= 1 - 1e-9


def test_coherent_sign_preserves_random_slots():
    for t in range(200):
        rec, lessee, rng_c, rng_a = lease(1, 302, t)
        tg = ds.targets(rec)
        before = lessee.pairs[0].copy()
        for j in (0, 1):
            m = (tg[j] + 1 + int(rng_c.integers(0, 15))) % 16
            t_j = teprf_eval(rec.material[j][0].key0, m)
            ds.qsign(lessee, j, m, t_j, rng_a)
        assert lessee.pairs[0].fidelity(before) >= 1 - 1e-9


def test_differing_point_message_collapses():
    for t in range(50):
        rec, lessee, _rng_c, rng_a = lease(1, 303, t)
        if C.case_of(rec.q_b[0]) is C.Case.SUPERPOSED:
            break
    before = lessee.pairs[0].copy()
    m = ds.targets(rec)
    try:
        ds.cskl_sign(lessee, m, rng_a)
    except ds.SignRefused:
        pass
    assert lessee.pairs[0].fidelity(before) < 0.5 + 1e-9


def test_tampered_t_rejected():
    rec, lessee, rng_c, rng_a = lease(2, 304)
    m = ds.random_message(rng_c, ds.targets(rec), 4)
    sig = ds.cskl_sign(lessee, m, rng_a)
    bad = list(sig)
    bad[0] = (1 - bad[0][0], bad[0][1])
    assert ds.cskl_signvrfy(ds.svk(rec), sig, m)
    assert not ds.cskl_signvrfy(ds.svk(rec), bad, m)
    assert not ds.cskl_signvrfy(ds.svk(rec), sig[:-1], m)


def test_shape_error():
    _rec, lessee, _rng_c, rng_a = lease(1, 305)
    with pytest.raises(ValueError):
        ds.cskl_sign(lessee, [0], rng_a)


def test_z_error_with_both_payload_registers_matches_phases():
    hooks = ds.DsHooks(2)
    checked = 0
    for t in range(40):
        rec, lessee, _, rng_a = lease(1, 306, t, width=2, inject_phase=True)
        if C.case_of(rec.q_b[0]) is C.Case.COMPUTATIONAL:
            continue
        st = lessee.pairs[0]
        d = tuple(tuple(st.measure_hadamard(f"{name}{j}", rng_a) for name, _ in hooks.registers) for j in (0, 1))
        dr = tuple(st.measure_hadamard(f"R{j}", rng_a) for j in (0, 1))
        st.discard("SK0", "CSK0", "R0", "SK1", "CSK1", "R1")
        ((e0, e1),) = C.z_error_correct(C.DeletionCertificate(("000",), d, dr), rec.dvk(), hooks)
        vec = C.logical_pair(rec.q_b[0], rec.b[0]).copy()
        for a0, a1 in itertools.product((0, 1), repeat=2):
            vec[2 * a0 + a1] *= (-1) ** (e0 * a0 + e1 * a1)
        terms = {(str(a0), str(a1)): vec[2 * a0 + a1] for a0, a1 in itertools.product((0, 1), repeat=2)}
        assert st.fidelity(StateVector.from_terms({"A0": 1, "A1": 1}, terms)) >= 1 - 1e-9
        checked += 1
    assert checked > 15


def run(adv_cls, trials, seed, n=2):
    return [ds.ruf_vra_experiment(adv_cls(), n, *trial_rngs(seed, t)) for t in range(trials)]


def test_honest_delete_within_bound():
    outs = run(ds.HonestDeleteAdversary, 400, 310)
    rate = np.mean([o.success for o in outs])
    bound = np.mean([2.0 ** -o.jb_size for o in outs])
    assert rate <= bound + sigma_bound(bound, len(outs))


@pytest.mark.parametrize("adv", [ds.GarbageCertAdversary, ds.KeepKeyAdversary])
def test_keeping_the_key_fails_verification(adv):
    outs = run(adv, 100, 311, n=3)
    assert np.mean([o.success for o in outs]) <= 0.05


@pytest.mark.parametrize("adv", sorted(ds.ADVERSARIES))
def test_transcript_verdict_replays(adv):
    for trial in range(3):
        t = ds.run_transcript(adv, 2, 312, trial)
        assert ds.judge(t) == t.verdict
