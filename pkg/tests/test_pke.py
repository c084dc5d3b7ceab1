import numpy as np
import pytest

from cskl_lab import core as C
from cskl_lab import pke
from cskl_lab.transcript import trial_rngs


def sigma_bound(p, n, k=4):
    return k * np.sqrt(max(p * (1 - p), 1e-12) / n)


def lease(n, seed, trial=0):
    rng_c, rng_a = trial_rngs(seed, trial)
    lessee = C.Lessee(pke.PkeHooks(), n, 2, rng_a)
    rec = C.kg_protocol(pke.PkeHooks(), n, rng_c, lessee, 2)
    return rec, lessee, rng_c, rng_a


def test_toy_pke_correct(rng):
    for _ in range(100):
        kp = pke.pke_kg(rng)
        for b in (0, 1):
            assert pke.pke_dec(kp.sk, pke.pke_enc(kp.pk, b, rng)) == b


def test_toy_pke_ciphertexts_differ_and_are_randomized(rng):
    distinct = same_plain = 0
    for _ in range(100):
        kp = pke.pke_kg(rng)
        distinct += pke.pke_enc(kp.pk, 0, rng) != pke.pke_enc(kp.pk, 1, rng)
        same_plain += pke.pke_enc(kp.pk, 0, rng) != pke.pke_enc(kp.pk, 0, rng)
    assert distinct == 100
    assert same_plain >= 95


def test_toy_pke_errors(rng):
    kp = pke.pke_kg(rng)
    with pytest.raises(ValueError):
        pke.pke_enc(kp.pk, 2, rng)
    with pytest.raises(ValueError):
        pke.pke_dec(kp.sk, (0, 5))


def test_subgroup_parameters():
    assert pke.P == 2 * pke.Q + 1
    assert pow(pke.G, pke.Q, pke.P) == 1 and pke.G != 1


def test_end_to_end_decryption():
    for t in range(100):
        ok, del_ok = pke.correctness_run(4, *trial_rngs(100, t))
        assert ok and del_ok


def test_decryption_with_injected_phases():
    for t in range(50):
        ok, del_ok = pke.correctness_run(3, *trial_rngs(101, t), inject_phase=True)
        assert ok and del_ok


def test_decryption_is_non_destructive():
    rec, lessee, rng_c, rng_a = lease(2, 102)
    before = [st.copy() for st in lessee.pairs]
    m = [int(b) for b in rng_c.integers(0, 2, size=4)]
    for _ in range(5):
        assert pke.cskl_dec(lessee, pke.cskl_enc(pke.public_key(rec), m, rng_c), rng_a) == m
    for a, b in zip(before, lessee.pairs):
        assert a.fidelity(b) >= 1 - 1e-9


def test_all_zero_message():
    rec, lessee, rng_c, rng_a = lease(2, 103)
    assert pke.cskl_dec(lessee, pke.cskl_enc(pke.public_key(rec), [0] * 4, rng_c), rng_a) == [0] * 4


def test_shape_errors():
    rec, lessee, rng_c, rng_a = lease(1, 104)
    with pytest.raises(ValueError):
        pke.cskl_enc(pke.public_key(rec), [0, 1, 1], rng_c)
    bad = pke.CsklCiphertext(pke.cskl_enc(pke.public_key(rec), [0, 1], rng_c).cts[:1])
    with pytest.raises(ValueError):
        pke.cskl_dec(lessee, bad, rng_a)


def test_decrypt_after_delete_refused():
    rec, lessee, rng_c, rng_a = lease(1, 105)
    lessee.delete()
    with pytest.raises(RuntimeError):
        pke.cskl_dec(lessee, pke.cskl_enc(pke.public_key(rec), [0, 1], rng_c), rng_a)


def run(adv_cls, trials, seed, n=2):
    return [pke.ow_vra_experiment(adv_cls(), n, *trial_rngs(seed, t)) for t in range(trials)]


def test_honest_delete_within_bound():
    outs = run(pke.HonestDeleteAdversary, 600, 110)
    rate = np.mean([o.success for o in outs])
    bound = np.mean([2.0 ** -o.jb_size for o in outs])
    assert all(o.cert_ok for o in outs)
    assert rate <= bound + sigma_bound(bound, len(outs))


def test_garbage_certificate_never_wins():
    assert all(o.success == 0 and not o.cert_ok for o in run(pke.GarbageCertAdversary, 100, 111))


def test_random_certificate_rarely_verifies():
    outs = run(pke.RandomCertAdversary, 400, 112, n=3)
    assert np.mean([o.cert_ok for o in outs]) <= 0.05


def test_decrypt_first_is_blocked_by_order():
    trials, n = 600, 2
    outs = run(pke.DecryptFirstAdversary, trials, 113, n)
    p = 2.0 ** (-2 * n)
    assert all(o.cert_ok for o in outs)
    assert np.mean([o.success for o in outs]) <= p + sigma_bound(p, trials)


def test_challenge_unavailable_before_certificate():
    seen = {}

    class Probe(pke.HonestDeleteAdversary):
        def before_delete(self, lessee, rng):
            try:
                self.challenge()
            except pke.OrderViolation:
                seen["blocked"] = True

    pke.ow_vra_experiment(Probe(), 1, *trial_rngs(114, 0))
    assert seen == {"blocked": True}


def test_residual_decryption_is_chance_on_masked_slots():
    outs = run(pke.ResidualDecryptAdversary, 400, 115)
    hits = sum(o.masked_hits for o in outs)
    total = sum(o.masked_total for o in outs)
    assert total > 300
    assert abs(hits / total - 0.5) <= sigma_bound(0.5, total)


def test_premeasure_rejection_matches_exact():
    trials, n = 1500, 2
    outs = run(pke.PremeasureAdversary, trials, 116, n)
    p = float(C.premeasured_failure_rate(n))
    assert abs(np.mean([not o.cert_ok for o in outs]) - p) <= sigma_bound(p, trials)


@pytest.mark.parametrize("adv", sorted(pke.ADVERSARIES))
def test_transcript_verdict_replays(adv):
    for trial in range(4):
        t = pke.run_transcript(adv, 2, 117, trial)
        assert pke.judge(t) == t.verdict
        assert pke.run_transcript(adv, 2, 117, trial).dumps() == t.dumps()
