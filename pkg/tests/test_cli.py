import json

import pytest
from click.testing import CliRunner

from cskl_lab.cli import main
from cskl_lab.transcript import GameTranscript, canonical


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, args, env=None):
    res = runner.invoke(main, args, env=env or {"CDEL_SEED": ""}, catch_exceptions=False)
    return res, (json.loads(res.output) if res.exit_code == 0 else None)


def test_msg_value_classical(runner):
    res, rep = invoke(runner, ["msg-value", "--mode", "classical"])
    assert res.exit_code == 0
    assert rep["value"] == "8/9" and rep["schema"] == "cskl-lab/report/1"


def test_msg_value_quantum(runner):
    _, rep = invoke(runner, ["msg-value", "--mode", "quantum"])
    assert rep["value"] == pytest.approx(1.0)
    _, rep = invoke(runner, ["msg-value", "--mode", "quantum", "--depolarize", "1"])
    assert rep["value"] == pytest.approx(0.5)


def test_msg_value_bad_convention(runner):
    res = runner.invoke(main, ["msg-value", "--convention", "2,0"])
    assert res.exit_code != 0


def test_ccd_honest_and_abort(runner):
    _, rep = invoke(runner, ["ccd", "--n", "1", "--trials", "2000", "--seed", "3"])
    assert rep["exact_round_value"] == pytest.approx(5 / 6)
    assert rep["deviation_sigma"] < 4
    _, rep = invoke(runner, ["ccd", "--n", "2", "--trials", "200", "--prover", "abort"])
    assert rep["win_rate"] == 0


@pytest.mark.parametrize("scheme", ["pke", "prf", "ds"])
def test_skl_reports(runner, scheme):
    res, rep = invoke(runner, ["skl", "--scheme", scheme, "--n", "2", "--trials", "20", "--seed", "4"])
    assert res.exit_code == 0
    assert all(rep["invariants"].values())


def test_skl_unknown_adversary(runner):
    res = runner.invoke(main, ["skl", "--scheme", "pke", "--trials", "1", "--adversary", "nope"])
    assert res.exit_code != 0


def test_stress_flag_only_for_prf(runner):
    res = runner.invoke(main, ["skl", "--scheme", "pke", "--trials", "1", "--stress-hyb2"])
    assert res.exit_code != 0


def test_byte_identical_output_and_json_file(runner, tmp_path):
    args = ["skl", "--scheme", "ds", "--n", "2", "--trials", "5", "--seed", "9", "--json", str(tmp_path / "r.json")]
    a, _ = invoke(runner, args)
    b, _ = invoke(runner, args)
    assert a.output == b.output
    assert (tmp_path / "r.json").read_text() == a.output


def test_env_seed_overrides_flag(runner):
    _, a = invoke(runner, ["ccd", "--trials", "50", "--seed", "1"], env={"CDEL_SEED": "77"})
    _, b = invoke(runner, ["ccd", "--trials", "50", "--seed", "77"])
    assert a == b and a["seed"] == 77


def test_invariant_violation_exits_nonzero(runner, monkeypatch):
    from cskl_lab import cli, pke

    monkeypatch.setattr(pke, "correctness_run", lambda *a, **k: (False, True))
    res = runner.invoke(main, ["skl", "--scheme", "pke", "--n", "1", "--trials", "2"], env={"CDEL_SEED": ""})
    assert res.exit_code == cli.InvariantViolation.exit_code


@pytest.mark.parametrize(
    "args",
    [
        ["ccd", "--n", "2", "--trials", "1", "--seed", "5"],
        ["skl", "--scheme", "pke", "--n", "2", "--trials", "1", "--seed", "5"],
        ["skl", "--scheme", "prf", "--n", "2", "--trials", "1", "--seed", "5", "--stress-hyb2", "--adversary", "one-branch"],
        ["skl", "--scheme", "ds", "--n", "2", "--trials", "1", "--seed", "5"],
    ],
)
def test_transcript_replay(runner, tmp_path, args):
    path = tmp_path / "t.json"
    invoke(runner, args + ["--transcript", str(path)])
    res, rep = invoke(runner, ["transcript-replay", str(path)])
    assert res.exit_code == 0
    assert all(rep["invariants"].values())


def _tamper_guess(path, recompute_digest):
    data = json.loads(path.read_text())
    t = GameTranscript.from_json(data)
    for r in t.rounds:
        if r.phase == "guess":
            g = r.payload
            if isinstance(g, dict):
                g["b_prime"] = ["111" if x != "111" else "000" for x in g["b_prime"]]
            else:
                g = [1 - x for x in g]
            r.payload_hex = canonical(g).hex()
    out = t.to_json()
    if not recompute_digest:
        out["digest"] = data["digest"]
    path.write_text(json.dumps(out))


def test_tampered_payload_flagged(runner, tmp_path):
    path = tmp_path / "t.json"
    invoke(runner, ["skl", "--scheme", "pke", "--n", "1", "--trials", "1", "--seed", "6", "--transcript", str(path)])
    _tamper_guess(path, recompute_digest=True)
    res = runner.invoke(main, ["transcript-replay", str(path)], env={"CDEL_SEED": ""})
    assert res.exit_code == 1
    rep = json.loads(res.output.split("\n}\n")[0] + "\n}")
    assert rep["invariants"]["verdict"] is False or rep["invariants"]["regenerated"] is False


def test_digest_mismatch_flagged(runner, tmp_path):
    path = tmp_path / "t.json"
    invoke(runner, ["skl", "--scheme", "pke", "--n", "1", "--trials", "1", "--seed", "6", "--transcript", str(path)])
    _tamper_guess(path, recompute_digest=False)
    res = runner.invoke(main, ["transcript-replay", str(path)], env={"CDEL_SEED": ""})
    assert res.exit_code == 1


def test_wrong_seed_flagged(runner, tmp_path):
    path = tmp_path / "t.json"
    invoke(runner, ["ccd", "--n", "1", "--trials", "1", "--seed", "6", "--transcript", str(path)])
    data = json.loads(path.read_text())
    data["seed"] = 7
    path.write_text(json.dumps(data))
    res = runner.invoke(main, ["transcript-replay", str(path)], env={"CDEL_SEED": ""})
    assert res.exit_code == 1
