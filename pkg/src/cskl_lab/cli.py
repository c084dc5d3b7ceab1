"""Command-line front end.

Every subcommand prints one canonical JSON report to stdout and optionally
writes the same bytes to ``--json PATH``. All randomness comes from the seed
(``CDEL_SEED`` overrides ``--seed``) split into per-trial streams.
"""

from __future__ import annotations

import json
import math
import os
import sys
from collections.abc import Callable
from fractions import Fraction
from pathlib import Path
from typing import Any

import click

from . import __version__, ds, pke, prf
from . import compiled as CP
from . import core as C
from . import msg as M
from .transcript import SCHEMA as TRANSCRIPT_SCHEMA
from .transcript import GameTranscript, trial_rngs

REPORT_SCHEMA = "cskl-lab/report/1"
FIDELITY_TOL = 1e-9

# stream tags keep the experiments of one skl run independent
_CORRECTNESS, _ATTACK, _PREMEASURE = 1, 2, 3


class InvariantViolation(click.ClickException):
    exit_code = 3


def _seed(seed: int) -> int:
    env = os.environ.get("CDEL_SEED")
    if env is None or env.strip() == "":
        return seed
    try:
        return int(env, 0)
    except ValueError:
        raise click.BadParameter(f"CDEL_SEED must be an integer, got {env!r}") from None


def _convention(text: str | None) -> M.ParityConvention:
    if text is None or text == "derived":
        return M.convention()
    try:
        a, b = (int(v) for v in text.split(","))
    except ValueError:
        raise click.BadParameter("convention is 'derived' or 'ALICE,BOB' parities, e.g. '1,0'") from None
    if a not in (0, 1) or b not in (0, 1):
        raise click.BadParameter("parities must be 0 or 1")
    return M.ParityConvention(a, b)


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


def _emit(report: dict, path: str | None) -> None:
    text = dumps(report)
    if path:
        Path(path).write_text(text)
    click.echo(text, nl=False)


def _stderr(mean: float, trials: int) -> float:
    return math.sqrt(mean * (1 - mean) / trials) if trials > 1 else 0.0


def _check(report: dict) -> None:
    bad = sorted(k for k, ok in report.get("invariants", {}).items() if not ok)
    if bad:
        raise InvariantViolation("invariant violated: " + ", ".join(bad))


def _run(fn: Callable[[], dict], json_path: str | None) -> None:
    try:
        report = fn()
    except (ArithmeticError, AssertionError, ValueError, RuntimeError) as exc:
        if isinstance(exc, click.ClickException):
            raise
        raise InvariantViolation(f"{type(exc).__name__}: {exc}") from exc
    _emit(report, json_path)
    _check(report)


common_json = click.option("--json", "json_path", type=click.Path(dir_okay=False), default=None, help="Also write the report here.")
common_seed = click.option("--seed", type=int, default=0, show_default=True, help="Master seed (CDEL_SEED overrides).")


@click.group()
@click.version_option(__version__)
def main() -> None:
    """Simulation lab for compiled magic-square games and classically leased keys."""


# ---------------------------------------------------------------------------
# msg-value
# ---------------------------------------------------------------------------


def cmd_msg_value(mode: str, depolarize: float, conv: M.ParityConvention) -> dict:
    report: dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "command": "msg-value",
        "mode": mode,
        "convention": {"alice_parity": conv.alice_parity, "bob_parity": conv.bob_parity},
    }
    if mode == "classical":
        v = M.classical_value(conv)
        report.update(value=str(v), value_float=float(v), exact=True)
        report["invariants"] = {"classical_value_8_9": conv != M.convention() or v == Fraction(8, 9)}
    else:
        v = M.depolarized_value(depolarize, conv)
        report.update(value=v, exact=True, depolarize=depolarize)
        inv = {"value_in_unit_interval": -FIDELITY_TOL <= v <= 1 + FIDELITY_TOL}
        if depolarize == 0 and conv == M.convention():
            inv["quantum_value_1"] = abs(v - 1) < FIDELITY_TOL
        report["invariants"] = inv
    return report


@main.command("msg-value")
@click.option("--mode", type=click.Choice(["classical", "quantum"]), default="quantum", show_default=True)
@click.option("--depolarize", type=click.FloatRange(0.0, 1.0), default=0.0, show_default=True, help="Depolarizing weight on the shared state.")
@click.option("--convention", "convention", default=None, help="'derived' or 'ALICE,BOB' parities.")
@common_json
def msg_value(mode, depolarize, convention, json_path):
    """Exact value of the magic square game."""
    _run(lambda: cmd_msg_value(mode, depolarize, _convention(convention)), json_path)


# ---------------------------------------------------------------------------
# ccd
# ---------------------------------------------------------------------------


def cmd_ccd(n: int, trials: int, seed: int, prover: str, conv: M.ParityConvention, transcript: str | None = None) -> dict:
    if prover not in CP.PROVERS:
        raise click.BadParameter(f"unknown prover {prover!r}; choose from {sorted(CP.PROVERS)}")
    cfg = CP.CcdConfig(n=n, trials=trials, seed=seed, convention=conv)
    mean, se = CP.estimate_value(lambda p, rv, rp: CP.ccd_experiment(cfg, p, rv, rp), CP.PROVERS[prover], trials, seed)
    report: dict[str, Any] = {
        "schema": REPORT_SCHEMA,
        "command": "ccd",
        "n": n,
        "trials": trials,
        "seed": seed,
        "prover": prover,
        "win_rate": mean,
        "stderr": se,
    }
    if prover == "honest" and conv == M.convention():
        one = CP.exact_honest_value(conv)
        exact = one**n
        report["exact_round_value"] = one
        report["exact_value"] = exact
        report["deviation_sigma"] = abs(mean - exact) / math.sqrt(exact * (1 - exact) / trials)
    if transcript:
        t = CP.run_transcript("ccd", n, prover, seed)
        Path(transcript).write_text(t.dumps())
        report["transcript"] = {"path": transcript, "digest": t.digest(), "verdict": t.verdict}
    report["invariants"] = {}
    return report


@main.command("ccd")
@click.option("--n", type=click.IntRange(1, 64), default=1, show_default=True)
@click.option("--trials", type=click.IntRange(1), default=1000, show_default=True)
@common_seed
@click.option("--prover", type=click.Choice(sorted(CP.PROVERS)), default="honest", show_default=True)
@click.option("--convention", "convention", default=None, help="'derived' or 'ALICE,BOB' parities.")
@click.option("--transcript", type=click.Path(dir_okay=False), default=None, help="Write the transcript of trial 0 here.")
@common_json
def ccd(n, trials, seed, prover, convention, transcript, json_path):
    """Monte Carlo estimate of the n-round certified-deletion game."""
    _run(lambda: cmd_ccd(n, trials, _seed(seed), prover, _convention(convention), transcript), json_path)


# ---------------------------------------------------------------------------
# skl
# ---------------------------------------------------------------------------


def _attack_rates(run_one: Callable[[int], Any], trials: int) -> dict:
    wins = bound = certs = 0.0
    for t in range(trials):
        out = run_one(t)
        wins += out.success
        certs += out.cert_ok
        bound += 2.0 ** -out.jb_size
    mean = wins / trials
    return {"rate": mean, "stderr": _stderr(mean, trials), "bound": bound / trials, "cert_ok": certs / trials}


def _premeasure(hooks: C.SchemeHooks, n: int, trials: int, seed: int, tcf_width: int) -> dict:
    adv = pke.PremeasureAdversary
    rejects = 0
    for t in range(trials):
        rng_c, rng_a = trial_rngs(seed, t, stream=_PREMEASURE)
        run = C.lease_and_delete(hooks, adv(), n, rng_c, rng_a, tcf_width)
        rejects += not run.cert_ok
    mean = rejects / trials
    return {"reject_rate": mean, "stderr": _stderr(mean, trials), "reject_exact": float(C.premeasured_failure_rate(n))}


def cmd_skl(scheme: str, n: int, trials: int, seed: int, adversary: str, stress_hyb2: bool = False, signs: int = 5, width: int = prf.DEFAULT_WIDTH, tcf_width: int = 2, transcript: str | None = None) -> dict:
    report: dict[str, Any] = {"schema": REPORT_SCHEMA, "command": "skl", "scheme": scheme, "n": n, "trials": trials, "seed": seed, "adversary": adversary}
    inv: dict[str, bool] = {}

    def rngs(t: int, stream: int):
        return trial_rngs(seed, t, stream=stream)

    if scheme == "pke":
        if adversary not in pke.ADVERSARIES:
            raise click.BadParameter(f"unknown adversary {adversary!r}; choose from {sorted(pke.ADVERSARIES)}")
        runs = [pke.correctness_run(n, *rngs(t, _CORRECTNESS), tcf_width) for t in range(trials)]
        report["decrypt_ok"] = sum(a for a, _ in runs) / trials
        report["delvrfy_ok"] = sum(b for _, b in runs) / trials
        att = _attack_rates(lambda t: pke.ow_vra_experiment(pke.ADVERSARIES[adversary](), n, *rngs(t, _ATTACK), tcf_width), trials)
        report.update(ow_vra_rate=att["rate"], ow_vra_stderr=att["stderr"], ow_vra_bound=att["bound"], ow_vra_cert_ok=att["cert_ok"])
        inv.update(decrypt_ok=report["decrypt_ok"] == 1.0, delvrfy_ok=report["delvrfy_ok"] == 1.0)
        report["premeasure"] = _premeasure(pke.PkeHooks(), n, trials, seed, tcf_width)
        make_t = lambda: pke.run_transcript(adversary, n, seed, 0, tcf_width)
    elif scheme == "prf":
        if adversary not in prf.ADVERSARIES:
            raise click.BadParameter(f"unknown adversary {adversary!r}; choose from {sorted(prf.ADVERSARIES)}")
        safe = [prf.correctness_run(n, *rngs(t, _CORRECTNESS), width, tcf_width, avoid_targets=True) for t in range(trials)]
        uni = [prf.correctness_run(n, *rngs(t, _ATTACK + 10), width, tcf_width) for t in range(trials)]
        report["width"] = width
        report["eval_ok"] = sum(a for a, _, _ in safe) / trials
        report["delvrfy_ok"] = sum(d for _, _, d in safe) / trials
        fail = sum(not a for a, _, _ in uni) / trials
        report["uniform_input"] = {
            "eval_fail_rate": fail,
            "stderr": _stderr(fail, trials),
            "eval_fail_exact": float(prf.evaluation_failure_exact(n, width)),
            "target_hit_probability": float(prf.target_hit_probability(n, width)),
        }
        att = _attack_rates(
            lambda t: prf.upf_vra_experiment(prf.ADVERSARIES[adversary](), n, *rngs(t, _ATTACK), width, tcf_width, stress_hyb2), trials
        )
        report.update(stress_hyb2=stress_hyb2, upf_vra_rate=att["rate"], upf_vra_stderr=att["stderr"], upf_vra_bound=att["bound"], upf_vra_cert_ok=att["cert_ok"])
        inv.update(eval_ok=report["eval_ok"] == 1.0, delvrfy_ok=report["delvrfy_ok"] == 1.0)
        make_t = lambda: prf.run_transcript(adversary, n, seed, 0, width, tcf_width, stress_hyb2)
    elif scheme == "ds":
        if adversary not in ds.ADVERSARIES:
            raise click.BadParameter(f"unknown adversary {adversary!r}; choose from {sorted(ds.ADVERSARIES)}")
        runs = [ds.correctness_run(n, *rngs(t, _CORRECTNESS), signs, width, tcf_width) for t in range(trials)]
        report["width"] = width
        report["signs_per_run"] = signs
        report["sign_ok"] = sum(a for a, _, _ in runs) / trials
        report["min_fidelity"] = min(f for _, f, _ in runs)
        report["delvrfy_ok"] = sum(d for _, _, d in runs) / trials
        att = _attack_rates(lambda t: ds.ruf_vra_experiment(ds.ADVERSARIES[adversary](), n, *rngs(t, _ATTACK), width, tcf_width), trials)
        report.update(ruf_vra_rate=att["rate"], ruf_vra_stderr=att["stderr"], ruf_vra_bound=att["bound"], ruf_vra_cert_ok=att["cert_ok"])
        inv.update(
            sign_ok=report["sign_ok"] == 1.0,
            reusability=report["min_fidelity"] >= 1 - FIDELITY_TOL,
            delvrfy_ok=report["delvrfy_ok"] == 1.0,
        )
        make_t = lambda: ds.run_transcript(adversary, n, seed, 0, width, tcf_width)
    else:
        raise click.BadParameter(f"unknown scheme {scheme!r}")
    if transcript:
        t = make_t()
        Path(transcript).write_text(t.dumps())
        report["transcript"] = {"path": transcript, "digest": t.digest(), "verdict": t.verdict}
    report["invariants"] = inv
    return report


@main.command("skl")
@click.option("--scheme", type=click.Choice(["pke", "prf", "ds"]), required=True)
@click.option("--n", type=click.IntRange(1, 16), default=4, show_default=True)
@click.option("--trials", type=click.IntRange(1), default=100, show_default=True)
@common_seed
@click.option("--adversary", default="honest-delete", show_default=True, help="Lessee strategy for the security game.")
@click.option("--stress-hyb2", is_flag=True, help="prf: plant s_j = s*_j on Z-row slots.")
@click.option("--signs", type=click.IntRange(1), default=5, show_default=True, help="ds: signatures per honest run.")
@click.option("--width", type=click.IntRange(1, prf.MAX_WIDTH), default=prf.DEFAULT_WIDTH, show_default=True, help="prf/ds: TEPRF input width.")
@click.option("--transcript", type=click.Path(dir_okay=False), default=None, help="Write the security-game transcript of trial 0 here.")
@common_json
def skl(scheme, n, trials, seed, adversary, stress_hyb2, signs, width, transcript, json_path):
    """Correctness and deletion-security probes of a leasing scheme."""
    if stress_hyb2 and scheme != "prf":
        raise click.BadParameter("--stress-hyb2 applies to --scheme prf only")
    _run(lambda: cmd_skl(scheme, n, trials, _seed(seed), adversary, stress_hyb2, signs, width, 2, transcript), json_path)


# ---------------------------------------------------------------------------
# transcript-replay
# ---------------------------------------------------------------------------


JUDGES: dict[str, Callable[[GameTranscript], Any]] = {
    "ccd": CP.judge,
    "ow-vra": pke.judge,
    "upf-vra": prf.judge,
    "ruf-vra": ds.judge,
}


def _regenerate(t: GameTranscript) -> GameTranscript:
    p = t.params
    if t.game == "ccd":
        return CP.run_transcript("ccd", p["n"], p["prover"], t.seed, p.get("trial", 0))
    if t.game == "ow-vra":
        return pke.run_transcript(p["adversary"], p["n"], t.seed, p.get("trial", 0), p.get("tcf_width", 2))
    if t.game == "upf-vra":
        return prf.run_transcript(p["adversary"], p["n"], t.seed, p.get("trial", 0), p["width"], p.get("tcf_width", 2), p.get("stress_hyb2", False))
    if t.game == "ruf-vra":
        return ds.run_transcript(p["adversary"], p["n"], t.seed, p.get("trial", 0), p["width"], p.get("tcf_width", 2))
    raise ValueError(f"unknown game {t.game!r}")


def cmd_transcript_replay(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    if data.get("schema") != TRANSCRIPT_SCHEMA:
        raise click.ClickException(f"unsupported transcript schema {data.get('schema')!r}")
    t = GameTranscript.from_json(data)
    if t.game not in JUDGES:
        raise click.ClickException(f"unknown game {t.game!r}")
    digest_ok = t.digest() == data.get("digest")
    try:
        replayed = bool(JUDGES[t.game](t))
    except (KeyError, ValueError, TypeError, IndexError):
        replayed = False
    regen = _regenerate(t)
    report = {
        "schema": REPORT_SCHEMA,
        "command": "transcript-replay",
        "game": t.game,
        "seed": t.seed,
        "digest": data.get("digest"),
        "digest_ok": digest_ok,
        "verdict_recorded": t.verdict,
        "verdict_replayed": replayed,
        "regenerated_digest_ok": regen.digest() == data.get("digest"),
    }
    report["invariants"] = {
        "digest": digest_ok,
        "verdict": t.verdict is not None and bool(t.verdict) == replayed,
        "regenerated": report["regenerated_digest_ok"],
    }
    return report


@main.command("transcript-replay")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@common_json
def transcript_replay(path, json_path):
    """Re-judge a transcript and check it against a fresh run from its seed."""
    report = cmd_transcript_replay(path)
    _emit(report, json_path)
    bad = sorted(k for k, ok in report["invariants"].items() if not ok)
    if bad:
        click.echo("replay mismatch: " + ", ".join(bad), err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    main()
