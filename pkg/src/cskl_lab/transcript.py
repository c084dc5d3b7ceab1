"""Party-tagged message logs and the bus that writes them.

A transcript holds every classical message of one run in order. Each payload
is canonical JSON, stored hex-encoded. Private records of a party (its own
secrets, needed to re-judge a run) carry the party name with a ``:private``
suffix and are never delivered to anyone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

SCHEMA = "cskl-lab/transcript/1"


def canonical(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass
class Round:
    phase: str
    party: str
    payload_hex: str

    @property
    def payload(self) -> Any:
        return json.loads(bytes.fromhex(self.payload_hex))

    def to_json(self) -> dict:
        return {"phase": self.phase, "party": self.party, "payload_hex": self.payload_hex}


@dataclass
class GameTranscript:
    game: str
    seed: int
    params: dict = field(default_factory=dict)
    rounds: list[Round] = field(default_factory=list)
    verdict: bool | None = None

    def add(self, phase: str, party: str, payload: Any) -> None:
        self.rounds.append(Round(phase, party, canonical(payload).hex()))

    def find(self, phase: str, party: str | None = None) -> list[Any]:
        return [r.payload for r in self.rounds if r.phase == phase and (party is None or r.party == party)]

    def one(self, phase: str, party: str | None = None) -> Any:
        found = self.find(phase, party)
        if len(found) != 1:
            raise KeyError(f"expected one {phase!r} record, found {len(found)}")
        return found[0]

    def digest(self) -> str:
        body = [r.to_json() for r in self.rounds]
        return hashlib.sha256(canonical({"game": self.game, "seed": self.seed, "params": self.params, "rounds": body})).hexdigest()

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "game": self.game,
            "seed": self.seed,
            "params": self.params,
            "rounds": [r.to_json() for r in self.rounds],
            "verdict": self.verdict,
            "digest": self.digest(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, data: dict) -> GameTranscript:
        t = cls(data["game"], int(data["seed"]), dict(data.get("params", {})))
        t.rounds = [Round(r["phase"], r["party"], r["payload_hex"]) for r in data["rounds"]]
        t.verdict = data.get("verdict")
        return t


class Bus:
    """Delivers classical messages between two parties and logs them.

    With ``transcript=None`` nothing is recorded (bulk Monte Carlo).
    """

    def __init__(self, transcript: GameTranscript | None = None):
        self.transcript = transcript

    def send(self, phase: str, sender: str, payload: Any) -> Any:
        if self.transcript is not None:
            self.transcript.add(phase, sender, payload)
        return payload

    def private(self, phase: str, party: str, payload: Any) -> None:
        if self.transcript is not None:
            self.transcript.add(phase, party + ":private", payload)


def trial_rngs(seed: int, trial: int, parties: int = 2, stream: int | None = None) -> list[np.random.Generator]:
    """Independent generators for each party of one trial.

    Derived from (seed, trial[, stream]) only, so results never depend on how
    trials are scheduled. ``stream`` separates independent experiments that
    share a seed.
    """
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial)]
    if stream is not None:
        entropy.append(int(stream))
    ss = np.random.SeedSequence(entropy)
    return [np.random.default_rng(s) for s in ss.spawn(parties)]
