"""Simulated classical-client blind quantum computation.

The channel applies the client's circuit ``Q(s, .)`` to the server's registers
and then hides the result under a fresh uniform Pauli one-time pad. The pad is
returned only inside the client-side :class:`BlindSession`; the server receives
a :class:`ServerView` naming its output registers and nothing else.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .msg import row
from .qsim import PauliString, RegisterError, StateVector


def random_bits(rng: np.random.Generator, n: int) -> str:
    if n == 0:
        return ""
    return "".join("1" if b else "0" for b in rng.integers(0, 2, size=n))


@dataclass(frozen=True)
class ServerView:
    """What the server learns from one session: its output register names."""

    circuit_id: str
    outputs: tuple[str, ...]


@dataclass(frozen=True)
class BlindSession:
    """Client-side record of one session."""

    circuit_id: str
    secret: object
    outputs: tuple[str, ...]
    e_x: str
    e_z: str


class BlindCircuit:
    """Base class. Subclasses set ``circuit_id`` and implement ``apply``.

    The default pad is uniform X and Z over the concatenated outputs.
    """

    circuit_id = "circuit"

    def apply(self, state: StateVector, secret, inputs: Sequence[str]) -> tuple[str, ...]:
        raise NotImplementedError

    def frame_width(self, state: StateVector, outputs: Sequence[str]) -> int:
        return sum(state.width(r) for r in outputs)

    def sample_frame(self, state: StateVector, outputs: Sequence[str], rng) -> tuple[str, str]:
        n = self.frame_width(state, outputs)
        return random_bits(rng, n), random_bits(rng, n)

    def _split(self, state: StateVector, outputs: Sequence[str], bits: str) -> list[tuple[str, str]]:
        out, pos = [], 0
        for r in outputs:
            w = state.width(r)
            out.append((r, bits[pos : pos + w]))
            pos += w
        return out

    def inject(self, state: StateVector, outputs: Sequence[str], e_x: str, e_z: str) -> None:
        """Server-side result: Z(e_z) X(e_x) on top of the ideal output."""
        for (r, ex), (_, ez) in zip(self._split(state, outputs, e_x), self._split(state, outputs, e_z)):
            state.apply_x(r, ex)
            state.apply_z(r, ez)

    def correct(self, state: StateVector, outputs: Sequence[str], e_x: str, e_z: str) -> None:
        for (r, ex), (_, ez) in zip(self._split(state, outputs, e_x), self._split(state, outputs, e_z)):
            state.apply_pauli_frame(r, ex, ez)


class IdentityCircuit(BlindCircuit):
    circuit_id = "identity"

    def apply(self, state, secret, inputs):
        return tuple(inputs)


class BobRowCircuit(BlindCircuit):
    """Bob's honest row measurement, written coherently into a 3-qubit W."""

    circuit_id = "bob-row"

    def __init__(self, output: str = "W"):
        self.output = output

    def apply(self, state, secret, inputs):
        y = int(secret)
        if y not in (0, 1, 2):
            raise ValueError("row index must be 0, 1 or 2")
        state.allocate(self.output, 3)
        for k, obs in enumerate(row(y)):
            coherent_measure(state, obs, list(inputs), (self.output, k))
        return (self.output,)


def coherent_measure(state: StateVector, obs: PauliString, qubits, target) -> None:
    """|psi>|t> -> P+|psi>|t> + P-|psi>|t xor 1> for a fresh target qubit."""
    plus, minus = state._split_observable(obs, qubits)
    tb = 1 << state._bit(target)
    if any(k & tb for k in plus) or any(k & tb for k in minus):
        raise RegisterError("target qubit must be |0>")
    amp = dict(plus)
    for k, a in minus.items():
        amp[k | tb] = amp.get(k | tb, 0) + a
    state._set(amp)


class CopyCircuit(BlindCircuit):
    """Fresh register ``R'``; fan-out copy of ``R`` into it when the secret bit is 1.

    Outputs are ``(R', R)``. The frame halves are read by the client as
    ``e_x = e_x0 || e_x1`` and ``e_z = e_z0 || e_z1`` with

    * ``e_x1``: X pad on the copy ``R'`` (what the server reads out),
    * ``e_z0``: Z pad on ``R'`` (irrelevant once ``R'`` is measured),
    * ``e_z1``: Z pad kicked back onto the source ``R``,
    * ``e_x0``: always zero, since a controlled copy never passes an X pad
      from its target back to its control.
    """

    circuit_id = "copy"

    def __init__(self, output: str):
        self.output = output

    def apply(self, state, secret, inputs):
        (src,) = inputs
        w = state.width(src)
        state.allocate(self.output, w)
        if int(secret):
            for k in range(w):
                state.apply_cnot((src, k), (self.output, k))
        return (self.output, src)

    def sample_frame(self, state, outputs, rng):
        w = state.width(outputs[0])
        e_x = "0" * w + random_bits(rng, w)
        e_z = random_bits(rng, 2 * w)
        return e_x, e_z

    def _pads(self, outputs, e_x, e_z):
        w = len(e_x) // 2
        copy, src = outputs
        return copy, src, e_x[w:], e_z[:w], e_z[w:]

    def inject(self, state, outputs, e_x, e_z):
        copy, src, x1, z0, z1 = self._pads(outputs, e_x, e_z)
        state.apply_x(copy, x1)
        state.apply_z(copy, z0)
        state.apply_z(src, z1)

    def correct(self, state, outputs, e_x, e_z):
        copy, src, x1, z0, z1 = self._pads(outputs, e_x, e_z)
        state.apply_pauli_frame(copy, x1, z0)
        state.apply_z(src, z1)


def run_cbqc(
    circuit: BlindCircuit,
    secret,
    server_state: StateVector,
    inputs: Sequence[str],
    rng: np.random.Generator,
) -> tuple[ServerView, BlindSession]:
    """Run one session. ``rng`` is the client's randomness."""
    for r in inputs:
        if not server_state.has(r):
            raise RegisterError(f"input register {r!r} not held by the server")
    outputs = circuit.apply(server_state, secret, inputs)
    e_x, e_z = circuit.sample_frame(server_state, outputs, rng)
    circuit.inject(server_state, outputs, e_x, e_z)
    return ServerView(circuit.circuit_id, tuple(outputs)), BlindSession(circuit.circuit_id, secret, tuple(outputs), e_x, e_z)


def correct_frame(state: StateVector, session: BlindSession, circuit: BlindCircuit) -> None:
    circuit.correct(state, session.outputs, session.e_x, session.e_z)
