"""Small exact statevector simulator over named qubit registers.

Amplitudes are stored sparsely (basis index -> amplitude) so that wide but
low-rank states, such as a key register written in two branches, stay cheap.
Every operation is still exact: nothing is truncated except amplitudes below
``PRUNE`` in magnitude.

Conventions
-----------
* Registers are ordered by allocation. A bit string for a register lists its
  qubits index-ascending, and the register value is ``int(bits, 2)``.
* Pauli Y is ``iXZ`` (the standard matrix).
* Measurement bits map eigenvalue +1 to 0 and -1 to 1.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 26
TOL = 1e-9
PRUNE = 1e-14

_SQRT_HALF = 1.0 / math.sqrt(2.0)

Qubit = tuple[str, int]


class WidthExceeded(ValueError):
    pass


class RegisterError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Pauli strings
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PauliString:
    """Signed tensor product of single-qubit Paulis."""

    sign: int
    factors: str

    def __post_init__(self) -> None:
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if not self.factors or set(self.factors) - set("IXYZ"):
            raise ValueError(f"bad Pauli factors {self.factors!r}")

    @classmethod
    def parse(cls, label: str) -> PauliString:
        label = label.strip()
        sign = 1
        if label[0] in "+-":
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        return cls(sign, label)

    def __len__(self) -> int:
        return len(self.factors)

    def __str__(self) -> str:
        return ("-" if self.sign < 0 else "") + self.factors

    def matrix(self) -> np.ndarray:
        single = {
            "I": np.eye(2, dtype=complex),
            "X": np.array([[0, 1], [1, 0]], dtype=complex),
            "Z": np.array([[1, 0], [0, -1]], dtype=complex),
        }
        single["Y"] = 1j * single["X"] @ single["Z"]
        out = np.array([[self.sign]], dtype=complex)
        for f in self.factors:
            out = np.kron(out, single[f])
        return out

    def commutes(self, other: PauliString) -> bool:
        anti = sum(1 for a, b in zip(self.factors, other.factors) if a != "I" and b != "I" and a != b)
        return anti % 2 == 0


# ---------------------------------------------------------------------------
# State
# ---------------------------------------------------------------------------


class StateVector:
    """A pure state on named registers.

    ``register_map`` maps each register name to its global qubit indices in
    allocation order.
    """

    __slots__ = ("_amp", "_nq", "_regs", "max_qubits")

    def __init__(self, registers: Mapping[str, int] | None = None, max_qubits: int | None = None):
        self.max_qubits = MAX_QUBITS if max_qubits is None else max_qubits
        self._regs: dict[str, tuple[int, int]] = {}
        self._nq = 0
        self._amp: dict[int, complex] = {0: 1.0 + 0j}
        for name, width in (registers or {}).items():
            self.allocate(name, width)

    # -- layout -------------------------------------------------------------

    @property
    def num_qubits(self) -> int:
        return self._nq

    @property
    def register_map(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        base = 0
        for name, (_, w) in self._regs.items():
            out[name] = list(range(base, base + w))
            base += w
        return out

    def registers(self) -> dict[str, int]:
        return {n: w for n, (_, w) in self._regs.items()}

    def width(self, reg: str) -> int:
        return self._reg(reg)[1]

    def has(self, reg: str) -> bool:
        return reg in self._regs

    def _reg(self, reg: str) -> tuple[int, int]:
        try:
            return self._regs[reg]
        except KeyError:
            raise RegisterError(f"unknown register {reg!r}") from None

    def _bit(self, q: Qubit | str) -> int:
        if isinstance(q, str):
            off, w = self._reg(q)
            if w != 1:
                raise RegisterError(f"register {q!r} has width {w}; give an index")
            return off
        name, k = q
        off, w = self._reg(name)
        if not 0 <= k < w:
            raise RegisterError(f"qubit {k} out of range for {name!r}")
        return off + w - 1 - k

    def allocate(self, name: str, width: int) -> None:
        if name in self._regs:
            raise RegisterError(f"register {name!r} exists")
        if width < 1:
            raise RegisterError("width must be positive")
        if self._nq + width > self.max_qubits:
            raise WidthExceeded(f"{self._nq + width} qubits exceeds the limit of {self.max_qubits}")
        self._regs[name] = (self._nq, width)
        self._nq += width

    def copy(self) -> StateVector:
        out = StateVector.__new__(StateVector)
        out.max_qubits = self.max_qubits
        out._regs = dict(self._regs)
        out._nq = self._nq
        out._amp = dict(self._amp)
        return out

    def value(self, key: int, reg: str) -> int:
        off, w = self._reg(reg)
        return (key >> off) & ((1 << w) - 1)

    def terms(self) -> Iterable[tuple[int, complex]]:
        return self._amp.items()

    @property
    def nnz(self) -> int:
        return len(self._amp)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amp.values()))

    def _set(self, amp: dict[int, complex], renorm: bool = False) -> None:
        amp = {k: a for k, a in amp.items() if abs(a) > PRUNE}
        if renorm:
            nrm = math.sqrt(sum(abs(a) ** 2 for a in amp.values()))
            amp = {k: a / nrm for k, a in amp.items()}
        self._amp = amp

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_terms(
        cls,
        registers: Mapping[str, int],
        terms: Mapping[tuple[str, ...], complex],
        max_qubits: int | None = None,
        normalize: bool = True,
    ) -> StateVector:
        """Build a state from ``{(bits_reg0, bits_reg1, ...): amplitude}``."""
        st = cls(registers, max_qubits=max_qubits)
        names = list(registers)
        amp: dict[int, complex] = {}
        for bits, a in terms.items():
            key = 0
            for name, b in zip(names, bits, strict=True):
                off, w = st._regs[name]
                if len(b) != w:
                    raise RegisterError(f"{name}: expected {w} bits")
                key |= int(b, 2) << off
            amp[key] = amp.get(key, 0) + complex(a)
        st._set(amp, renorm=normalize)
        return st

    def tensor(self, other: StateVector) -> StateVector:
        clash = set(self._regs) & set(other._regs)
        if clash:
            raise RegisterError(f"register names clash: {sorted(clash)}")
        out = self.copy()
        out.max_qubits = max(self.max_qubits, other.max_qubits)
        if out._nq + other._nq > out.max_qubits:
            raise WidthExceeded("tensor product too wide")
        shift = out._nq
        for name, (off, w) in other._regs.items():
            out._regs[name] = (off + shift, w)
        out._nq += other._nq
        out._amp = {k1 | (k2 << shift): a1 * a2 for k1, a1 in self._amp.items() for k2, a2 in other._amp.items()}
        return out

    # -- dense views ----------------------------------------------------------

    def _dense_index(self, key: int) -> int:
        idx = 0
        for (off, w) in self._regs.values():
            idx = (idx << w) | ((key >> off) & ((1 << w) - 1))
        return idx

    def amplitudes(self) -> np.ndarray:
        if self._nq > MAX_QUBITS:
            raise WidthExceeded("dense view only for small states")
        vec = np.zeros(1 << self._nq, dtype=complex)
        for k, a in self._amp.items():
            vec[self._dense_index(k)] = a
        return vec

    def bits(self, key: int, regs: Sequence[str] | None = None) -> str:
        regs = list(self._regs) if regs is None else regs
        return "".join(format(self.value(key, r), f"0{self.width(r)}b") for r in regs)

    # -- unitary operations ---------------------------------------------------

    def apply_x(self, reg: str, mask: int | str) -> None:
        off, _w = self._reg(reg)
        m = int(mask, 2) if isinstance(mask, str) else mask
        if m == 0:
            return
        m <<= off
        self._amp = {k ^ m: a for k, a in self._amp.items()}

    def apply_z(self, reg: str, mask: int | str) -> None:
        off, _w = self._reg(reg)
        m = int(mask, 2) if isinstance(mask, str) else mask
        if m == 0:
            return
        m <<= off
        self._amp = {k: (-a if (k & m).bit_count() & 1 else a) for k, a in self._amp.items()}

    def apply_pauli_frame(self, reg: str, e_x: str, e_z: str) -> None:
        """state <- X(e_x) Z(e_z) state on ``reg``."""
        w = self.width(reg)
        if len(e_x) != w or len(e_z) != w:
            raise ValueError(f"frame length must be {w}")
        self.apply_z(reg, e_z)
        self.apply_x(reg, e_x)

    def _masks(self, obs: PauliString, qubits: Sequence[Qubit | str]) -> tuple[int, int, int]:
        if len(obs) != len(qubits):
            raise ValueError("observable not aligned to qubits")
        xm = zm = ny = 0
        for f, q in zip(obs.factors, qubits):
            b = 1 << self._bit(q)
            if f in "XY":
                xm |= b
            if f in "ZY":
                zm |= b
            if f == "Y":
                ny += 1
        return xm, zm, ny

    def _pauli_image(self, obs: PauliString, qubits: Sequence[Qubit | str]) -> dict[int, complex]:
        xm, zm, ny = self._masks(obs, qubits)
        phase = obs.sign * (1j**ny)
        return {k ^ xm: (-phase * a if (k & zm).bit_count() & 1 else phase * a) for k, a in self._amp.items()}

    def apply_pauli(self, obs: PauliString | str, qubits: Sequence[Qubit | str]) -> None:
        if isinstance(obs, str):
            obs = PauliString.parse(obs)
        self._amp = self._pauli_image(obs, qubits)

    def apply_h(self, q: Qubit | str) -> None:
        b = 1 << self._bit(q)
        out: dict[int, complex] = {}
        for k, a in self._amp.items():
            a = a * _SQRT_HALF
            k0 = k & ~b
            out[k0] = out.get(k0, 0) + a
            k1 = k | b
            out[k1] = out.get(k1, 0) + (-a if k & b else a)
        self._set(out)

    def apply_h_register(self, reg: str) -> None:
        for i in range(self.width(reg)):
            self.apply_h((reg, i))

    def apply_cnot(self, control: Qubit | str, target: Qubit | str) -> None:
        c = 1 << self._bit(control)
        t = 1 << self._bit(target)
        self._amp = {(k ^ t if k & c else k): a for k, a in self._amp.items()}

    def apply_oracle(self, inputs: Sequence[str], target: str, f: Callable[..., int]) -> None:
        """|in>|v> -> |in>|v xor f(in)> with f given register values as ints."""
        offs = [self._reg(r) for r in inputs]
        toff, tw = self._reg(target)
        if target in inputs:
            raise RegisterError("target must not be an input")
        tmask = (1 << tw) - 1
        cache: dict[tuple[int, ...], int] = {}
        out: dict[int, complex] = {}
        for k, a in self._amp.items():
            vals = tuple((k >> o) & ((1 << w) - 1) for o, w in offs)
            fv = cache.get(vals)
            if fv is None:
                fv = f(*vals)
                if fv < 0 or fv > tmask:
                    raise ValueError("oracle output wider than target")
                cache[vals] = fv
            out[k ^ (fv << toff)] = a
        self._amp = out

    def apply_phase_oracle(self, inputs: Sequence[str], f: Callable[..., int]) -> None:
        """Multiply each basis term by (-1)^f(register values)."""
        offs = [self._reg(r) for r in inputs]
        self._amp = {
            k: (-a if f(*((k >> o) & ((1 << w) - 1) for o, w in offs)) & 1 else a) for k, a in self._amp.items()
        }

    # -- projections and measurement -----------------------------------------

    def _split_observable(self, obs: PauliString, qubits: Sequence[Qubit | str]):
        img = self._pauli_image(obs, qubits)
        keys = set(self._amp) | set(img)
        plus = {k: (self._amp.get(k, 0) + img.get(k, 0)) / 2 for k in keys}
        minus = {k: (self._amp.get(k, 0) - img.get(k, 0)) / 2 for k in keys}
        return plus, minus

    def observable_branches(self, obs: PauliString, qubits: Sequence[Qubit | str]):
        """[(eigenvalue, probability, post-state)] for outcomes of nonzero weight."""
        out = []
        for ev, part in zip((1, -1), self._split_observable(obs, qubits)):
            p = sum(abs(a) ** 2 for a in part.values())
            if p > PRUNE:
                st = self._with(part)
                st._set(part, renorm=True)
                out.append((ev, p, st))
        return out

    def _with(self, amp: dict[int, complex]) -> StateVector:
        out = StateVector.__new__(StateVector)
        out.max_qubits = self.max_qubits
        out._regs = dict(self._regs)
        out._nq = self._nq
        out._amp = amp
        return out

    def measure_observable(self, obs: PauliString | str, qubits: Sequence[Qubit | str], rng: np.random.Generator) -> int:
        if isinstance(obs, str):
            obs = PauliString.parse(obs)
        plus, minus = self._split_observable(obs, qubits)
        p_plus = sum(abs(a) ** 2 for a in plus.values())
        if rng.random() < p_plus:
            self._set(plus, renorm=True)
            return 1
        self._set(minus, renorm=True)
        return -1

    def computational_branches(self, reg: str):
        off, w = self._reg(reg)
        mask = (1 << w) - 1
        groups: dict[int, dict[int, complex]] = {}
        for k, a in self._amp.items():
            groups.setdefault((k >> off) & mask, {})[k] = a
        out = []
        for v in sorted(groups):
            part = groups[v]
            p = sum(abs(a) ** 2 for a in part.values())
            if p > PRUNE:
                st = self._with(part)
                st._set(part, renorm=True)
                out.append((format(v, f"0{w}b"), p, st))
        return out

    def measure_computational(self, reg: str, rng: np.random.Generator) -> str:
        off, w = self._reg(reg)
        mask = (1 << w) - 1
        weights: dict[int, float] = {}
        for k, a in self._amp.items():
            v = (k >> off) & mask
            weights[v] = weights.get(v, 0.0) + abs(a) ** 2
        vals = sorted(weights)
        if len(vals) == 1:
            v = vals[0]
        else:
            u = rng.random() * sum(weights.values())
            acc = 0.0
            v = vals[-1]
            for cand in vals:
                acc += weights[cand]
                if u < acc:
                    v = cand
                    break
            self._set({k: a for k, a in self._amp.items() if (k >> off) & mask == v}, renorm=True)
        return format(v, f"0{w}b")

    def _hadamard_qubit_split(self, b: int):
        plus: dict[int, complex] = {}
        minus: dict[int, complex] = {}
        for k, a in self._amp.items():
            k0 = k & ~b
            a = a * _SQRT_HALF
            plus[k0] = plus.get(k0, 0) + a
            minus[k0 | b] = minus.get(k0 | b, 0) + (-a if k & b else a)
        return plus, minus

    def measure_hadamard(self, reg: str, rng: np.random.Generator) -> str:
        """Measure each qubit of ``reg`` in the X basis; the qubit is left in |d>."""
        out = []
        for i in range(self.width(reg)):
            plus, minus = self._hadamard_qubit_split(1 << self._bit((reg, i)))
            p0 = sum(abs(a) ** 2 for a in plus.values())
            if rng.random() < p0:
                self._set(plus, renorm=True)
                out.append("0")
            else:
                self._set(minus, renorm=True)
                out.append("1")
        return "".join(out)

    def hadamard_branches(self, reg: str):
        branches = [("", 1.0, self)]
        for i in range(self.width(reg)):
            nxt = []
            for bits, p, st in branches:
                for d, part in zip("01", st._hadamard_qubit_split(1 << st._bit((reg, i)))):
                    q = sum(abs(a) ** 2 for a in part.values())
                    if q > PRUNE:
                        s2 = st._with(part)
                        s2._set(part, renorm=True)
                        nxt.append((bits + d, p * q, s2))
            branches = nxt
        return branches

    # -- register removal -----------------------------------------------------

    def _remove_bits(self, reg: str) -> None:
        off, w = self._regs.pop(reg)
        low = (1 << off) - 1
        self._amp_rekey(lambda k: (k & low) | ((k >> (off + w)) << off))
        for name, (o, ww) in list(self._regs.items()):
            if o > off:
                self._regs[name] = (o - w, ww)
        self._nq -= w

    def _amp_rekey(self, fn: Callable[[int], int]) -> None:
        out: dict[int, complex] = {}
        for k, a in self._amp.items():
            nk = fn(k)
            out[nk] = out.get(nk, 0) + a
        self._amp = out

    def discard(self, *regs: str, tol: float = TOL) -> None:
        """Drop registers that are jointly in a product state with the rest.

        Raises ``RegisterError`` if they are entangled with the rest.
        """
        if not regs:
            return
        mask = 0
        for reg in regs:
            off, w = self._reg(reg)
            mask |= ((1 << w) - 1) << off
        rows: dict[int, int] = {}
        cols: dict[int, int] = {}
        entries = []
        for k, a in self._amp.items():
            r = rows.setdefault(k & ~mask, len(rows))
            c = cols.setdefault(k & mask, len(cols))
            entries.append((r, c, a))
        if len(cols) > 1:
            mat = np.zeros((len(rows), len(cols)), dtype=complex)
            for r, c, a in entries:
                mat[r, c] = a
            u, s, _ = np.linalg.svd(mat, full_matrices=False)
            if s.size > 1 and s[1] > tol:
                raise RegisterError(f"registers {regs!r} are entangled with the rest")
            vec = u[:, 0] * s[0]
            rkeys = list(rows)
            self._amp = {rkeys[i]: complex(vec[i]) for i in range(len(rkeys))}
        else:
            self._amp = {k & ~mask: a for k, a in self._amp.items()}
        for reg in regs:
            self._remove_bits(reg)
        self._set(self._amp, renorm=True)

    def rename(self, old: str, new: str) -> None:
        if new in self._regs:
            raise RegisterError(f"register {new!r} exists")
        self._regs = {(new if n == old else n): v for n, v in self._regs.items()}

    # -- comparisons ----------------------------------------------------------

    def _canonical(self, names: Sequence[str]) -> dict[tuple[int, ...], complex]:
        offs = [self._reg(n) for n in names]
        out: dict[tuple[int, ...], complex] = {}
        for k, a in self._amp.items():
            key = tuple((k >> o) & ((1 << w) - 1) for o, w in offs)
            out[key] = out.get(key, 0) + a
        return out

    def inner(self, other: StateVector) -> complex:
        """<self|other>, matching registers by name."""
        if sorted(self.registers().items()) != sorted(other.registers().items()):
            raise RegisterError("register layouts differ")
        names = sorted(self._regs)
        a = self._canonical(names)
        b = other._canonical(names)
        return complex(sum(a[k].conjugate() * v for k, v in b.items() if k in a))

    def fidelity(self, other: StateVector) -> float:
        return abs(self.inner(other)) ** 2

    def reduced_density(self, keep: Sequence[str]) -> tuple[list[tuple[int, ...]], np.ndarray]:
        """Reduced density matrix on ``keep`` over the support of the state."""
        koffs = [self._reg(n) for n in keep]
        kmask = 0
        for o, w in koffs:
            kmask |= ((1 << w) - 1) << o
        groups: dict[int, dict[tuple[int, ...], complex]] = {}
        for k, a in self._amp.items():
            kv = tuple((k >> o) & ((1 << w) - 1) for o, w in koffs)
            g = groups.setdefault(k & ~kmask, {})
            g[kv] = g.get(kv, 0) + a
        basis = sorted({kv for g in groups.values() for kv in g})
        index = {kv: i for i, kv in enumerate(basis)}
        rho = np.zeros((len(basis), len(basis)), dtype=complex)
        for g in groups.values():
            v = np.zeros(len(basis), dtype=complex)
            for kv, a in g.items():
                v[index[kv]] = a
            rho += np.outer(v, v.conj())
        return basis, rho


def trace_distance(
    a: tuple[list[tuple[int, ...]], np.ndarray], b: tuple[list[tuple[int, ...]], np.ndarray]
) -> float:
    """Trace distance between two reduced states returned by ``reduced_density``."""
    basis = sorted(set(a[0]) | set(b[0]))
    index = {kv: i for i, kv in enumerate(basis)}

    def embed(pair):
        keys, m = pair
        out = np.zeros((len(basis), len(basis)), dtype=complex)
        ix = [index[k] for k in keys]
        out[np.ix_(ix, ix)] = m
        return out

    diff = embed(a) - embed(b)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def new_state(registers: Mapping[str, int], max_qubits: int | None = None) -> StateVector:
    return StateVector(registers, max_qubits=max_qubits)


def bell_pair(state: StateVector, a: Qubit | str, b: Qubit | str, kind: tuple[int, int] = (0, 0)) -> None:
    """Prepare Phi_{xz} = (|0x> + (-1)^z |1(1-x)>)/sqrt2 on two fresh qubits."""
    ba, bb = 1 << state._bit(a), 1 << state._bit(b)
    if any(k & (ba | bb) for k in state._amp):
        raise RegisterError("bell_pair needs both qubits in |0>")
    x, z = kind
    state.apply_h(a)
    state.apply_cnot(a, b)
    if x:
        state._amp = {k ^ bb: v for k, v in state._amp.items()}
    if z:
        state._amp = {k: (-v if k & ba else v) for k, v in state._amp.items()}


def apply_pauli_frame(state: StateVector, register: str, e_x: str, e_z: str) -> None:
    state.apply_pauli_frame(register, e_x, e_z)


def measure_observable(state: StateVector, obs: PauliString | str, qubits: Sequence[Qubit | str], rng) -> int:
    return state.measure_observable(obs, qubits, rng)


def measure_computational(state: StateVector, register: str, rng) -> str:
    return state.measure_computational(register, rng)


def measure_hadamard(state: StateVector, register: str, rng) -> str:
    return state.measure_hadamard(register, rng)


# ---------------------------------------------------------------------------
# Exact outcome distributions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Observable:
    obs: PauliString
    qubits: tuple

    def branches(self, st: StateVector):
        return [("0" if ev == 1 else "1", p, s) for ev, p, s in st.observable_branches(self.obs, self.qubits)]


@dataclass(frozen=True)
class Computational:
    register: str

    def branches(self, st: StateVector):
        return st.computational_branches(self.register)


@dataclass(frozen=True)
class HadamardBasis:
    register: str

    def branches(self, st: StateVector):
        return st.hadamard_branches(self.register)


def observable(label: str | PauliString, qubits: Sequence[Qubit | str]) -> Observable:
    obs = PauliString.parse(label) if isinstance(label, str) else label
    return Observable(obs, tuple(qubits))


class OutcomeDistribution(dict):
    """Outcome bit string -> probability."""

    def marginal(self, positions: Sequence[int]) -> OutcomeDistribution:
        out = OutcomeDistribution()
        for bits, p in self.items():
            key = "".join(bits[i] for i in positions)
            out[key] = out.get(key, 0.0) + p
        return out


def exact_branches(state: StateVector, plan: Sequence) -> list[tuple[str, float, StateVector]]:
    """All (outcome string, probability, post-state) for a sequential plan."""
    branches = [("", 1.0, state.copy())]
    for step in plan:
        nxt = []
        for bits, p, st in branches:
            for b, q, s2 in step.branches(st):
                nxt.append((bits + b, p * q, s2))
        branches = nxt
    return branches


def exact_distribution(state: StateVector, plan: Sequence) -> OutcomeDistribution:
    out = OutcomeDistribution()
    for bits, p, _ in exact_branches(state, plan):
        out[bits] = out.get(bits, 0.0) + p
    total = sum(out.values())
    if abs(total - 1.0) > TOL:
        raise ArithmeticError(f"distribution sums to {total}")
    return OutcomeDistribution({k: max(v, 0.0) for k, v in sorted(out.items())})
