"""Efficient exact simulation of depth-2 qubit and linear-optical circuits.

A depth-2 circuit is read as a preparation stage (disjoint pairs put into
known two-body states) followed by a measurement stage (disjoint pairs
measured in two-body bases). The measurement pairs are resolved one at a
time. Each step touches at most two stored factors of at most two elements,
so it works on at most four qubits or modes, and it leaves a single factor
of at most two elements behind: the conditional state of the partners.

Optical factors store up to two photons per mode. A measured pair can see
up to four photons and never more.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
import numpy as np

from .circuit import OpticalCircuit, check, depth
from .errors import ResourceLimitError, UnsupportedDepthError, ValidationError
from .fock import Distribution, postselect, sample_distribution, two_mode_sector
from .qubit import QubitCircuit, qubit_depth, validate_qubit_circuit

DEFAULT_ENUM_CAP = 1_000_000
MAX_STORED_PHOTONS = 2  # per mode in a conditional state
MAX_MEASURED_PHOTONS = 4  # per measured pair
_FLOOR = 1e-30


@dataclass
class _Group:
    elements: tuple
    matrix: np.ndarray
    stage: int


@dataclass(frozen=True)
class Step:
    """One pair measurement: which elements, which slots it reads and writes."""

    index: int
    elements: tuple
    reads: tuple
    writes: str | None
    remaining: tuple
    chain: int


@dataclass(frozen=True)
class ChainPlan:
    steps: tuple
    initial_slots: dict = field(default_factory=dict)  # slot id -> elements
    chains: tuple = ()  # elements per chain, in chain-id order

    def steps_of(self, chain: int) -> list[Step]:
        return [s for s in self.steps if s.chain == chain]


class _QubitModel:
    dim = 2
    one = np.eye(2, dtype=complex)

    def __init__(self, circuit: QubitCircuit):
        self.n = circuit.n

    @staticmethod
    def embed_single(g, pos):
        return np.kron(g, np.eye(2)) if pos == 0 else np.kron(np.eye(2), g)

    @staticmethod
    def pending_pair(pa, pb):
        return np.kron(pa, pb)

    def initial(self, group: _Group) -> np.ndarray:
        k = len(group.elements)
        return group.matrix[:, 0].reshape((2,) * k).astype(complex)

    def untouched(self, element) -> np.ndarray:
        return np.array([1.0, 0.0], dtype=complex)

    def measure(self, group: _Group, psi: np.ndarray):
        k = len(group.elements)
        rest = psi.shape[k:]
        flat = psi.reshape(2**k, -1)
        out = (group.matrix @ flat).reshape((2,) * k + rest)
        return out, list(np.ndindex(*((2,) * k)))


class _OpticalModel:
    dim = MAX_STORED_PHOTONS + 1
    one = np.eye(1, dtype=complex)  # a lone mode only picks up a phase

    def __init__(self, circuit: OpticalCircuit):
        if any(x > 1 for x in circuit.input):
            raise ValueError("depth-2 optical simulation needs zero or one photon per input mode")
        self.input = circuit.input
        self._sectors: dict = {}

    @staticmethod
    def embed_single(g, pos):
        d = np.ones(2, dtype=complex)
        d[pos] = g[0, 0]
        return np.diag(d)

    @staticmethod
    def pending_pair(pa, pb):
        return np.diag([pa[0, 0], pb[0, 0]])

    def _sector(self, group, n):
        key = (id(group), n)
        if key not in self._sectors:
            self._sectors[key] = two_mode_sector(group.matrix, n)
        return self._sectors[key]

    def initial(self, group: _Group) -> np.ndarray:
        d = self.dim
        if len(group.elements) == 1:
            (a,) = group.elements
            s = self.input[a]
            t = np.zeros(d, dtype=complex)
            t[s] = group.matrix[0, 0] ** s
            return t
        a, b = group.elements
        sa, sb = self.input[a], self.input[b]
        n = sa + sb
        col = self._sector(group, n)[:, sa]
        t = np.zeros((d, d), dtype=complex)
        for k in range(n + 1):
            t[k, n - k] = col[k]
        return t

    def untouched(self, element) -> np.ndarray:
        t = np.zeros(self.dim, dtype=complex)
        t[self.input[element]] = 1.0
        return t

    def measure(self, group: _Group, psi: np.ndarray):
        k = len(group.elements)
        d = self.dim
        rest = psi.shape[k:]
        if k == 1:
            return psi, [(j,) for j in range(d)]
        top = MAX_MEASURED_PHOTONS
        out = np.zeros((top + 1, top + 1) + rest, dtype=complex)
        for n in range(top + 1):
            lo, hi = max(0, n - (d - 1)), min(n, d - 1)
            if lo > hi:
                continue
            f = self._sector(group, n)
            for j in range(lo, hi + 1):
                src = psi[j, n - j]
                if not np.any(src):
                    continue
                for kk in range(n + 1):
                    if f[kk, j] != 0:
                        out[kk, n - kk] += f[kk, j] * src
        outcomes = [(a, b) for a in range(top + 1) for b in range(top + 1 - a)]
        return out, outcomes


def _stages(ops_by_layer, model, n_elements):
    """Pack gates into at most two stages, absorbing single-element gates."""
    groups: list[_Group] = []
    latest: dict = {}
    pending: dict = {}
    for layer in ops_by_layer:
        for elements, matrix in layer:
            if len(elements) == 1:
                (q,) = elements
                if q in latest:
                    g = groups[latest[q]]
                    g.matrix = model.embed_single(matrix, g.elements.index(q)) @ g.matrix
                else:
                    pending[q] = matrix @ pending.get(q, model.one)
                continue
            a, b = elements
            stage = max(groups[latest[x]].stage if x in latest else -1 for x in (a, b)) + 1
            pre = model.pending_pair(pending.pop(a, model.one), pending.pop(b, model.one))
            groups.append(_Group((a, b), matrix @ pre, stage))
            latest[a] = latest[b] = len(groups) - 1
    for q, mat in sorted(pending.items()):
        groups.append(_Group((q,), mat, 0))
    if any(g.stage > 1 for g in groups):
        raise UnsupportedDepthError("circuit does not fit in two stages")
    # a preparation nobody measures afterwards is itself the measurement basis
    later = {x for g in groups if g.stage == 1 for x in g.elements}
    for g in groups:
        if g.stage == 0 and not later & set(g.elements):
            g.stage = 1
    first = sorted((g for g in groups if g.stage == 0), key=lambda g: min(g.elements))
    second = [g for g in groups if g.stage == 1]
    covered = {x for g in second for x in g.elements}
    for q in range(n_elements):
        if q not in covered:
            second.append(_Group((q,), model.one, 1))
    second.sort(key=lambda g: min(g.elements))
    return first, second


def _qubit_ops(circuit: QubitCircuit):
    return [[(gate.qubits, gate.matrix) for gate in layer] for layer in circuit.layers]


def _optical_ops(circuit: OpticalCircuit):
    out = []
    for layer in circuit.layers:
        ops = [((p.mode,), np.array([[np.exp(1j * p.phase)]])) for p in layer.phases]
        ops += [(g.modes, g.matrix) for g in layer.gates if not g.is_identity()]
        out.append(ops)
    return out


def _prepare(circuit):
    if isinstance(circuit, QubitCircuit):
        problems = validate_qubit_circuit(circuit)
        if problems:
            raise ValidationError(problems)
        gate_layers = [i for i, layer in enumerate(circuit.layers, 1) if any(len(g.qubits) == 2 for g in layer)]
        if qubit_depth(circuit) > 2:
            raise UnsupportedDepthError(
                f"depth {qubit_depth(circuit)} > 2: layer {gate_layers[2]} is a third layer of two-qubit gates",
                gate_layers[2],
            )
        model = _QubitModel(circuit)
        return model, _stages(_qubit_ops(circuit), model, circuit.n), circuit.n
    check(circuit)
    d = depth(circuit)
    if d > 2:
        gate_layers = [i for i, layer in enumerate(circuit.layers, 1) if any(not g.is_identity() for g in layer.gates)]
        raise UnsupportedDepthError(
            f"depth {d} > 2: layer {gate_layers[2]} is a third layer of two-mode gates", gate_layers[2]
        )
    model = _OpticalModel(circuit)
    return model, _stages(_optical_ops(circuit), model, circuit.m), circuit.m


def _components(first, second, n):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for g in first + second:
        for x in g.elements[1:]:
            parent[find(x)] = find(g.elements[0])
    roots: dict = {}
    for x in range(n):
        roots.setdefault(find(x), []).append(x)
    chains = sorted(roots.values(), key=min)
    return {x: ci for ci, members in enumerate(chains) for x in members}, tuple(tuple(c) for c in chains)


def _plan(first, second, n, reverse=False) -> ChainPlan:
    chain_of, chains = _components(first, second, n)
    slot_of: dict = {}
    initial: dict = {}
    for i, g in enumerate(first):
        sid = f"p{i}"
        initial[sid] = g.elements
        for x in g.elements:
            slot_of[x] = sid
    for x in range(n):
        if x not in slot_of:
            sid = f"u{x}"
            initial[sid] = (x,)
            slot_of[x] = sid
    members = {sid: set(els) for sid, els in initial.items()}
    group_of = {x: i for i, g in enumerate(second) for x in g.elements}
    first_element = [min(g.elements) for g in second]
    fallback = sorted(range(len(second)), key=first_element.__getitem__, reverse=reverse)
    pick = max if reverse else min
    done = [False] * len(second)
    cursor = 0
    frontier: set = set()
    steps = []
    while len(steps) < len(second):
        near = {group_of[x] for x in frontier if not done[group_of[x]]}
        if near:
            i = pick(near, key=first_element.__getitem__)
        else:
            while done[fallback[cursor]]:
                cursor += 1
            i = fallback[cursor]
        done[i] = True
        g = second[i]
        reads = tuple(sorted({slot_of[x] for x in g.elements}))
        union = set().union(*(members[s] for s in reads))
        remaining = tuple(sorted(union - set(g.elements)))
        k = len(steps)
        writes = f"s{k}" if remaining else None
        for s in reads:
            del members[s]
        if writes:
            members[writes] = set(remaining)
            for x in remaining:
                slot_of[x] = writes
        frontier = set(remaining)
        steps.append(Step(k, g.elements, reads, writes, remaining, chain_of[g.elements[0]]))
    return ChainPlan(tuple(steps), initial, chains)


def chain_plan(circuit, reverse: bool = False) -> ChainPlan:
    """Dependency-respecting order of pair measurements for a depth-2 circuit.

    Starts from the lowest-index measurement pair and keeps following the
    open ends of the current chain; ``reverse`` flips every tie-break.
    """
    _, (first, second), n = _prepare(circuit)
    return _plan(first, second, n, reverse)


class _Walker:
    def __init__(self, circuit, reverse=False):
        self.model, (self.first, self.second), self.n = _prepare(circuit)
        self.plan = _plan(self.first, self.second, self.n, reverse)
        self.group_of = {g.elements: g for g in self.second}
        init = {}
        for i, g in enumerate(self.first):
            init[f"p{i}"] = (g.elements, self.model.initial(g))
        for sid, els in self.plan.initial_slots.items():
            if sid.startswith("u"):
                init[sid] = (els, self.model.untouched(els[0]))
        self.initial = init
        chain_of = {x: ci for ci, members in enumerate(self.plan.chains) for x in members}
        self.chain_slots = [dict() for _ in self.plan.chains]
        self.chain_steps = [[] for _ in self.plan.chains]
        for step in self.plan.steps:
            self.chain_steps[step.chain].append(step)
        for sid, v in init.items():
            self.chain_slots[chain_of[v[0][0]]][sid] = v

    def branches(self, step: Step, slots: dict):
        """Outcomes of ``step`` with probabilities and the slot written by each."""
        parts = [slots[s] for s in step.reads]
        elements: tuple = ()
        psi = np.ones((), dtype=complex)
        for els, t in parts:
            psi = np.multiply.outer(psi, t)
            elements += els
        order = [elements.index(x) for x in step.elements]
        order += [i for i in range(len(elements)) if i not in order]
        psi = np.transpose(psi, order)
        rest_els = tuple(elements[i] for i in order[len(step.elements):])
        out, outcomes = self.model.measure(self.group_of[step.elements], psi)
        result = []
        k = len(step.elements)
        for oc in outcomes:
            if k == 2 and isinstance(self.model, _OpticalModel):
                assert oc[0] + oc[1] <= MAX_MEASURED_PHOTONS
            branch = out[oc]
            p = float(np.sum(np.abs(branch) ** 2))
            if p <= _FLOOR:
                continue
            if rest_els:
                cond = branch / math.sqrt(p)
                if isinstance(self.model, _OpticalModel):
                    assert cond.shape == (self.model.dim,) * len(rest_els)
                # reorder rest to ascending element order for a canonical slot
                perm = sorted(range(len(rest_els)), key=lambda i: rest_els[i])
                written = (tuple(rest_els[i] for i in perm), np.transpose(cond, perm))
            else:
                written = None
            result.append((oc, p, written))
        return result

    def chain_distribution(self, chain: int, cap: int) -> dict:
        steps = self.chain_steps[chain]
        acc: dict = {}
        count = [0]

        def rec(i, slots, outcome, prob):
            if i == len(steps):
                key = tuple(sorted(outcome.items()))
                acc[key] = acc.get(key, 0.0) + prob
                return
            step = steps[i]
            for oc, p, written in self.branches(step, slots):
                count[0] += 1
                if count[0] > cap:
                    raise ResourceLimitError(f"exact enumeration exceeded {cap} branches", count[0], cap)
                nxt = {s: v for s, v in slots.items() if s not in step.reads}
                if written is not None:
                    nxt[step.writes] = written
                new = dict(outcome)
                new.update(zip(step.elements, oc))
                rec(i + 1, nxt, new, prob * p)

        rec(0, dict(self.chain_slots[chain]), {}, 1.0)
        return acc


def exact_distribution_depth2(circuit, cap: int = DEFAULT_ENUM_CAP, reverse: bool = False) -> Distribution:
    """Exact joint outcome distribution assembled from the chain conditionals.

    Chains are independent, so the joint is the product of per-chain
    distributions. Postselection, if the circuit carries one, is applied last.
    """
    w = _Walker(circuit, reverse)
    joint = {(): 1.0}
    for ci in range(len(w.plan.chains)):
        part = w.chain_distribution(ci, cap)
        if len(joint) * len(part) > cap:
            raise ResourceLimitError(f"joint outcome table exceeds {cap} entries", len(joint) * len(part), cap)
        joint = {a + b: pa * pb for a, pa in joint.items() for b, pb in part.items()}
    full = {}
    for key, p in joint.items():
        vals = dict(key)
        full[tuple(vals[x] for x in range(w.n))] = p
    d = Distribution(full)
    return _apply_registers(circuit, d)


def _apply_registers(circuit, d: Distribution) -> Distribution:
    if isinstance(circuit, OpticalCircuit):
        return postselect(d, circuit.postselection) if circuit.postselection else d
    if circuit.postselection:
        d = postselect(d, circuit.postselection)
        kept = [q for q in range(circuit.n) if q not in circuit.postselection]
        return d.marginal([kept.index(q) for q in circuit.output_qubits])
    if circuit.outputs is not None:
        return d.marginal(list(circuit.output_qubits))
    return d


def _sample_walk(w: _Walker, shots: int, rng: np.random.Generator) -> list:
    chains = w.chain_steps
    roots = [{"slots": dict(slots)} for slots in w.chain_slots]
    n_steps = len(w.plan.steps)
    out = []
    for _ in range(shots):
        draws = iter(rng.random(n_steps).tolist())
        result = [0] * w.n
        for steps, node in zip(chains, roots):
            for step in steps:
                if "kids" not in node:
                    br = w.branches(step, node["slots"])
                    cdf = np.cumsum([p for _, p, _ in br])
                    node["cdf"] = (cdf / cdf[-1]).tolist()
                    node["kids"] = [None] * len(br)
                    node["br"] = br
                j = min(bisect.bisect_right(node["cdf"], next(draws)), len(node["br"]) - 1)
                oc, _, written = node["br"][j]
                for x, v in zip(step.elements, oc):
                    result[x] = v
                kid = node["kids"][j]
                if kid is None:
                    nxt = {s: v for s, v in node["slots"].items() if s not in step.reads}
                    if written is not None:
                        nxt[step.writes] = written
                    kid = node["kids"][j] = {"slots": nxt}
                node = kid
        out.append(tuple(result))
    return out


def _sample(circuit, shots: int, seed: int, workers: int = 1) -> list:
    if shots < 0:
        raise ValueError("shots must be non-negative")
    if shots == 0:
        return []
    registers = circuit.postselection if isinstance(circuit, OpticalCircuit) else (
        circuit.postselection or circuit.outputs is not None
    )
    if registers:
        return sample_distribution(exact_distribution_depth2(circuit), shots, seed)
    w = _Walker(circuit)
    chunks = [shots // workers + (1 if i < shots % workers else 0) for i in range(workers)]
    out = []
    for i, n in enumerate(chunks):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        out += _sample_walk(w, n, rng)
    return out


def simulate_depth2_qubits(circuit: QubitCircuit, shots: int, seed: int, workers: int = 1) -> list:
    """Seeded samples (bit tuples over all qubits) by walking the chain plan."""
    return _sample(circuit, shots, seed, workers)


def simulate_depth2_optical(circuit: OpticalCircuit, shots: int, seed: int, workers: int = 1) -> list:
    """Seeded samples (occupation tuples over all modes) by walking the chain plan."""
    return _sample(circuit, shots, seed, workers)
