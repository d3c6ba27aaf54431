"""Dual-rail compilation of flattened graph programs into linear optics.

Qubit ``v`` of a graph program owns modes ``2v`` (its ``|0>_L`` rail, which
starts with the photon) and ``2v + 1`` (its ``|1>_L`` rail). Ancilla modes are
appended after all rails, grouped per CZ edge in edge order.

The postselected CZ block works on two *ports*, one rail of each qubit, and
acts as ``diag(1, 1, 1, -1)`` on their occupations ``|00>, |01>, |10>, |11>``
with amplitude ``sqrt(2/27)``. Wiring, with ports ``p, q`` and ancillas
``a, b`` (local order ``p, a, b, q``)::

    layer 1:  R(pi - theta) on (p, a)      R(pi - theta) on (b, q)
    layer 2:  R(theta)      on (p, q)      R(phi)        on (a, b)

where ``R(t) = [[cos t, -sin t], [sin t, cos t]]``, ``cos(theta)**2 = 1/3``
and ``phi = arcsin(1/sqrt(3)) / 2``. The closed form agrees with the numerical
solve in ``demos/solve_knill_cz.py``.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .circuit import (
    BALANCED,
    CircuitBuilder,
    Layer,
    OpticalCircuit,
    PhaseShifter,
    PostselectionSpec,
    TwoModeGate,
    check,
    depth,
    interferometer,
    is_unitary,
    rotation,
)
from .errors import ValidationError
from .fock import DEFAULT_BASIS_CAP, Distribution, fock_basis, postselected_distribution, transition_amplitude
from .qubit import GraphProgram, basis_change, check_graph

KNILL_THETA = math.acos(1.0 / math.sqrt(3.0))  # ~54.7356 degrees
KNILL_PHI = 0.5 * math.asin(1.0 / math.sqrt(3.0))  # ~17.6322 degrees
KNILL_SUCCESS = 2.0 / 27.0

# Photon pattern on (input mode, first ancilla) accepted by the mode teleporter.
TELEPORT_PATTERN = (1, 0)
TELEPORT_SUCCESS = 0.25

LEAK = -1  # marks a dual-rail output that left the logical subspace


@dataclass(frozen=True)
class DualRailMap:
    """``(mode_zero, mode_one)`` per logical qubit."""

    rails: tuple

    def __post_init__(self):
        rails = tuple((int(z), int(o)) for z, o in self.rails)
        flat = [k for pair in rails for k in pair]
        if len(set(flat)) != len(flat):
            raise ValueError(f"dual-rail modes are not distinct: {rails}")
        object.__setattr__(self, "rails", rails)

    @classmethod
    def standard(cls, n_qubits: int) -> "DualRailMap":
        return cls(tuple((2 * q, 2 * q + 1) for q in range(n_qubits)))

    def __getitem__(self, qubit: int) -> tuple[int, int]:
        return self.rails[qubit]

    def __len__(self) -> int:
        return len(self.rails)


@dataclass(frozen=True)
class GateBlock:
    """Reusable fragment expressed on local mode indices ``0..n_modes-1``."""

    name: str
    n_modes: int
    layers: tuple
    ancilla_input: tuple = ()
    postselection: tuple = ()
    ports: tuple = ()
    output_port: int | None = None

    def standalone(self, port_input=None) -> OpticalCircuit:
        """The block as a circuit of its own, ports fed with ``port_input``."""
        occ = [0] * self.n_modes
        for k, c in self.ancilla_input:
            occ[k] = c
        for k, c in zip(self.ports, port_input or [0] * len(self.ports)):
            occ[k] = c
        post = dict(self.postselection)
        outs = tuple(k for k in range(self.n_modes) if k not in post)
        return check(OpticalCircuit(self.n_modes, tuple(occ), self.layers, PostselectionSpec(post), outs))

    @property
    def depth(self) -> int:
        return depth(OpticalCircuit(self.n_modes, (0,) * self.n_modes, self.layers))


def encode_single_qubit(u, qubit: int, rails: DualRailMap) -> TwoModeGate:
    """Two-mode gate on a qubit's rails whose one-photon action is ``u``."""
    if not is_unitary(u):
        raise ValueError("single-qubit gate is not unitary")
    zero, one = rails[qubit]
    return TwoModeGate(zero, one, u, "U1")


def _cz_block(zero_p: bool, zero_q: bool, name: str) -> GateBlock:
    # (x ^ zp)(y ^ zq) = xy + zq*x + zp*y + const: a zero-rail port on one
    # side becomes a pi phase on the other side's port.
    t1 = rotation(math.pi - KNILL_THETA)
    first = Layer((TwoModeGate(0, 1, t1, "KCZa"), TwoModeGate(2, 3, t1, "KCZa")))
    second = Layer(
        (TwoModeGate(0, 3, rotation(KNILL_THETA), "KCZb"), TwoModeGate(1, 2, rotation(KNILL_PHI), "KCZc"))
    )
    phases = []
    if zero_q:
        phases.append(PhaseShifter(0, math.pi))
    if zero_p:
        phases.append(PhaseShifter(3, math.pi))
    layers = ((Layer((), tuple(phases)),) if phases else ()) + (first, second)
    return GateBlock(name, 4, layers, ((1, 1), (2, 1)), ((1, 1), (2, 1)), (0, 3))


def knill_cz() -> GateBlock:
    """Two-layer postselected CZ on two ports with two single-photon ancillas."""
    return _cz_block(False, False, "knill_cz")


def cz_on_zero_rails() -> GateBlock:
    """Knill block behind pi phases: flips the sign of the empty-ports state."""
    return _cz_block(True, True, "cz_on_zero_rails")


def cz_mixed_rails() -> GateBlock:
    """CZ between a zero-rail port (first) and a one-rail port (second)."""
    return _cz_block(True, False, "cz_mixed_rails")


def teleport_mode() -> GateBlock:
    """Move the state of local mode 0 onto local mode 2.

    Mode 1 receives a photon that a balanced splitter shares with mode 2; a
    second balanced splitter on modes 0 and 1 followed by postselection of
    ``TELEPORT_PATTERN`` completes the transfer with probability 1/4.
    """
    prep = Layer((TwoModeGate(1, 2, BALANCED, "BS"),))
    bell = Layer((TwoModeGate(0, 1, BALANCED, "BS"),))
    post = ((0, TELEPORT_PATTERN[0]), (1, TELEPORT_PATTERN[1]))
    return GateBlock("teleport_mode", 3, (prep, bell), ((1, 1),), post, (0,), output_port=2)


@dataclass(frozen=True)
class CompiledArtifact:
    circuit: OpticalCircuit
    qubit_map: DualRailMap
    output_vertices: tuple
    pipeline: str
    depth: int
    source_digest: str
    notes: tuple = field(default=())

    @property
    def postselection(self) -> PostselectionSpec:
        return self.circuit.postselection

    @property
    def metadata(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "depth": self.depth,
            "source": self.source_digest,
            "modes": self.circuit.m,
            "photons": self.circuit.n_photons,
        }


def graph_digest(g: GraphProgram) -> str:
    from .textio import dump_graph

    return "sha256:" + hashlib.sha256(dump_graph(g).encode("utf-8")).hexdigest()


def _place(builder: CircuitBuilder, block: GateBlock, modes, phase_slot: int, gate_slots) -> None:
    gate_layers = iter(gate_slots)
    for layer in block.layers:
        if layer.gates:
            slot = next(gate_layers)
            for g in layer.gates:
                builder.gate(slot, modes[g.mode_a], modes[g.mode_b], g.unitary, g.label)
            for p in layer.phases:
                builder.phase(slot, modes[p.mode], p.phase)
        else:
            for p in layer.phases:
                builder.phase(phase_slot, modes[p.mode], p.phase)


def _finish(builder: CircuitBuilder, g: GraphProgram, final_rails: dict, basis_slot: int) -> DualRailMap:
    for v, meas in g.pattern.items():
        z, o = final_rails[v]
        builder.gate(basis_slot, z, o, basis_change(meas.angle), "MB")
    for v in g.measured_vertices:
        z, o = final_rails[v]
        bit = g.pattern[v].bit
        builder.postselection[z] = 1 - bit
        builder.postselection[o] = bit
    outs = DualRailMap(tuple(final_rails[v] for v in g.output_vertices))
    builder.output_modes = [k for pair in outs.rails for k in pair]
    return outs


def _artifact(builder, g, rails, pipeline, notes=()) -> CompiledArtifact:
    circuit = check(builder.build())
    return CompiledArtifact(circuit, rails, g.output_vertices, pipeline, depth(circuit), graph_digest(g), tuple(notes))


def _start(g: GraphProgram) -> CircuitBuilder:
    n = g.vertices
    b = CircuitBuilder(2 * n, [1, 0] * n)
    for v in range(n):
        b.gate(0, 2 * v, 2 * v + 1, BALANCED, "BS")
    return b


def compile_naive(g: GraphProgram) -> CompiledArtifact:
    """Sequential pipeline: preparation, two layers per CZ round, basis layer."""
    check_graph(g)
    b = _start(g)
    block = knill_cz()
    slot = 1
    for _, pairs in sorted(g.edge_layers().items()):
        if not pairs:
            continue
        for u, v in pairs:
            a0, a1 = b.add_mode(1), b.add_mode(1)
            _place(b, block, (2 * u + 1, a0, a1, 2 * v + 1), slot, (slot, slot + 1))
            b.postselection[a0] = b.postselection[a1] = 1
        slot += 2
    final = {v: (2 * v, 2 * v + 1) for v in range(g.vertices)}
    rails = _finish(b, g, final, slot)
    return _artifact(b, g, rails, "naive8")


# Port roles handed out round-robin to a qubit's CZs, in edge-layer order.
_ROLES = ("teleport_one", "teleport_zero", "direct_one")


def port_assignment(g: GraphProgram) -> dict[tuple[int, int], str]:
    """Role of each ``(edge index, vertex)`` endpoint in the depth-4 pipeline."""
    incident: dict[int, list[tuple[int, int]]] = {v: [] for v in range(g.vertices)}
    for e, (u, v, c) in enumerate(g.edges):
        incident[u].append((c, e))
        incident[v].append((c, e))
    roles = {}
    for v, items in incident.items():
        for k, (_, e) in enumerate(sorted(items)):
            roles[(e, v)] = _ROLES[k]
    return roles


def compile_depth4(g: GraphProgram) -> CompiledArtifact:
    """Parallel pipeline built on mode teleportation.

    Layer 1 prepares ``|+>_L`` and the teleporter resource pairs, layers 2-3
    run every CZ block at once, layer 4 holds the teleporters' Bell splitters
    next to the measurement-basis gates on each qubit's final rails.
    """
    check_graph(g)
    b = _start(g)
    roles = port_assignment(g)
    final = {v: [2 * v, 2 * v + 1] for v in range(g.vertices)}
    tele = teleport_mode()
    prep_slot, phase_slot, cz_slots, last_slot = 0, 1, (2, 3), 4
    order = sorted(range(len(g.edges)), key=lambda e: (g.edges[e][2], e))
    for e in order:
        u, v, _ = g.edges[e]
        ports, zero = [], []
        for w in (u, v):
            role = roles[(e, w)]
            rail = 2 * w + (0 if role == "teleport_zero" else 1)
            if role.startswith("teleport"):
                a, c = b.add_mode(1), b.add_mode(0)
                modes = (rail, a, c)
                for layer, slot in zip(tele.layers, (prep_slot, last_slot)):
                    for gate in layer.gates:
                        b.gate(slot, modes[gate.mode_a], modes[gate.mode_b], gate.unitary, gate.label)
                for k, cnt in tele.postselection:
                    b.postselection[modes[k]] = cnt
                final[w][rail % 2] = c
                ports.append(c)
            else:
                ports.append(rail)
            zero.append(role == "teleport_zero")
        block = _cz_block(zero[0], zero[1], "cz")
        a0, a1 = b.add_mode(1), b.add_mode(1)
        _place(b, block, (ports[0], a0, a1, ports[1]), phase_slot, cz_slots)
        for k, cnt in block.postselection:
            b.postselection[(ports[0], a0, a1, ports[1])[k]] = cnt
    rails = _finish(b, g, {v: tuple(r) for v, r in final.items()}, last_slot)
    return _artifact(b, g, rails, "depth4")


def logical_outcomes(d: Distribution, free_modes, rails: DualRailMap) -> Distribution:
    """Map a distribution over ``free_modes`` to bit tuples over ``rails``.

    Outputs that are not exactly one photon per qubit land on keys carrying
    ``LEAK`` for the offending qubit.
    """
    pos = {k: i for i, k in enumerate(free_modes)}
    acc: dict = {}
    for state, p in d.items():
        bits = []
        for z, o in rails.rails:
            pair = (state[pos[z]], state[pos[o]])
            bits.append(0 if pair == (1, 0) else 1 if pair == (0, 1) else LEAK)
        key = tuple(bits)
        acc[key] = acc.get(key, 0.0) + p
    return Distribution(acc, d.success_probability)


def artifact_distribution(artifact: CompiledArtifact, cap: int = DEFAULT_BASIS_CAP) -> Distribution:
    """Postselected logical output distribution of a compiled circuit."""
    c = artifact.circuit
    free = [k for k in range(c.m) if k not in c.postselection.as_dict()]
    stray = sorted(set(free) - set(c.output_modes))
    if stray:
        raise ValidationError([f"modes {stray} are neither postselected nor part of the output register"])
    d = postselected_distribution(c, cap)
    return logical_outcomes(d, free, artifact.qubit_map)


def block_conditional_operator(block: GateBlock) -> np.ndarray:
    """Conditional amplitudes ``<out| block |in>`` between port occupations.

    Ports carry 0 or 1 photons each; rows and columns follow
    ``|00>, |01>, |10>, |11>`` with the first port most significant.
    """
    ports = block.ports
    basis = [(x, y) for x in (0, 1) for y in (0, 1)]
    u = interferometer(OpticalCircuit(block.n_modes, (0,) * block.n_modes, block.layers))
    anc_in = dict(block.ancilla_input)
    anc_out = dict(block.postselection)
    out = np.zeros((4, 4), dtype=complex)
    for j, sin in enumerate(basis):
        s = [anc_in.get(k, 0) for k in range(block.n_modes)]
        for k, c in zip(ports, sin):
            s[k] = c
        for i, sout in enumerate(basis):
            if sum(sout) != sum(sin):
                continue
            t = [anc_out.get(k, 0) for k in range(block.n_modes)]
            for k, c in zip(ports, sout):
                t[k] = c
            out[i, j] = transition_amplitude(u, s, t)
    return out


def logical_action(circuit: OpticalCircuit, in_rails: DualRailMap, out_rails: DualRailMap):
    """Postselected action of ``circuit`` on dual-rail qubits.

    The circuit's own input supplies the ancilla photons; each qubit's rails
    are overwritten with ``|10>`` or ``|01>``. Returns ``(logical, leaked)``:
    amplitudes into the logical basis of ``out_rails`` (rows) from the logical
    basis of ``in_rails`` (columns, first qubit most significant), and
    amplitudes into every other surviving output pattern. For an input vector
    ``psi`` the success probability is ``|logical @ psi|**2 + |leaked @ psi|**2``.
    """
    u = interferometer(check(circuit))
    post = circuit.postselection.as_dict()
    free = [k for k in range(circuit.m) if k not in post]
    out_modes = {k for pair in out_rails.rails for k in pair}
    bases = list(itertools.product((0, 1), repeat=len(in_rails)))
    columns = []
    for bits in bases:
        s = list(circuit.input)
        for (z, o), b in zip(in_rails.rails, bits):
            s[z], s[o] = 1 - b, b
        left = sum(s) - sum(post.values())
        col = {}
        if left >= 0:
            t = [0] * circuit.m
            for k, c in post.items():
                t[k] = c
            for part in fock_basis(left, len(free)):
                for k, c in zip(free, part):
                    t[k] = c
                col[tuple(part)] = transition_amplitude(u, s, t)
        columns.append(col)

    def decode(part):
        occ = dict(zip(free, part))
        if any(occ[k] for k in free if k not in out_modes):
            return None
        bits = []
        for z, o in out_rails.rails:
            pair = (occ.get(z, 0), occ.get(o, 0))
            if pair not in ((1, 0), (0, 1)):
                return None
            bits.append(pair[1])
        return int("".join(map(str, bits)) or "0", 2)

    keys = sorted({k for col in columns for k in col})
    logical = np.zeros((2 ** len(out_rails), len(bases)), dtype=complex)
    stray = [k for k in keys if decode(k) is None]
    leaked = np.zeros((len(stray), len(bases)), dtype=complex)
    row = {k: i for i, k in enumerate(stray)}
    for j, col in enumerate(columns):
        for k, a in col.items():
            i = decode(k)
            if i is None:
                leaked[row[k], j] = a
            else:
                logical[i, j] += a
    return logical, leaked
