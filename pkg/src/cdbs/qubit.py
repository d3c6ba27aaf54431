"""Dense statevector oracle, graph states and postselection flattening.

Bit strings and statevectors are big-endian: qubit 0 is the most significant
bit. A measured vertex with angle ``theta`` is read out in the basis
``|+-_theta> = (|0> +- e^{i theta}|1>)/sqrt(2)``, implemented as
``diag(1, e^{-i theta})`` followed by a Hadamard and a computational-basis
measurement, so outcome ``+`` is bit 0.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .circuit import TAU_PROB
from .errors import InfeasiblePostselectionError, ResourceLimitError, ValidationError
from .fock import Distribution

DEFAULT_QUBIT_CAP = 20
ALLOWED_ANGLES = (0.0, math.pi / 4, -math.pi / 4, math.pi / 2, -math.pi / 2)
ANGLE_TOL = 1e-12

# Brickwork layout: horizontal edges alternate between edge layers 1 and 2 by
# column parity. Rungs join rows (i, i+1) in edge layer 3 at columns c with
# c % BRICK_PERIOD in EVEN_ROW_RUNGS when i is even, ODD_ROW_RUNGS when odd.
BRICK_PERIOD = 8
EVEN_ROW_RUNGS = (2, 4)
ODD_ROW_RUNGS = (6, 0)

H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def basis_change(theta: float) -> np.ndarray:
    """Unitary mapping ``|+_theta>`` to ``|0>`` and ``|-_theta>`` to ``|1>``."""
    return H @ np.diag([1.0, cmath.exp(-1j * theta)])


@dataclass(frozen=True)
class Measurement:
    angle: float
    outcome: str = "+"

    @property
    def bit(self) -> int:
        return 0 if self.outcome == "+" else 1


@dataclass(frozen=True)
class GraphProgram:
    """Graph state plus a flattened measurement pattern.

    ``edges`` are ``(u, v, layer)`` with ``layer`` in ``{1, 2, 3}``. Every
    vertex outside ``output_vertices`` must carry a :class:`Measurement` and is
    postselected on its outcome. Output vertices are reported: in their
    pattern basis when they have one, otherwise in the computational basis.
    """

    vertices: int
    edges: tuple = ()
    pattern: Mapping = field(default_factory=dict)
    output_vertices: tuple = ()

    def __post_init__(self):
        edges = tuple((int(u), int(v), int(c)) for u, v, c in self.edges)
        object.__setattr__(self, "edges", edges)
        pattern = {int(k): (v if isinstance(v, Measurement) else Measurement(*v)) for k, v in dict(self.pattern).items()}
        object.__setattr__(self, "pattern", dict(sorted(pattern.items())))
        object.__setattr__(self, "output_vertices", tuple(sorted(int(x) for x in self.output_vertices)))

    @property
    def measured_vertices(self) -> tuple[int, ...]:
        out = set(self.output_vertices)
        return tuple(v for v in range(self.vertices) if v not in out)

    def edge_layers(self) -> dict[int, list[tuple[int, int]]]:
        layers: dict[int, list[tuple[int, int]]] = {1: [], 2: [], 3: []}
        for u, v, c in self.edges:
            layers.setdefault(c, []).append((u, v))
        return layers

    def degree(self, v: int) -> int:
        return sum((u == v) + (w == v) for u, w, _ in self.edges)

    def with_pattern(self, pattern: Mapping, output_vertices: Sequence[int] | None = None) -> "GraphProgram":
        outs = self.output_vertices if output_vertices is None else tuple(output_vertices)
        return GraphProgram(self.vertices, self.edges, pattern, outs)


def validate_graph(g: GraphProgram) -> list[str]:
    problems = []
    n = g.vertices
    if n < 1:
        problems.append(f"vertex count must be >= 1, got {n}")
    seen_pairs = set()
    per_layer: dict[int, set[int]] = {}
    for u, v, c in g.edges:
        if not (0 <= u < n and 0 <= v < n):
            problems.append(f"edge ({u}, {v}) outside 0..{n - 1}")
        if u == v:
            problems.append(f"self-loop on vertex {u}")
        if c not in (1, 2, 3):
            problems.append(f"edge ({u}, {v}) has layer {c}, expected 1, 2 or 3")
        key = (min(u, v), max(u, v))
        if key in seen_pairs:
            problems.append(f"duplicate edge {key}")
        seen_pairs.add(key)
        used = per_layer.setdefault(c, set())
        clash = {u, v} & used
        if clash:
            problems.append(f"edge layer {c} reuses vertex {sorted(clash)}")
        used |= {u, v}
    for v in range(n):
        if g.degree(v) > 3:
            problems.append(f"vertex {v} has degree {g.degree(v)} > 3")
    for v in g.output_vertices:
        if not 0 <= v < n:
            problems.append(f"output vertex {v} outside 0..{n - 1}")
    for v, meas in g.pattern.items():
        if not 0 <= v < n:
            problems.append(f"pattern entry for vertex {v} outside 0..{n - 1}")
        if not any(abs(meas.angle - a) <= ANGLE_TOL for a in ALLOWED_ANGLES):
            problems.append(f"vertex {v} angle {meas.angle!r} not in {{0, +-pi/4, +-pi/2}}")
        if meas.outcome not in ("+", "-"):
            problems.append(f"vertex {v} outcome {meas.outcome!r} is not '+' or '-'")
    for v in g.measured_vertices:
        if v not in g.pattern:
            problems.append(f"measured vertex {v} has no pattern entry")
    return problems


def check_graph(g: GraphProgram) -> GraphProgram:
    problems = validate_graph(g)
    if problems:
        raise ValidationError(problems)
    return g


def brickwork_graph(rows: int, columns: int) -> GraphProgram:
    """Brickwork skeleton on ``rows x columns`` vertices, index ``r * columns + c``.

    The pattern measures every vertex outside the last column at angle 0 with
    outcome ``+``; the last column is the output register.
    """
    if rows < 1 or columns < 1:
        raise ValueError("rows and columns must be >= 1")

    def vid(r, c):
        return r * columns + c

    edges = []
    for r in range(rows):
        for c in range(columns - 1):
            edges.append((vid(r, c), vid(r, c + 1), 1 if c % 2 == 0 else 2))
    for r in range(rows - 1):
        rungs = EVEN_ROW_RUNGS if r % 2 == 0 else ODD_ROW_RUNGS
        for c in range(1, columns):
            if c % BRICK_PERIOD in rungs:
                edges.append((vid(r, c), vid(r + 1, c), 3))
    outputs = tuple(vid(r, columns - 1) for r in range(rows))
    pattern = {v: Measurement(0.0, "+") for v in range(rows * columns) if v not in outputs}
    return GraphProgram(rows * columns, tuple(edges), pattern, outputs)


def _check_cap(n: int, cap: int):
    if n > cap:
        raise ResourceLimitError(f"{n} qubits exceed the statevector cap of {cap}", n, cap)


def apply_gate(psi: np.ndarray, matrix: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a ``2**k x 2**k`` gate to ``qubits`` of an ``n``-axis state tensor."""
    k = len(qubits)
    g = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * k))
    moved = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(moved, list(range(k)), list(qubits))


def graph_state(g: GraphProgram, cap: int = DEFAULT_QUBIT_CAP, edge_order: Sequence[int] | None = None) -> np.ndarray:
    """Normalized graph state as a flat big-endian vector of length ``2**n``."""
    n = g.vertices
    _check_cap(n, cap)
    psi = np.full((2,) * n, 2 ** (-n / 2), dtype=complex)
    order = range(len(g.edges)) if edge_order is None else edge_order
    for i in order:
        u, v, _ = g.edges[i]
        # CZ is diagonal: flip the sign of the |1>_u |1>_v slice.
        idx = [slice(None)] * n
        idx[u] = 1
        idx[v] = 1
        psi[tuple(idx)] *= -1
    return psi.reshape(-1)


@dataclass(frozen=True, eq=False)
class QubitGate:
    qubits: tuple
    matrix: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "matrix", np.asarray(self.matrix, dtype=complex))


@dataclass(frozen=True, eq=False)
class QubitCircuit:
    """Layered circuit on ``n`` qubits starting from ``|0...0>``.

    Every qubit is measured in the computational basis at the end. Qubits in
    ``postselection`` are conditioned on the given bit; the distribution is
    reported over ``outputs`` (all qubits when ``outputs`` is ``None``).
    """

    n: int
    layers: tuple = ()
    postselection: Mapping = field(default_factory=dict)
    outputs: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(tuple(layer) for layer in self.layers))
        object.__setattr__(self, "postselection", dict(sorted(dict(self.postselection).items())))
        if self.outputs is not None:
            object.__setattr__(self, "outputs", tuple(self.outputs))

    @property
    def output_qubits(self) -> tuple[int, ...]:
        if self.outputs is None:
            return tuple(q for q in range(self.n) if q not in self.postselection)
        return self.outputs


def validate_qubit_circuit(c: QubitCircuit) -> list[str]:
    problems = []
    for li, layer in enumerate(c.layers, start=1):
        used: set[int] = set()
        for gate in layer:
            k = len(gate.qubits)
            if k not in (1, 2):
                problems.append(f"layer {li}: gate on {k} qubits")
            if gate.matrix.shape != (2**k, 2**k):
                problems.append(f"layer {li}: gate matrix shape {gate.matrix.shape} for {k} qubits")
            if any(not 0 <= q < c.n for q in gate.qubits):
                problems.append(f"layer {li}: gate qubits {gate.qubits} outside 0..{c.n - 1}")
            clash = used & set(gate.qubits)
            if clash or len(set(gate.qubits)) != k:
                problems.append(f"layer {li}: qubits overlap {sorted(clash or set(gate.qubits))}")
            used |= set(gate.qubits)
    return problems


def qubit_depth(c: QubitCircuit) -> int:
    """Number of layers holding a two-qubit gate; single-qubit gates are free."""
    return sum(1 for layer in c.layers if any(len(g.qubits) == 2 for g in layer))


def flatten_postselect(g: GraphProgram) -> QubitCircuit:
    """Depth-3 circuit: ``|+>`` preparation, CZ rounds per edge layer, basis changes."""
    check_graph(g)
    n = g.vertices
    layers = [[QubitGate((v,), H, "H") for v in range(n)]]
    for c, pairs in sorted(g.edge_layers().items()):
        if pairs:
            layers.append([QubitGate((u, v), CZ, f"CZ{c}") for u, v in pairs])
    rot = [QubitGate((v,), basis_change(meas.angle), f"M({meas.angle!r})") for v, meas in g.pattern.items()]
    if rot:
        layers.append(rot)
    post = {v: g.pattern[v].bit for v in g.measured_vertices}
    return QubitCircuit(n, tuple(layers), post, g.output_vertices)


def statevector(c: QubitCircuit, cap: int = DEFAULT_QUBIT_CAP) -> np.ndarray:
    """Final state of ``c`` as an ``n``-axis tensor."""
    _check_cap(c.n, cap)
    psi = np.zeros((2,) * c.n, dtype=complex)
    psi[(0,) * c.n] = 1.0
    for layer in c.layers:
        for gate in layer:
            psi = apply_gate(psi, gate.matrix, gate.qubits)
    return psi


def _condition(probs: np.ndarray, postselection: Mapping[int, int], outputs: Sequence[int]) -> Distribution:
    n = probs.ndim
    idx = [slice(None)] * n
    for q, b in postselection.items():
        idx[q] = b
    kept = [q for q in range(n) if q not in postselection]
    sub = probs[tuple(idx)]
    success = float(sub.sum())
    if postselection and success < TAU_PROB:
        raise InfeasiblePostselectionError(
            f"postselection {dict(postselection)} has success probability {success:.3e}", success
        )
    drop = tuple(i for i, q in enumerate(kept) if q not in outputs)
    marg = sub.sum(axis=drop) if drop else sub
    remaining = [q for q in kept if q in outputs]
    marg = np.transpose(marg, [remaining.index(q) for q in outputs])
    out = {}
    for bits in np.ndindex(*marg.shape):
        out[tuple(int(b) for b in bits)] = float(marg[bits]) / success
    return Distribution(out, success if postselection else 1.0)


def simulate(c: QubitCircuit, cap: int = DEFAULT_QUBIT_CAP) -> Distribution:
    """Postselected computational-basis distribution over ``c.output_qubits``."""
    problems = validate_qubit_circuit(c)
    if problems:
        raise ValidationError(problems)
    psi = statevector(c, cap)
    return _condition(np.abs(psi) ** 2, c.postselection, c.output_qubits)


def logical_distribution(g: GraphProgram, cap: int = DEFAULT_QUBIT_CAP) -> Distribution:
    """Postselected output distribution of the flattened measurement pattern.

    Works directly on :func:`graph_state` by projecting each patterned vertex
    onto its basis, independently of :func:`flatten_postselect`.
    """
    check_graph(g)
    n = g.vertices
    psi = graph_state(g, cap).reshape((2,) * n)
    for v, meas in g.pattern.items():
        psi = apply_gate(psi, basis_change(meas.angle), (v,))
    post = {v: g.pattern[v].bit for v in g.measured_vertices}
    return _condition(np.abs(psi) ** 2, post, g.output_vertices)


def stabilizer(g: GraphProgram, v: int) -> np.ndarray:
    """Dense ``X_v prod_{u~v} Z_u`` for checking graph states."""
    n = g.vertices
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    z = np.diag([1, -1]).astype(complex)
    nbrs = {w for a, b, _ in g.edges for w in (a, b) if v in (a, b) and w != v}
    op = np.array([[1.0 + 0j]])
    for q in range(n):
        f = x if q == v else (z if q in nbrs else np.eye(2))
        op = np.kron(op, f)
    return op
