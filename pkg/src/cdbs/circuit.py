"""Layered linear-optical circuit representation and structural analyses.

A circuit acts on ``m`` modes. Each layer holds two-mode gates and single-mode
phase shifters acting on pairwise disjoint modes, so the order of elements
inside a layer is irrelevant. A two-mode gate ``U`` on modes ``(a, b)``
transforms creation operators as ``a_j^dag -> sum_i U[i, j] a_i^dag`` with
index 0 standing for ``a`` and index 1 for ``b``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError

TAU_UNITARY = 1e-10
TAU_PROB = 1e-9
TWO_PI = 2.0 * math.pi

_SQRT_HALF = math.sqrt(0.5)
BALANCED = ((_SQRT_HALF + 0j, _SQRT_HALF + 0j), (_SQRT_HALF + 0j, -_SQRT_HALF + 0j))
IDENTITY2 = ((1 + 0j, 0j), (0j, 1 + 0j))


def _as_pair_matrix(u) -> tuple:
    a = np.asarray(u, dtype=complex)
    if a.shape != (2, 2):
        raise ValueError(f"two-mode gate needs a 2x2 matrix, got shape {a.shape}")
    return ((complex(a[0, 0]), complex(a[0, 1])), (complex(a[1, 0]), complex(a[1, 1])))


def is_unitary(u, tol: float = TAU_UNITARY) -> bool:
    a = np.asarray(u, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    return float(np.max(np.abs(a @ a.conj().T - np.eye(a.shape[0])), initial=0.0)) <= tol


def rotation(theta: float) -> np.ndarray:
    """Real beam splitter ``[[cos, -sin], [sin, cos]]``."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def beam_splitter(theta: float, phi: float = 0.0) -> np.ndarray:
    """Beam splitter with transmission angle ``theta`` and relative phase ``phi``."""
    c, s = math.cos(theta), math.sin(theta)
    e = cmath.exp(1j * phi)
    return np.array([[c, -s * e.conjugate()], [s * e, c]], dtype=complex)


@dataclass(frozen=True)
class TwoModeGate:
    mode_a: int
    mode_b: int
    unitary: tuple
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "unitary", _as_pair_matrix(self.unitary))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.unitary, dtype=complex)

    @property
    def modes(self) -> tuple[int, int]:
        return (self.mode_a, self.mode_b)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return float(np.max(np.abs(self.matrix - np.eye(2)))) <= tol


@dataclass(frozen=True)
class PhaseShifter:
    mode: int
    phase: float

    @classmethod
    def wrapped(cls, mode: int, phase: float) -> "PhaseShifter":
        """Build a shifter with its phase reduced into ``[0, 2*pi)``."""
        p = math.fmod(phase, TWO_PI)
        if p < 0:
            p += TWO_PI
        if p >= TWO_PI:
            p = 0.0
        return cls(mode, p)

    @property
    def modes(self) -> tuple[int]:
        return (self.mode,)


@dataclass(frozen=True)
class Layer:
    gates: tuple = ()
    phases: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "phases", tuple(self.phases))

    @property
    def elements(self) -> tuple:
        return self.gates + self.phases

    def is_empty(self) -> bool:
        return not self.gates and not self.phases


@dataclass(frozen=True)
class PostselectionSpec:
    """Required photon count per postselected mode, kept sorted by mode."""

    counts: tuple = ()

    def __post_init__(self):
        items = self.counts.items() if isinstance(self.counts, Mapping) else self.counts
        object.__setattr__(self, "counts", tuple(sorted((int(k), int(v)) for k, v in items)))

    @property
    def modes(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.counts)

    def as_dict(self) -> dict[int, int]:
        return dict(self.counts)

    def __bool__(self) -> bool:
        return bool(self.counts)

    def __len__(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class OpticalCircuit:
    m: int
    input: tuple
    layers: tuple = ()
    postselection: PostselectionSpec = field(default_factory=PostselectionSpec)
    output_modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "input", tuple(int(x) for x in self.input))
        object.__setattr__(self, "layers", tuple(self.layers))
        if not isinstance(self.postselection, PostselectionSpec):
            object.__setattr__(self, "postselection", PostselectionSpec(self.postselection))
        object.__setattr__(self, "output_modes", tuple(int(x) for x in self.output_modes))

    @property
    def n_photons(self) -> int:
        return sum(self.input)

    def truncated(self, n_layers: int) -> "OpticalCircuit":
        """The same circuit with only its first ``n_layers`` layers."""
        return replace(self, layers=self.layers[:n_layers])


class CircuitBuilder:
    """Mutable helper that places elements at explicit layer indices."""

    def __init__(self, m: int, input_state: Sequence[int] | None = None):
        self.m = m
        self.input = list(input_state) if input_state is not None else [0] * m
        self._layers: list[tuple[list, list]] = []
        self.postselection: dict[int, int] = {}
        self.output_modes: list[int] = []

    def _slot(self, layer: int):
        while len(self._layers) <= layer:
            self._layers.append(([], []))
        return self._layers[layer]

    def add_mode(self, photons: int = 0) -> int:
        self.input.append(photons)
        self.m += 1
        return self.m - 1

    def gate(self, layer: int, mode_a: int, mode_b: int, unitary, label: str = "") -> "CircuitBuilder":
        self._slot(layer)[0].append(TwoModeGate(mode_a, mode_b, unitary, label))
        return self

    def phase(self, layer: int, mode: int, phase: float) -> "CircuitBuilder":
        self._slot(layer)[1].append(PhaseShifter.wrapped(mode, phase))
        return self

    def build(self) -> OpticalCircuit:
        layers = tuple(
            Layer(tuple(sorted(g, key=lambda x: x.modes)), tuple(sorted(p, key=lambda x: x.mode)))
            for g, p in self._layers
            if g or p
        )
        return OpticalCircuit(
            self.m, tuple(self.input), layers, PostselectionSpec(self.postselection), tuple(self.output_modes)
        )


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    layer: int | None = None

    def __str__(self) -> str:
        if self.layer is None:
            return self.message
        return f"layer {self.layer}: {self.message}"


def validate(circuit: OpticalCircuit) -> list[Violation]:
    """Return every structural violation of ``circuit`` (empty when valid).

    Layer numbers in messages are 1-based.
    """
    out: list[Violation] = []
    m = circuit.m
    if m < 1:
        out.append(Violation("modes", f"mode count must be >= 1, got {m}"))
    if len(circuit.input) != m:
        out.append(Violation("input", f"input has {len(circuit.input)} entries for {m} modes"))
    if any(x < 0 for x in circuit.input):
        out.append(Violation("input", "negative photon count in input"))

    def in_range(k):
        return 0 <= k < m

    for li, layer in enumerate(circuit.layers, start=1):
        seen: dict[int, int] = {}
        overlap: set[int] = set()
        for g in layer.gates:
            if g.mode_a == g.mode_b:
                out.append(Violation("gate", f"gate {g.label or g.modes} acts twice on mode {g.mode_a}", li))
            if not (in_range(g.mode_a) and in_range(g.mode_b)):
                out.append(Violation("range", f"gate {g.label or ''}{g.modes} outside 0..{m - 1}", li))
            if not is_unitary(g.matrix):
                out.append(Violation("unitary", f"gate {g.label or ''}{g.modes} is not unitary", li))
            if any(ch.isspace() or ch == "#" for ch in g.label):
                out.append(Violation("label", f"gate label {g.label!r} contains whitespace or '#'", li))
        for p in layer.phases:
            if not in_range(p.mode):
                out.append(Violation("range", f"phase shifter on mode {p.mode} outside 0..{m - 1}", li))
            if not (0.0 <= p.phase < TWO_PI) or not math.isfinite(p.phase):
                out.append(Violation("phase", f"phase {p.phase!r} on mode {p.mode} not in [0, 2pi)", li))
        for el in layer.elements:
            for k in set(el.modes):
                if k in seen:
                    overlap.add(k)
                seen[k] = seen.get(k, 0) + 1
        if overlap:
            out.append(Violation("overlap", f"modes overlap {{{', '.join(map(str, sorted(overlap)))}}}", li))

    ps = circuit.postselection.as_dict()
    for k, c in ps.items():
        if not in_range(k):
            out.append(Violation("postselect", f"postselected mode {k} outside 0..{m - 1}"))
        if c < 0:
            out.append(Violation("postselect", f"negative required count on mode {k}"))
    for k in circuit.output_modes:
        if not in_range(k):
            out.append(Violation("outputs", f"output mode {k} outside 0..{m - 1}"))
    if len(set(circuit.output_modes)) != len(circuit.output_modes):
        out.append(Violation("outputs", "duplicate output modes"))
    both = set(ps) & set(circuit.output_modes)
    if both:
        out.append(Violation("registers", f"postselected and output modes overlap {sorted(both)}"))
    return out


def check(circuit: OpticalCircuit) -> OpticalCircuit:
    """Raise :class:`ValidationError` unless ``circuit`` is valid."""
    problems = validate(circuit)
    if problems:
        raise ValidationError(problems)
    return circuit


def _phase_matrix(phase: float, index: int) -> np.ndarray:
    d = np.ones(2, dtype=complex)
    d[index] = cmath.exp(1j * phase)
    return np.diag(d)


def normalize(circuit: OpticalCircuit) -> OpticalCircuit:
    """Strip identity gates and absorb phase shifters into neighbouring gates.

    A phase is folded into the latest earlier gate on its mode; failing that,
    into the earliest later gate. Phases on modes that no gate touches are
    kept in place. Layers left empty are dropped.
    """
    gates = [[g for g in layer.gates if not g.is_identity()] for layer in circuit.layers]
    free: list[list[PhaseShifter]] = [[] for _ in circuit.layers]
    for li, layer in enumerate(circuit.layers):
        for p in layer.phases:
            target = None
            for lj in range(li - 1, -1, -1):
                hit = [i for i, g in enumerate(gates[lj]) if p.mode in g.modes]
                if hit:
                    target = (lj, hit[0], True)
                    break
            if target is None:
                for lj in range(li + 1, len(gates)):
                    hit = [i for i, g in enumerate(gates[lj]) if p.mode in g.modes]
                    if hit:
                        target = (lj, hit[0], False)
                        break
            if target is None:
                free[li].append(p)
                continue
            lj, gi, after = target
            g = gates[lj][gi]
            ph = _phase_matrix(p.phase, g.modes.index(p.mode))
            u = ph @ g.matrix if after else g.matrix @ ph
            gates[lj][gi] = TwoModeGate(g.mode_a, g.mode_b, u, g.label)
    layers = tuple(Layer(g, f) for g, f in zip(gates, free) if g or f)
    return replace(circuit, layers=layers)


def depth(circuit: OpticalCircuit) -> int:
    """Number of layers holding a non-trivial two-mode gate, phases absorbed."""
    return sum(1 for layer in normalize(circuit).layers if layer.gates)


def layer_matrix(layer: Layer, m: int) -> np.ndarray:
    u = np.eye(m, dtype=complex)
    for g in layer.gates:
        idx = np.ix_(g.modes, g.modes)
        u[idx] = g.matrix
    for p in layer.phases:
        u[p.mode, p.mode] = cmath.exp(1j * p.phase)
    return u


def interferometer(circuit: OpticalCircuit, n_layers: int | None = None) -> np.ndarray:
    """The ``m x m`` mode transformation of the first ``n_layers`` layers (all by default)."""
    layers = circuit.layers if n_layers is None else circuit.layers[:n_layers]
    u = np.eye(circuit.m, dtype=complex)
    for layer in layers:
        u = layer_matrix(layer, circuit.m) @ u
    return u


def sparsity(u, threshold: float = 1e-12) -> int:
    """Largest number of entries above ``threshold`` in modulus in any row or column."""
    a = np.abs(np.asarray(u)) > threshold
    if a.size == 0:
        return 0
    return int(max(a.sum(axis=0).max(), a.sum(axis=1).max()))


def concatenate(first: OpticalCircuit, second: OpticalCircuit) -> OpticalCircuit:
    """Run ``first`` then ``second`` on the same modes; registers come from ``second``."""
    if first.m != second.m:
        raise ValueError("circuits act on different mode counts")
    return replace(second, input=first.input, layers=first.layers + second.layers)


def layer_gate_counts(circuit: OpticalCircuit) -> list[int]:
    return [len(layer.gates) for layer in circuit.layers]


def reachable_modes(circuit: OpticalCircuit, start: Iterable[int], n_layers: int | None = None) -> set[int]:
    """Modes a photon entering ``start`` can occupy after the given layers."""
    modes = set(start)
    layers = circuit.layers if n_layers is None else circuit.layers[:n_layers]
    for layer in layers:
        for g in layer.gates:
            if g.is_identity():
                continue
            if modes & set(g.modes):
                modes |= set(g.modes)
    return modes
