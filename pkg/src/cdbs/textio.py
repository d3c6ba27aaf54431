"""Plain-text formats for circuits, graph programs and compile metadata.

All three share one layout: UTF-8, LF line endings, one keyword per line,
reals written with 17 significant digits, and a closing ``end`` line so a
truncated file is detected. Blank lines and ``#`` comments are ignored.

Circuit::

    circuit 1
    modes 4
    input 1 0 1 0
    layers 2
    gate 0 0 1 <re00 im00 re01 im01 re10 im10 re11 im11> [label]
    phase 1 2 <phase>
    postselect 2=1 3=0
    outputs 0 1
    end

Graph program::

    graph 1
    vertices 3
    edge 0 1 1
    measure 0 <angle> +
    outputs 2
    end
"""

from __future__ import annotations

from typing import Iterable

from .circuit import Layer, OpticalCircuit, PhaseShifter, PostselectionSpec, TwoModeGate
from .errors import ParseError
from .qubit import GraphProgram, Measurement

FORMAT_VERSION = "1"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _lines(text: str) -> list[tuple[int, list[str]]]:
    out = []
    for no, raw in enumerate(text.split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append((no, line.split()))
    return out


def _int(tok: str, no: int, field: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"{field}: expected an integer, got {tok!r}", no, field) from None


def _float(tok: str, no: int, field: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"{field}: expected a real number, got {tok!r}", no, field) from None


class _Reader:
    def __init__(self, text: str, kind: str):
        self.items = _lines(text)
        self.pos = 0
        self.kind = kind

    def peek(self) -> str | None:
        return self.items[self.pos][1][0] if self.pos < len(self.items) else None

    def take(self, keyword: str) -> tuple[int, list[str]]:
        if self.pos >= len(self.items):
            raise ParseError(f"unexpected end of {self.kind} file, expected '{keyword}'", None, keyword)
        no, toks = self.items[self.pos]
        if toks[0] != keyword:
            raise ParseError(f"unknown or misplaced field '{toks[0]}', expected '{keyword}'", no, toks[0])
        self.pos += 1
        return no, toks[1:]

    def finish(self):
        self.take("end")
        if self.pos < len(self.items):
            no, toks = self.items[self.pos]
            raise ParseError(f"content after 'end': '{toks[0]}'", no, toks[0])


def _header(r: _Reader, keyword: str):
    no, rest = r.take(keyword)
    if rest != [FORMAT_VERSION]:
        raise ParseError(f"unsupported {keyword} format version {' '.join(rest)!r}", no, keyword)


def _pairs(toks: Iterable[str], no: int, field: str) -> dict[int, int]:
    out = {}
    for tok in toks:
        k, sep, v = tok.partition("=")
        if not sep:
            raise ParseError(f"{field}: expected mode=count, got {tok!r}", no, field)
        out[_int(k, no, field)] = _int(v, no, field)
    return out


def dump_circuit(c: OpticalCircuit) -> str:
    lines = [
        f"circuit {FORMAT_VERSION}",
        f"modes {c.m}",
        "input " + " ".join(str(x) for x in c.input),
        f"layers {len(c.layers)}",
    ]
    for li, layer in enumerate(c.layers):
        for g in layer.gates:
            nums = []
            for row in g.unitary:
                for z in row:
                    nums += [fmt(z.real), fmt(z.imag)]
            label = f" {g.label}" if g.label else ""
            lines.append(f"gate {li} {g.mode_a} {g.mode_b} " + " ".join(nums) + label)
        for p in layer.phases:
            lines.append(f"phase {li} {p.mode} {fmt(p.phase)}")
    lines.append("postselect" + "".join(f" {k}={v}" for k, v in c.postselection.counts))
    lines.append("outputs" + "".join(f" {k}" for k in c.output_modes))
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str) -> OpticalCircuit:
    r = _Reader(text, "circuit")
    _header(r, "circuit")
    no, rest = r.take("modes")
    if len(rest) != 1:
        raise ParseError("modes: expected one integer", no, "modes")
    m = _int(rest[0], no, "modes")
    no, rest = r.take("input")
    occ = tuple(_int(t, no, "input") for t in rest)
    if len(occ) != m:
        raise ParseError(f"input: expected {m} occupations, got {len(occ)}", no, "input")
    no, rest = r.take("layers")
    if len(rest) != 1:
        raise ParseError("layers: expected one integer", no, "layers")
    n_layers = _int(rest[0], no, "layers")
    gates: list[list[TwoModeGate]] = [[] for _ in range(n_layers)]
    phases: list[list[PhaseShifter]] = [[] for _ in range(n_layers)]
    while r.peek() in ("gate", "phase"):
        kw = r.peek()
        no, rest = r.take(kw)
        if kw == "gate":
            if len(rest) not in (11, 12):
                raise ParseError(f"gate: expected layer, two modes, 8 reals and an optional label, got {len(rest)} fields", no, "gate")
            li, a, b = (_int(t, no, "gate") for t in rest[:3])
            v = [_float(t, no, "gate") for t in rest[3:11]]
            u = ((complex(v[0], v[1]), complex(v[2], v[3])), (complex(v[4], v[5]), complex(v[6], v[7])))
            label = rest[11] if len(rest) == 12 else ""
            if not 0 <= li < n_layers:
                raise ParseError(f"gate: layer {li} outside 0..{n_layers - 1}", no, "gate")
            gates[li].append(TwoModeGate(a, b, u, label))
        else:
            if len(rest) != 3:
                raise ParseError("phase: expected layer, mode and phase", no, "phase")
            li, mode = _int(rest[0], no, "phase"), _int(rest[1], no, "phase")
            if not 0 <= li < n_layers:
                raise ParseError(f"phase: layer {li} outside 0..{n_layers - 1}", no, "phase")
            phases[li].append(PhaseShifter(mode, _float(rest[2], no, "phase")))
    no, rest = r.take("postselect")
    post = _pairs(rest, no, "postselect")
    no, rest = r.take("outputs")
    outs = tuple(_int(t, no, "outputs") for t in rest)
    r.finish()
    layers = tuple(Layer(tuple(g), tuple(p)) for g, p in zip(gates, phases))
    return OpticalCircuit(m, occ, layers, PostselectionSpec(post), outs)


def dump_graph(g: GraphProgram) -> str:
    lines = [f"graph {FORMAT_VERSION}", f"vertices {g.vertices}"]
    lines += [f"edge {u} {v} {c}" for u, v, c in g.edges]
    lines += [f"measure {v} {fmt(m.angle)} {m.outcome}" for v, m in g.pattern.items()]
    lines.append("outputs" + "".join(f" {v}" for v in g.output_vertices))
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> GraphProgram:
    r = _Reader(text, "graph")
    _header(r, "graph")
    no, rest = r.take("vertices")
    if len(rest) != 1:
        raise ParseError("vertices: expected one integer", no, "vertices")
    n = _int(rest[0], no, "vertices")
    edges = []
    while r.peek() == "edge":
        no, rest = r.take("edge")
        if len(rest) != 3:
            raise ParseError("edge: expected two vertices and a layer", no, "edge")
        edges.append(tuple(_int(t, no, "edge") for t in rest))
    pattern = {}
    while r.peek() == "measure":
        no, rest = r.take("measure")
        if len(rest) != 3 or rest[2] not in ("+", "-"):
            raise ParseError("measure: expected vertex, angle and '+' or '-'", no, "measure")
        pattern[_int(rest[0], no, "measure")] = Measurement(_float(rest[1], no, "measure"), rest[2])
    no, rest = r.take("outputs")
    outs = tuple(_int(t, no, "outputs") for t in rest)
    r.finish()
    return GraphProgram(n, tuple(edges), pattern, outs)


def dump_metadata(artifact) -> str:
    lines = [
        f"artifact {FORMAT_VERSION}",
        f"pipeline {artifact.pipeline}",
        f"depth {artifact.depth}",
        f"source {artifact.source_digest}",
        f"modes {artifact.circuit.m}",
        f"photons {artifact.circuit.n_photons}",
    ]
    for v, (z, o) in zip(artifact.output_vertices, artifact.qubit_map.rails):
        lines.append(f"qubit {v} {z} {o}")
    lines.append("postselect" + "".join(f" {k}={v}" for k, v in artifact.postselection.counts))
    lines.append("end")
    return "\n".join(lines) + "\n"


def parse_metadata(text: str) -> dict:
    """Sidecar fields as a dict; ``qubits`` is a list of ``(vertex, zero, one)``."""
    r = _Reader(text, "metadata")
    _header(r, "artifact")
    out: dict = {}
    no, rest = r.take("pipeline")
    out["pipeline"] = rest[0] if rest else ""
    for key in ("depth",):
        no, rest = r.take(key)
        out[key] = _int(rest[0], no, key)
    no, rest = r.take("source")
    out["source"] = rest[0] if rest else ""
    for key in ("modes", "photons"):
        no, rest = r.take(key)
        out[key] = _int(rest[0], no, key)
    qubits = []
    while r.peek() == "qubit":
        no, rest = r.take("qubit")
        if len(rest) != 3:
            raise ParseError("qubit: expected vertex, zero rail and one rail", no, "qubit")
        qubits.append(tuple(_int(t, no, "qubit") for t in rest))
    out["qubits"] = qubits
    no, rest = r.take("postselect")
    out["postselect"] = _pairs(rest, no, "postselect")
    r.finish()
    return out
