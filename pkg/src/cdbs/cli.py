"""Command-line front end: ``cdbs compile | sample | verify | analyze``.

Exit codes: 0 success, 2 input error, 3 resource limit or skipped backend,
4 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .circuit import OpticalCircuit, depth, interferometer, layer_gate_counts, sparsity
from .errors import (
    CdbsError,
    InfeasiblePostselectionError,
    ParseError,
    ResourceLimitError,
    UnsupportedDepthError,
    ValidationError,
)
from .fock import DEFAULT_BASIS_CAP, Distribution, postselected_distribution, sample_distribution
from .klm import LEAK, CompiledArtifact, DualRailMap, artifact_distribution, compile_depth4, compile_naive
from .qubit import logical_distribution
from .shallow import exact_distribution_depth2, simulate_depth2_optical
from .textio import dump_circuit, dump_metadata, fmt, parse_circuit, parse_graph

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RESOURCE = 3
EXIT_VERIFY = 4

PIPELINES = {"naive8": compile_naive, "depth4": compile_depth4}
VERIFY_TOL = 1e-9

log = logging.getLogger("cdbs")


class _Report:
    """Collects ``key value`` pairs and renders them as a table or keyword lines."""

    def __init__(self, kind: str):
        self.kind = kind
        self.rows: list[tuple[str, str]] = []

    def add(self, key: str, value) -> None:
        if isinstance(value, float):
            value = fmt(value)
        self.rows.append((key, str(value)))

    def render(self, style: str) -> str:
        if style == "text":
            lines = [f"report {self.kind}"] + [f"{k} {v}" for k, v in self.rows] + ["end"]
            return "\n".join(lines) + "\n"
        width = max((len(k) for k, _ in self.rows), default=0)
        return "".join(f"{k:<{width}}  {v}\n" for k, v in self.rows)


def choose_backend(circuit: OpticalCircuit, force: str = "auto") -> str:
    """``shallow`` for depth <= 2 with at most one photon per input mode, else ``fock``."""
    if force != "auto":
        return force
    if depth(circuit) <= 2 and all(x <= 1 for x in circuit.input):
        return "shallow"
    return "fock"


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _bits(key) -> str:
    return "".join("x" if b == LEAK else str(b) for b in key)


def cmd_compile(args) -> int:
    g = parse_graph(_read(args.graph))
    art = PIPELINES[args.pipeline](g)
    out = Path(args.output) if args.output else Path(args.graph).with_suffix(f".{args.pipeline}.circuit")
    out.write_text(dump_circuit(art.circuit), encoding="utf-8")
    meta = out.with_name(out.name + ".meta")
    meta.write_text(dump_metadata(art), encoding="utf-8")
    rep = _Report("compile")
    rep.add("pipeline", art.pipeline)
    rep.add("depth", art.depth)
    rep.add("modes", art.circuit.m)
    rep.add("photons", art.circuit.n_photons)
    rep.add("circuit", out.name)
    rep.add("metadata", meta.name)
    sys.stdout.write(rep.render(args.format))
    return EXIT_OK


def cmd_sample(args) -> int:
    c = parse_circuit(_read(args.circuit))
    backend = choose_backend(c, args.force_backend)
    d = depth(c)
    if backend == "shallow":
        log.info("fast path: shallow-sim (depth %d)", d)
        success = exact_distribution_depth2(c, args.cap).success_probability if c.postselection else 1.0
        samples = simulate_depth2_optical(c, args.shots, args.seed)
    else:
        log.info("exact backend: fock-core (depth %d)", d)
        dist = postselected_distribution(c, args.cap)
        success = dist.success_probability
        samples = sample_distribution(dist, args.shots, args.seed)
    out = [f"# shots {args.shots}", f"# seed {args.seed}", f"# backend {backend}", f"# depth {d}"]
    if c.postselection:
        out.append(f"# success_probability {fmt(success)}")
    out += [" ".join(str(x) for x in s) for s in samples]
    sys.stdout.write("\n".join(out) + "\n")
    return EXIT_OK


def _circuit_artifact(path: str, pipeline: str) -> CompiledArtifact:
    c = parse_circuit(_read(path))
    outs = c.output_modes
    if len(outs) % 2:
        raise ValidationError([f"output register of {len(outs)} modes is not a set of dual-rail pairs"])
    rails = DualRailMap(tuple(zip(outs[::2], outs[1::2])))
    return CompiledArtifact(c, rails, (), pipeline, depth(c), "file:" + Path(path).name)


def cmd_verify(args) -> int:
    g = parse_graph(_read(args.graph))
    backends: dict[str, Distribution] = {}
    rep = _Report("verify")
    skipped = []
    try:
        backends["qubit"] = logical_distribution(g)
    except ResourceLimitError as exc:
        skipped.append(("qubit", str(exc)))
    for name, compile_fn in PIPELINES.items():
        art = compile_fn(g)
        if args.circuit and name == args.pipeline:
            art = _circuit_artifact(args.circuit, name)
        try:
            backends[name] = artifact_distribution(art, args.cap)
        except ResourceLimitError as exc:
            skipped.append((name, str(exc)))
        except InfeasiblePostselectionError as exc:
            rep.add(f"error.{name}", str(exc))
            backends[name] = None
    for name, reason in skipped:
        rep.add(f"skip.{name}", reason)
    if skipped:
        rep.add("verdict", "SKIP")
        sys.stdout.write(rep.render(args.format))
        return EXIT_RESOURCE
    for name, dist in backends.items():
        if dist is not None:
            rep.add(f"success.{name}", dist.success_probability)
    names = list(backends)
    worst = 0.0
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            if backends[a] is None or backends[b] is None:
                tvd = 1.0
            else:
                tvd = backends[a].tvd(backends[b])
            rep.add(f"tvd.{a}.{b}", tvd)
            worst = max(worst, tvd)
    rep.add("max_tvd", worst)
    ok = worst < VERIFY_TOL
    rep.add("verdict", "PASS" if ok else "FAIL")
    if not ok:
        keys = sorted({k for d in backends.values() if d is not None for k in d.probabilities})
        for k in keys:
            probs = " ".join(
                f"{n}={fmt(backends[n][k]) if backends[n] is not None else 'n/a'}" for n in names
            )
            rep.add(f"outcome.{_bits(k)}", probs)
    sys.stdout.write(rep.render(args.format))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_analyze(args) -> int:
    c = parse_circuit(_read(args.circuit))
    d = depth(c)
    s = sparsity(interferometer(c))
    rep = _Report("analyze")
    rep.add("modes", c.m)
    rep.add("photons", c.n_photons)
    rep.add("depth", d)
    rep.add("sparsity", s)
    rep.add("gates_per_layer", " ".join(str(k) for k in layer_gate_counts(c)) or "-")
    rep.add("occupancy_bound", 2**d)
    rep.add("sparsity_within_bound", "yes" if s <= 2**d else "no")
    sys.stdout.write(rep.render(args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--shots", type=_non_negative, default=1000)
    common.add_argument("--pipeline", choices=sorted(PIPELINES), default="depth4")
    common.add_argument("--cap", type=_positive, default=DEFAULT_BASIS_CAP, help="Fock basis size cap")
    common.add_argument("--format", choices=("plain", "text"), default="plain")
    common.add_argument("--force-backend", choices=("auto", "shallow", "fock"), default="auto")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress routing log on stderr")

    p = argparse.ArgumentParser(prog="cdbs", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("compile", parents=[common], help="compile a graph program to an optical circuit")
    c.add_argument("graph")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_compile)
    s = sub.add_parser("sample", parents=[common], help="draw seeded samples from a circuit")
    s.add_argument("circuit")
    s.set_defaults(func=cmd_sample)
    v = sub.add_parser("verify", parents=[common], help="compare both pipelines against the qubit oracle")
    v.add_argument("graph")
    v.add_argument("--circuit", help="check this circuit file in place of the compiled --pipeline")
    v.set_defaults(func=cmd_verify)
    a = sub.add_parser("analyze", parents=[common], help="depth, sparsity and gate counts")
    a.add_argument("circuit")
    a.set_defaults(func=cmd_analyze)
    return p


def _non_negative(text: str) -> int:
    k = int(text)
    if k < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return k


def _positive(text: str) -> int:
    k = int(text)
    if k < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return k


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.handlers = [handler]
    log.propagate = False
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"error: resource limit: {exc} (size {exc.size})", file=sys.stderr)
        return EXIT_RESOURCE
    except (ParseError, ValidationError, UnsupportedDepthError, InfeasiblePostselectionError, CdbsError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
