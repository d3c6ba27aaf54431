"""From a graph program to a depth-4 optical circuit, and a check that it is right.

1. Build a small brickwork program and compile it both ways. The direct
   dual-rail translation costs eight layers; mode reuse and teleportation
   bring it down to four.
2. For a three-vertex program small enough for brute force, compare the
   postselected photon statistics of both circuits with the qubit oracle.
3. Look at the structure of the depth-4 interferometer: every input mode
   reaches at most 2^4 = 16 output modes, and no mode ever holds more
   photons than the depth allows.

Run: python demos/compile_brickwork.py
"""

import math

from cdbs.circuit import interferometer, layer_gate_counts, sparsity
from cdbs.fock import occupancy_profile
from cdbs.klm import KNILL_SUCCESS, TELEPORT_SUCCESS, artifact_distribution, compile_depth4, compile_naive, port_assignment
from cdbs.qubit import GraphProgram, Measurement, brickwork_graph, logical_distribution


def show_depths():
    print("== depth of compiled brickwork programs")
    print(f"{'rows x cols':<12}{'vertices':>9}{'naive8':>8}{'depth4':>8}{'modes':>7}{'photons':>9}")
    for rows, cols in [(2, 3), (3, 5), (4, 9), (5, 17)]:
        g = brickwork_graph(rows, cols)
        naive, fast = compile_naive(g), compile_depth4(g)
        print(f"{rows} x {cols:<8}{g.vertices:>9}{naive.depth:>8}{fast.depth:>8}{fast.circuit.m:>7}{fast.circuit.n_photons:>9}")


def show_equivalence():
    print("\n== postselected statistics on a 3-vertex path")
    q = math.pi / 4
    g = GraphProgram(3, ((0, 1, 1), (1, 2, 2)), {0: Measurement(q), 1: Measurement(-q)}, (2,))
    ref = logical_distribution(g)
    naive = artifact_distribution(compile_naive(g))
    fast = artifact_distribution(compile_depth4(g))
    for name, d in [("qubit oracle", ref), ("naive8", naive), ("depth4", fast)]:
        probs = "  ".join(f"P({k[0]})={p:.12f}" for k, p in sorted(d.items()))
        print(f"{name:<13} {probs}   success {d.success_probability:.3e}")
    print(f"TVD naive8 vs oracle {ref.tvd(naive):.1e}, depth4 vs oracle {ref.tvd(fast):.1e}")

    teleports = sum(r.startswith("teleport") for r in port_assignment(g).values())
    law = ref.success_probability * KNILL_SUCCESS ** len(g.edges) * TELEPORT_SUCCESS**teleports
    print(f"success law: oracle x (2/27)^{len(g.edges)} x (1/4)^{teleports} = {law:.3e}")


def show_structure():
    print("\n== structure of the depth-4 circuit for a 2 x 3 brickwork")
    c = compile_depth4(brickwork_graph(2, 3)).circuit
    print("gates per layer:", layer_gate_counts(c))
    print("interferometer sparsity:", sparsity(interferometer(c)), "(bound 16)")
    small = compile_depth4(GraphProgram(2, ((0, 1, 1),), {0: Measurement(0.0)}, (1,))).circuit
    print("max photons per mode after each layer (2-vertex program):", occupancy_profile(small))


if __name__ == "__main__":
    show_depths()
    show_equivalence()
    show_structure()
