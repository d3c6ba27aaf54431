"""Sampling depth-2 circuits without ever building the Fock space.

A depth-2 circuit splits into chains: a layer-1 gate prepares a pair, a
layer-2 gate measures a pair, and the chains alternate between the two.
Measuring one pair at a time keeps every intermediate state on at most four
modes, so the cost per shot is linear in the number of modes.

The script first checks the exact chain distribution against brute force,
then times sampling on long identity-padded circuits, and finally shows the
simulator refusing a third layer.

Run: python demos/depth2_sampling.py
"""

import time

import numpy as np
from scipy.stats import unitary_group

from cdbs.circuit import BALANCED, CircuitBuilder
from cdbs.errors import UnsupportedDepthError
from cdbs.fock import output_distribution
from cdbs.shallow import chain_plan, exact_distribution_depth2, simulate_depth2_optical


def brickwork_optics(m, photons, layers, rng):
    b = CircuitBuilder(m, [1] * photons + [0] * (m - photons))
    for li in range(layers):
        for a in range(li % 2, m - 1, 2):
            b.gate(li, a, a + 1, unitary_group.rvs(2, random_state=rng))
    return b.build()


def compare_with_brute_force(rng):
    print("== exact chain distribution vs Fock-space brute force")
    c = brickwork_optics(8, 4, 2, rng)
    plan = chain_plan(c)
    print(f"8 modes, 4 photons: {len(plan.chains)} chain(s), {len(plan.steps)} steps")
    fast = exact_distribution_depth2(c)
    slow = output_distribution(c)
    print(f"outcomes {len(slow.support(1e-15))}, largest difference {fast.max_abs_diff(slow):.1e}")
    shots = simulate_depth2_optical(c, 20_000, seed=5)
    top = sorted(slow.items(), key=lambda kv: -kv[1])[:3]
    for state, p in top:
        print(f"  {state}  exact {p:.4f}  sampled {shots.count(state) / len(shots):.4f}")


def scaling():
    print("\n== time per shot with four photons and many idle modes")
    for m in (64, 256, 1024, 4096):
        b = CircuitBuilder(m, [1, 1, 1, 1] + [0] * (m - 4))
        c = b.gate(0, 0, 1, BALANCED).gate(0, 2, 3, BALANCED).gate(1, 1, 2, BALANCED).build()
        t0 = time.perf_counter()
        simulate_depth2_optical(c, 200, seed=1)
        print(f"m = {m:>5}: {(time.perf_counter() - t0) / 200 * 1e3:.3f} ms per shot")


def third_layer(rng):
    print("\n== a third layer is refused")
    try:
        exact_distribution_depth2(brickwork_optics(6, 2, 3, rng))
    except UnsupportedDepthError as exc:
        print("UnsupportedDepthError:", exc)


if __name__ == "__main__":
    rng = np.random.default_rng(1)
    compare_with_brute_force(rng)
    scaling()
    third_layer(rng)
