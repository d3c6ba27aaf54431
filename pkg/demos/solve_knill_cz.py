"""Recover the postselected CZ angles by numerical search.

The block wiring is fixed (ports p, q and ancillas a, b in local order
p, a, b, q; two splitter layers). Only the four rotation angles are free.
We ask for a conditional operator proportional to diag(1, 1, 1, -1) with
every amplitude equal to sqrt(2/27), start the search from rough guesses
near the known values, and compare the result with the closed form used by
``cdbs.klm.knill_cz``.

Run: python demos/solve_knill_cz.py
"""

import math

import numpy as np
from scipy.optimize import least_squares

from cdbs.circuit import Layer, TwoModeGate, rotation
from cdbs.klm import KNILL_PHI, KNILL_THETA, GateBlock, block_conditional_operator, knill_cz

TARGET = math.sqrt(2 / 27) * np.diag([1, 1, 1, -1])


def block(angles):
    pa, bq, pq, ab = angles
    first = Layer((TwoModeGate(0, 1, rotation(pa)), TwoModeGate(2, 3, rotation(bq))))
    second = Layer((TwoModeGate(0, 3, rotation(pq)), TwoModeGate(1, 2, rotation(ab))))
    return GateBlock("trial", 4, (first, second), ((1, 1), (2, 1)), ((1, 1), (2, 1)), (0, 3))


def residual(angles):
    d = block_conditional_operator(block(angles)) - TARGET
    return np.concatenate([d.real.ravel(), d.imag.ravel()])


def main():
    # rough starting point: 125, 125, 55, 18 degrees
    start = np.radians([125.0, 125.0, 55.0, 18.0])
    fit = least_squares(residual, start, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    found = np.degrees(fit.x)
    closed = np.degrees([math.pi - KNILL_THETA, math.pi - KNILL_THETA, KNILL_THETA, KNILL_PHI])
    print("angle      found (deg)        closed form (deg)")
    for name, a, b in zip(["(p,a)", "(b,q)", "(p,q)", "(a,b)"], found, closed):
        print(f"{name:<8} {a:18.12f} {b:18.12f}")
    print(f"residual norm          {np.linalg.norm(fit.fun):.2e}")
    op = block_conditional_operator(knill_cz())
    print("closed-form operator / sqrt(2/27):")
    print(np.round((op / math.sqrt(2 / 27)).real, 12) + 0.0)
    assert np.allclose(found, closed, atol=1e-6), "search landed on a different branch"


if __name__ == "__main__":
    main()
