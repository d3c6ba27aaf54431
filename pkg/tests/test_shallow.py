import math
import time
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from cdbs.circuit import BALANCED, CircuitBuilder, OpticalCircuit
from cdbs.errors import ResourceLimitError, UnsupportedDepthError
from cdbs.fock import output_distribution, postselect
from cdbs.qubit import CNOT, H, QubitCircuit, QubitGate, simulate
from cdbs.shallow import (
    chain_plan,
    exact_distribution_depth2,
    simulate_depth2_optical,
    simulate_depth2_qubits,
)

from factories import haar, random_optical, random_qubit_circuit

BELL = CNOT @ np.kron(H, np.eye(2))


def optical_cases(count=100, seed=2024):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        m = int(rng.integers(2, 9))
        n = int(rng.integers(0, min(4, m) + 1))
        yield random_optical(rng, m, n, 2, fill=float(rng.uniform(0.4, 1.0)))


def qubit_cases(count=100, seed=77):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_qubit_circuit(rng, int(rng.integers(1, 11)), fill=float(rng.uniform(0.4, 1.0)))


def chi_square_ok(samples, dist):
    keys = dist.support(1e-6)
    tally = Counter(samples)
    counts = np.array([tally[k] for k in keys])
    expected = np.array([dist[k] for k in keys])
    expected = expected / expected.sum() * counts.sum()
    return chisquare(counts, expected).pvalue > 0.001


class TestOracleEquivalence:
    def test_optical(self):
        for c in optical_cases():
            assert exact_distribution_depth2(c).max_abs_diff(output_distribution(c)) < 1e-9

    def test_qubit(self):
        for c in qubit_cases():
            assert exact_distribution_depth2(c).max_abs_diff(simulate(c)) < 1e-9

    def test_reverse_order(self):
        for c in list(optical_cases(30, 5)) + list(qubit_cases(30, 6)):
            fwd = exact_distribution_depth2(c)
            assert exact_distribution_depth2(c, reverse=True).max_abs_diff(fwd) < 1e-12

    def test_optical_postselection(self):
        rng = np.random.default_rng(3)
        c = random_optical(rng, 6, 3, 2)
        c = OpticalCircuit(c.m, c.input, c.layers, {0: 1, 5: 0})
        ref = postselect(output_distribution(c), {0: 1, 5: 0})
        got = exact_distribution_depth2(c)
        assert got.max_abs_diff(ref) < 1e-12
        assert got.success_probability == pytest.approx(ref.success_probability, abs=1e-12)


class TestExamples:
    def test_two_hom_pairs(self):
        b = CircuitBuilder(4, [1, 1, 1, 1]).gate(0, 0, 1, BALANCED).gate(0, 2, 3, BALANCED)
        d = exact_distribution_depth2(b.build())
        for a in ((2, 0), (0, 2)):
            for c in ((2, 0), (0, 2)):
                assert d[a + c] == pytest.approx(0.25, abs=1e-12)
        assert all(s[0] != 1 and s[2] != 1 for s in d.support(1e-12))
        shots = simulate_depth2_optical(b.build(), 2000, 1)
        assert not any(s[0] == 1 or s[2] == 1 for s in shots)

    def test_depth_one_is_independent(self):
        b = CircuitBuilder(4, [1, 0, 0, 1])
        u, v = haar(2, np.random.default_rng(0)), haar(2, np.random.default_rng(1))
        c = b.gate(0, 0, 1, u).gate(0, 2, 3, v).build()
        d = exact_distribution_depth2(c)
        left = output_distribution(CircuitBuilder(2, [1, 0]).gate(0, 0, 1, u).build())
        right = output_distribution(CircuitBuilder(2, [0, 1]).gate(0, 0, 1, v).build())
        for a, pa in left.items():
            for r, pr in right.items():
                assert d[a + r] == pytest.approx(pa * pr, abs=1e-12)

    def test_single_chain_is_one_step(self):
        rng = np.random.default_rng(4)
        c = CircuitBuilder(2, [1, 1]).gate(0, 0, 1, haar(2, rng)).gate(1, 0, 1, haar(2, rng)).build()
        assert len(chain_plan(c).steps) == 1
        assert exact_distribution_depth2(c).max_abs_diff(output_distribution(c)) < 1e-12

    def test_product_state_qubits(self):
        thetas = [0.3, 1.1, 2.0]
        gates = [QubitGate((q,), np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]])) for q, t in enumerate(thetas)]
        d = exact_distribution_depth2(QubitCircuit(3, [gates]))
        for bits, p in d.items():
            expected = math.prod(math.sin(t / 2) ** 2 if b else math.cos(t / 2) ** 2 for b, t in zip(bits, thetas))
            assert p == pytest.approx(expected, abs=1e-12)

    def test_two_bell_pairs_sampled(self):
        c = QubitCircuit(4, [[QubitGate((0, 1), BELL), QubitGate((2, 3), BELL)], [QubitGate((1, 2), np.kron(H, H))]])
        ref = simulate(c)
        shots = simulate_depth2_qubits(c, 100_000, 9)
        assert chi_square_ok(shots, ref)


class TestPlan:
    def test_cycle(self):
        g = np.kron(H, H) @ CNOT
        c = QubitCircuit(4, [[QubitGate((0, 1), g), QubitGate((2, 3), g)], [QubitGate((1, 2), g), QubitGate((3, 0), g)]])
        plan = chain_plan(c)
        assert len(plan.chains) == 1 and plan.chains[0] == (0, 1, 2, 3)
        assert [set(s.elements) for s in plan.steps] == [{0, 3}, {1, 2}]
        assert plan.steps[0].reads == ("p0", "p1") and plan.steps[0].remaining == (1, 2)
        assert plan.steps[1].reads == ("s0",) and plan.steps[1].writes is None

    def test_depth_one_reads_initial_slots(self):
        c = random_optical(np.random.default_rng(8), 8, 3, 1)
        plan = chain_plan(c)
        assert all(set(s.reads) <= set(plan.initial_slots) for s in plan.steps)
        assert all(sid.startswith("u") for sid in plan.initial_slots)

    @pytest.mark.parametrize("reverse", [False, True])
    def test_invariants(self, reverse):
        for c in optical_cases(40, 11):
            plan = chain_plan(c, reverse)
            # measured pairs: every last-layer gate, plus earlier gates nothing follows
            last = [g.modes for g in c.layers[-1].gates]
            touched = {k for p in last for k in p}
            second = last + [g.modes for g in c.layers[0].gates if len(c.layers) == 2 and not touched & set(g.modes)]
            measured = [tuple(s.elements) for s in plan.steps if len(s.elements) == 2]
            assert sorted(map(sorted, second)) == sorted(map(sorted, measured))
            seen = set(plan.initial_slots)
            for s in plan.steps:
                assert set(s.reads) <= seen
                seen -= set(s.reads)
                if s.writes:
                    seen.add(s.writes)

    def test_deterministic(self):
        c = next(optical_cases(1, 12))
        assert chain_plan(c) == chain_plan(c)


class TestRejections:
    def test_depth_three_optical(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            c = random_optical(rng, 6, 2, 3, phases=False)
            with pytest.raises(UnsupportedDepthError, match="layer 3") as err:
                exact_distribution_depth2(c)
            assert err.value.layer == 3
            with pytest.raises(UnsupportedDepthError):
                simulate_depth2_optical(c, 10, 0)

    def test_depth_three_qubit(self):
        c = random_qubit_circuit(np.random.default_rng(1), 6, layers=3, fill=1.0)
        with pytest.raises(UnsupportedDepthError, match="layer 6"):
            chain_plan(c)

    def test_multi_photon_input(self):
        c = CircuitBuilder(2, [2, 0]).gate(0, 0, 1, BALANCED).build()
        with pytest.raises(ValueError, match="photon"):
            exact_distribution_depth2(c)

    def test_cap(self):
        c = random_optical(np.random.default_rng(2), 8, 4, 2)
        with pytest.raises(ResourceLimitError):
            exact_distribution_depth2(c, cap=3)


class TestSampling:
    @pytest.mark.parametrize("seed", range(3))
    def test_chi_square_optical(self, seed):
        c = random_optical(np.random.default_rng(200 + seed), 6, 3, 2)
        shots = simulate_depth2_optical(c, 100_000, seed)
        assert chi_square_ok(shots, output_distribution(c))

    def test_seeded(self):
        c = next(optical_cases(1, 3))
        assert simulate_depth2_optical(c, 500, 4) == simulate_depth2_optical(c, 500, 4)
        assert simulate_depth2_optical(c, 0, 4) == []

    def test_workers_partition(self):
        c = next(qubit_cases(1, 8))
        a = simulate_depth2_qubits(c, 301, 5, workers=3)
        assert len(a) == 301 and a == simulate_depth2_qubits(c, 301, 5, workers=3)
        assert chi_square_ok(simulate_depth2_qubits(c, 50_000, 5, workers=4), simulate(c))


def hom_chain(m):
    """Identity-heavy circuit: a few HOM pairs joined by one cross gate, the rest untouched."""
    occ = [1] * 4 + [0] * (m - 4)
    b = CircuitBuilder(m, occ).gate(0, 0, 1, BALANCED).gate(0, 2, 3, BALANCED).gate(1, 1, 2, BALANCED)
    return b.build()


@pytest.mark.slow
def test_scaling_smoke():
    times = {}
    for m in (64, 256, 1024):
        c = hom_chain(m)
        simulate_depth2_optical(c, 10, 0)
        t0 = time.perf_counter()
        shots = simulate_depth2_optical(c, 400, 1)
        times[m] = time.perf_counter() - t0
        assert all(sum(s) == 4 and len(s) == m for s in shots)
    # linear growth gives a ratio near 16; allow generous headroom
    assert times[1024] / times[64] < 40
