import math

import numpy as np
import pytest

from cdbs.circuit import CircuitBuilder, OpticalCircuit, PhaseShifter, Layer, depth, validate
from cdbs.fock import postselected_distribution
from cdbs.klm import (
    KNILL_PHI,
    KNILL_SUCCESS,
    KNILL_THETA,
    LEAK,
    TELEPORT_SUCCESS,
    DualRailMap,
    GateBlock,
    artifact_distribution,
    block_conditional_operator,
    compile_depth4,
    compile_naive,
    cz_mixed_rails,
    cz_on_zero_rails,
    encode_single_qubit,
    knill_cz,
    logical_action,
    port_assignment,
    teleport_mode,
)
from cdbs.qubit import CZ, H, GraphProgram, Measurement, logical_distribution
from cdbs.textio import dump_circuit, parse_graph

from factories import DATA_DIR, embed_cz, embed_teleport, fidelity, full_brickwork, random_states, small_programs

TWO_QUBITS = DualRailMap.standard(2)


class TestKnill:
    def test_shape(self):
        block = knill_cz()
        assert block.n_modes == 4 and block.depth == 2
        assert dict(block.ancilla_input) == dict(block.postselection) == {1: 1, 2: 1}
        assert validate(block.standalone()) == []

    def test_angles_near_quoted_values(self):
        assert math.degrees(KNILL_THETA) == pytest.approx(54.74, abs=0.005)
        assert math.degrees(KNILL_PHI) == pytest.approx(17.63, abs=0.005)

    def test_conditional_operator(self):
        op = block_conditional_operator(knill_cz())
        assert np.max(np.abs(op - math.sqrt(KNILL_SUCCESS) * np.diag([1, 1, 1, -1]))) < 1e-12

    @pytest.mark.parametrize("ports", [(0, 0), (0, 1), (1, 0), (1, 1)])
    def test_uniform_success_no_leak(self, ports):
        d = postselected_distribution(knill_cz().standalone(ports))
        assert d.success_probability == pytest.approx(2 / 27, abs=1e-12)
        assert d[ports] == pytest.approx(1.0, abs=1e-12)

    def test_phase_covariance(self):
        rng = np.random.default_rng(0)
        base = knill_cz()
        for _ in range(5):
            a, b = rng.uniform(0, 2 * math.pi, 2)
            pre = Layer((), (PhaseShifter(0, a), PhaseShifter(3, b)))
            post = Layer((), (PhaseShifter(0, (2 * math.pi - a) % (2 * math.pi)), PhaseShifter(3, (2 * math.pi - b) % (2 * math.pi))))
            block = GateBlock("conj", 4, (pre,) + base.layers + (post,), base.ancilla_input, base.postselection, base.ports)
            op = block_conditional_operator(block)
            assert np.allclose(np.abs(op), np.abs(block_conditional_operator(base)), atol=1e-12)
            assert np.allclose(op, block_conditional_operator(base), atol=1e-12)


class TestModeReuse:
    def test_port_operator(self):
        op = block_conditional_operator(cz_on_zero_rails())
        assert np.max(np.abs(op + math.sqrt(KNILL_SUCCESS) * np.diag([-1, 1, 1, 1]))) < 1e-12

    def test_phases_cost_no_depth(self):
        assert cz_on_zero_rails().depth == 2
        only_phases = OpticalCircuit(4, (0,) * 4, cz_on_zero_rails().layers[:1])
        assert depth(only_phases) == 0

    @pytest.mark.parametrize("block, ports", [(cz_on_zero_rails(), (0, 2)), (cz_mixed_rails(), (0, 3)), (knill_cz(), (1, 3))])
    def test_logical_cz(self, block, ports):
        logical, leaked = logical_action(embed_cz(block, *ports), TWO_QUBITS, TWO_QUBITS)
        rng = np.random.default_rng(1)
        states = list(np.eye(4)) + list(random_states(rng, 4, 10))
        for psi in states:
            f, success = fidelity(logical, leaked, psi, CZ @ psi)
            assert f >= 1 - 1e-9
            assert success == pytest.approx(KNILL_SUCCESS, abs=1e-12)


class TestTeleport:
    def test_vacuum(self):
        d = postselected_distribution(teleport_mode().standalone((0,)))
        assert d[(0,)] == pytest.approx(1.0)
        assert d.success_probability == pytest.approx(TELEPORT_SUCCESS)

    def test_single_photon(self):
        d = postselected_distribution(teleport_mode().standalone((1,)))
        assert d[(1,)] == pytest.approx(1.0)
        assert d.success_probability == pytest.approx(TELEPORT_SUCCESS)

    @pytest.mark.parametrize("rail", [0, 1])
    def test_dual_rail_states(self, rail):
        c, out = embed_teleport(rail)
        logical, leaked = logical_action(c, DualRailMap(((0, 1),)), out)
        for psi in random_states(np.random.default_rng(rail), 2, 20):
            f, success = fidelity(logical, leaked, psi, psi)
            assert f >= 1 - 1e-9
            assert success > 0.2


class TestSingleQubit:
    rails = DualRailMap.standard(1)

    def test_identity(self):
        g = encode_single_qubit(np.eye(2), 0, self.rails)
        assert g.is_identity() and g.modes == (0, 1)

    def test_hadamard_prepares_plus(self):
        g = encode_single_qubit(H, 0, self.rails)
        c = CircuitBuilder(2, [1, 0]).gate(0, *g.modes, g.unitary).build()
        logical, _ = logical_action(c, self.rails, self.rails)
        assert np.allclose(logical[:, 0], [1 / math.sqrt(2)] * 2)

    def test_rz_is_diagonal(self):
        g = encode_single_qubit(np.diag([1, np.exp(0.7j)]), 0, self.rails)
        assert g.matrix[0, 1] == 0 and g.matrix[1, 0] == 0

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError):
            encode_single_qubit(np.ones((2, 2)), 0, self.rails)


class TestPipelines:
    @pytest.mark.parametrize("g", small_programs(), ids=lambda g: f"{g.vertices}v{len(g.edges)}e")
    def test_equivalence(self, g):
        ref = logical_distribution(g)
        naive = artifact_distribution(compile_naive(g))
        fast = artifact_distribution(compile_depth4(g))
        assert ref.tvd(naive) < 1e-9 and ref.tvd(fast) < 1e-9 and naive.tvd(fast) < 1e-9
        assert all(LEAK not in k for k in fast.support(1e-12))

    @pytest.mark.parametrize("g", small_programs(), ids=lambda g: f"{g.vertices}v{len(g.edges)}e")
    def test_success_product_law(self, g):
        ref = logical_distribution(g).success_probability
        n_edges = len(g.edges)
        n_tele = sum(role.startswith("teleport") for role in port_assignment(g).values())
        naive = artifact_distribution(compile_naive(g)).success_probability
        fast = artifact_distribution(compile_depth4(g)).success_probability
        assert naive == pytest.approx(ref * KNILL_SUCCESS**n_edges, rel=1e-9)
        assert fast == pytest.approx(ref * KNILL_SUCCESS**n_edges * TELEPORT_SUCCESS**n_tele, rel=1e-9)

    def test_degree_three_vertex(self):
        q = math.pi / 4
        g = GraphProgram(
            4, ((0, 1, 1), (0, 2, 2), (0, 3, 3)),
            {0: Measurement(q), 1: Measurement(-q), 2: Measurement(math.pi / 2, "-")}, (3,),
        )
        roles = port_assignment(g)
        assert [roles[(e, 0)] for e in range(3)] == ["teleport_one", "teleport_zero", "direct_one"]
        assert artifact_distribution(compile_depth4(g)).tvd(logical_distribution(g)) < 1e-9

    @pytest.mark.parametrize("g", full_brickwork(), ids=lambda g: f"{g.vertices}v")
    def test_depths_on_brickwork(self, g):
        assert compile_naive(g).depth == 8
        assert compile_depth4(g).depth == 4

    def test_edgeless(self):
        g = GraphProgram(2, (), {0: Measurement(0.0)}, (0, 1))
        assert compile_naive(g).depth == 2
        assert compile_depth4(g).depth <= 2

    @pytest.mark.parametrize("g", full_brickwork()[:2] + small_programs()[:4], ids=lambda g: f"{g.vertices}v{len(g.edges)}e")
    def test_teleported_modes_touch_four_gates(self, g):
        c = compile_depth4(g).circuit
        copies = [k for k in range(2 * g.vertices, c.m) if c.input[k] == 0]
        basis = {k for gate in c.layers[-1].gates if gate.label == "MB" for k in gate.modes}
        assert copies and basis & set(copies)
        for k in copies:
            touches = [li for li, layer in enumerate(c.layers) for gate in layer.gates if k in gate.modes]
            # prep splitter, both CZ layers, and the basis gate when the qubit has one
            assert len(touches) == (4 if k in basis else 3)
            assert len(set(touches)) == len(touches)

    def test_artifact_invariants(self):
        for g in small_programs():
            for compile_fn in (compile_naive, compile_depth4):
                art = compile_fn(g)
                assert art.postselection == art.circuit.postselection
                assert art.depth == depth(art.circuit)
                assert art.metadata["depth"] == art.depth
                flat = [k for pair in art.qubit_map.rails for k in pair]
                assert list(art.circuit.output_modes) == flat

    def test_ancillas_after_rails(self):
        g = small_programs()[3]
        c = compile_naive(g).circuit
        assert c.input[: 2 * g.vertices] == (1, 0) * g.vertices
        assert all(x == 1 for x in c.input[2 * g.vertices:])

    @pytest.mark.parametrize("pipeline", ["naive8", "depth4"])
    def test_matches_golden(self, pipeline):
        g = parse_graph((DATA_DIR / "two_vertex.graph").read_text())
        art = {"naive8": compile_naive, "depth4": compile_depth4}[pipeline](g)
        assert dump_circuit(art.circuit) == (DATA_DIR / f"two_vertex.{pipeline}.circuit").read_text()
