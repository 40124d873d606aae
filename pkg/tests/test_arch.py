from __future__ import annotations

import numpy as np
import pytest

from circuitforge.arch import (
    ArchitectureSpec,
    BlockKind,
    LayerBlock,
    circuit_wires,
    load_arch,
    param_count,
    save_arch,
    synthesize_circuit_arch,
    synthesize_randomized_arch,
    synthesize_sequential_arch,
    validate,
)
from circuitforge.connectome import Role
from circuitforge.cri import SelectedNeurons
from circuitforge.errors import (
    ConstraintUnsatisfiable,
    CycleDetected,
    EmptyCircuit,
    InvalidArchitecture,
    ShapeInferenceFailure,
    ShapeMismatchAtMerge,
    UnreachableBlock,
)
from circuitforge.extraction import ExtractionConfig, FunctionalCircuit, extract_circuits
from circuitforge.reference import reference_circuit
from conftest import random_connectome
from test_extraction import _random_selection

CONV = {"kernel": 3, "multiplier": 1, "pad": 1, "pool": 1}


def _chain_spec(c: int = 4) -> ArchitectureSpec:
    blocks = (
        LayerBlock("stem", BlockKind.STEM, {}),
        LayerBlock("conv:a", BlockKind.CONV, dict(CONV, pool=2)),
        LayerBlock("head", BlockKind.DENSE_HEAD, {"hidden": 0}),
    )
    wires = (("stem", "conv:a"), ("conv:a", "head"))
    return ArchitectureSpec(blocks=blocks, wires=wires, input_shape=(1, 8, 8),
                            num_categories=3, c=c, topology_source="circuit")


def test_layer_block_validates_params():
    with pytest.raises(InvalidArchitecture):
        LayerBlock("conv:x", BlockKind.CONV, {"kernel": 3})  # missing fields
    with pytest.raises(InvalidArchitecture):
        LayerBlock("m", BlockKind.MERGE, {"project": True, "extra": 1})
    with pytest.raises(InvalidArchitecture):
        LayerBlock("conv:x", BlockKind.CONV, dict(CONV, kernel=0))


def test_block_kind_parse():
    assert BlockKind.parse("ConvBlock") is BlockKind.CONV
    with pytest.raises(InvalidArchitecture):
        BlockKind.parse("Transformer")


def test_json_round_trip_identity():
    spec = _chain_spec()
    text = spec.to_json()
    again = ArchitectureSpec.from_json(text)
    assert again == spec
    assert again.to_json() == text


def test_save_load(tmp_path):
    spec = _chain_spec()
    save_arch(spec, tmp_path / "arch.json")
    assert load_arch(tmp_path / "arch.json") == spec


def test_validate_shape_trace():
    v = validate(_chain_spec())
    assert v.out_shape["conv:a"] == (4, 4, 4)  # pad keeps 8x8, pool 2 halves
    assert v.out_shape["head"] == (3, 1, 1)
    assert v.order[0] == "stem" and v.order[-1] == "head"


def test_validate_rejects_cycle():
    blocks = (
        LayerBlock("stem", BlockKind.STEM, {}),
        LayerBlock("conv:a", BlockKind.CONV, CONV),
        LayerBlock("merge:a", BlockKind.MERGE, {"project": True}),
        LayerBlock("conv:b", BlockKind.CONV, CONV),
        LayerBlock("head", BlockKind.DENSE_HEAD, {"hidden": 0}),
    )
    wires = (("stem", "conv:a"), ("conv:a", "merge:a"), ("conv:b", "merge:a"),
             ("merge:a", "conv:b"), ("merge:a", "head"))
    spec = ArchitectureSpec(blocks, wires, (1, 8, 8), 3, 4, "circuit")
    with pytest.raises(CycleDetected):
        validate(spec)


def test_validate_rejects_unreachable():
    # conv:z taps the stem but feeds nothing, so it can't reach the head
    blocks = _chain_spec().blocks + (LayerBlock("conv:z", BlockKind.CONV, CONV),)
    wires = _chain_spec().wires + (("stem", "conv:z"),)
    spec = ArchitectureSpec(blocks, wires, (1, 8, 8), 3, 4, "circuit")
    with pytest.raises(UnreachableBlock):
        validate(spec)


def test_validate_rejects_spatial_mismatch_at_merge():
    blocks = (
        LayerBlock("stem", BlockKind.STEM, {}),
        LayerBlock("conv:a", BlockKind.CONV, dict(CONV, pool=2)),
        LayerBlock("conv:b", BlockKind.CONV, CONV),
        LayerBlock("merge:m", BlockKind.MERGE, {"project": True}),
        LayerBlock("head", BlockKind.DENSE_HEAD, {"hidden": 0}),
    )
    wires = (("stem", "conv:a"), ("stem", "conv:b"), ("conv:a", "merge:m"),
             ("conv:b", "merge:m"), ("merge:m", "head"))
    spec = ArchitectureSpec(blocks, wires, (1, 8, 8), 3, 4, "circuit")
    with pytest.raises(ShapeMismatchAtMerge):
        validate(spec)


def test_validate_rejects_overpooling():
    blocks = (
        LayerBlock("stem", BlockKind.STEM, {}),
        LayerBlock("conv:a", BlockKind.CONV, {"kernel": 5, "multiplier": 1,
                                              "pad": 0, "pool": 2}),
        LayerBlock("head", BlockKind.DENSE_HEAD, {"hidden": 0}),
    )
    wires = (("stem", "conv:a"), ("conv:a", "head"))
    spec = ArchitectureSpec(blocks, wires, (1, 5, 5), 3, 4, "circuit")
    with pytest.raises(ShapeInferenceFailure):
        validate(spec)


# --- circuit-style synthesis -------------------------------------------------

def test_circuit_arch_wire_isomorphism_on_reference():
    circuit = reference_circuit()
    spec = synthesize_circuit_arch(circuit, 8, (1, 28, 28), 10)
    assert circuit_wires(spec) == frozenset(circuit.edges)
    validate(spec)


def _plumbed(circuit: FunctionalCircuit) -> bool:
    """True when every block of the compiled arch can sit on a stem->head
    path: needs sensory and motor nodes, and no dangling interneurons."""
    if not (circuit.nodes_with_role(Role.MOTOR)
            and circuit.nodes_with_role(Role.SENSORY)):
        return False
    return all(circuit.incoming(n) and circuit.outgoing(n)
               for n in circuit.nodes_with_role(Role.INTER))


def test_circuit_arch_wire_isomorphism_on_random_circuits():
    checked = 0
    for seed in range(40):
        rng = np.random.default_rng(seed)
        conn = random_connectome(rng)
        circuit = extract_circuits(conn, _random_selection(rng, conn),
                                   ExtractionConfig(k=3))
        if not _plumbed(circuit):
            continue
        spec = synthesize_circuit_arch(circuit, 4, (1, 28, 28), 10)
        assert circuit_wires(spec) == frozenset(circuit.edges), seed
        validate(spec)
        checked += 1
    assert checked >= 10  # the corpus must actually exercise the property


def test_circuit_arch_merges_multi_input_nodes():
    circuit = reference_circuit()
    spec = synthesize_circuit_arch(circuit, 8, (1, 28, 28), 10)
    merge_ids = {b.id for b in spec.blocks if b.kind is BlockKind.MERGE}
    multi_in = {n for n in circuit.nodes
                if len(circuit.incoming(n)) >= 2}
    assert {f"merge:{n}" for n in multi_in} <= merge_ids
    # final channel collector keeps every motor pathway un-projected
    out_merge = spec.block("merge:out")
    assert out_merge.params["project"] is False


def test_circuit_arch_rejects_empty():
    empty = FunctionalCircuit({}, {})
    with pytest.raises(EmptyCircuit):
        synthesize_circuit_arch(empty, 8, (1, 28, 28), 10)


# --- randomized style --------------------------------------------------------

def test_randomized_preserves_counts_over_100_seeds():
    circuit = reference_circuit()
    base_spec = synthesize_circuit_arch(circuit, 8, (1, 28, 28), 10)
    base_kinds = sorted(b.kind.value for b in base_spec.blocks
                        if b.kind is BlockKind.CONV)
    for seed in range(100):
        spec = synthesize_randomized_arch(circuit, 8, seed, (1, 28, 28), 10)
        validate(spec)
        kinds = sorted(b.kind.value for b in spec.blocks if b.kind is BlockKind.CONV)
        assert kinds == base_kinds, seed
        assert len(circuit_wires(spec)) == circuit.n_edges, seed
        assert spec.topology_source == f"randomized:{seed}"


def test_randomized_same_seed_is_deterministic():
    circuit = reference_circuit()
    a = synthesize_randomized_arch(circuit, 8, 7, (1, 28, 28), 10)
    b = synthesize_randomized_arch(circuit, 8, 7, (1, 28, 28), 10)
    assert a == b


def test_randomized_seeds_shuffle_topology():
    circuit = reference_circuit()
    wires = {synthesize_randomized_arch(circuit, 8, s, (1, 28, 28), 10).wires
             for s in range(10)}
    assert len(wires) > 1


def test_randomized_free_mode_keeps_counts():
    circuit = reference_circuit()
    spec = synthesize_randomized_arch(circuit, 8, 3, (1, 28, 28), 10,
                                      role_preserving=False)
    validate(spec)
    convs = [b for b in spec.blocks if b.kind is BlockKind.CONV]
    assert len(convs) == circuit.n_nodes
    assert len(circuit_wires(spec)) == circuit.n_edges


def test_randomized_rejects_unsatisfiable_roles():
    # an interneuron with no motor to feed cannot form a legal wiring
    degenerate = FunctionalCircuit({"S1": Role.SENSORY, "I1": Role.INTER},
                                   {("S1", "I1"): 1.0})
    with pytest.raises(ConstraintUnsatisfiable):
        synthesize_randomized_arch(degenerate, 4, 0, (1, 28, 28), 10)


# --- sequential style --------------------------------------------------------

def test_sequential_golden_param_count():
    spec = synthesize_sequential_arch(6, (1, 28, 28), 10)
    v = validate(spec)
    # 5x5 stack: (25*6+6) + (25*6*12+12) + (12*4*4)*120+120 + 120*10+10
    assert param_count(v) == 26338


def test_sequential_shape_trace():
    v = validate(synthesize_sequential_arch(8, (1, 28, 28), 10))
    assert v.out_shape[v.order[-1]] == (10, 1, 1)


def test_sequential_rejects_tiny_input():
    with pytest.raises(ShapeInferenceFailure):
        synthesize_sequential_arch(8, (1, 9, 9), 10)


# --- shared properties -------------------------------------------------------

def test_param_count_strictly_increases_in_c():
    circuit = reference_circuit()
    for make in (
        lambda c: synthesize_circuit_arch(circuit, c, (1, 28, 28), 10),
        lambda c: synthesize_randomized_arch(circuit, c, 0, (1, 28, 28), 10),
        lambda c: synthesize_sequential_arch(c, (1, 28, 28), 10),
    ):
        counts = [param_count(validate(make(c))) for c in (4, 8, 16)]
        assert counts[0] < counts[1] < counts[2], counts
