from __future__ import annotations

import numpy as np

from circuitforge.connectome import Role, bundled_data_path
from circuitforge.extraction import sparsity, validate_circuit
from circuitforge.reference import (
    load_functional_connectome,
    load_reference_connectome,
    load_reference_cri,
    reference_circuit,
    reference_selection,
)

EXPECTED_SELECTION = {"ADL", "ASK", "ASI", "AWA", "AFD", "PHB",
                      "CAN", "AWC", "ASJ", "PVN", "ASER"}


def test_bundled_files_present():
    for name in ("connectome.tsv", "roles.tsv", "aggregation.tsv", "cri_table.csv"):
        assert bundled_data_path(name).is_file()


def test_raw_connectome_shape():
    raw = load_reference_connectome()
    assert len(raw.neurons) == 296
    assert all(raw.roles[n] in Role for n in raw.neurons)


def test_functional_connectome_shape():
    conn = load_functional_connectome()
    assert len(conn.neurons) == 121
    by_role = {r: sum(1 for n in conn.neurons if conn.roles[n] == r) for r in Role}
    assert by_role[Role.SENSORY] == 36
    assert by_role[Role.INTER] == 53
    assert by_role[Role.MOTOR] == 32


def test_aggregation_preserves_chemical_mass():
    raw = load_reference_connectome()
    conn = load_functional_connectome()
    # merging neurons can only drop within-group synapses, which the
    # bundled chemical table does not contain
    raw_total = sum(raw.chem.values())
    agg_total = sum(conn.chem.values())
    assert agg_total == raw_total


def test_cri_table_matches_functional_population():
    cri, roles = load_reference_cri()
    conn = load_functional_connectome()
    assert set(cri.values) == set(conn.neurons)
    assert roles == conn.roles
    assert all(np.isfinite(v) for v in cri.values.values())


def test_selection_is_the_published_eleven():
    sel = reference_selection()
    assert set(sel.all) == EXPECTED_SELECTION
    assert len(sel.sensory) == 9
    assert set(sel.inter) == {"CAN"}
    assert set(sel.motor) == {"PVN"}


def test_reference_circuit_shape_and_sparsity():
    circuit = reference_circuit()
    validate_circuit(circuit)
    assert circuit.role_counts() == (10, 5, 7)
    assert circuit.n_nodes == 22
    assert circuit.n_edges == 21
    assert abs(sparsity(circuit) - (1.0 - 21.0 / 462.0)) < 1e-12
