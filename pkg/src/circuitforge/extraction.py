"""Functional-circuit extraction by following strongest connections.

Starting from the learning-correlated neurons, three role-specific
extension rules carve a sparse tripartite circuit out of the full
connectome:

  * a sensory start keeps its k strongest outgoing connections onto
    interneurons or motor neurons, then each kept interneuron keeps its
    k strongest outgoing connections onto motor neurons;
  * an interneuron start keeps sensory sources among its k strongest
    incoming connections and motor targets among its k strongest
    outgoing ones;
  * a motor start keeps sensory and interneuron sources among its k
    strongest incoming connections, then each kept interneuron keeps
    sensory sources among its own k strongest incoming connections.

Ranking is by combined chemical plus electrical weight; ties break by
ascending neuron name so extraction is deterministic.  Neighbors of the
wrong role inside a top-k list are dropped, not replaced, so a start can
retain fewer than k edges.  The union over all starts is the functional
circuit.  Edges between two interneurons are never retained.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .connectome import Connectome, Direction, NeuronId, Role, top_k_neighbors, _read_tsv
from .errors import (
    DegenerateCircuit,
    InvalidCircuit,
    MalformedRow,
    RoleMismatch,
)

LEGAL_EDGES = {
    (Role.SENSORY, Role.INTER),
    (Role.SENSORY, Role.MOTOR),
    (Role.INTER, Role.MOTOR),
}


@dataclass(frozen=True)
class ExtractionConfig:
    """k = number of strongest connections followed at every hop."""
    k: int = 3

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class FunctionalCircuit:
    """Sparse tripartite subgraph: sensory -> inter -> motor.

    edges maps (pre, post) to the retained connection weight.  Role
    legality makes the graph acyclic by construction.
    """
    roles: dict[NeuronId, Role]
    edges: dict[tuple[NeuronId, NeuronId], float]

    @property
    def nodes(self) -> frozenset[NeuronId]:
        return frozenset(self.roles)

    @property
    def n_nodes(self) -> int:
        return len(self.roles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def role_counts(self) -> tuple[int, int, int]:
        """(sensory, inter, motor) node counts."""
        counts = {Role.SENSORY: 0, Role.INTER: 0, Role.MOTOR: 0}
        for role in self.roles.values():
            counts[role] += 1
        return (counts[Role.SENSORY], counts[Role.INTER], counts[Role.MOTOR])

    def nodes_with_role(self, role: Role) -> list[NeuronId]:
        return sorted(n for n, r in self.roles.items() if r is role)

    def outgoing(self, node: NeuronId) -> list[tuple[NeuronId, float]]:
        return sorted((j, w) for (i, j), w in self.edges.items() if i == node)

    def incoming(self, node: NeuronId) -> list[tuple[NeuronId, float]]:
        return sorted((i, w) for (i, j), w in self.edges.items() if j == node)

    def as_connectome(self) -> Connectome:
        """Re-interpret the circuit as a connectome (weights become
        chemical counts) so extraction rules can be applied again."""
        chem = {pair: int(round(w)) for pair, w in self.edges.items()}
        return Connectome(roles=dict(self.roles), chem=chem, elec={})


class _Builder:
    """Accumulates retained edges; nodes exist only via retained edges."""

    def __init__(self, conn: Connectome):
        self.conn = conn
        self.roles: dict[NeuronId, Role] = {}
        self.edges: dict[tuple[NeuronId, NeuronId], float] = {}

    def keep(self, pre: NeuronId, post: NeuronId, weight: float) -> None:
        self.roles[pre] = self.conn.role(pre)
        self.roles[post] = self.conn.role(post)
        self.edges[(pre, post)] = weight

    def circuit(self) -> FunctionalCircuit:
        return FunctionalCircuit(roles=self.roles, edges=self.edges)


def _require_role(conn: Connectome, neuron: NeuronId, want: Role) -> None:
    got = conn.role(neuron)
    if got is not want:
        raise RoleMismatch(f"{neuron} has role {got.value}, expected {want.value}")


def extend_from_sensory(conn: Connectome, starts: set[NeuronId] | frozenset[NeuronId],
                        cfg: ExtractionConfig = ExtractionConfig()) -> FunctionalCircuit:
    """First scenario: follow strongest outgoing connections of each
    sensory start, then the strongest outgoing connections of every
    interneuron reached that way."""
    for s in starts:
        _require_role(conn, s, Role.SENSORY)
    b = _Builder(conn)
    reached_inter: set[NeuronId] = set()
    for s in sorted(starts):
        for j, w in top_k_neighbors(conn, s, Direction.OUTGOING, cfg.k):
            role = conn.role(j)
            if role is Role.INTER:
                b.keep(s, j, w)
                reached_inter.add(j)
            elif role is Role.MOTOR:
                b.keep(s, j, w)
    for i in sorted(reached_inter):
        for j, w in top_k_neighbors(conn, i, Direction.OUTGOING, cfg.k):
            if conn.role(j) is Role.MOTOR:
                b.keep(i, j, w)
    return b.circuit()


def extend_from_interneuron(conn: Connectome, inter: NeuronId,
                            cfg: ExtractionConfig = ExtractionConfig()) -> FunctionalCircuit:
    """Second scenario: sensory sources feeding the interneuron and motor
    targets fed by it, both restricted to its strongest connections."""
    _require_role(conn, inter, Role.INTER)
    b = _Builder(conn)
    for j, w in top_k_neighbors(conn, inter, Direction.INCOMING, cfg.k):
        if conn.role(j) is Role.SENSORY:
            b.keep(j, inter, w)
    for j, w in top_k_neighbors(conn, inter, Direction.OUTGOING, cfg.k):
        if conn.role(j) is Role.MOTOR:
            b.keep(inter, j, w)
    return b.circuit()


def extend_from_motor(conn: Connectome, motor: NeuronId,
                      cfg: ExtractionConfig = ExtractionConfig()) -> FunctionalCircuit:
    """Third scenario: walk backwards from a motor neuron through its
    strongest sources, and one hop further back from any interneuron."""
    _require_role(conn, motor, Role.MOTOR)
    b = _Builder(conn)
    reached_inter: set[NeuronId] = set()
    for j, w in top_k_neighbors(conn, motor, Direction.INCOMING, cfg.k):
        role = conn.role(j)
        if role is Role.SENSORY:
            b.keep(j, motor, w)
        elif role is Role.INTER:
            b.keep(j, motor, w)
            reached_inter.add(j)
    for i in sorted(reached_inter):
        for j, w in top_k_neighbors(conn, i, Direction.INCOMING, cfg.k):
            if conn.role(j) is Role.SENSORY:
                b.keep(j, i, w)
    return b.circuit()


def merge_circuits(*parts: FunctionalCircuit) -> FunctionalCircuit:
    """Union of partial circuits; a shared edge is stored once."""
    roles: dict[NeuronId, Role] = {}
    edges: dict[tuple[NeuronId, NeuronId], float] = {}
    for part in parts:
        for n, r in part.roles.items():
            if roles.get(n, r) is not r:
                raise InvalidCircuit(f"{n} has conflicting roles across partial circuits")
            roles[n] = r
        edges.update(part.edges)
    return FunctionalCircuit(roles=roles, edges=edges)


def extract_circuits(conn: Connectome, sel, cfg: ExtractionConfig = ExtractionConfig()
                     ) -> FunctionalCircuit:
    """Run all three scenarios over a selection and merge the results.

    sel carries frozenset fields .sensory / .inter / .motor (see
    cri.SelectedNeurons).  Scenario order cannot matter: the union is a
    plain set merge.
    """
    if not (sel.sensory or sel.inter or sel.motor):
        raise ValueError("selection is empty")
    parts = [extend_from_sensory(conn, sel.sensory, cfg)] if sel.sensory else []
    for inter in sorted(sel.inter):
        parts.append(extend_from_interneuron(conn, inter, cfg))
    for motor in sorted(sel.motor):
        parts.append(extend_from_motor(conn, motor, cfg))
    circuit = merge_circuits(*parts)
    validate_circuit(circuit)
    return circuit


def validate_circuit(circuit: FunctionalCircuit) -> None:
    """Check the tripartite invariants; raises on the first violation."""
    for (i, j), w in circuit.edges.items():
        if i not in circuit.roles or j not in circuit.roles:
            raise InvalidCircuit(f"edge ({i}, {j}) references a node without a role")
        if w <= 0:
            raise InvalidCircuit(f"edge ({i}, {j}) has non-positive weight {w}")
        pair = (circuit.roles[i], circuit.roles[j])
        if pair not in LEGAL_EDGES:
            raise RoleMismatch(
                f"edge {i}->{j} is {pair[0].value}->{pair[1].value}, which is not allowed")
    touched = {n for edge in circuit.edges for n in edge}
    isolated = sorted(circuit.nodes - touched)
    if isolated:
        raise InvalidCircuit(f"isolated nodes: {', '.join(isolated)}")


def sparsity(circuit: FunctionalCircuit) -> float:
    """1 - |edges| / (n * (n - 1)), against the complete directed graph."""
    n = circuit.n_nodes
    if n < 2:
        raise DegenerateCircuit(f"sparsity needs >= 2 nodes, circuit has {n}")
    return 1.0 - circuit.n_edges / (n * (n - 1))


# --- file io ---

def export_circuit(circuit: FunctionalCircuit, out_dir) -> dict[str, Path]:
    """Write circuit.tsv, circuit_roles.tsv and circuit.dot into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "edges": out / "circuit.tsv",
        "roles": out / "circuit_roles.tsv",
        "dot": out / "circuit.dot",
    }
    with open(paths["edges"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pre\tpost\tweight\n")
        for (i, j), w in sorted(circuit.edges.items()):
            fh.write(f"{i}\t{j}\t{w:g}\n")
    with open(paths["roles"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write("neuron\trole\n")
        for n in sorted(circuit.roles):
            fh.write(f"{n}\t{circuit.roles[n].value}\n")
    with open(paths["dot"], "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_to_dot(circuit))
    return paths


_DOT_SHAPE = {Role.SENSORY: "ellipse", Role.INTER: "box", Role.MOTOR: "diamond"}


def _to_dot(circuit: FunctionalCircuit) -> str:
    lines = ["digraph circuit {", "  rankdir=LR;"]
    for role in (Role.SENSORY, Role.INTER, Role.MOTOR):
        members = circuit.nodes_with_role(role)
        if not members:
            continue
        lines.append(f"  {{ rank=same; // {role.value}")
        for n in members:
            lines.append(f'    "{n}" [shape={_DOT_SHAPE[role]}];')
        lines.append("  }")
    for (i, j), w in sorted(circuit.edges.items()):
        lines.append(f'  "{i}" -> "{j}" [label="{w:g}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_circuit(edges_path, roles_path) -> FunctionalCircuit:
    """Round-trip reader for export_circuit output; validates on load."""
    roles: dict[NeuronId, Role] = {}
    for line_no, cols in _read_tsv(roles_path):
        if cols == ["neuron", "role"]:
            continue
        if len(cols) != 2:
            raise MalformedRow(roles_path, line_no, f"expected 2 columns, got {len(cols)}")
        roles[cols[0]] = Role.parse(cols[1])
    edges: dict[tuple[NeuronId, NeuronId], float] = {}
    for line_no, cols in _read_tsv(edges_path):
        if cols == ["pre", "post", "weight"]:
            continue
        if len(cols) != 3:
            raise MalformedRow(edges_path, line_no, f"expected 3 columns, got {len(cols)}")
        try:
            weight = float(cols[2])
        except ValueError:
            raise MalformedRow(edges_path, line_no, f"bad weight {cols[2]!r}")
        edges[(cols[0], cols[1])] = weight
    circuit = FunctionalCircuit(roles=roles, edges=edges)
    validate_circuit(circuit)
    return circuit
