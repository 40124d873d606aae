"""Weighted nematode connectome: loading, validation, aggregation, neighbors.

The connectome is a directed multigraph over neuron names with two synapse
count maps: chemical counts C[i,j] (directed, C[i,j] != C[j,i] in general)
and electrical counts E[i,j] (gap junctions, stored symmetrically in both
directions).  The effective edge weight is C[i,j] + E[i,j].

File formats (tab-separated, UTF-8, one header line):

    connectome.tsv   pre  post  chem  elec
    roles.tsv        neuron  role        role in {sensory, inter, motor}
    aggregation.tsv  raw  functional

A Connectome instance is immutable after construction; every operation here
is a pure read and safe to call concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import (
    AsymmetricElectrical,
    MalformedRow,
    MixedRoleGroup,
    NegativeCount,
    SelfLoopRejected,
    UnknownNeuron,
    UnknownRole,
    UnmappedNeuron,
)

NeuronId = str


class Role(enum.Enum):
    SENSORY = "sensory"
    INTER = "inter"
    MOTOR = "motor"

    @classmethod
    def parse(cls, text: str) -> "Role":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise UnknownRole(f"unknown role {text!r} (expected sensory/inter/motor)")


class Direction(enum.Enum):
    OUTGOING = "outgoing"   # i is presynaptic: edges i -> x
    INCOMING = "incoming"   # i is postsynaptic: edges x -> i


@dataclass(frozen=True)
class Connectome:
    """Validated synapse-count graph.  elec holds both (i,j) and (j,i)."""

    roles: dict[NeuronId, Role]
    chem: dict[tuple[NeuronId, NeuronId], int]
    elec: dict[tuple[NeuronId, NeuronId], int]

    @property
    def neurons(self) -> frozenset[NeuronId]:
        return frozenset(self.roles)

    def role(self, i: NeuronId) -> Role:
        try:
            return self.roles[i]
        except KeyError:
            raise UnknownNeuron(f"neuron {i!r} not in connectome")


def _read_tsv(path) -> list[tuple[int, list[str]]]:
    """Non-empty, non-comment lines as (1-based line number, columns)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rows.append((line_no, line.split("\t")))
    return rows


def load_roles(path) -> dict[NeuronId, Role]:
    rows = _read_tsv(path)
    if not rows or [c.strip().lower() for c in rows[0][1][:2]] != ["neuron", "role"]:
        raise MalformedRow(path, rows[0][0] if rows else 0, "expected header 'neuron\\trole'")
    roles: dict[NeuronId, Role] = {}
    for line_no, cols in rows[1:]:
        if len(cols) != 2:
            raise MalformedRow(path, line_no, f"expected 2 columns, got {len(cols)}")
        name = cols[0].strip()
        if not name:
            raise MalformedRow(path, line_no, "empty neuron name")
        roles[name] = Role.parse(cols[1])
    return roles


def load_connectome(path, roles_path, *, allow_self_loops: bool = False) -> Connectome:
    """Parse connectome.tsv against roles.tsv and return a validated graph.

    Electrical counts are symmetrized by storing both directions; a pair
    whose rows disagree on the electrical count raises AsymmetricElectrical.
    Neurons appearing in edges but absent from the role table raise
    UnknownRole.  Self-loop rows are rejected unless allow_self_loops.
    """
    role_table = load_roles(roles_path)
    rows = _read_tsv(path)
    if not rows or [c.strip().lower() for c in rows[0][1][:4]] != ["pre", "post", "chem", "elec"]:
        raise MalformedRow(path, rows[0][0] if rows else 0,
                           "expected header 'pre\\tpost\\tchem\\telec'")

    roles: dict[NeuronId, Role] = {}
    chem: dict[tuple[NeuronId, NeuronId], int] = {}
    elec: dict[tuple[NeuronId, NeuronId], int] = {}
    seen_pairs: set[tuple[NeuronId, NeuronId]] = set()

    def _register(name: NeuronId, line_no: int) -> None:
        if name in roles:
            return
        if name not in role_table:
            raise UnknownRole(f"{path}:{line_no}: neuron {name!r} absent from role table")
        roles[name] = role_table[name]

    for line_no, cols in rows[1:]:
        if len(cols) != 4:
            raise MalformedRow(path, line_no, f"expected 4 columns, got {len(cols)}")
        pre, post = cols[0].strip(), cols[1].strip()
        if not pre or not post:
            raise MalformedRow(path, line_no, "empty neuron name")
        try:
            c = int(cols[2])
            e = int(cols[3])
        except ValueError:
            raise MalformedRow(path, line_no, f"non-integer count in {cols[2]!r}/{cols[3]!r}")
        if c < 0 or e < 0:
            raise NegativeCount(path, line_no, f"negative synapse count ({c}, {e})")
        if pre == post and not allow_self_loops:
            raise SelfLoopRejected(path, line_no, f"self-loop on {pre!r} rejected")
        if (pre, post) in seen_pairs:
            raise MalformedRow(path, line_no, f"duplicate row for pair ({pre}, {post})")
        seen_pairs.add((pre, post))
        _register(pre, line_no)
        _register(post, line_no)
        if c > 0:
            chem[(pre, post)] = c
        if e > 0:
            for pair in ((pre, post), (post, pre)):
                if pair in elec and elec[pair] != e:
                    raise AsymmetricElectrical(
                        f"{path}:{line_no}: electrical count for ({pre}, {post}) "
                        f"given as {e} but previously {elec[pair]}")
                elec[pair] = e
    return Connectome(roles=roles, chem=chem, elec=elec)


def save_connectome(conn: Connectome, path, roles_path) -> None:
    """Write the round-trippable TSV pair (sorted rows, \\n line endings)."""
    pairs = sorted(set(conn.chem) | {(i, j) for (i, j) in conn.elec})
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("pre\tpost\tchem\telec\n")
        for i, j in pairs:
            c = conn.chem.get((i, j), 0)
            e = conn.elec.get((i, j), 0)
            if c == 0 and (j, i) in pairs and (j, i) < (i, j):
                continue  # elec-only pair already emitted in the other direction
            fh.write(f"{i}\t{j}\t{c}\t{e}\n")
    with open(roles_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("neuron\trole\n")
        for name in sorted(conn.roles):
            fh.write(f"{name}\t{conn.roles[name].value}\n")


def load_aggregation(path) -> dict[NeuronId, NeuronId]:
    rows = _read_tsv(path)
    if not rows or [c.strip().lower() for c in rows[0][1][:2]] != ["raw", "functional"]:
        raise MalformedRow(path, rows[0][0] if rows else 0, "expected header 'raw\\tfunctional'")
    mapping: dict[NeuronId, NeuronId] = {}
    for line_no, cols in rows[1:]:
        if len(cols) != 2:
            raise MalformedRow(path, line_no, f"expected 2 columns, got {len(cols)}")
        raw, functional = cols[0].strip(), cols[1].strip()
        if not raw or not functional:
            raise MalformedRow(path, line_no, "empty name")
        if raw in mapping and mapping[raw] != functional:
            raise MalformedRow(path, line_no, f"raw neuron {raw!r} mapped twice")
        mapping[raw] = functional
    return mapping


def aggregate_functional(conn: Connectome, mapping: dict[NeuronId, NeuronId]) -> Connectome:
    """Collapse raw neurons into functional groups, summing synapse counts.

    Self-pairs created by a merge are dropped.  Every neuron of conn must
    appear in the map; raw members of one group must share a role.
    """
    missing = sorted(n for n in conn.roles if n not in mapping)
    if missing:
        raise UnmappedNeuron(f"neurons absent from aggregation map: {', '.join(missing)}")

    roles: dict[NeuronId, Role] = {}
    for raw, functional in mapping.items():
        if raw not in conn.roles:
            continue
        role = conn.roles[raw]
        if functional in roles and roles[functional] is not role:
            raise MixedRoleGroup(
                f"group {functional!r} mixes roles {roles[functional].value} and {role.value}")
        roles[functional] = role

    chem: dict[tuple[NeuronId, NeuronId], int] = {}
    for (i, j), count in conn.chem.items():
        fi, fj = mapping[i], mapping[j]
        if fi == fj:
            continue
        chem[(fi, fj)] = chem.get((fi, fj), 0) + count
    elec: dict[tuple[NeuronId, NeuronId], int] = {}
    for (i, j), count in conn.elec.items():
        fi, fj = mapping[i], mapping[j]
        if fi == fj:
            continue
        elec[(fi, fj)] = elec.get((fi, fj), 0) + count
    return Connectome(roles=roles, chem=chem, elec=elec)


def edge_weight(conn: Connectome, i: NeuronId, j: NeuronId) -> int:
    """Total synapse count i -> j: chemical plus electrical, 0 if none stored."""
    for n in (i, j):
        if n not in conn.roles:
            raise UnknownNeuron(f"neuron {n!r} not in connectome")
    return conn.chem.get((i, j), 0) + conn.elec.get((i, j), 0)


def top_k_neighbors(conn: Connectome, i: NeuronId, direction: Direction,
                    k: int) -> list[tuple[NeuronId, int]]:
    """Strongest-k partners of i, weight descending, ties by ascending name.

    OUTGOING ranks targets of i (i presynaptic), INCOMING ranks sources.
    Zero-weight pairs are excluded; fewer than k neighbors may exist.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if i not in conn.roles:
        raise UnknownNeuron(f"neuron {i!r} not in connectome")
    weights: dict[NeuronId, int] = {}
    if direction is Direction.OUTGOING:
        for (a, b), c in conn.chem.items():
            if a == i:
                weights[b] = weights.get(b, 0) + c
        for (a, b), e in conn.elec.items():
            if a == i:
                weights[b] = weights.get(b, 0) + e
    else:
        for (a, b), c in conn.chem.items():
            if b == i:
                weights[a] = weights.get(a, 0) + c
        for (a, b), e in conn.elec.items():
            if b == i:
                weights[a] = weights.get(a, 0) + e
    ranked = sorted(((n, w) for n, w in weights.items() if w > 0),
                    key=lambda nw: (-nw[1], nw[0]))
    return ranked[:k]


def bundled_data_path(name: str) -> Path:
    """Path of a data file shipped with the package (connectome.tsv, roles.tsv,
    aggregation.tsv, cri_table.csv)."""
    return Path(resources.files("circuitforge").joinpath("data", name))
