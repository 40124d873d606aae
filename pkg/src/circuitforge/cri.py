"""Per-neuron correlation indexes from gene fold changes and expression.

The index for a neuron is the sum over differentially expressed genes of
(expression proportion of the gene in that neuron) x |fold change of the
gene|, with fold changes clipped to [-50, 50] beforehand.  Neurons that
express none of the genes score 0, so the index is total over any neuron
set.  Selection of learning-correlated neurons runs either as top-k by
index (default k=11) or as a z-score threshold.

File formats:

    foldchanges.csv   header gene,fold_change
    expression.csv    optional first-line pragma '#units=fraction|percent',
                      then header gene,neuron,proportion
    cri_table.csv     header neuron,role,cri  (sorted by cri descending;
                      the role column is optional on input)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

from .connectome import NeuronId, Role
from .errors import (
    EmptyTable,
    KExceedsPopulation,
    MalformedRow,
    MissingFoldChange,
    NonFiniteValue,
    UnknownRole,
)

GeneId = str

FOLD_CHANGE_LIMIT = 50.0


@dataclass(frozen=True)
class FoldChangeTable:
    """Gene -> fold change (sign encodes up/down regulation)."""
    values: dict[GeneId, float]


@dataclass(frozen=True)
class ExpressionMatrix:
    """(gene, neuron) -> expression proportion in [0, 1]; missing means 0."""
    w: dict[tuple[GeneId, NeuronId], float]

    @property
    def genes(self) -> frozenset[GeneId]:
        return frozenset(g for g, _ in self.w)

    @property
    def neurons(self) -> frozenset[NeuronId]:
        return frozenset(n for _, n in self.w)


@dataclass(frozen=True)
class CriTable:
    values: dict[NeuronId, float]
    n_genes: int


@dataclass(frozen=True)
class TopK:
    k: int = 11


@dataclass(frozen=True)
class ZScore:
    threshold: float = 1.0


SelectionPolicy = TopK | ZScore


@dataclass(frozen=True)
class SelectedNeurons:
    sensory: frozenset[NeuronId]
    inter: frozenset[NeuronId]
    motor: frozenset[NeuronId]

    @property
    def all(self) -> frozenset[NeuronId]:
        return self.sensory | self.inter | self.motor

    @property
    def counts(self) -> tuple[int, int, int]:
        return (len(self.sensory), len(self.inter), len(self.motor))


def clip_fold_changes(raw: FoldChangeTable) -> FoldChangeTable:
    """Clamp every fold change into [-50, 50]; non-finite input is an error."""
    clipped: dict[GeneId, float] = {}
    for gene, m in raw.values.items():
        if not math.isfinite(m):
            raise NonFiniteValue(f"fold change for gene {gene!r} is {m!r}")
        clipped[gene] = min(max(m, -FOLD_CHANGE_LIMIT), FOLD_CHANGE_LIMIT)
    return FoldChangeTable(values=clipped)


def compute_cri(w: ExpressionMatrix, m: FoldChangeTable,
                neurons: set[NeuronId] | frozenset[NeuronId]) -> CriTable:
    """Sum expression-weighted absolute fold changes for each requested neuron.

    Fold changes are clipped to [-50, 50] first (a no-op on already-clipped
    tables).  Sequential accumulation in gene order sorted by name keeps the
    result bit-identical across runs.
    """
    m = clip_fold_changes(m)
    missing = sorted(w.genes - set(m.values))
    if missing:
        raise MissingFoldChange(f"genes without fold changes: {', '.join(missing)}")
    per_neuron: dict[NeuronId, list[tuple[GeneId, float]]] = {n: [] for n in neurons}
    for (gene, neuron), prop in w.w.items():
        if neuron in per_neuron:
            per_neuron[neuron].append((gene, prop))
    values: dict[NeuronId, float] = {}
    for neuron in sorted(per_neuron):
        total = 0.0
        for gene, prop in sorted(per_neuron[neuron]):
            total += prop * abs(m.values[gene])
        values[neuron] = total
    return CriTable(values=values, n_genes=len(m.values))


def select_correlated(cri: CriTable, roles: dict[NeuronId, Role],
                      policy: SelectionPolicy = TopK()) -> SelectedNeurons:
    """Pick learning-correlated neurons and partition them by role.

    TopK keeps the k highest-index neurons (ties broken by ascending name);
    ZScore keeps neurons whose index lies more than `threshold` population
    standard deviations above the mean.
    """
    if not cri.values:
        raise EmptyTable("correlation-index table is empty")
    for neuron in cri.values:
        if neuron not in roles:
            raise UnknownRole(f"neuron {neuron!r} has no role assignment")

    if isinstance(policy, TopK):
        if policy.k < 1:
            raise ValueError(f"k must be >= 1, got {policy.k}")
        if policy.k > len(cri.values):
            raise KExceedsPopulation(
                f"k={policy.k} exceeds population of {len(cri.values)} neurons")
        ranked = sorted(cri.values.items(), key=lambda nv: (-nv[1], nv[0]))
        chosen = [n for n, _ in ranked[:policy.k]]
    else:
        n = len(cri.values)
        mean = sum(cri.values.values()) / n
        var = sum((v - mean) ** 2 for v in cri.values.values()) / n
        std = math.sqrt(var)
        if std == 0.0:
            chosen = []
        else:
            chosen = [name for name, v in cri.values.items()
                      if (v - mean) / std > policy.threshold]

    by_role = {Role.SENSORY: set(), Role.INTER: set(), Role.MOTOR: set()}
    for neuron in chosen:
        by_role[roles[neuron]].add(neuron)
    return SelectedNeurons(sensory=frozenset(by_role[Role.SENSORY]),
                           inter=frozenset(by_role[Role.INTER]),
                           motor=frozenset(by_role[Role.MOTOR]))


def apply_min_expression(w: ExpressionMatrix, min_fraction: float,
                         *, renormalize: bool = False) -> ExpressionMatrix:
    """Drop expression entries below min_fraction (a display-style filter,
    off by default in the pipeline).  With renormalize, surviving entries of
    each gene are rescaled to sum to 1."""
    kept = {key: v for key, v in w.w.items() if v >= min_fraction}
    if renormalize:
        sums: dict[GeneId, float] = {}
        for (gene, _), v in kept.items():
            sums[gene] = sums.get(gene, 0.0) + v
        kept = {(gene, neuron): (v / sums[gene] if sums[gene] > 0 else 0.0)
                for (gene, neuron), v in kept.items()}
    return ExpressionMatrix(w=kept)


# --- file io ---

def load_fold_changes(path) -> FoldChangeTable:
    values: dict[GeneId, float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["gene", "fold_change"]:
            raise MalformedRow(path, 1, "expected header 'gene,fold_change'")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise MalformedRow(path, line_no, f"expected 2 columns, got {len(row)}")
            try:
                values[row[0].strip()] = float(row[1])
            except ValueError:
                raise MalformedRow(path, line_no, f"bad fold change {row[1]!r}")
    return FoldChangeTable(values=values)


def load_expression(path) -> ExpressionMatrix:
    """Read expression.csv; a '#units=percent' pragma divides values by 100."""
    scale = 1.0
    w: dict[tuple[GeneId, NeuronId], float] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        if first.startswith("#"):
            tag = first.lstrip("#").strip().lower()
            if tag == "units=percent":
                scale = 0.01
            elif tag != "units=fraction":
                raise MalformedRow(path, 1, f"unknown pragma {first!r}")
            header_line = fh.readline()
        else:
            header_line = first + "\n"
        header = [c.strip().lower() for c in header_line.strip().split(",")]
        if header[:3] != ["gene", "neuron", "proportion"]:
            raise MalformedRow(path, 1, "expected header 'gene,neuron,proportion'")
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRow(path, line_no, f"expected 3 columns, got {len(row)}")
            try:
                value = float(row[2]) * scale
            except ValueError:
                raise MalformedRow(path, line_no, f"bad proportion {row[2]!r}")
            if not 0.0 <= value <= 1.0:
                raise MalformedRow(path, line_no,
                                   f"proportion {value} outside [0, 1] after unit scaling")
            w[(row[0].strip(), row[1].strip())] = value
    return ExpressionMatrix(w=w)


def write_cri_table(cri: CriTable, roles: dict[NeuronId, Role], path) -> None:
    ranked = sorted(cri.values.items(), key=lambda nv: (-nv[1], nv[0]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("neuron,role,cri\n")
        for neuron, value in ranked:
            role = roles.get(neuron)
            if role is None:
                raise UnknownRole(f"neuron {neuron!r} has no role assignment")
            fh.write(f"{neuron},{role.value},{value:.6g}\n")


def load_cri_table(path) -> tuple[CriTable, dict[NeuronId, Role]]:
    """Read neuron,[role,]cri rows; returns the table and any roles present."""
    values: dict[NeuronId, float] = {}
    roles: dict[NeuronId, Role] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise EmptyTable(f"{path} is empty")
        cols = [c.strip().lower() for c in header]
        if cols == ["neuron", "role", "cri"]:
            has_role = True
        elif cols == ["neuron", "cri"]:
            has_role = False
        else:
            raise MalformedRow(path, 1, "expected header 'neuron,role,cri' or 'neuron,cri'")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            want = 3 if has_role else 2
            if len(row) != want:
                raise MalformedRow(path, line_no, f"expected {want} columns, got {len(row)}")
            neuron = row[0].strip()
            try:
                values[neuron] = float(row[-1])
            except ValueError:
                raise MalformedRow(path, line_no, f"bad index value {row[-1]!r}")
            if has_role:
                roles[neuron] = Role.parse(row[1])
    return CriTable(values=values, n_genes=0), roles
