"""CPPN genomes: weighted DAGs that paint materials onto the voxel grid.

Four inputs (x, y, distance to centre, bias) feed hidden nodes with sine,
abs, square or sqrt activations; nine identity outputs score each material.
The argmax output decides the voxel.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import MorphocompError
from .morphology import MaterialKind

VALUE_CLAMP = 4.0
INPUT_LABELS = ("x_norm", "y_norm", "d_center", "bias")
N_INPUTS = len(INPUT_LABELS)
N_OUTPUTS = len(MaterialKind)
FIRST_HIDDEN_ID = N_INPUTS + N_OUTPUTS

# operator name -> probability; order is the sampling order
MUTATION_PROBS = {
    "add_node": 0.15,
    "remove_node": 0.10,
    "add_edge": 0.25,
    "remove_edge": 0.10,
    "change_activation": 0.10,
    "perturb_weights": 0.30,
}
WEIGHT_SIGMA = 0.5
PERTURB_PROB = 0.5


class GenomeError(MorphocompError):
    pass


class Activation(str, Enum):
    SINE = "sine"
    ABS = "abs"
    SQUARE = "square"
    SQRT = "sqrt"

    def __call__(self, v: np.ndarray) -> np.ndarray:
        if self is Activation.SINE:
            return np.sin(v)
        if self is Activation.ABS:
            return np.abs(v)
        if self is Activation.SQUARE:
            return v * v
        return np.sqrt(np.abs(v))


ACTIVATIONS = tuple(Activation)


class NodeKind(str, Enum):
    INPUT = "input"
    HIDDEN = "hidden"
    OUTPUT = "output"


class CppnNode(NamedTuple):
    id: int
    kind: NodeKind
    activation: Activation | None   # None means identity
    label: str | int | None = None


class CppnEdge(NamedTuple):
    src: int
    dst: int
    weight: float


def _io_nodes() -> tuple[CppnNode, ...]:
    nodes = [CppnNode(i, NodeKind.INPUT, None, lab) for i, lab in enumerate(INPUT_LABELS)]
    nodes += [CppnNode(N_INPUTS + k, NodeKind.OUTPUT, None, k) for k in range(N_OUTPUTS)]
    return tuple(nodes)


def _topo_order(node_ids: Sequence[int], edges: Sequence[CppnEdge]) -> list[int] | None:
    """Kahn's algorithm, lowest id first; None if the graph has a cycle."""
    indeg = {n: 0 for n in node_ids}
    succ: dict[int, list[int]] = {n: [] for n in node_ids}
    for e in edges:
        indeg[e.dst] += 1
        succ[e.src].append(e.dst)
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    return order if len(order) == len(indeg) else None


@dataclass(frozen=True)
class Genome:
    nodes: tuple[CppnNode, ...]
    edges: tuple[CppnEdge, ...]

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise GenomeError("duplicate node ids")
        kinds = {n.id: n.kind for n in self.nodes}
        if sum(k is NodeKind.INPUT for k in kinds.values()) != N_INPUTS:
            raise GenomeError(f"genome needs exactly {N_INPUTS} inputs")
        if sum(k is NodeKind.OUTPUT for k in kinds.values()) != N_OUTPUTS:
            raise GenomeError(f"genome needs exactly {N_OUTPUTS} outputs")
        seen = set()
        for e in self.edges:
            if e.src not in kinds or e.dst not in kinds:
                raise GenomeError(f"edge {e.src}->{e.dst} references a missing node")
            if kinds[e.dst] is NodeKind.INPUT or kinds[e.src] is NodeKind.OUTPUT:
                raise GenomeError(f"edge {e.src}->{e.dst} violates input/output direction")
            if (e.src, e.dst) in seen:
                raise GenomeError(f"duplicate edge {e.src}->{e.dst}")
            seen.add((e.src, e.dst))
        order = _topo_order(ids, self.edges)
        if order is None:
            raise GenomeError("genome graph has a cycle")
        object.__setattr__(self, "_order", tuple(order))

    @property
    def hidden(self) -> list[CppnNode]:
        return [n for n in self.nodes if n.kind is NodeKind.HIDDEN]

    @property
    def order(self) -> tuple[int, ...]:
        return self._order  # type: ignore[attr-defined]

    def node(self, nid: int) -> CppnNode:
        for n in self.nodes:
            if n.id == nid:
                return n
        raise KeyError(nid)

    def structural_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]

    # -- evaluation ---------------------------------------------------------

    def eval_batch(self, x: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
        """Evaluate many query points at once; returns shape (N, 9)."""
        x = np.asarray(x, dtype=np.float64)
        values: dict[int, np.ndarray] = {
            0: x, 1: np.asarray(y, dtype=np.float64), 2: np.asarray(d, dtype=np.float64),
            3: np.ones_like(x),
        }
        incoming: dict[int, list[CppnEdge]] = {}
        for e in self.edges:
            incoming.setdefault(e.dst, []).append(e)
        nodes = {n.id: n for n in self.nodes}
        for nid in self.order:
            node = nodes[nid]
            if node.kind is NodeKind.INPUT:
                continue
            total = np.zeros_like(x)
            for e in incoming.get(nid, ()):
                total = total + e.weight * values[e.src]
            if node.activation is not None:
                total = node.activation(total)
            values[nid] = np.clip(total, -VALUE_CLAMP, VALUE_CLAMP)
        return np.stack([values[N_INPUTS + k] for k in range(N_OUTPUTS)], axis=-1)

    def eval(self, x_norm: float, y_norm: float, d_center: float) -> np.ndarray:
        return self.eval_batch(np.array([x_norm]), np.array([y_norm]), np.array([d_center]))[0]

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "kind": n.kind.value,
                       "activation": n.activation.value if n.activation else "identity",
                       "label": n.label} for n in self.nodes],
            "edges": [{"src": e.src, "dst": e.dst, "weight": e.weight} for e in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Genome":
        try:
            nodes = tuple(
                CppnNode(int(n["id"]), NodeKind(n["kind"]),
                         None if n["activation"] == "identity" else Activation(n["activation"]),
                         n.get("label"))
                for n in d["nodes"])
            edges = tuple(CppnEdge(int(e["src"]), int(e["dst"]), float(e["weight"])) for e in d["edges"])
        except (KeyError, ValueError, TypeError) as e:
            raise GenomeError(f"malformed genome: {e}") from None
        return cls(nodes, edges)

    @classmethod
    def from_json(cls, text: str) -> "Genome":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Genome":
        return cls.from_json(Path(path).read_text())


def new_minimal(rng: np.random.Generator, edge_prob: float = 0.5) -> Genome:
    """Inputs wired straight to outputs, each edge present with ``edge_prob``."""
    edges = []
    for i in range(N_INPUTS):
        for k in range(N_OUTPUTS):
            present = rng.random() < edge_prob
            w = rng.uniform(-1.0, 1.0)
            if present:
                edges.append(CppnEdge(i, N_INPUTS + k, float(w)))
    return Genome(_io_nodes(), tuple(edges))


def query_inputs(row: int, col: int, height: int, width: int) -> tuple[float, float, float]:
    x = 2.0 * col / (width - 1) - 1.0 if width > 1 else 0.0
    y = 2.0 * row / (height - 1) - 1.0 if height > 1 else 0.0
    return x, y, math.hypot(x, y) / math.sqrt(2.0)


def query_material(genome: Genome, row: int, col: int, height: int, width: int) -> MaterialKind:
    out = genome.eval(*query_inputs(row, col, height, width))
    return MaterialKind(int(np.argmax(out)))   # argmax picks the lowest index on ties


def develop(genome: Genome, height: int, width: int) -> np.ndarray:
    """Material index grid of shape (height, width), queried row-major."""
    pts = [query_inputs(r, c, height, width) for r in range(height) for c in range(width)]
    x, y, d = (np.array(v) for v in zip(*pts))
    out = genome.eval_batch(x, y, d)
    return np.argmax(out, axis=1).reshape(height, width)


# -- mutation -------------------------------------------------------------

def _reaches(edges: Sequence[CppnEdge], start: int, goal: int) -> bool:
    succ: dict[int, list[int]] = {}
    for e in edges:
        succ.setdefault(e.src, []).append(e.dst)
    stack, seen = [start], {start}
    while stack:
        n = stack.pop()
        if n == goal:
            return True
        for m in succ.get(n, ()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return False


def _add_node(g: Genome, rng: np.random.Generator) -> Genome | None:
    if not g.edges:
        return None
    idx = int(rng.integers(len(g.edges)))
    old = g.edges[idx]
    new_id = max(n.id for n in g.nodes) + 1
    act = ACTIVATIONS[int(rng.integers(len(ACTIVATIONS)))]
    edges = list(g.edges[:idx]) + list(g.edges[idx + 1:])
    edges += [CppnEdge(old.src, new_id, 1.0), CppnEdge(new_id, old.dst, old.weight)]
    return Genome(g.nodes + (CppnNode(new_id, NodeKind.HIDDEN, act),), tuple(edges))


def _remove_node(g: Genome, rng: np.random.Generator) -> Genome | None:
    hidden = g.hidden
    if not hidden:
        return None
    victim = hidden[int(rng.integers(len(hidden)))].id
    return Genome(tuple(n for n in g.nodes if n.id != victim),
                  tuple(e for e in g.edges if victim not in (e.src, e.dst)))


def _add_edge(g: Genome, rng: np.random.Generator) -> Genome | None:
    existing = {(e.src, e.dst) for e in g.edges}
    srcs = [n.id for n in g.nodes if n.kind is not NodeKind.OUTPUT]
    dsts = [n.id for n in g.nodes if n.kind is not NodeKind.INPUT]
    candidates = [(s, d) for s in srcs for d in dsts
                  if s != d and (s, d) not in existing and not _reaches(g.edges, d, s)]
    if not candidates:
        return None
    s, d = candidates[int(rng.integers(len(candidates)))]
    return Genome(g.nodes, g.edges + (CppnEdge(s, d, float(rng.uniform(-1.0, 1.0))),))


def _remove_edge(g: Genome, rng: np.random.Generator) -> Genome | None:
    if not g.edges:
        return None
    idx = int(rng.integers(len(g.edges)))
    return Genome(g.nodes, g.edges[:idx] + g.edges[idx + 1:])


def _change_activation(g: Genome, rng: np.random.Generator) -> Genome | None:
    hidden = g.hidden
    if not hidden:
        return None
    target = hidden[int(rng.integers(len(hidden)))]
    choices = [a for a in ACTIVATIONS if a is not target.activation]
    act = choices[int(rng.integers(len(choices)))]
    nodes = tuple(n._replace(activation=act) if n.id == target.id else n for n in g.nodes)
    return Genome(nodes, g.edges)


def _perturb_weights(g: Genome, rng: np.random.Generator) -> Genome:
    edges = []
    for e in g.edges:
        if rng.random() < PERTURB_PROB:
            e = e._replace(weight=float(e.weight + rng.normal(0.0, WEIGHT_SIGMA)))
        edges.append(e)
    return Genome(g.nodes, tuple(edges))


OPERATORS = {
    "add_node": _add_node,
    "remove_node": _remove_node,
    "add_edge": _add_edge,
    "remove_edge": _remove_edge,
    "change_activation": _change_activation,
    "perturb_weights": _perturb_weights,
}


def sample_operator(rng: np.random.Generator) -> str:
    names = list(MUTATION_PROBS)
    p = np.array([MUTATION_PROBS[n] for n in names])
    return names[int(rng.choice(len(names), p=p / p.sum()))]


def mutate(genome: Genome, rng: np.random.Generator, operator: str | None = None) -> Genome:
    return apply_mutation(genome, rng, operator)[0]


def apply_mutation(genome: Genome, rng: np.random.Generator,
                   operator: str | None = None) -> tuple[Genome, str]:
    """Apply one mutation; returns the child and the operator actually used.

    An inapplicable operator falls back to weight perturbation.
    """
    op = operator or sample_operator(rng)
    child = OPERATORS[op](genome, rng)
    if child is None:
        op = "perturb_weights"
        child = _perturb_weights(genome, rng)
    return child, op
