"""In-memory code property graph.

All layers (AST, CFG, CDG, DDG, CALL, ARGUMENT, REF) share one node table.
Node ids are dense integers starting at 1 and are never reused. Adjacency is
indexed per edge kind in both directions; neighbour lists are returned in
ascending id order so traversals are reproducible.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator


class NodeKind(str, Enum):
    Method = "Method"
    ParameterIn = "ParameterIn"
    ParameterOut = "ParameterOut"
    MethodReturn = "MethodReturn"
    Call = "Call"
    Identifier = "Identifier"
    Literal = "Literal"
    Return = "Return"
    ControlStructure = "ControlStructure"
    Block = "Block"
    ExternalMethodStub = "ExternalMethodStub"


class EdgeKind(str, Enum):
    AST = "AST"
    CFG = "CFG"
    CDG = "CDG"
    DDG = "DDG"
    CALL = "CALL"
    ARGUMENT = "ARGUMENT"
    REF = "REF"


METHOD_KINDS = frozenset({NodeKind.Method, NodeKind.ExternalMethodStub})


class CpgError(Exception):
    """Structural violation while building or querying a graph."""


class IngestError(CpgError):
    """A serialized graph document could not be loaded."""


@dataclass
class CpgNode:
    id: int
    kind: NodeKind
    code: str = ""
    name: str = ""
    full_name: str = ""
    argument_index: int = -1
    line: int = 0
    method_id: int = 0


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: EdgeKind
    variable: str | None = None


class Cpg:
    def __init__(self) -> None:
        self.nodes: dict[int, CpgNode] = {}
        self.edges: list[Edge] = []
        self.method_index: dict[str, int] = {}
        self._edge_set: set[Edge] = set()
        self._out: dict[EdgeKind, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
        self._in: dict[EdgeKind, dict[int, set[int]]] = defaultdict(lambda: defaultdict(set))
        self._next_id = 1

    def __len__(self) -> int:
        return len(self.nodes)

    # -- construction -------------------------------------------------------

    def add_node(self, kind: NodeKind, *, id: int | None = None, **attrs) -> int:
        kind = NodeKind(kind)
        full_name = attrs.get("full_name", "")
        if kind in METHOD_KINDS:
            if not full_name:
                raise CpgError(f"{kind.value} node requires a fullName")
            if full_name in self.method_index:
                raise CpgError(f"duplicate method fullName {full_name!r}")
        elif full_name:
            raise CpgError(f"fullName is only allowed on methods, got {kind.value}")
        if id is None:
            id = self._next_id
        elif id in self.nodes:
            raise CpgError(f"duplicate node id {id}")
        node = CpgNode(id=id, kind=kind, **attrs)
        self.nodes[id] = node
        self._next_id = max(self._next_id, id + 1)
        if kind in METHOD_KINDS:
            self.method_index[full_name] = id
        return id

    def add_edge(self, src: int, dst: int, kind: EdgeKind, variable: str | None = None) -> None:
        kind = EdgeKind(kind)
        for end in (src, dst):
            if end not in self.nodes:
                raise CpgError(f"edge endpoint {end} does not exist")
        if kind is EdgeKind.DDG:
            if not variable:
                raise CpgError("DDG edges need a variable label")
        elif variable is not None:
            raise CpgError(f"{kind.value} edges carry no variable")
        if kind is EdgeKind.CALL:
            if self.nodes[src].kind is not NodeKind.Call:
                raise CpgError("CALL edges must start at a Call")
            if self.nodes[dst].kind not in METHOD_KINDS:
                raise CpgError("CALL edges must end at a Method")
        if kind is EdgeKind.ARGUMENT:
            if self.nodes[src].kind is not NodeKind.Call:
                raise CpgError("ARGUMENT edges must start at a Call")
            idx = self.nodes[dst].argument_index
            if idx < 0:
                raise CpgError(f"argument node {dst} has no argumentIndex")
            for other in self._out[kind][src]:
                if other != dst and self.nodes[other].argument_index == idx:
                    raise CpgError(f"call {src} already has an argument at index {idx}")
        edge = Edge(src, dst, kind, variable)
        if edge in self._edge_set:
            return
        self._edge_set.add(edge)
        self.edges.append(edge)
        self._out[kind][src].add(dst)
        self._in[kind][dst].add(src)

    # -- queries ------------------------------------------------------------

    def node(self, node_id: int) -> CpgNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise CpgError(f"unknown node id {node_id}") from None

    def out_neighbors(self, node_id: int, kind: EdgeKind) -> list[int]:
        self.node(node_id)
        return sorted(self._out[EdgeKind(kind)].get(node_id, ()))

    def in_neighbors(self, node_id: int, kind: EdgeKind) -> list[int]:
        self.node(node_id)
        return sorted(self._in[EdgeKind(kind)].get(node_id, ()))

    def edges_of(self, kind: EdgeKind) -> Iterator[Edge]:
        kind = EdgeKind(kind)
        return (e for e in self.edges if e.kind is kind)

    def ddg_labels(self, src: int, dst: int) -> list[str]:
        return sorted(e.variable for e in self.edges
                      if e.kind is EdgeKind.DDG and e.src == src and e.dst == dst)

    def nodes_of(self, *kinds: NodeKind) -> list[CpgNode]:
        return [n for n in self.nodes.values() if n.kind in kinds]

    def remove_edges(self, kind: EdgeKind, method_id: int | None = None) -> None:
        """Drop every edge of ``kind`` (optionally only those inside one method)."""
        kind = EdgeKind(kind)
        keep = []
        for e in self.edges:
            if e.kind is kind and (method_id is None or self.nodes[e.src].method_id == method_id):
                self._edge_set.discard(e)
                self._out[kind][e.src].discard(e.dst)
                self._in[kind][e.dst].discard(e.src)
            else:
                keep.append(e)
        self.edges = keep


# -- serialization ------------------------------------------------------------

CPG_SCHEMA = {
    "type": "object",
    "required": ["nodes", "edges"],
    "properties": {
        "nodes": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind"],
                "properties": {
                    "id": {"type": "integer", "minimum": 1},
                    "kind": {"type": "string"},
                    "code": {"type": "string"},
                    "name": {"type": "string"},
                    "fullName": {"type": "string"},
                    "argumentIndex": {"type": "integer"},
                    "line": {"type": "integer"},
                    "methodId": {"type": "integer"},
                },
            },
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["src", "dst", "kind"],
                "properties": {
                    "src": {"type": "integer"},
                    "dst": {"type": "integer"},
                    "kind": {"type": "string"},
                    "variable": {"type": "string"},
                },
            },
        },
    },
}


def to_document(cpg: Cpg) -> dict:
    nodes = [
        {
            "id": n.id,
            "kind": n.kind.value,
            "code": n.code,
            "name": n.name,
            "fullName": n.full_name,
            "argumentIndex": n.argument_index,
            "line": n.line,
            "methodId": n.method_id,
        }
        for n in sorted(cpg.nodes.values(), key=lambda n: n.id)
    ]
    edges = []
    for e in cpg.edges:
        d = {"src": e.src, "dst": e.dst, "kind": e.kind.value}
        if e.variable is not None:
            d["variable"] = e.variable
        edges.append(d)
    return {"nodes": nodes, "edges": edges}


def serialize_cpg(cpg: Cpg) -> bytes:
    return json.dumps(to_document(cpg), indent=None, separators=(",", ":")).encode("utf-8")


def load_cpg(data: bytes | str | dict) -> Cpg:
    """Load a graph document, validating it against :data:`CPG_SCHEMA`."""
    import jsonschema

    if isinstance(data, (bytes, str)):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise IngestError(f"malformed JSON: {exc}") from None
    else:
        doc = data
    try:
        jsonschema.validate(doc, CPG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise IngestError(f"schema violation at {where}: {exc.message}") from None

    cpg = Cpg()
    for i, raw in enumerate(doc["nodes"]):
        try:
            kind = NodeKind(raw["kind"])
        except ValueError:
            raise IngestError(f"nodes[{i}]: unknown node kind {raw['kind']!r}") from None
        try:
            cpg.add_node(
                kind,
                id=raw["id"],
                code=raw.get("code", ""),
                name=raw.get("name", ""),
                full_name=raw.get("fullName", ""),
                argument_index=raw.get("argumentIndex", -1),
                line=raw.get("line", 0),
                method_id=raw.get("methodId", 0),
            )
        except CpgError as exc:
            raise IngestError(f"nodes[{i}] (id {raw['id']}): {exc}") from None
    for i, raw in enumerate(doc["edges"]):
        try:
            kind = EdgeKind(raw["kind"])
        except ValueError:
            raise IngestError(f"edges[{i}]: unknown edge kind {raw['kind']!r}") from None
        for end in ("src", "dst"):
            if raw[end] not in cpg.nodes:
                raise IngestError(f"edges[{i}]: dangling edge, {end} id {raw[end]} not in nodes")
        if (kind is EdgeKind.DDG) != ("variable" in raw):
            raise IngestError(f"edges[{i}]: 'variable' is required iff kind is DDG")
        try:
            cpg.add_edge(raw["src"], raw["dst"], kind, raw.get("variable"))
        except CpgError as exc:
            raise IngestError(f"edges[{i}]: {exc}") from None
    return cpg


# -- structural helpers used by the builders and the query engine ----------------

def call_of(cpg: Cpg, node_id: int) -> int | None:
    """The call site that has ``node_id`` as an argument, if any."""
    parents = cpg._in[EdgeKind.ARGUMENT].get(node_id)
    if not parents:
        return None
    return min(parents)


def is_argument(cpg: Cpg, node_id: int) -> bool:
    return call_of(cpg, node_id) is not None


def arguments(cpg: Cpg, call_id: int) -> dict[int, int]:
    """Map argument index -> node id for one call site."""
    return {cpg.nodes[a].argument_index: a for a in cpg.out_neighbors(call_id, EdgeKind.ARGUMENT)}


def callee(cpg: Cpg, call_id: int) -> int | None:
    targets = cpg.out_neighbors(call_id, EdgeKind.CALL)
    return targets[0] if targets else None


def callee_name(cpg: Cpg, call_id: int) -> str:
    target = callee(cpg, call_id)
    if target is not None:
        return cpg.nodes[target].full_name
    return cpg.nodes[call_id].name


def callers(cpg: Cpg, method_id: int) -> list[int]:
    return cpg.in_neighbors(method_id, EdgeKind.CALL)


def method_children(cpg: Cpg, method_id: int, kind: NodeKind) -> list[int]:
    return sorted(n.id for n in cpg.nodes.values() if n.method_id == method_id and n.kind is kind)


def parameter(cpg: Cpg, method_id: int, index: int, kind: NodeKind = NodeKind.ParameterIn) -> int | None:
    for n in method_children(cpg, method_id, kind):
        if cpg.nodes[n].argument_index == index:
            return n
    return None


def method_return(cpg: Cpg, method_id: int) -> int | None:
    found = method_children(cpg, method_id, NodeKind.MethodReturn)
    return found[0] if found else None


def has_body(cpg: Cpg, method_id: int) -> bool:
    return cpg.nodes[method_id].kind is NodeKind.Method


def iter_calls(cpg: Cpg) -> Iterable[CpgNode]:
    return (n for n in cpg.nodes.values() if n.kind is NodeKind.Call)
