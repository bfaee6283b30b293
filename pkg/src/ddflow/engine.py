"""Backwards taint solver over the data-dependence graph.

A query seeds one task per sink. A task explores a single method against the
direction of data-dependence edges, filtering every step through the flow
semantics, and yields results: *complete* when the path head is a source,
*partial* when the head is a parameter or an argument whose defining call
still has to be resolved in a callee. The coordinator turns results into new
tasks at method boundaries until no task is left.

Interprocedural moves and their effect on the call depth ``k``:

* descending into a callee (to its output parameter or formal return)
  pushes a frame and costs one level;
* a parameter with no pending frame ascends to every caller, costing one
  level;
* a parameter under a pending frame returns to that call site and gives
  the level back.

Descents and ascents stop once ``k + 1 >= max_call_depth``; a call into an
internal method that can no longer be entered is over-approximated like an
external method without semantics.
"""

from __future__ import annotations

import enum
import json
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from typing import Iterable

from .cpg import Cpg, EdgeKind, NodeKind
from .frontend import ACCESS_OPERATORS
from .semantics import CallFlows, SemanticsRegistry, edge_validity

DEFAULT_MAX_CALL_DEPTH = 5


class QueryError(ValueError):
    pass


@dataclass(frozen=True)
class TaintQuery:
    sources: frozenset[int]
    sinks: frozenset[int]
    registry: SemanticsRegistry
    max_call_depth: int = DEFAULT_MAX_CALL_DEPTH

    def __post_init__(self):
        object.__setattr__(self, "sources", frozenset(self.sources))
        object.__setattr__(self, "sinks", frozenset(self.sinks))
        if self.max_call_depth < 1:
            raise QueryError(f"max call depth must be >= 1, got {self.max_call_depth}")


@dataclass(frozen=True, order=True)
class PathElement:
    node: int
    resolved: bool


@dataclass(frozen=True)
class Frame:
    """A call site whose callee is being explored."""
    call: int | None
    method: int
    via_ref: bool = False


@dataclass(frozen=True)
class Task:
    start: int
    path: tuple[PathElement, ...]
    depth: int
    resolved: bool = True
    stack: tuple[Frame, ...] = ()


class ResultKind(enum.Enum):
    COMPLETE = "complete"
    PARTIAL = "partial"


@dataclass(frozen=True)
class TaintResult:
    path: tuple[PathElement, ...]
    depth: int
    kind: ResultKind
    stack: tuple[Frame, ...] = ()

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(e.node for e in self.path)


class GraphIndex:
    """Read-only lookup tables over a finished graph."""

    def __init__(self, cpg: Cpg):
        self.cpg = cpg
        nodes = cpg.nodes
        self.kind = {n.id: n.kind for n in nodes.values()}
        self.arg_index = {n.id: n.argument_index for n in nodes.values()}
        self.method_of = {n.id: n.method_id for n in nodes.values()}
        self.call_of: dict[int, int] = {}
        self.args: dict[int, dict[int, int]] = {}
        self.callee: dict[int, int] = {}
        self.callers: dict[int, list[int]] = {}
        self.ref_target: dict[int, int] = {}
        self.refs_to: dict[int, list[int]] = {}
        self.ddg_in: dict[int, list[int]] = {}
        for e in sorted(cpg.edges, key=lambda e: (e.src, e.dst)):
            if e.kind is EdgeKind.ARGUMENT:
                self.call_of.setdefault(e.dst, e.src)
                self.args.setdefault(e.src, {})[nodes[e.dst].argument_index] = e.dst
            elif e.kind is EdgeKind.CALL:
                self.callee.setdefault(e.src, e.dst)
                self.callers.setdefault(e.dst, []).append(e.src)
            elif e.kind is EdgeKind.REF and nodes[e.dst].kind is NodeKind.Method:
                self.ref_target.setdefault(e.src, e.dst)
                self.refs_to.setdefault(e.dst, []).append(e.src)
            elif e.kind is EdgeKind.DDG:
                lst = self.ddg_in.setdefault(e.dst, [])
                if not lst or lst[-1] != e.src:
                    lst.append(e.src)
        for lst in self.ddg_in.values():
            lst[:] = sorted(set(lst))
        self.params_in: dict[int, dict[int, int]] = {}
        self.params_out: dict[int, dict[int, int]] = {}
        self.method_return: dict[int, int] = {}
        self.returns: dict[int, list[int]] = {}
        for n in sorted(nodes.values(), key=lambda n: n.id):
            if n.kind is NodeKind.ParameterIn:
                self.params_in.setdefault(n.method_id, {})[n.argument_index] = n.id
            elif n.kind is NodeKind.ParameterOut:
                self.params_out.setdefault(n.method_id, {})[n.argument_index] = n.id
            elif n.kind is NodeKind.MethodReturn:
                self.method_return.setdefault(n.method_id, n.id)
            elif n.kind is NodeKind.Return:
                self.returns.setdefault(n.method_id, []).append(n.id)

    def callee_name(self, call: int) -> str:
        target = self.callee.get(call)
        return self.cpg.nodes[target].full_name if target is not None else self.cpg.nodes[call].name

    def has_body(self, method: int | None) -> bool:
        return method is not None and self.kind.get(method) is NodeKind.Method

    def entry_flag(self, node: int) -> bool:
        """Flag for a node reached as the value flowing *into* its consumer."""
        return self.kind[node] is not NodeKind.Call

    def def_flag(self, node: int) -> bool:
        """Flag for a node reached as a definition (data-dependence parent)."""
        return not (self.kind[node] is NodeKind.Call or node in self.call_of)


class ResultTable:
    """Per-start-state cache of source-ward path prefixes, safe for concurrent use."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[tuple, frozenset] = {}

    def get(self, key):
        return self._entries.get(key)

    def merge(self, key, prefixes: Iterable) -> frozenset:
        with self._lock:
            merged = self._entries.get(key, frozenset()) | frozenset(prefixes)
            self._entries[key] = merged
            return merged

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class QueryContext:
    cpg: Cpg
    query: TaintQuery
    index: GraphIndex = field(init=False)
    flows: CallFlows = field(init=False)
    table: ResultTable = field(default_factory=ResultTable)

    def __post_init__(self):
        self.index = GraphIndex(self.cpg)
        self.flows = CallFlows(self.cpg, self.query.registry)

    @property
    def k_max(self) -> int:
        return self.query.max_call_depth

    def valid(self, child: int, parent: int) -> bool:
        return bool(edge_validity(self.cpg, self.flows, child, parent))

    def defining_call(self, node: int, resolved: bool) -> int | None:
        """Call whose effect defines the value at this state, if any."""
        ix = self.index
        if ix.kind[node] is NodeKind.Call:
            return node
        if not resolved:
            return ix.call_of.get(node)
        return None

    def resolvable(self, call: int) -> bool:
        """Internal callee without semantics: resolved by exploring its body."""
        return self.index.has_body(self.index.callee.get(call)) and self.flows(call) is None

    def descends(self, node: int, resolved: bool, can_descend: bool) -> bool:
        if not can_descend:
            return False
        call = self.defining_call(node, resolved)
        return call is not None and self.resolvable(call)

    def parents(self, node: int, resolved: bool, can_descend: bool) -> list[tuple[int, bool]]:
        ix = self.index
        out: list[tuple[int, bool]] = []
        call = self.defining_call(node, resolved)
        if call is not None:
            if can_descend and self.resolvable(call):
                return []
            if call == node:
                for _, a in sorted(ix.args.get(node, {}).items()):
                    if self.valid(node, a):
                        out.append((a, ix.entry_flag(a)))
            else:
                out.extend(self._definition_parents(node, call, can_descend))
        if call is None or call == node:
            for p in ix.ddg_in.get(node, ()):
                if self.valid(node, p):
                    out.append((p, ix.def_flag(p)))
        return list(dict.fromkeys(out))

    def _definition_parents(self, node: int, call: int, can_descend: bool) -> list[tuple[int, bool]]:
        ix = self.index
        out = [(a, ix.entry_flag(a)) for _, a in sorted(ix.args[call].items()) if self.valid(node, a)]
        # a store through a container access also defines the container
        inner, cur = node, call
        while ix.arg_index[inner] == 1 and ix.callee_name(cur) in ACCESS_OPERATORS and cur in ix.call_of:
            outer = ix.call_of[cur]
            if can_descend and self.resolvable(outer):
                break
            out.extend((a, ix.entry_flag(a)) for _, a in sorted(ix.args[outer].items())
                       if a != cur and self.valid(cur, a))
            inner, cur = cur, outer
        return out

    def emissions(self, node: int, resolved: bool, can_descend: bool) -> tuple[list[ResultKind], bool]:
        """Result kinds produced at a state, and whether exploration stops there."""
        ix = self.index
        kinds = []
        if node in self.query.sources:
            kinds.append(ResultKind.COMPLETE)
        if ix.kind[node] is NodeKind.ParameterIn:
            kinds.append(ResultKind.PARTIAL)
            return kinds, True
        if self.descends(node, resolved, can_descend):
            kinds.append(ResultKind.PARTIAL)
            return kinds, True
        if can_descend and node in ix.ref_target:
            kinds.append(ResultKind.PARTIAL)
            return kinds, True
        return kinds, False


def compute_results_for_parents(ctx: QueryContext, start: int, resolved: bool,
                                can_descend: bool) -> set[tuple[tuple, ResultKind]]:
    """All result prefixes reachable from the valid parents of one start state.

    Each prefix runs from the result head to (and including) the start
    state. Paths are simple within the method; cached prefixes of other
    start states are spliced in when the table already knows them.
    """
    origin = (start, resolved)
    out: set[tuple[tuple, ResultKind]] = set()
    stack = [(p, (p, origin)) for p in reversed(ctx.parents(start, resolved, can_descend))]
    while stack:
        state, seg = stack.pop()
        cached = ctx.table.get((state, can_descend))
        if cached is not None:
            rest = set(seg[1:])
            for prefix, kind in cached:
                if rest.isdisjoint(prefix):
                    out.add((prefix + seg[1:], kind))
            continue
        kinds, stop = ctx.emissions(*state, can_descend)
        for kind in kinds:
            out.add((seg, kind))
        if stop:
            continue
        for p in reversed(ctx.parents(*state, can_descend)):
            if p not in seg:
                stack.append((p, (p,) + seg))
    return out


def _state_prefixes(ctx: QueryContext, start: int, resolved: bool, can_descend: bool) -> frozenset:
    key = ((start, resolved), can_descend)
    cached = ctx.table.get(key)
    if cached is not None:
        return cached
    origin = (start, resolved)
    kinds, stop = ctx.emissions(start, resolved, can_descend)
    prefixes = {((origin,), kind) for kind in kinds}
    if not stop:
        prefixes |= compute_results_for_parents(ctx, start, resolved, can_descend)
    return ctx.table.merge(key, prefixes)


def solve_task(task: Task, ctx: QueryContext) -> set[TaintResult]:
    can_descend = task.depth + 1 < ctx.k_max
    out = set()
    for prefix, kind in _state_prefixes(ctx, task.start, task.resolved, can_descend):
        path = tuple(PathElement(n, r) for n, r in prefix) + task.path
        out.add(TaintResult(path, task.depth, kind, task.stack))
    return out


def create_tasks_from_result(result: TaintResult, ctx: QueryContext) -> list[Task]:
    """Derive follow-up tasks at method boundaries from one result."""
    ix = ctx.index
    head = result.path[0]
    node, k, stack = head.node, result.depth, result.stack
    targets: list[int] = []
    resolved = True
    if ix.kind[node] is NodeKind.ParameterIn:
        method, i = ix.method_of[node], ix.arg_index[node]
        if stack:
            # return to the call site we descended through; never depth-limited
            frame = stack[-1]
            if frame.method != method or frame.call is None:
                return []
            target = ix.args.get(frame.call, {}).get(0 if frame.via_ref else i)
            new_depth, new_stack = k - 1, stack[:-1]
            targets = [target] if target is not None else []
        else:
            if k + 1 >= ctx.k_max:
                return []
            for call in ix.callers.get(method, ()):
                arg = ix.args.get(call, {}).get(i)
                if arg is not None:
                    targets.append(arg)
            for ref in ix.refs_to.get(method, ()):
                site = ix.call_of.get(ref)
                receiver = ix.args.get(site, {}).get(0) if site is not None else None
                if receiver is not None and receiver != ref:
                    targets.append(receiver)
            new_depth, new_stack = k + 1, ()
        tasks = []
        for t in sorted(set(targets)):
            flag = ix.entry_flag(t)
            if PathElement(t, flag) not in result.path:
                tasks.append(Task(t, result.path, new_depth, flag, new_stack))
        return tasks

    if k + 1 >= ctx.k_max:
        return []
    call = ctx.defining_call(node, head.resolved)
    if call is not None and ctx.resolvable(call):
        method = ix.callee[call]
        if call == node:
            target = ix.method_return.get(method)
        else:
            target = ix.params_out.get(method, {}).get(ix.arg_index[node])
        targets = [target] if target is not None else []
        frame = Frame(call, method)
    elif node in ix.ref_target:
        method = ix.ref_target[node]
        targets = ix.returns.get(method, [])
        frame = Frame(ix.call_of.get(node), method, via_ref=True)
    else:
        return []
    return [Task(t, result.path, k + 1, resolved, stack + (frame,))
            for t in targets if PathElement(t, resolved) not in result.path]


def deduplicate(results: Iterable[TaintResult]) -> list[TaintResult]:
    """Unique by (node sequence, kind), in report order."""
    seen: dict[tuple, TaintResult] = {}
    for r in results:
        seen.setdefault((r.nodes, r.kind), r)
    return sorted(seen.values(), key=lambda r: (_flow_order(r.nodes), r.kind.value))


def _flow_order(nodes: tuple[int, ...]):
    return (nodes[-1], nodes[0], len(nodes), nodes)


# -- reporting -----------------------------------------------------------------

@dataclass(frozen=True)
class FlowElement:
    id: int
    code: str
    line: int
    method: str


@dataclass(frozen=True)
class Flow:
    elements: tuple[FlowElement, ...]

    @property
    def source(self) -> int:
        return self.elements[0].id

    @property
    def sink(self) -> int:
        return self.elements[-1].id

    @property
    def node_ids(self) -> tuple[int, ...]:
        return tuple(e.id for e in self.elements)


@dataclass
class FlowReport:
    flows: list[Flow]
    tasks: int = 0
    elapsed_ms: float | None = None

    def pairs(self) -> set[tuple[int, int]]:
        return {(f.source, f.sink) for f in self.flows}

    def paths(self) -> set[tuple[int, ...]]:
        return {f.node_ids for f in self.flows}

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "flows": [
                {
                    "source": f.source,
                    "sink": f.sink,
                    "elements": [{"id": e.id, "code": e.code, "line": e.line, "method": e.method}
                                 for e in f.elements],
                }
                for f in self.flows
            ],
            "stats": {"tasks": self.tasks, "elapsedMs": self.elapsed_ms},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def to_text(self) -> str:
        if not self.flows:
            return "no flows found\n"
        lines = []
        for i, f in enumerate(self.flows, 1):
            lines.append(f"flow {i}: {f.elements[0].code!r} -> {f.elements[-1].code!r}")
            for e in f.elements:
                lines.append(f"  {e.method}:{e.line}  {e.code}  [{e.id}]")
        return "\n".join(lines) + "\n"


def build_report(cpg: Cpg, paths: Iterable[tuple[int, ...]], tasks: int = 0,
                 elapsed_ms: float | None = None) -> FlowReport:
    def element(n: int) -> FlowElement:
        node = cpg.nodes[n]
        owner = cpg.nodes.get(node.method_id)
        return FlowElement(n, node.code, node.line, owner.full_name if owner else "")

    unique = sorted(set(paths), key=_flow_order)
    return FlowReport([Flow(tuple(element(n) for n in p)) for p in unique], tasks, elapsed_ms)


def initial_tasks(ctx: QueryContext) -> list[Task]:
    return [Task(d, (), 0, ctx.index.entry_flag(d)) for d in sorted(ctx.query.sinks)]


def solve(ctx: QueryContext, jobs: int = 1) -> tuple[set[TaintResult], int]:
    """Drive tasks to a fixpoint. Returns (complete results, tasks solved)."""
    seen: set[Task] = set()
    complete: set[TaintResult] = set()
    pending = []
    for t in initial_tasks(ctx):
        if t not in seen:
            seen.add(t)
            pending.append(t)

    def absorb(results: set[TaintResult]) -> list[Task]:
        new = []
        for r in sorted(results, key=lambda r: (r.nodes, r.kind.value)):
            if r.kind is ResultKind.COMPLETE:
                complete.add(r)
            for t in create_tasks_from_result(r, ctx):
                if t not in seen:
                    seen.add(t)
                    new.append(t)
        return new

    if jobs <= 1:
        while pending:
            pending.extend(absorb(solve_task(pending.pop(), ctx)))
        return complete, len(seen)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        in_flight = {pool.submit(solve_task, t, ctx) for t in pending}
        while in_flight:
            done, in_flight = wait(in_flight, return_when=FIRST_COMPLETED)
            for fut in done:
                for t in absorb(fut.result()):
                    in_flight.add(pool.submit(solve_task, t, ctx))
    return complete, len(seen)


def run_query(cpg: Cpg, query: TaintQuery, jobs: int = 1, timing: bool = True) -> FlowReport:
    """Answer a taint query; the report does not depend on ``jobs``."""
    started = time.perf_counter()
    if not cpg.nodes or not query.sinks:
        return FlowReport([], 0, 0.0 if timing else None)
    ctx = QueryContext(cpg, query)
    complete, n_tasks = solve(ctx, jobs)
    elapsed = round((time.perf_counter() - started) * 1000, 3) if timing else None
    return build_report(cpg, (r.nodes for r in complete), n_tasks, elapsed)
