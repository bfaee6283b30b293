"""Intraprocedural data-dependence edges from reaching definitions.

Every non-operator call is over-approximated: it uses all its arguments and
weakly redefines every variable passed to it. Operators only define what they
write (the assignment target, or the container behind an indexed/field store).
No edge depends on semantics, so the edge set never changes when rules are
added or removed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .cpg import Cpg, CpgError, EdgeKind, NodeKind, arguments, callee_name, method_children, method_return
from .frontend import ASSIGNMENT, ALLOC, BINARY, FIELD_ACCESS, INDEX_ACCESS, access_base, cfg_nodes, is_operator
from .semantics import FlowMapping, FlowSemantic

VALUE_LABEL = "<value>"
RETURN_LABEL = "<return>"


@dataclass(frozen=True)
class DefUseFact:
    variable: str
    node: int
    origin: str  # assignment-target | call-argument | parameter-in


def default_operator_semantics() -> list[FlowSemantic]:
    def sem(name, *pairs):
        return FlowSemantic(name, tuple(FlowMapping(s, d) for s, d in pairs))

    return [
        sem(ASSIGNMENT, (2, 1), (2, -1)),
        sem(BINARY, (1, -1), (2, -1), (1, 1), (2, 2)),
        sem(INDEX_ACCESS, (1, -1), (1, 1), (2, 2)),
        sem(FIELD_ACCESS, (1, -1), (1, 1), (2, 2)),
    ]


def _transfer(cpg: Cpg, node_id: int):
    """Return (uses, gens) for one CFG node.

    uses: list of (variable, use node); gens: list of (fact, strong).
    """
    node = cpg.nodes[node_id]
    uses: list[tuple[str, int]] = []
    gens: list[tuple[DefUseFact, bool]] = []
    if node.kind is NodeKind.Method:
        for p in method_children(cpg, node_id, NodeKind.ParameterIn):
            gens.append((DefUseFact(cpg.nodes[p].name, p, "parameter-in"), True))
    elif node.kind is NodeKind.Call:
        args = arguments(cpg, node_id)
        name = callee_name(cpg, node_id)
        target = args.get(1) if name == ASSIGNMENT else None
        for idx in sorted(args):
            a = args[idx]
            if a != target and cpg.nodes[a].kind is NodeKind.Identifier:
                uses.append((cpg.nodes[a].name, a))
        if name == ASSIGNMENT and target is not None:
            base = access_base(cpg, target)
            if base is not None:
                strong = base == target
                gens.append((DefUseFact(cpg.nodes[base].name, base, "assignment-target"), strong))
        elif not is_operator(name):
            for idx in sorted(args):
                base = access_base(cpg, args[idx])
                if base is not None:
                    gens.append((DefUseFact(cpg.nodes[base].name, base, "call-argument"), False))
    elif node.kind is NodeKind.Return:
        for child in cpg.out_neighbors(node_id, EdgeKind.AST):
            if cpg.nodes[child].kind is NodeKind.Identifier:
                uses.append((cpg.nodes[child].name, node_id))
    elif node.kind is NodeKind.Identifier and node.argument_index < 0:
        if not any(cpg.nodes[p].kind is NodeKind.Return for p in cpg.in_neighbors(node_id, EdgeKind.AST)):
            uses.append((node.name, node_id))
    return uses, gens


def _reverse_postorder(cpg: Cpg, entry: int, nodes: list[int]) -> list[int]:
    seen: set[int] = set()
    order: list[int] = []
    stack = [(entry, iter(cpg.out_neighbors(entry, EdgeKind.CFG)))]
    seen.add(entry)
    while stack:
        n, it = stack[-1]
        for s in it:
            if s not in seen:
                seen.add(s)
                stack.append((s, iter(cpg.out_neighbors(s, EdgeKind.CFG))))
                break
        else:
            stack.pop()
            order.append(n)
    order.reverse()
    # unreachable (dead) code still takes part in the equations
    return order + [n for n in nodes if n not in seen]


def reaching_definitions(cpg: Cpg, method_id: int):
    """Worklist fixpoint. Returns (IN sets, transfer table) keyed by CFG node."""
    if not cpg.out_neighbors(method_id, EdgeKind.CFG):
        raise CpgError(f"method {method_id} has no CFG layer")
    nodes = cfg_nodes(cpg, method_id)
    order = _reverse_postorder(cpg, method_id, nodes)
    rank = {n: i for i, n in enumerate(order)}
    transfer = {n: _transfer(cpg, n) for n in nodes}
    facts_in: dict[int, frozenset[DefUseFact]] = {n: frozenset() for n in nodes}
    facts_out: dict[int, frozenset[DefUseFact]] = {n: frozenset() for n in nodes}
    work = set(nodes)
    while work:
        n = min(work, key=rank.__getitem__)
        work.discard(n)
        inn = frozenset().union(*(facts_out[p] for p in cpg.in_neighbors(n, EdgeKind.CFG)))
        facts_in[n] = inn
        out = set(inn)
        for fact, strong in transfer[n][1]:
            if strong:
                out = {f for f in out if f.variable != fact.variable}
            out.add(fact)
        out = frozenset(out)
        if out != facts_out[n]:
            facts_out[n] = out
            work.update(cpg.out_neighbors(n, EdgeKind.CFG))
    return facts_in, transfer


def build_ddg(cpg: Cpg, method_id: int) -> None:
    """Add DDG edges for one internal method."""
    facts_in, transfer = reaching_definitions(cpg, method_id)
    for n in sorted(facts_in):
        by_var: dict[str, list[int]] = defaultdict(list)
        for f in facts_in[n]:
            by_var[f.variable].append(f.node)
        for var, use in transfer[n][0]:
            for d in sorted(by_var.get(var, ())):
                cpg.add_edge(d, use, EdgeKind.DDG, var)
        if cpg.nodes[n].kind is NodeKind.Return:
            for child in cpg.out_neighbors(n, EdgeKind.AST):
                if cpg.nodes[child].kind is NodeKind.Call:
                    cpg.add_edge(child, n, EdgeKind.DDG, VALUE_LABEL)

    exit_id = method_return(cpg, method_id)
    exit_facts = facts_in.get(exit_id, frozenset())
    for p_out in method_children(cpg, method_id, NodeKind.ParameterOut):
        var = cpg.nodes[p_out].name
        for d in sorted(f.node for f in exit_facts if f.variable == var):
            cpg.add_edge(d, p_out, EdgeKind.DDG, var)
    for r in method_children(cpg, method_id, NodeKind.Return):
        if cpg.out_neighbors(r, EdgeKind.AST):
            cpg.add_edge(r, exit_id, EdgeKind.DDG, RETURN_LABEL)


def ddg_digest(cpg: Cpg) -> str:
    """SHA-256 over the sorted DDG edge set."""
    import hashlib

    rows = sorted((e.src, e.dst, e.variable) for e in cpg.edges_of(EdgeKind.DDG))
    h = hashlib.sha256()
    for src, dst, var in rows:
        h.update(f"{src}\t{dst}\t{var}\n".encode())
    return h.hexdigest()


__all__ = ["build_ddg", "default_operator_semantics", "reaching_definitions", "DefUseFact", "ddg_digest",
           "ALLOC", "VALUE_LABEL", "RETURN_LABEL"]
