"""Lower MiniLang programs into CPG layers.

``build_ast_cfg`` creates AST, CFG, CALL and ARGUMENT edges. Operators are
emitted as Call nodes carrying their surface symbol; ``lower_operators`` then
renames them to reserved ``<op.*>`` full names and links them to operator
stubs. ``build_cdg`` adds control dependences from post-dominance.
"""

from __future__ import annotations

import networkx as nx

from . import minilang as ml
from .cpg import Cpg, CpgError, EdgeKind, NodeKind, arguments, method_children, method_return

ASSIGNMENT = "<op.assignment>"
BINARY = "<op.binary>"
INDEX_ACCESS = "<op.indexAccess>"
FIELD_ACCESS = "<op.fieldAccess>"
ALLOC = "<op.alloc>"

OPERATOR_ARITY = {ASSIGNMENT: 2, BINARY: 2, INDEX_ACCESS: 2, FIELD_ACCESS: 2, ALLOC: 0}
ACCESS_OPERATORS = frozenset({INDEX_ACCESS, FIELD_ACCESS})

# surface symbol -> reserved operator name
_SURFACE_OPERATORS = {"=": ASSIGNMENT, "[]": INDEX_ACCESS, ".": FIELD_ACCESS, "new": ALLOC}
_SURFACE_OPERATORS.update({op: BINARY for op in ml.BINARY_PRECEDENCE})

UNKNOWN_RECEIVER = "<unknown>"


def is_operator(full_name: str) -> bool:
    return full_name.startswith("<op.")


def _assigned_names(stmts) -> set[str]:
    names: set[str] = set()
    for s in stmts:
        if isinstance(s, ml.Assign) and isinstance(s.target, ml.Name):
            names.add(s.target.name)
        elif isinstance(s, ml.If):
            names |= _assigned_names(s.then) | _assigned_names(s.orelse or ())
        elif isinstance(s, ml.While):
            names |= _assigned_names(s.body)
    return names


class _MethodBuilder:
    """Emits nodes for one function body while threading the CFG."""

    def __init__(self, cpg: Cpg, resolver: "_Resolver", method_id: int, exit_id: int, variables: set[str]):
        self.cpg = cpg
        self.resolver = resolver
        self.method_id = method_id
        self.exit_id = exit_id
        self.variables = variables
        self.pending: list[int] = [method_id]
        self.emitted: list[int] = []

    def node(self, kind: NodeKind, line: int, **attrs) -> int:
        return self.cpg.add_node(kind, line=line, method_id=self.method_id, **attrs)

    def emit(self, node_id: int) -> int:
        for p in self.pending:
            self.cpg.add_edge(p, node_id, EdgeKind.CFG)
        self.pending = [node_id]
        self.emitted.append(node_id)
        return node_id

    # expressions: children are emitted before parents (evaluation order)

    def expr(self, e: ml.Expr, index: int = -1) -> int:
        code = ml.format_expr(e)
        line = e.line
        if isinstance(e, ml.Name):
            return self.emit(self.node(NodeKind.Identifier, line, code=code, name=e.name, argument_index=index))
        if isinstance(e, ml.Literal):
            return self.emit(self.node(NodeKind.Literal, line, code=code, argument_index=index))
        if isinstance(e, ml.New):
            return self.call("new", code, line, [], index)
        if isinstance(e, ml.Binary):
            return self.call(e.op, code, line, [(1, e.left), (2, e.right)], index)
        if isinstance(e, ml.Index):
            return self.call("[]", code, line, [(1, e.base), (2, e.index)], index)
        if isinstance(e, ml.FieldAccess):
            return self.call(".", code, line, [(1, e.base), (2, ml.Literal(e.name, line=line))], index)
        if isinstance(e, ml.MethodCall):
            target = self.resolver.method(e.method)
            args = [(0, e.receiver)] + [(i, a) for i, a in enumerate(e.args, 1)]
            return self.call(e.method, code, line, args, index, target)
        if isinstance(e, ml.Call):
            target = self.resolver.static(e.callee)
            if target is None and "." in e.callee and e.callee.split(".")[0] in self.variables:
                *recv, method = e.callee.split(".")
                receiver: ml.Expr = ml.Name(recv[0], line=line)
                for part in recv[1:]:
                    receiver = ml.FieldAccess(receiver, part, line=line)
                target = self.resolver.method(method)
                args = [(0, receiver)] + [(i, a) for i, a in enumerate(e.args, 1)]
                return self.call(method, code, line, args, index, target)
            if target is None:
                target = self.resolver.stub(e.callee, len(e.args))
            return self.call(e.callee, code, line, [(i, a) for i, a in enumerate(e.args, 1)], index, target)
        raise TypeError(f"unsupported expression {e!r}")

    def call(self, name, code, line, args, index, target=None) -> int:
        children = [(i, self.expr(a, i)) for i, a in args]
        call_id = self.node(NodeKind.Call, line, code=code, name=name, argument_index=index)
        for _, child in children:
            self.cpg.add_edge(call_id, child, EdgeKind.AST)
            self.cpg.add_edge(call_id, child, EdgeKind.ARGUMENT)
        if target is not None:
            self.cpg.add_edge(call_id, target, EdgeKind.CALL)
        return self.emit(call_id)

    # statements -----------------------------------------------------------

    def block(self, stmts, parent: int) -> None:
        for s in stmts:
            self.statement(s, parent)

    def statement(self, s: ml.Stmt, parent: int) -> None:
        if isinstance(s, ml.Assign):
            root = self.call("=", f"{ml.format_expr(s.target)} = {ml.format_expr(s.value)}", s.line,
                             [(1, s.target), (2, s.value)], -1)
        elif isinstance(s, ml.ExprStmt):
            root = self.expr(s.expr)
        elif isinstance(s, ml.Return):
            child = self.expr(s.value) if s.value is not None else None
            code = "return" if s.value is None else f"return {ml.format_expr(s.value)}"
            root = self.emit(self.node(NodeKind.Return, s.line, code=code))
            if child is not None:
                self.cpg.add_edge(root, child, EdgeKind.AST)
            self.cpg.add_edge(root, self.exit_id, EdgeKind.CFG)
            self.pending = []
        elif isinstance(s, ml.If):
            root = self.node(NodeKind.ControlStructure, s.line, code=f"if ({ml.format_expr(s.cond)})", name="if")
            cond = self.expr(s.cond)
            self.cpg.add_edge(root, cond, EdgeKind.AST)
            self.pending = [cond]
            self.block(s.then, root)
            after_then = self.pending
            self.pending = [cond]
            if s.orelse is not None:
                self.block(s.orelse, root)
            self.pending = after_then + [p for p in self.pending if p not in after_then]
        elif isinstance(s, ml.While):
            root = self.node(NodeKind.ControlStructure, s.line, code=f"while ({ml.format_expr(s.cond)})", name="while")
            mark = len(self.emitted)
            cond = self.expr(s.cond)
            first = self.emitted[mark]
            self.cpg.add_edge(root, cond, EdgeKind.AST)
            self.pending = [cond]
            self.block(s.body, root)
            for p in self.pending:
                self.cpg.add_edge(p, first, EdgeKind.CFG)
            self.pending = [cond]
        else:
            raise TypeError(f"unsupported statement {s!r}")
        self.cpg.add_edge(parent, root, EdgeKind.AST)

    def finish(self) -> None:
        for p in self.pending:
            self.cpg.add_edge(p, self.exit_id, EdgeKind.CFG)


class _Resolver:
    """Purely name-based call resolution."""

    def __init__(self, cpg: Cpg, functions: dict[str, int], externs: dict[str, int]):
        self.cpg = cpg
        self.functions = functions
        self.externs = externs

    def static(self, callee: str) -> int | None:
        if callee in self.functions:
            return self.functions[callee]
        return self.externs.get(callee)

    def method(self, name: str) -> int:
        matches = sorted(fn for fn in self.externs if fn.rsplit(".", 1)[-1] == name and "." in fn)
        if matches:
            return self.externs[matches[0]]
        return self.stub(f"{UNKNOWN_RECEIVER}.{name}", 0)

    def stub(self, full_name: str, arity: int) -> int:
        if full_name not in self.externs:
            self.externs[full_name] = _add_method(self.cpg, NodeKind.ExternalMethodStub, full_name,
                                                  [f"p{i}" for i in range(1, arity + 1)], 0)
        return self.externs[full_name]


def _add_method(cpg: Cpg, kind: NodeKind, full_name: str, params, line: int) -> int:
    short = full_name if full_name.startswith("<") else full_name.rsplit(".", 1)[-1]
    code = f"{'fn' if kind is NodeKind.Method else 'extern'} {full_name}({', '.join(params)})"
    mid = cpg.add_node(kind, code=code, name=short, full_name=full_name, line=line)
    cpg.nodes[mid].method_id = mid
    for i, p in enumerate(params, 1):
        cpg.add_node(NodeKind.ParameterIn, code=p, name=p, argument_index=i, line=line, method_id=mid)
        cpg.add_node(NodeKind.ParameterOut, code=p, name=p, argument_index=i, line=line, method_id=mid)
    if kind is NodeKind.Method:
        cpg.add_node(NodeKind.MethodReturn, code="RET", name="RET", line=line, method_id=mid)
    return mid


def build_ast_cfg(program: ml.Program) -> Cpg:
    cpg = Cpg()
    externs: dict[str, int] = {}
    functions: dict[str, int] = {}
    for item in program.items:
        if isinstance(item, ml.Extern):
            externs[item.full_name] = _add_method(cpg, NodeKind.ExternalMethodStub, item.full_name,
                                                  item.params, item.line)
        else:
            functions[item.name] = _add_method(cpg, NodeKind.Method, item.name, item.params, item.line)
    resolver = _Resolver(cpg, functions, externs)
    for fn in program.functions:
        mid = functions[fn.name]
        variables = set(fn.params) | _assigned_names(fn.body)
        builder = _MethodBuilder(cpg, resolver, mid, method_return(cpg, mid), variables)
        builder.block(fn.body, mid)
        builder.finish()
    return cpg


def lower_operators(cpg: Cpg) -> None:
    """Rename surface operator calls to ``<op.*>`` names and bind them to stubs."""
    for node in list(cpg.nodes.values()):
        if node.kind is not NodeKind.Call or cpg.out_neighbors(node.id, EdgeKind.CALL):
            continue
        full_name = _SURFACE_OPERATORS.get(node.name)
        if full_name is None:
            continue
        node.name = full_name
        stub = cpg.method_index.get(full_name)
        if stub is None:
            params = [f"p{i}" for i in range(1, OPERATOR_ARITY[full_name] + 1)]
            stub = _add_method(cpg, NodeKind.ExternalMethodStub, full_name, params, 0)
        cpg.add_edge(node.id, stub, EdgeKind.CALL)


def cfg_nodes(cpg: Cpg, method_id: int) -> list[int]:
    """Nodes of one method that participate in its CFG, ascending."""
    out = {method_id}
    for e in cpg.edges_of(EdgeKind.CFG):
        if cpg.nodes[e.src].method_id == method_id:
            out.add(e.src)
            out.add(e.dst)
    exit_id = method_return(cpg, method_id)
    if exit_id is not None:
        out.add(exit_id)
    return sorted(out)


def post_dominator_tree(cpg: Cpg, method_id: int) -> dict[int, int]:
    """Immediate post-dominator of every CFG node (the exit maps to itself)."""
    exit_id = method_return(cpg, method_id)
    if exit_id is None:
        raise CpgError(f"method {method_id} has no MethodReturn")
    nodes = cfg_nodes(cpg, method_id)
    reverse = nx.DiGraph()
    reverse.add_nodes_from(nodes)
    for n in nodes:
        for s in cpg.out_neighbors(n, EdgeKind.CFG):
            reverse.add_edge(s, n)
    ipdom = dict(nx.immediate_dominators(reverse, exit_id))
    ipdom[exit_id] = exit_id
    missing = [n for n in nodes if n not in ipdom]
    if missing:
        raise CpgError(f"CFG nodes {missing} cannot reach the method exit")
    return ipdom


def build_cdg(cpg: Cpg, method_id: int) -> None:
    if not any(True for _ in cpg.out_neighbors(method_id, EdgeKind.CFG)):
        raise CpgError(f"method {method_id} has no CFG")
    ipdom = post_dominator_tree(cpg, method_id)
    for a in cfg_nodes(cpg, method_id):
        for b in cpg.out_neighbors(a, EdgeKind.CFG):
            runner = b
            while runner != ipdom[a]:
                cpg.add_edge(a, runner, EdgeKind.CDG)
                if runner == ipdom[runner]:
                    break
                runner = ipdom[runner]


def internal_methods(cpg: Cpg) -> list[int]:
    return sorted(n.id for n in cpg.nodes.values() if n.kind is NodeKind.Method)


def compile_program(source: str) -> Cpg:
    """Parse and lower a MiniLang program into a complete CPG (with DDG)."""
    from .ddg import build_ddg

    cpg = build_ast_cfg(ml.parse(source))
    lower_operators(cpg)
    for mid in internal_methods(cpg):
        build_cdg(cpg, mid)
        build_ddg(cpg, mid)
    return cpg


def access_base(cpg: Cpg, node_id: int) -> int | None:
    """The identifier ultimately written when ``node_id`` is a store target."""
    node = cpg.nodes[node_id]
    if node.kind is NodeKind.Identifier:
        return node_id
    if node.kind is NodeKind.Call and node.name in ACCESS_OPERATORS:
        base = arguments(cpg, node_id).get(1)
        return access_base(cpg, base) if base is not None else None
    return None


__all__ = [
    "build_ast_cfg", "lower_operators", "build_cdg", "compile_program", "cfg_nodes",
    "post_dominator_tree", "method_children", "access_base", "is_operator",
]
