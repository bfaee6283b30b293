"""External-method flow semantics.

A semantics file holds one rule per line::

    # receiver propagates to itself and to the return value
    "Obj.transform:Obj(Obj)" 0->0 0->-1

Index ``0`` is the receiver, ``-1`` the return value, ``1..n`` positional
arguments. Flows a rule does not list are killed. A rule with no mappings is a
full sanitizer. Two macros are understood: ``PASSTHROUGH`` (every observed
index flows to itself, plus ``1->-1``) and ``TAINT_ALL`` (everything flows
everywhere); they are expanded against the arity of each call site.

Lines naming the same method inside one file are merged; a later file
shadows an earlier one for the same name. Built-in operator semantics sit
beneath all user rules.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Union

from .cpg import Cpg, EdgeKind, NodeKind, arguments, call_of, callee, callee_name, method_children

ArgSpec = Union[int, str]

RETURN = -1
RECEIVER = 0
MACROS = ("PASSTHROUGH", "TAINT_ALL")


@dataclass(frozen=True)
class FlowMapping:
    src: ArgSpec
    dst: ArgSpec

    def __str__(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class FlowSemantic:
    method_full_name: str
    mappings: tuple[FlowMapping, ...] = ()
    macros: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mappings", tuple(dict.fromkeys(self.mappings)))
        object.__setattr__(self, "macros", tuple(dict.fromkeys(self.macros)))

    def merged(self, other: "FlowSemantic") -> "FlowSemantic":
        return FlowSemantic(self.method_full_name, self.mappings + other.mappings, self.macros + other.macros)

    def resolve(self, indices: Iterable[int], param_names: dict[str, int] | None = None) -> frozenset[tuple[int, int]]:
        """Concrete ``(src, dst)`` index pairs for a call site with the given argument indices."""
        indices = sorted(set(indices))
        param_names = param_names or {}
        out: set[tuple[int, int]] = set()
        for m in self.mappings:
            src = m.src if isinstance(m.src, int) else param_names.get(m.src)
            dst = m.dst if isinstance(m.dst, int) else param_names.get(m.dst)
            if src is not None and dst is not None:
                out.add((src, dst))
        if "PASSTHROUGH" in self.macros:
            out.update((i, i) for i in indices)
            out.add((1, RETURN))
        if "TAINT_ALL" in self.macros:
            out.update((i, j) for i in indices for j in [RETURN, *indices])
        return frozenset(out)


def format_semantic(sem: FlowSemantic) -> str:
    tokens = [str(m) for m in sem.mappings] + list(sem.macros)
    return " ".join([f'"{sem.method_full_name}"', *tokens])


@dataclass(frozen=True)
class SemanticsDiagnostic:
    line: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}: {self.message}"


class SemanticsError(Exception):
    def __init__(self, diagnostics: list[SemanticsDiagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


_RULE_RE = re.compile(r'^"([^"]+)"(.*)$')
_SPEC = r"(-?\d+|[A-Za-z_][A-Za-z0-9_]*)"
_MAPPING_RE = re.compile(rf"^{_SPEC}->{_SPEC}$")


def _spec(text: str) -> ArgSpec:
    try:
        return int(text)
    except ValueError:
        return text


def _strip_block_comments(text: str) -> str:
    # keep newlines so diagnostics still carry correct line numbers
    return re.sub(r"/\*.*?\*/", lambda m: "\n" * m.group().count("\n"), text, flags=re.S)


def parse_semantics(text: str) -> list[FlowSemantic]:
    """Parse a semantics document, raising :class:`SemanticsError` on bad lines."""
    rules: list[FlowSemantic] = []
    diagnostics: list[SemanticsDiagnostic] = []
    for lineno, raw in enumerate(_strip_block_comments(text).splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _RULE_RE.match(line)
        if m is None:
            diagnostics.append(SemanticsDiagnostic(lineno, "expected a quoted method full name"))
            continue
        name, rest = m.groups()
        mappings: list[FlowMapping] = []
        macros: list[str] = []
        ok = True
        for token in rest.split():
            if token in MACROS:
                macros.append(token)
                continue
            tm = _MAPPING_RE.match(token)
            if tm is None:
                diagnostics.append(SemanticsDiagnostic(lineno, f"malformed mapping {token!r}"))
                ok = False
                continue
            src, dst = (_spec(g) for g in tm.groups())
            if src == RETURN:
                diagnostics.append(SemanticsDiagnostic(lineno, "return cannot be a flow source"))
                ok = False
                continue
            if (isinstance(src, int) and src < RETURN) or (isinstance(dst, int) and dst < RETURN):
                diagnostics.append(SemanticsDiagnostic(lineno, f"index out of range in {token!r}"))
                ok = False
                continue
            mappings.append(FlowMapping(src, dst))
        if ok:
            rules.append(FlowSemantic(name, tuple(mappings), tuple(macros)))
    if diagnostics:
        raise SemanticsError(diagnostics)
    return rules


def _strip_comment(raw: str) -> str:
    # a '#' inside the quoted name is part of the name
    m = re.match(r'^(\s*"[^"]*")(.*)$', raw)
    if m is None:
        return raw.split("#", 1)[0].strip()
    head, tail = m.groups()
    return (head + tail.split("#", 1)[0]).strip()


def _split_signature(full_name: str) -> tuple[str, str | None]:
    base, sep, sig = full_name.partition(":")
    return base, (sig if sep else None)


class SemanticsRegistry:
    """Method full name -> :class:`FlowSemantic`, with built-in operators underneath."""

    def __init__(self, rules: Iterable[FlowSemantic] = (), *, include_operators: bool = True,
                 regex: bool = False):
        from .ddg import default_operator_semantics

        self.regex = regex
        self.builtins: dict[str, FlowSemantic] = {}
        if include_operators:
            self.builtins = {s.method_full_name: s for s in default_operator_semantics()}
        self.user: dict[str, FlowSemantic] = {}
        self._patterns: dict[str, re.Pattern] = {}
        self._cache: dict[str, FlowSemantic | None] = {}
        rules = list(rules)
        if rules:
            self.add(rules)

    def add(self, rules: Iterable[FlowSemantic]) -> None:
        """Add one file's worth of rules: merged within, shadowing earlier files."""
        batch: dict[str, FlowSemantic] = {}
        for r in rules:
            batch[r.method_full_name] = batch[r.method_full_name].merged(r) if r.method_full_name in batch else r
        self.user.update(batch)
        if self.regex:
            for name in batch:
                self._patterns[name] = re.compile(name)
        self._cache.clear()

    def lookup(self, full_name: str) -> FlowSemantic | None:
        if full_name not in self._cache:
            self._cache[full_name] = self._lookup(full_name)
        return self._cache[full_name]

    def _lookup(self, full_name: str) -> FlowSemantic | None:
        if full_name in self.user:
            return self.user[full_name]
        if self.regex:
            hits = [self.user[n] for n, p in self._patterns.items() if p.fullmatch(full_name)]
        else:
            base, sig = _split_signature(full_name)
            hits = []
            for name, sem in self.user.items():
                b, s = _split_signature(name)
                if b == base and (s is None or sig is None or s == sig):
                    hits.append(sem)
        if hits:
            out = hits[0]
            for h in hits[1:]:
                out = out.merged(h)
            return out
        return self.builtins.get(full_name)

    def __len__(self) -> int:
        return len(self.user)


def lookup(registry: SemanticsRegistry, full_name: str) -> FlowSemantic | None:
    return registry.lookup(full_name)


def load_registry(paths: Iterable[str], *, include_operators: bool = True, regex: bool = False) -> SemanticsRegistry:
    registry = SemanticsRegistry(include_operators=include_operators, regex=regex)
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            registry.add(parse_semantics(fh.read()))
    return registry


# -- edge validity ------------------------------------------------------------------

class Validity(enum.Enum):
    VALID = "valid"
    VALID_UNRESOLVED = "valid-unresolved"
    INVALID = "invalid"

    def __bool__(self) -> bool:
        return self is not Validity.INVALID


class CallFlows:
    """Resolved flow pairs per call site; ``None`` means no semantics (over-approximate)."""

    def __init__(self, cpg: Cpg, registry: SemanticsRegistry):
        self.cpg = cpg
        self.registry = registry
        self._cache: dict[int, frozenset[tuple[int, int]] | None] = {}

    def __call__(self, call_id: int) -> frozenset[tuple[int, int]] | None:
        if call_id in self._cache:
            return self._cache[call_id]
        sem = self.registry.lookup(callee_name(self.cpg, call_id))
        flows = None
        if sem is not None:
            target = callee(self.cpg, call_id)
            names = {}
            if target is not None:
                names = {self.cpg.nodes[p].name: self.cpg.nodes[p].argument_index
                         for p in method_children(self.cpg, target, NodeKind.ParameterIn)}
            flows = sem.resolve(arguments(self.cpg, call_id).keys(), names)
        self._cache[call_id] = flows
        return flows

    def defines_return(self, call_id: int) -> bool:
        flows = self(call_id)
        return flows is None or any(dst == RETURN for _, dst in flows)

    def flows(self, call_id: int, src: int, dst: int) -> bool:
        flows = self(call_id)
        return flows is None or (src, dst) in flows

    def uses(self, call_id: int, index: int) -> bool:
        flows = self(call_id)
        return flows is None or any(src == index for src, _ in flows)


def edge_validity(cpg: Cpg, flows: CallFlows, child: int, parent: int) -> Validity:
    """Validity of a backwards step from ``child`` to ``parent``.

    Covers materialized DDG edges, steps between arguments of one call site,
    and the step from a call's value to one of its own arguments.
    """
    parent_node = cpg.nodes[parent]
    child_node = cpg.nodes[child]
    # rule 1: the actual return only carries taint if the call defines it
    if parent_node.kind is NodeKind.Call and not flows.defines_return(parent):
        return Validity.INVALID
    parent_call = call_of(cpg, parent)
    # value of a call computed from one of its own arguments
    if child_node.kind is NodeKind.Call and parent_call == child:
        return Validity.VALID if flows.flows(child, parent_node.argument_index, RETURN) else Validity.INVALID
    child_call = call_of(cpg, child)
    if child_call is None:
        return Validity.VALID
    if parent_call is None:
        return Validity.VALID_UNRESOLVED
    if parent_call == child_call:
        ok = flows.flows(child_call, parent_node.argument_index, child_node.argument_index)
    else:
        ok = flows.uses(child_call, child_node.argument_index)
    return Validity.VALID if ok else Validity.INVALID


def is_valid_edge(cpg: Cpg, registry: SemanticsRegistry, child: int, parent: int) -> Validity:
    """Check a DDG edge ``parent -> child`` (or an implied same-call-site edge) against semantics."""
    related = (
        parent in cpg.in_neighbors(child, EdgeKind.DDG)
        or (call_of(cpg, parent) is not None and call_of(cpg, parent) in (call_of(cpg, child), child))
    )
    if not related:
        raise ValueError(f"no data dependence between {parent} and {child}")
    return edge_validity(cpg, CallFlows(cpg, registry), child, parent)
