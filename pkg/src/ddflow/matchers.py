"""Source/sink selectors.

    call:GLOB        value of every call whose callee matches GLOB
    arg:GLOB:i       argument i of matching calls (0 = receiver)
    param:GLOB[:i]   input parameter(s) of matching internal methods
    ret:GLOB         formal return of matching internal methods

Globs use :mod:`fnmatch` against the callee full name; a pattern without
a ``:`` signature also matches the name with any signature attached.
"""

from __future__ import annotations

from fnmatch import fnmatchcase

from .cpg import Cpg, NodeKind, arguments, callee_name
from .frontend import is_operator
from .semantics import _split_signature


class MatcherError(ValueError):
    pass


def _name_matches(pattern: str, full_name: str) -> bool:
    if fnmatchcase(full_name, pattern):
        return True
    base, _ = _split_signature(full_name)
    return ":" not in pattern and fnmatchcase(base, pattern)


def _index(text: str, spec: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise MatcherError(f"bad argument index in {spec!r}") from None


def resolve_matcher(cpg: Cpg, spec: str, *, operators: bool = True) -> frozenset[int]:
    """Node ids selected by one matcher spec."""
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise MatcherError(f"malformed matcher {spec!r}")
    calls = [n for n in cpg.nodes_of(NodeKind.Call)]

    def matching_calls(pattern):
        for c in calls:
            name = callee_name(cpg, c.id)
            if not operators and is_operator(name):
                continue
            if _name_matches(pattern, name):
                yield c.id

    def matching_methods(pattern):
        return [m.id for m in cpg.nodes_of(NodeKind.Method) if _name_matches(pattern, m.full_name)]

    if kind == "call":
        return frozenset(matching_calls(rest))
    if kind == "arg":
        pattern, sep, idx = rest.rpartition(":")
        if not sep or not pattern:
            raise MatcherError(f"arg matcher needs an index: {spec!r}")
        i = _index(idx, spec)
        out = set()
        for c in matching_calls(pattern):
            a = arguments(cpg, c).get(i)
            if a is not None:
                out.add(a)
        return frozenset(out)
    if kind == "param":
        pattern, i = rest, None
        head, sep, idx = rest.rpartition(":")
        if sep and idx.lstrip("-").isdigit():
            pattern, i = head, int(idx)
        methods = set(matching_methods(pattern))
        return frozenset(n.id for n in cpg.nodes_of(NodeKind.ParameterIn)
                         if n.method_id in methods and (i is None or n.argument_index == i))
    if kind == "ret":
        methods = set(matching_methods(rest))
        return frozenset(n.id for n in cpg.nodes_of(NodeKind.MethodReturn) if n.method_id in methods)
    raise MatcherError(f"unknown matcher kind {kind!r} in {spec!r}")


def resolve_all(cpg: Cpg, specs, *, operators: bool = True) -> frozenset[int]:
    out: set[int] = set()
    for s in specs:
        out |= resolve_matcher(cpg, s, operators=operators)
    return frozenset(out)
