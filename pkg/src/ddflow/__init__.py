"""Taint tracking over explicit data dependencies in a code property graph."""

from .cpg import Cpg, CpgError, EdgeKind, IngestError, NodeKind, load_cpg, serialize_cpg
from .engine import FlowReport, TaintQuery, run_query
from .frontend import compile_program
from .matchers import resolve_matcher
from .semantics import SemanticsRegistry, load_registry, parse_semantics

__all__ = [
    "Cpg", "CpgError", "EdgeKind", "IngestError", "NodeKind", "load_cpg", "serialize_cpg",
    "FlowReport", "TaintQuery", "run_query", "compile_program", "resolve_matcher",
    "SemanticsRegistry", "load_registry", "parse_semantics",
]
