"""Corpus benchmark: confusion matrix, F1, Youden's J and wall-clock timing."""

from __future__ import annotations

import json
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema

from .engine import DEFAULT_MAX_CALL_DEPTH, TaintQuery, run_query
from .frontend import compile_program
from .matchers import resolve_all
from .semantics import load_registry

SWEEP_DEPTHS = range(1, 9)

MANIFEST_SCHEMA = {
    "type": "object",
    "required": ["cases"],
    "properties": {
        "cases": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["file", "sources", "sinks", "expected"],
                "properties": {
                    "file": {"type": "string"},
                    "sources": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "sinks": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "semantics": {"anyOf": [
                        {"type": "null"},
                        {"type": "string"},
                        {"type": "array", "items": {"type": "string"}},
                    ]},
                    "expected": {"enum": ["flow", "no-flow"]},
                    "label": {"type": "string"},
                    "category": {"type": "string"},
                },
            },
        },
    },
}


class BenchError(Exception):
    pass


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class

    file: Path
    sources: tuple[str, ...]
    sinks: tuple[str, ...]
    semantics: tuple[Path, ...]
    expected: bool
    label: str
    category: str = ""


@dataclass
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def record(self, expected: bool, reported: bool) -> str:
        key = ("tp" if reported else "fn") if expected else ("fp" if reported else "tn")
        setattr(self, key, getattr(self, key) + 1)
        return key.upper()


@dataclass(frozen=True)
class Metrics:
    """``None`` marks a metric whose denominator is zero."""
    f1: float | None
    j_index: float | None
    precision: float | None
    recall: float | None

    def display(self) -> dict[str, str]:
        return {k: "n/a" if v is None else f"{v:.3f}" for k, v in asdict(self).items()}


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def compute_metrics(m: ConfusionMatrix) -> Metrics:
    recall = _ratio(m.tp, m.tp + m.fn)
    specificity = _ratio(m.tn, m.tn + m.fp)
    j = recall + specificity - 1 if recall is not None and specificity is not None else None
    return Metrics(
        f1=_ratio(2 * m.tp, 2 * m.tp + m.fp + m.fn),
        j_index=j,
        precision=_ratio(m.tp, m.tp + m.fp),
        recall=recall,
    )


def load_manifest(path: str | Path) -> list[TestCase]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise BenchError(f"cannot read manifest {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise BenchError(f"{path}: invalid JSON: {exc}") from None
    try:
        jsonschema.validate(doc, MANIFEST_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise BenchError(f"{path}: {exc.message}") from None
    base = path.parent
    cases = []
    for i, c in enumerate(doc["cases"]):
        sem = c.get("semantics") or []
        if isinstance(sem, str):
            sem = [sem]
        case = TestCase(
            file=base / c["file"],
            sources=tuple(c["sources"]),
            sinks=tuple(c["sinks"]),
            semantics=tuple(base / s for s in sem),
            expected=c["expected"] == "flow",
            label=c.get("label", f"case{i}"),
            category=c.get("category", ""),
        )
        for p in (case.file, *case.semantics):
            if not p.is_file():
                raise BenchError(f"{path}: case {case.label!r} references missing file {p}")
        cases.append(case)
    return cases


@dataclass(frozen=True)
class CaseOutcome:
    label: str
    expected: bool
    flows: int
    verdict: str  # TP / TN / FP / FN
    error: str | None = None


@dataclass
class CorpusResult:
    matrix: ConfusionMatrix
    outcomes: list[CaseOutcome]
    depth: int = DEFAULT_MAX_CALL_DEPTH

    @property
    def metrics(self) -> Metrics:
        return compute_metrics(self.matrix)


def run_case(case: TestCase, depth: int = DEFAULT_MAX_CALL_DEPTH, mode: str = "curated") -> tuple[int, str | None]:
    """Number of reported flows, or an error message (counted as no flow)."""
    try:
        cpg = compile_program(case.file.read_text(encoding="utf-8"))
        registry = load_registry([str(p) for p in case.semantics] if mode == "curated" else [])
        query = TaintQuery(resolve_all(cpg, case.sources), resolve_all(cpg, case.sinks), registry, depth)
        return len(run_query(cpg, query, jobs=1, timing=False).flows), None
    except Exception as exc:  # a broken case must not abort the corpus
        return 0, f"{type(exc).__name__}: {exc}"


def run_corpus(cases: list[TestCase], depth: int = DEFAULT_MAX_CALL_DEPTH, mode: str = "curated",
               parallel_cases: int = 1) -> CorpusResult:
    if parallel_cases > 1:
        with ThreadPoolExecutor(parallel_cases) as pool:
            raw = list(pool.map(lambda c: run_case(c, depth, mode), cases))
    else:
        raw = [run_case(c, depth, mode) for c in cases]
    matrix = ConfusionMatrix()
    outcomes = []
    for case, (flows, error) in zip(cases, raw):
        verdict = matrix.record(case.expected, flows > 0)
        outcomes.append(CaseOutcome(case.label, case.expected, flows, verdict, error))
    return CorpusResult(matrix, outcomes, depth)


@dataclass
class BenchResult:
    corpus: CorpusResult
    times_s: list[float]
    sweep: list[CorpusResult] = field(default_factory=list)

    @property
    def mean_s(self) -> float:
        return statistics.fmean(self.times_s) if self.times_s else 0.0

    @property
    def stdev_s(self) -> float:
        return statistics.stdev(self.times_s) if len(self.times_s) > 1 else 0.0


def run_bench(manifest: str | Path, *, iterations: int = 10, sweep_k: bool = False, parallel_cases: int = 1,
              mode: str = "curated", depth: int = DEFAULT_MAX_CALL_DEPTH) -> BenchResult:
    cases = load_manifest(manifest)
    times = []
    result = None
    for _ in range(iterations):
        t0 = time.perf_counter()
        result = run_corpus(cases, depth, mode, parallel_cases)
        times.append(time.perf_counter() - t0)
    if result is None:
        result = run_corpus(cases, depth, mode, parallel_cases)
    sweep = [run_corpus(cases, k, mode, parallel_cases) for k in SWEEP_DEPTHS] if sweep_k else []
    return BenchResult(result, times, sweep)


def _matrix_dict(r: CorpusResult) -> dict:
    return {**asdict(r.matrix), **r.metrics.display()}


def format_bench(result: BenchResult, fmt: str = "text") -> str:
    c = result.corpus
    if fmt == "json":
        doc = {
            "cases": [
                {"label": o.label, "expected": "flow" if o.expected else "no-flow", "flows": o.flows,
                 "verdict": o.verdict, "error": o.error}
                for o in c.outcomes
            ],
            "depth": c.depth,
            "matrix": asdict(c.matrix),
            "metrics": asdict(c.metrics),
            "timing": {"iterations": len(result.times_s), "meanS": result.mean_s, "stdevS": result.stdev_s},
            "sweep": [{"depth": r.depth, **_matrix_dict(r)} for r in result.sweep],
        }
        return json.dumps(doc, indent=2) + "\n"
    width = max([len(o.label) for o in c.outcomes] + [5])
    lines = [f"{'case':<{width}}  expected  flows  verdict"]
    for o in c.outcomes:
        exp = "flow" if o.expected else "no-flow"
        tail = f"  ({o.error})" if o.error else ""
        lines.append(f"{o.label:<{width}}  {exp:<8}  {o.flows:>5}  {o.verdict}{tail}")
    m, d = c.matrix, c.metrics.display()
    lines += [
        "",
        f"k={c.depth}  TP={m.tp} TN={m.tn} FP={m.fp} FN={m.fn}",
        f"F1={d['f1']}  J={d['j_index']}  precision={d['precision']}  recall={d['recall']}",
        f"time: {result.mean_s:.4f}s ± {result.stdev_s:.4f}s over {len(result.times_s)} iterations",
    ]
    if result.sweep:
        lines += ["", "  k    TP   TN   FP   FN     F1      J"]
        for r in result.sweep:
            row = _matrix_dict(r)
            lines.append(f"{r.depth:>3}  {r.matrix.tp:>4} {r.matrix.tn:>4} {r.matrix.fp:>4} {r.matrix.fn:>4}"
                         f"  {row['f1']:>5}  {row['j_index']:>5}")
    return "\n".join(lines) + "\n"
