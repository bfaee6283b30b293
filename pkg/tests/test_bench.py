import json

import pytest
from hypothesis import given, strategies as st

from ddflow.bench import (BenchError, ConfusionMatrix, compute_metrics, format_bench, load_manifest,
                          run_bench, run_corpus)
from conftest import FIXTURES

CORPUS = FIXTURES / "corpus" / "manifest.json"


@pytest.mark.parametrize("m,j,f1", [
    ((119, 17, 36, 17), 0.196, 0.818),
    ((118, 36, 17, 18), 0.547, 0.871),
])
def test_reference_rows(m, j, f1):
    got = compute_metrics(ConfusionMatrix(*m))
    assert got.j_index == pytest.approx(j, abs=1e-3)
    assert got.f1 == pytest.approx(f1, abs=1e-3)


@given(st.integers(1, 1000))
def test_perfect_classifier(n):
    got = compute_metrics(ConfusionMatrix(n, n, 0, 0))
    assert got.j_index == 1 and got.f1 == 1


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_metric_ranges(tp, tn, fp, fn):
    got = compute_metrics(ConfusionMatrix(tp, tn, fp, fn))
    if got.j_index is not None:
        assert -1 <= got.j_index <= 1
    if got.f1 is not None:
        assert 0 <= got.f1 <= 1


def test_undefined_metrics():
    got = compute_metrics(ConfusionMatrix())
    assert got.f1 is None and got.j_index is None
    assert got.display()["j_index"] == "n/a"
    only_negatives = compute_metrics(ConfusionMatrix(tn=3))
    assert only_negatives.j_index is None and only_negatives.f1 is None


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionMatrix(tp=-1)


def test_empty_manifest(tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"cases": []}')
    result = run_corpus(load_manifest(path))
    assert result.matrix == ConfusionMatrix(0, 0, 0, 0)


@pytest.mark.parametrize("doc", ["{", '{"cases": [{"file": "x"}]}', '{"cases": [{"file": "missing.mini", '
                                 '"sources": ["call:a"], "sinks": ["call:b"], "expected": "flow"}]}'])
def test_manifest_errors(tmp_path, doc):
    path = tmp_path / "m.json"
    path.write_text(doc)
    with pytest.raises(BenchError):
        load_manifest(path)


def test_listing1_manifest():
    result = run_corpus(load_manifest(FIXTURES / "listing1.json"))
    assert result.matrix == ConfusionMatrix(2, 1, 0, 0)


def test_corpus_shape():
    cases = load_manifest(CORPUS)
    assert len(cases) == 30
    assert {c.category for c in cases} == {"basic", "sanitizer", "collection", "interprocedural"}


def test_curated_semantics_reduce_false_positives():
    cases = load_manifest(CORPUS)
    curated = run_corpus(cases, mode="curated")
    default = run_corpus(cases, mode="default")
    assert curated.matrix.fp <= default.matrix.fp
    for a, b in zip(default.outcomes, curated.outcomes):
        assert not (a.verdict == "TN" and b.verdict == "FP")
        assert b.flows <= a.flows


def test_case_errors_are_recorded(tmp_path):
    (tmp_path / "bad.mini").write_text("fn f( {")
    (tmp_path / "m.json").write_text(json.dumps({"cases": [
        {"file": "bad.mini", "sources": ["call:a"], "sinks": ["call:b"], "expected": "flow", "label": "broken"}]}))
    result = run_corpus(load_manifest(tmp_path / "m.json"))
    assert result.outcomes[0].error and result.matrix.fn == 1


def test_parallel_cases_agree():
    cases = load_manifest(CORPUS)
    assert run_corpus(cases, parallel_cases=3).outcomes == run_corpus(cases).outcomes


def test_sweep_and_formatting():
    result = run_bench(FIXTURES / "listing1.json", iterations=2, sweep_k=True)
    assert [r.depth for r in result.sweep] == list(range(1, 9))
    assert len(result.times_s) == 2
    text = format_bench(result, "text")
    assert "TP=2 TN=1 FP=0 FN=0" in text and "J=1.000" in text
    doc = json.loads(format_bench(result, "json"))
    assert len(doc["sweep"]) == 8 and doc["timing"]["iterations"] == 2
