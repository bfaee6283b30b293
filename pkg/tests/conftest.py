from pathlib import Path

import pytest

from ddflow.frontend import compile_program

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def fixture_text(name: str) -> str:
    return (FIXTURES / name).read_text(encoding="utf-8")


@pytest.fixture
def listing1():
    return compile_program(fixture_text("example.mini"))


def find(cpg, kind, code, method=None, nth=0):
    """Node with the given kind and code, optionally inside one method (by name)."""
    hits = [n for n in sorted(cpg.nodes.values(), key=lambda n: n.id)
            if n.kind.value == kind and n.code == code
            and (method is None or cpg.nodes[n.method_id].full_name == method)]
    return hits[nth].id


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
