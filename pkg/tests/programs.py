"""Random MiniLang programs and semantics files for differential testing."""

from __future__ import annotations

import random
from dataclasses import dataclass

EXTERNS = {
    "Src.get": 0,
    "Snk.put": 1,
    "Ext.f": 1,
    "Ext.g": 2,
    "Obj.m": 1,  # called as a method: receiver 0 plus one argument
}
SOURCE = "call:Src.get"
SINK = "arg:Snk.put:1"
VARS = ("a", "b", "c")


@dataclass(frozen=True)
class RandomCase:
    source: str
    semantics: str
    seed: int


class _Gen:
    def __init__(self, rng: random.Random, max_methods: int, max_statements: int):
        self.rng = rng
        self.n_methods = rng.randint(1, max_methods)
        self.arity = {f"f{i}": rng.randint(0, 2) for i in range(self.n_methods)}
        self.budget = max_statements
        self.current = ""

    def scope(self, params):
        return list(VARS) + list(params)

    def atom(self, names):
        r = self.rng.random()
        if r < 0.65:
            return self.rng.choice(names)
        if r < 0.8:
            return str(self.rng.randint(0, 3))
        return f"{self.rng.choice(names)}[{self.rng.randint(0, 1)}]"

    def expr(self, names, depth=0):
        rng = self.rng
        r = rng.random()
        if depth >= 2 or r < 0.35:
            return self.atom(names)
        if r < 0.5:
            return "Src.get()"
        if r < 0.6:
            return f"Ext.f({self.expr(names, depth + 1)})"
        if r < 0.68:
            return f"Ext.g({self.expr(names, depth + 1)}, {self.expr(names, depth + 1)})"
        if r < 0.76:
            return f"{rng.choice(names)}.m({self.expr(names, depth + 1)})"
        callees = [f for f in sorted(self.arity) if f > self.current]
        if r < 0.9 and callees:
            # call graph stays acyclic: exact path enumeration is exponential in recursion depth
            f = rng.choice(callees)
            args = ", ".join(self.expr(names, depth + 1) for _ in range(self.arity[f]))
            return f"{f}({args})"
        return f"{self.atom(names)} + {self.atom(names)}"

    def block(self, names, depth, n):
        out = []
        for _ in range(n):
            if self.budget <= 0:
                break
            self.budget -= 1
            out.extend(self.statement(names, depth))
        return out

    def statement(self, names, depth):
        rng = self.rng
        r = rng.random()
        ind = "  " * (depth + 1)
        if r < 0.45:
            target = rng.choice(names)
            if rng.random() < 0.15:
                target = f"{target}[{rng.randint(0, 1)}]"
            return [f"{ind}{target} = {self.expr(names)};"]
        if r < 0.6:
            return [f"{ind}Snk.put({self.expr(names)});"]
        if r < 0.7:
            return [f"{ind}{self.expr(names, 1) if rng.random() < 0.5 else 'Ext.f(' + rng.choice(names) + ')'};"]
        if r < 0.85 and depth < 2:
            cond = self.atom(names)
            then = self.block(names, depth + 1, rng.randint(1, 3)) or [f"{ind}  {rng.choice(names)} = 0;"]
            lines = [f"{ind}if ({cond}) {{", *then]
            if rng.random() < 0.5:
                orelse = self.block(names, depth + 1, rng.randint(1, 2)) or [f"{ind}  {rng.choice(names)} = 1;"]
                lines += [f"{ind}}} else {{", *orelse]
            return lines + [f"{ind}}}"]
        if r < 0.92 and depth < 2:
            body = self.block(names, depth + 1, rng.randint(1, 3)) or [f"{ind}  {rng.choice(names)} = 2;"]
            return [f"{ind}while ({self.atom(names)}) {{", *body, f"{ind}}}"]
        return [f"{ind}return {self.expr(names)};"]

    def program(self) -> str:
        lines = [f"extern {name}({', '.join(f'p{i}' for i in range(n))});" for name, n in EXTERNS.items()]
        per_method = max(1, self.budget // self.n_methods)
        for f, n in sorted(self.arity.items()):
            self.current = f
            params = [f"x{i}" for i in range(n)]
            names = self.scope(params)
            body = self.block(names, 0, self.rng.randint(1, per_method))
            lines += ["", f"fn {f}({', '.join(params)}) {{", *body, "}"]
        return "\n".join(lines) + "\n"


def random_semantics(rng: random.Random) -> str:
    """Rules for a random subset of externs and internal methods."""
    lines = []
    arity = {"Ext.f": (1,), "Ext.g": (1, 2), "Obj.m": (0, 1), "f0": (1, 2)}
    for name, idx in arity.items():
        if rng.random() < 0.5:
            continue
        pairs = [(s, d) for s in idx for d in (-1, *idx)]
        chosen = [p for p in pairs if rng.random() < 0.4]
        lines.append(" ".join([f'"{name}"', *(f"{s}->{d}" for s, d in chosen)]))
    return "\n".join(lines) + ("\n" if lines else "")


def random_case(seed: int, max_methods: int = 6, max_statements: int = 40) -> RandomCase:
    rng = random.Random(seed)
    source = _Gen(rng, max_methods, max_statements).program()
    return RandomCase(source, random_semantics(rng), seed)


def extra_rule(rng: random.Random, semantics: str) -> str | None:
    """A rule for an extern the semantics leave unmodelled, or None if all are modelled."""
    free = [n for n in ("Ext.f", "Ext.g", "Obj.m") if f'"{n}"' not in semantics]
    if not free:
        return None
    name = rng.choice(free)
    idx = {"Ext.f": (1,), "Ext.g": (1, 2), "Obj.m": (0, 1)}[name]
    pairs = [(s, d) for s in idx for d in (-1, *idx) if rng.random() < 0.4]
    return " ".join([f'"{name}"', *(f"{s}->{d}" for s, d in pairs)]) + "\n"
