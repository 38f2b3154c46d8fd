"""Łukasiewicz propositional formulas: syntax, semantics and truth sub-tables.

Concrete syntax (ASCII, Unicode aliases in brackets)::

    ~  [¬]   negation            tightest
    &  [⊗]   fusion (t-norm)     left-assoc
    |  [⊕]   strong disjunction  left-assoc
    -> [⇒]   residuum            right-assoc
    <-> [⇔]  equivalence         left-assoc, loosest

Atoms are ``0``, ``1`` and identifiers ``[A-Za-z][A-Za-z0-9_.]*``.
"""
from __future__ import annotations

import csv
import itertools
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

Number = Union[float, np.ndarray]

#: Largest truth table materialized by default.
DEFAULT_ROW_BUDGET = 1 << 20

#: Tolerance for comparing valuations on a grid.
EQUALITY_TOL = 1e-9


class Formula:
    """Base class of the formula AST.  Nodes are immutable and hashable."""

    def __str__(self) -> str:
        return format_formula(self)


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class Const(Formula):
    value: int

    def __post_init__(self):
        if self.value not in (0, 1):
            raise ValueError(f"truth constant must be 0 or 1, got {self.value!r}")


@dataclass(frozen=True)
class Not(Formula):
    child: Formula


@dataclass(frozen=True)
class Fusion(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class StrongDisj(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


BINARY = (Fusion, StrongDisj, Implies, Iff)


@dataclass(frozen=True)
class LogicGrain:
    """Granularity ``n`` of the grid S_n = {0, 1/n, ..., 1} (n+1 truth values)."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grain must be a positive integer, got {self.n!r}")

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def snap(self, x: Number) -> Number:
        """Round truth values to the nearest grid point."""
        return np.round(np.asarray(x) * self.n) / self.n


def variables(f: Formula) -> tuple[str, ...]:
    """Distinct variable names in order of first occurrence (left to right)."""
    seen: dict[str, None] = {}

    def walk(g):
        if isinstance(g, Var):
            seen.setdefault(g.name)
        elif isinstance(g, Not):
            walk(g.child)
        elif isinstance(g, BINARY):
            walk(g.left)
            walk(g.right)

    walk(f)
    return tuple(seen)


def size(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + size(f.child)
    if isinstance(f, BINARY):
        return 1 + size(f.left) + size(f.right)
    return 1


def count_negations(f: Formula) -> int:
    if isinstance(f, Not):
        return 1 + count_negations(f.child)
    if isinstance(f, BINARY):
        return count_negations(f.left) + count_negations(f.right)
    return 0


# ---------------------------------------------------------------- parsing


class FormulaSyntaxError(ValueError):
    """Raised on malformed formula text; ``offset`` is a byte offset into the UTF-8 text."""

    def __init__(self, message: str, text: str, index: int):
        self.offset = len(text[:index].encode("utf-8"))
        self.text = text
        super().__init__(f"{message} at offset {self.offset}")


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<iff><->|⇔)
  | (?P<imp>->|⇒)
  | (?P<not>~|¬)
  | (?P<fus>&|⊗)
  | (?P<dis>\||⊕)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<ident>[A-Za-z][A-Za-z0-9_.]*)
  | (?P<const>[01](?![0-9A-Za-z_.]))
    """,
    re.VERBOSE,
)


_SPELLING = {"rp": ")", "lp": "(", "ident": "variable"}


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise FormulaSyntaxError(f"unknown token {text[i]!r}", text, i)
        if m.lastgroup != "ws":
            tokens.append((m.lastgroup, m.group(), i))
        i = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> str:
        return self.tokens[self.pos][0]

    def take(self, kind: str):
        tok = self.tokens[self.pos]
        if tok[0] != kind:
            self.fail(f"expected {_SPELLING.get(kind, kind)!r}")
        self.pos += 1
        return tok

    def fail(self, message: str):
        kind, value, idx = self.tokens[self.pos]
        found = "end of input" if kind == "eof" else repr(value)
        raise FormulaSyntaxError(f"{message}, found {found}", self.text, idx)

    def parse(self) -> Formula:
        f = self.iff()
        if self.peek() != "eof":
            self.fail("unexpected token")
        return f

    def iff(self) -> Formula:
        f = self.imp()
        while self.peek() == "iff":
            self.pos += 1
            f = Iff(f, self.imp())
        return f

    def imp(self) -> Formula:
        f = self.dis()
        if self.peek() == "imp":
            self.pos += 1
            return Implies(f, self.imp())
        return f

    def dis(self) -> Formula:
        f = self.fus()
        while self.peek() == "dis":
            self.pos += 1
            f = StrongDisj(f, self.fus())
        return f

    def fus(self) -> Formula:
        f = self.unary()
        while self.peek() == "fus":
            self.pos += 1
            f = Fusion(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind = self.peek()
        if kind == "not":
            self.pos += 1
            return Not(self.unary())
        if kind == "lp":
            self.pos += 1
            f = self.iff()
            self.take("rp")
            return f
        if kind == "ident":
            return Var(self.take("ident")[1])
        if kind == "const":
            return Const(int(self.take("const")[1]))
        self.fail("expected a formula")


def parse_formula(text: str) -> Formula:
    """Parse formula text into an AST.

    >>> parse_formula("x1 & x2 -> x3")
    Implies(left=Fusion(left=Var(name='x1'), right=Var(name='x2')), right=Var(name='x3'))
    """
    return _Parser(text).parse()


# ------------------------------------------------------------- formatting

_PREC = {Iff: 1, Implies: 2, StrongDisj: 3, Fusion: 4}
_RIGHT_ASSOC = {Implies}
_ASCII = {Iff: "<->", Implies: "->", StrongDisj: "|", Fusion: "&", Not: "~"}
_UNICODE = {Iff: "⇔", Implies: "⇒", StrongDisj: "⊕", Fusion: "⊗", Not: "¬"}


def _prec(f: Formula) -> int:
    return _PREC.get(type(f), 5)


def format_formula(f: Formula, unicode: bool = False) -> str:
    """Render with the fewest parentheses that still parse back to ``f``.

    ASCII output is spaced (``x & y``); the Unicode form is compact (``x⊗y``).
    """
    sym = _UNICODE if unicode else _ASCII
    sep = "" if unicode else " "

    def fmt(g: Formula) -> str:
        if isinstance(g, Var):
            return g.name
        if isinstance(g, Const):
            return str(g.value)
        if isinstance(g, Not):
            inner = fmt(g.child)
            if isinstance(g.child, BINARY):
                inner = f"({inner})"
            return sym[Not] + inner
        kind = type(g)
        p = _PREC[kind]
        left, right = fmt(g.left), fmt(g.right)
        if kind in _RIGHT_ASSOC:
            wrap_left, wrap_right = _prec(g.left) <= p, _prec(g.right) < p
        else:
            wrap_left, wrap_right = _prec(g.left) < p, _prec(g.right) <= p
        if wrap_left:
            left = f"({left})"
        if wrap_right:
            right = f"({right})"
        return f"{left}{sep}{sym[kind]}{sep}{right}"

    return fmt(f)


# -------------------------------------------------------------- semantics


def t_norm(x: Number, y: Number) -> Number:
    return np.maximum(0.0, x + y - 1.0)


def residuum(x: Number, y: Number) -> Number:
    return np.minimum(1.0, 1.0 - x + y)


def negation(x: Number) -> Number:
    return 1.0 - x


def strong_disjunction(x: Number, y: Number) -> Number:
    return np.minimum(1.0, x + y)


def equivalence(x: Number, y: Number) -> Number:
    return t_norm(residuum(x, y), residuum(y, x))


def eval_formula(f: Formula, assignment: Mapping[str, Number]) -> Number:
    """Evaluate ``f``; assignment values may be scalars or equal-length arrays."""

    def ev(g: Formula):
        if isinstance(g, Var):
            try:
                return assignment[g.name]
            except KeyError:
                raise KeyError(f"no truth value bound to variable {g.name!r}") from None
        if isinstance(g, Const):
            return float(g.value)
        if isinstance(g, Not):
            return negation(ev(g.child))
        a, b = ev(g.left), ev(g.right)
        if isinstance(g, Fusion):
            return t_norm(a, b)
        if isinstance(g, StrongDisj):
            return strong_disjunction(a, b)
        if isinstance(g, Implies):
            return residuum(a, b)
        if isinstance(g, Iff):
            return equivalence(a, b)
        raise TypeError(f"not a formula node: {g!r}")

    out = ev(f)
    if isinstance(out, np.ndarray) and out.ndim == 0:
        return float(out)
    if isinstance(out, np.floating):
        return float(out)
    return out


Valuation = Callable[[np.ndarray], np.ndarray]


def formula_valuation(f: Formula, names: Sequence[str]) -> Valuation:
    """Wrap ``f`` as a function of an (N, m) array whose columns follow ``names``."""
    names = list(names)

    def val(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        env = {name: x[:, i] for i, name in enumerate(names)}
        return np.broadcast_to(eval_formula(f, env), (x.shape[0],)).astype(float)

    return val


# ------------------------------------------------------------ truth tables


class RowBudgetExceeded(ValueError):
    pass


def grid_points(grain: LogicGrain, m: int, budget: int = DEFAULT_ROW_BUDGET) -> np.ndarray:
    """All of S_n^m in lexicographic order, each coordinate computed as i/n."""
    rows = (grain.n + 1) ** m
    if rows > budget:
        raise RowBudgetExceeded(f"{rows} rows exceed the row budget of {budget}")
    if m == 0:
        return np.zeros((1, 0))
    idx = np.array(list(itertools.product(range(grain.n + 1), repeat=m)), dtype=float)
    return idx / grain.n


@dataclass(frozen=True)
class TruthTable:
    variable_names: tuple[str, ...]
    grain: LogicGrain
    inputs: np.ndarray
    outputs: np.ndarray

    def __len__(self) -> int:
        return len(self.outputs)

    def rows(self) -> Iterator[tuple[tuple[float, ...], float]]:
        for x, y in zip(self.inputs, self.outputs):
            yield tuple(x), float(y)

    def to_csv(self, path) -> None:
        write_table_csv(path, self.variable_names, self.inputs, self.outputs)


def truth_subtable(
    f: Formula,
    grain: LogicGrain,
    budget: int = DEFAULT_ROW_BUDGET,
    names: Sequence[str] | None = None,
) -> TruthTable:
    """Evaluate ``f`` on all of S_n^m; columns default to first-occurrence order."""
    if names is None:
        names = variables(f)
    else:
        names = tuple(names)
        missing = set(variables(f)) - set(names)
        if missing:
            raise ValueError(f"names lack variables {sorted(missing)}")
    x = grid_points(grain, len(names), budget)
    y = formula_valuation(f, names)(x)
    return TruthTable(names, grain, x, y)


def write_table_csv(path, names: Sequence[str], inputs: np.ndarray, targets: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, "target"])
        for x, y in zip(inputs, targets):
            w.writerow([*(repr(float(v)) for v in x), repr(float(y))])


def grid_equivalent(
    f: Valuation,
    g: Valuation,
    grain: LogicGrain,
    m: int,
    tol: float = EQUALITY_TOL,
    cases: np.ndarray | None = None,
) -> tuple[bool, float]:
    """Compare two valuations on S_n^m (or on explicit ``cases``).

    Returns ``(equivalent, max_abs_deviation)``.
    """
    x = grid_points(grain, m) if cases is None else np.asarray(cases, dtype=float)
    if x.shape[1] != m:
        raise ValueError(f"case arity {x.shape[1]} does not match m={m}")
    a, b = np.asarray(f(x), dtype=float), np.asarray(g(x), dtype=float)
    if a.shape != b.shape:
        raise ValueError("valuations disagree on output shape (arity mismatch?)")
    dev = float(np.max(np.abs(a - b))) if len(a) else 0.0
    return dev <= tol, dev
