"""Single-neuron analysis: classification, rule R rewriting and λ-similarity.

A neuron ``ψ_b(w1·x1, ..., wm·xm)`` with weights in {-1, 0, 1} and an integer
bias is either a constant, a conjunction or disjunction of literals, or
un-representable.  Un-representable neurons are approximated by the most
similar binary network obtained by repeatedly peeling one input off into a
two-input neuron (rule R).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence, Union

import numpy as np

from .logic import (
    Const,
    Formula,
    Fusion,
    LogicGrain,
    Not,
    StrongDisj,
    Var,
    Valuation,
    count_negations,
    format_formula,
    grid_points,
)
from .network import psi

#: Upper bound on enumerated decompositions of one neuron.
DECOMPOSITION_CAP = 20_000


class NeuronClass(enum.Enum):
    CONJUNCTION = "conjunction"
    DISJUNCTION = "disjunction"
    CONSTANT_ZERO = "constant_zero"
    CONSTANT_ONE = "constant_one"
    UNREPRESENTABLE = "unrepresentable"

    @property
    def is_constant(self) -> bool:
        return self in (NeuronClass.CONSTANT_ZERO, NeuronClass.CONSTANT_ONE)


@dataclass(frozen=True)
class NeuronConfig:
    weights: tuple[int, ...]
    bias: int

    def __post_init__(self):
        w = tuple(int(v) for v in self.weights)
        if any(v not in (-1, 0, 1) for v in w):
            raise ValueError(f"weights must be in {{-1, 0, 1}}, got {self.weights}")
        if int(self.bias) != self.bias:
            raise ValueError(f"bias must be an integer, got {self.bias}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", int(self.bias))

    @property
    def fan_in(self) -> int:
        return len(self.weights)

    @property
    def negatives(self) -> int:
        return sum(1 for w in self.weights if w < 0)

    @property
    def positives(self) -> int:
        return sum(1 for w in self.weights if w > 0)

    @property
    def support(self) -> tuple[int, ...]:
        """Indices of inputs with a nonzero weight."""
        return tuple(i for i, w in enumerate(self.weights) if w)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return psi(x @ np.asarray(self.weights, dtype=float) + self.bias)

    def __str__(self) -> str:
        args = ",".join(f"{'-' if w < 0 else ''}x{i + 1}" for i, w in enumerate(self.weights) if w)
        return f"ψ_{self.bias}({args})"


def parse_neuron_spec(text: str) -> tuple[NeuronConfig, tuple[str, ...]]:
    """Read the ``"b; ±name,±name,..."`` mini-syntax, e.g. ``"0; -x1,x2,x3"``."""
    try:
        bias_text, inputs_text = text.split(";")
        bias = int(bias_text.strip())
        weights, names = [], []
        for item in inputs_text.split(","):
            item = item.strip()
            sign = -1 if item.startswith("-") else 1
            name = item.lstrip("+-").strip()
            if not name:
                raise ValueError("empty input name")
            weights.append(sign)
            names.append(name)
    except ValueError as exc:
        raise ValueError(f"malformed neuron spec {text!r}: expected 'b; ±x,±y,...'") from exc
    return NeuronConfig(tuple(weights), bias), tuple(names)


def classify_neuron(cfg: NeuronConfig) -> NeuronClass:
    n, p, b = cfg.negatives, cfg.positives, cfg.bias
    if b <= -p:
        return NeuronClass.CONSTANT_ZERO
    if b >= n + 1:
        return NeuronClass.CONSTANT_ONE
    if b == 1 - p:
        return NeuronClass.CONJUNCTION
    if b == n:
        return NeuronClass.DISJUNCTION
    return NeuronClass.UNREPRESENTABLE


def is_representable(cfg: NeuronConfig) -> bool:
    return classify_neuron(cfg) is not NeuronClass.UNREPRESENTABLE


class UnrepresentableNeuron(ValueError):
    pass


def neuron_to_formula(cfg: NeuronConfig, input_formulas: Sequence[Formula]) -> Formula:
    """Translate a representable neuron into a formula over ``input_formulas``."""
    if len(input_formulas) != cfg.fan_in:
        raise ValueError(f"{cfg.fan_in} inputs expected, got {len(input_formulas)}")
    kind = classify_neuron(cfg)
    if kind is NeuronClass.CONSTANT_ZERO:
        return Const(0)
    if kind is NeuronClass.CONSTANT_ONE:
        return Const(1)
    if kind is NeuronClass.UNREPRESENTABLE:
        raise UnrepresentableNeuron(f"{cfg} is not a conjunction or disjunction")
    join = Fusion if kind is NeuronClass.CONJUNCTION else StrongDisj
    literals = [
        negate(f) if w < 0 else f for w, f in zip(cfg.weights, input_formulas) if w
    ]
    out = literals[0]
    for lit in literals[1:]:
        out = join(out, lit)
    return out


def negate(f: Formula) -> Formula:
    """Negation pushed through fusions and disjunctions (De Morgan holds in
    Łukasiewicz logic), with double negations cancelled."""
    if isinstance(f, Not):
        return f.child
    if isinstance(f, Const):
        return Const(1 - f.value)
    if isinstance(f, Fusion):
        return StrongDisj(negate(f.left), negate(f.right))
    if isinstance(f, StrongDisj):
        return Fusion(negate(f.left), negate(f.right))
    return Not(f)


# ------------------------------------------------------ binary neuron trees

Operand = Union[int, "NeuronTree"]


@dataclass(frozen=True)
class NeuronTree:
    """A network of neurons over inputs ``x[0..m-1]``; operands are input indices or subtrees."""

    operands: tuple[tuple[int, Operand], ...]
    bias: int

    @classmethod
    def from_config(cls, cfg: NeuronConfig) -> "NeuronTree":
        return cls(tuple((w, i) for i, w in enumerate(cfg.weights) if w), cfg.bias)

    @property
    def config(self) -> NeuronConfig:
        return NeuronConfig(tuple(w for w, _ in self.operands), self.bias)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = np.full(x.shape[0], float(self.bias))
        for w, op in self.operands:
            z = z + w * (op(x) if isinstance(op, NeuronTree) else x[:, op])
        return psi(z)

    def is_binary(self) -> bool:
        return len(self.operands) <= 2 and all(
            op.is_binary() for _, op in self.operands if isinstance(op, NeuronTree)
        )

    def to_formula(self, input_formulas: Sequence[Formula]) -> Formula:
        args = [
            op.to_formula(input_formulas) if isinstance(op, NeuronTree) else input_formulas[op]
            for _, op in self.operands
        ]
        return neuron_to_formula(self.config, args)

    @cached_property
    def key(self) -> tuple:
        """Canonical form, invariant under reordering of operands."""
        parts = sorted(
            (w, op.key if isinstance(op, NeuronTree) else ("x", op)) for w, op in self.operands
        )
        return ("n", self.bias, tuple(parts))

    def __str__(self) -> str:
        parts = []
        for w, op in self.operands:
            arg = str(op) if isinstance(op, NeuronTree) else f"x{op + 1}"
            parts.append(("-" if w < 0 else "") + arg)
        return f"ψ_{self.bias}({','.join(parts)})"


@dataclass(frozen=True)
class RSplit:
    """One application of rule R to a neuron.

    The ``separated_input`` is peeled into the two-input ``outer`` neuron
    (bias ``b1``) whose second operand is the link, weight 1, from ``inner``:
    the source neuron minus that input (bias ``b0``).  ``b0 + b1 = b`` and
    ``b1 <= b0``; input indices refer to the source neuron.
    """

    outer: NeuronConfig
    inner: NeuronConfig
    separated_input: int
    remaining_inputs: tuple[int, ...]

    def as_tree(self, inner: Operand | None = None) -> NeuronTree:
        if inner is None:
            inner = NeuronTree(
                tuple((w, i) for w, i in zip(self.inner.weights, self.remaining_inputs)),
                self.inner.bias,
            )
        return NeuronTree(((self.outer.weights[0], self.separated_input), (1, inner)), self.outer.bias)


def _splits(
    operands: Sequence[tuple[int, int]], bias: int, reduce_symmetry: bool
) -> Iterator[RSplit]:
    if reduce_symmetry:
        # same-sign inputs are interchangeable; peel the last of each sign
        last = {}
        for w, i in operands:
            last[w] = i
        peel = [(w, i) for w, i in operands if last[w] == i]
    else:
        peel = list(operands)
    for w_k, k in peel:
        rest = [(w, i) for w, i in operands if i != k]
        rest_cfg_weights = tuple(w for w, _ in rest)
        p = sum(1 for w, _ in rest if w > 0)
        n = len(rest) - p
        # inner bias b0 must keep the residual non-constant: -p < b0 < n + 1
        for b0 in range(n, -p, -1):
            b1 = bias - b0
            if b1 > b0:
                continue
            outer = NeuronConfig((w_k, 1), b1)
            if classify_neuron(outer).is_constant:
                continue
            yield RSplit(outer, NeuronConfig(rest_cfg_weights, b0), k, tuple(i for _, i in rest))


def rule_r_splits(cfg: NeuronConfig, reduce_symmetry: bool = True) -> list[RSplit]:
    """All one-step rule R rewritings of ``cfg``.

    With ``reduce_symmetry`` (default) splits differing only by which of
    several same-signed inputs is peeled are reported once.
    """
    operands = [(cfg.weights[i], i) for i in cfg.support]
    if len(operands) < 3:
        return []
    seen, out = set(), []
    for split in _splits(operands, cfg.bias, reduce_symmetry):
        key = (split.as_tree().key if not reduce_symmetry else
               (split.outer, split.inner))
        if key not in seen:
            seen.add(key)
            out.append(split)
    return out


class DecompositionBudgetExceeded(RuntimeError):
    pass


def _decompose(
    operands: tuple[tuple[int, int], ...], bias: int, reduce_symmetry: bool
) -> Iterator[NeuronTree]:
    if len(operands) <= 2:
        yield NeuronTree(operands, bias)
        return
    for split in _splits(operands, bias, reduce_symmetry):
        rest = tuple(zip(split.inner.weights, split.remaining_inputs))
        for sub in _decompose(rest, split.inner.bias, reduce_symmetry):
            yield split.as_tree(sub)


def decomposition_set(
    cfg: NeuronConfig, reduce_symmetry: bool = True, cap: int = DECOMPOSITION_CAP
) -> list[NeuronTree]:
    """The set S(cfg) of binary networks reachable by exhaustive rule R.

    ``reduce_symmetry`` keeps one representative per permutation of
    same-signed inputs; that loses nothing when similarity is measured on
    a permutation-invariant case set such as a full grid.  Raises
    :class:`DecompositionBudgetExceeded` past ``cap`` generated trees.
    """
    operands = tuple((cfg.weights[i], i) for i in cfg.support)
    if len(operands) < 2:
        return [NeuronTree.from_config(cfg)]
    seen: dict[tuple, NeuronTree] = {}
    for count, tree in enumerate(_decompose(operands, cfg.bias, reduce_symmetry), 1):
        if count > cap:
            raise DecompositionBudgetExceeded(f"more than {cap} decompositions of {cfg}")
        seen.setdefault(tree.key, tree)
    return list(seen.values())


# ---------------------------------------------------------------- similarity


def _cases(grain: LogicGrain | None, m: int | None, cases) -> np.ndarray:
    if cases is not None:
        x = np.atleast_2d(np.asarray(cases, dtype=float))
    elif grain is not None and m is not None:
        x = grid_points(grain, m)
    else:
        raise ValueError("need either a case set or a grain and arity")
    if len(x) == 0:
        raise ValueError("similarity needs a nonempty case set")
    return x


def lambda_similarity(
    a: Valuation,
    b: Valuation,
    grain: LogicGrain | None = None,
    m: int | None = None,
    cases: np.ndarray | None = None,
) -> float:
    """exp(-mean |a - b|) over the full grid S_n^m or over ``cases``."""
    x = _cases(grain, m, cases)
    dev = np.abs(np.asarray(a(x), dtype=float) - np.asarray(b(x), dtype=float))
    return math.exp(-float(dev.mean()))


def _placeholder_vars(m: int) -> list[Formula]:
    return [Var(f"x{i + 1}") for i in range(m)]


def _rank_key(tree: NeuronTree, lam: float, m: int) -> tuple:
    f = tree.to_formula(_placeholder_vars(m))
    return (-lam, count_negations(f), format_formula(f, unicode=True))


def _greedy(cfg: NeuronConfig, x: np.ndarray, target: np.ndarray) -> NeuronTree:
    """Peel one input at a time, keeping the partial network closest to ``cfg``."""
    m = cfg.fan_in
    chain: list[RSplit] = []
    operands = tuple((cfg.weights[i], i) for i in cfg.support)
    bias = cfg.bias

    def assemble(inner: Operand) -> NeuronTree:
        for split in reversed(chain):
            inner = split.as_tree(inner)
        return inner

    while len(operands) > 2:
        best = None
        for split in _splits(operands, bias, reduce_symmetry=False):
            tree = assemble(split.as_tree())
            lam = math.exp(-float(np.abs(tree(x) - target).mean()))
            key = (-lam, split.separated_input, -split.inner.bias)
            if best is None or key < best[0]:
                best = (key, split)
        if best is None:
            break
        split = best[1]
        chain.append(split)
        operands = tuple(zip(split.inner.weights, split.remaining_inputs))
        bias = split.inner.bias
    return assemble(NeuronTree(operands, bias))


def best_approximation(
    cfg: NeuronConfig,
    cases: LogicGrain | np.ndarray,
    greedy_fallback: bool = True,
    cap: int = DECOMPOSITION_CAP,
) -> tuple[NeuronTree, float]:
    """Most λ-similar member of S(cfg) on ``cases``.

    ``cases`` is a grain (full grid, symmetric, so S is enumerated up to
    input symmetry) or an explicit (N, m) case matrix.  Ties go to fewer
    negations, then the lexicographically smaller Unicode formula text.
    Past ``cap`` the search turns greedy unless ``greedy_fallback`` is off.
    """
    if is_representable(cfg):
        return NeuronTree.from_config(cfg), 1.0
    if isinstance(cases, LogicGrain):
        x, symmetric = grid_points(cases, cfg.fan_in), True
    else:
        x, symmetric = _cases(None, None, cases), False
    target = cfg(x)
    try:
        members = decomposition_set(cfg, reduce_symmetry=symmetric, cap=cap)
    except DecompositionBudgetExceeded:
        if not greedy_fallback:
            raise
        tree = _greedy(cfg, x, target)
        return tree, math.exp(-float(np.abs(tree(x) - target).mean()))
    if not members:
        raise ValueError(f"rule R produces no decomposition of {cfg}")
    scored = []
    for tree in members:
        lam = math.exp(-float(np.abs(tree(x) - target).mean()))
        scored.append((_rank_key(tree, lam, cfg.fan_in), tree, lam))
    scored.sort(key=lambda t: t[0])
    return scored[0][1], scored[0][2]


def rank_decompositions(
    cfg: NeuronConfig, cases: LogicGrain | np.ndarray, cap: int = DECOMPOSITION_CAP
) -> list[tuple[NeuronTree, float]]:
    """All of S(cfg) with their similarity to ``cfg``, best first."""
    if isinstance(cases, LogicGrain):
        x, symmetric = grid_points(cases, cfg.fan_in), True
    else:
        x, symmetric = _cases(None, None, cases), False
    target = cfg(x)
    scored = []
    for tree in decomposition_set(cfg, reduce_symmetry=symmetric, cap=cap):
        lam = math.exp(-float(np.abs(tree(x) - target).mean()))
        scored.append((_rank_key(tree, lam, cfg.fan_in), tree, lam))
    scored.sort(key=lambda t: t[0])
    return [(tree, lam) for _, tree, lam in scored]
