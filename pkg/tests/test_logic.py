import itertools

import numpy as np
import pytest

from formulas import random_formula
from lukanet.logic import (
    Const,
    Fusion,
    FormulaSyntaxError,
    Iff,
    Implies,
    LogicGrain,
    Not,
    RowBudgetExceeded,
    StrongDisj,
    Var,
    equivalence,
    eval_formula,
    format_formula,
    formula_valuation,
    grid_equivalent,
    grid_points,
    negation,
    parse_formula,
    residuum,
    strong_disjunction,
    t_norm,
    truth_subtable,
    variables,
)

x, y, z, w = Var("x"), Var("y"), Var("z"), Var("w")


def test_parse_precedence():
    assert parse_formula("x1 & x2 -> x3") == Implies(Fusion(Var("x1"), Var("x2")), Var("x3"))
    assert parse_formula("~x | y") == StrongDisj(Not(x), y)
    assert parse_formula("x -> y -> z") == Implies(x, Implies(y, z))
    assert parse_formula("x <-> y -> z") == Iff(x, Implies(y, z))
    assert parse_formula("x | y & z") == StrongDisj(x, Fusion(y, z))


def test_parse_left_assoc():
    assert parse_formula("x & y & z") == Fusion(Fusion(x, y), z)
    assert parse_formula("x | y | z") == StrongDisj(StrongDisj(x, y), z)
    assert parse_formula("x <-> y <-> z") == Iff(Iff(x, y), z)


def test_parse_unicode_aliases():
    assert parse_formula("¬x ⊕ y ⊗ z ⇒ w") == parse_formula("~x | y & z -> w")
    assert parse_formula("x ⇔ y") == Iff(x, y)


def test_parse_constants_and_names():
    assert parse_formula("A.b_2 & 1 | 0") == StrongDisj(Fusion(Var("A.b_2"), Const(1)), Const(0))
    assert parse_formula("~~x") == Not(Not(x))


@pytest.mark.parametrize(
    "text, offset",
    [("x & & y", 4), ("x ? y", 2), ("(x", 2), ("", 0), ("x y", 2), ("¬ & x", 3)],
)
def test_syntax_errors(text, offset):
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula(text)
    assert info.value.offset == offset


def test_syntax_error_mentions_paren():
    with pytest.raises(FormulaSyntaxError, match=r"'\)'"):
        parse_formula("(x & y")


def test_format_examples():
    assert format_formula(Fusion(x, y)) == "x & y"
    assert format_formula(Not(StrongDisj(x, y))) == "~(x | y)"
    assert format_formula(Implies(x, Implies(y, z))) == "x -> y -> z"
    assert format_formula(Implies(Implies(x, y), z)) == "(x -> y) -> z"
    assert format_formula(Fusion(x, Fusion(y, z))) == "x & (y & z)"
    assert format_formula(Fusion(Not(x), y), unicode=True) == "¬x⊗y"


def test_round_trip_random():
    rng = np.random.default_rng(7)
    names = ["a", "b", "c", "x.1"]
    for _ in range(1000):
        f = random_formula(rng, 6, names)
        assert parse_formula(format_formula(f)) == f
        assert parse_formula(format_formula(f, unicode=True)) == f


def test_eval_examples():
    assert eval_formula(Fusion(x, y), {"x": 0.6, "y": 0.7}) == pytest.approx(0.3)
    assert eval_formula(Implies(x, y), {"x": 0.8, "y": 0.5}) == pytest.approx(0.7)
    f = parse_formula("(x & y -> z) | (z -> w)")
    assert eval_formula(f, {"x": 1, "y": 1, "z": 0, "w": 0}) == 1


def test_eval_missing_variable():
    with pytest.raises(KeyError):
        eval_formula(Fusion(x, y), {"x": 0.5})


def test_variables_first_occurrence():
    assert variables(parse_formula("b & a | b -> c")) == ("b", "a", "c")
    assert variables(Const(1)) == ()


def test_connectives_match_definitions():
    v = LogicGrain(4).values
    a, b = np.meshgrid(v, v)
    assert np.array_equal(t_norm(a, b), np.maximum(0, a + b - 1))
    assert np.array_equal(residuum(a, b), np.minimum(1, 1 - a + b))
    assert np.array_equal(negation(a), 1 - a)
    assert np.array_equal(strong_disjunction(a, b), np.minimum(1, a + b))
    assert np.array_equal(
        equivalence(a, b), t_norm(residuum(a, b), residuum(b, a))
    )


def test_derived_connectives_agree_with_primitives():
    # ¬x := x -> 0 and x ⊕ y := ¬x -> y
    g = grid_points(LogicGrain(4), 2)
    env = {"x": g[:, 0], "y": g[:, 1]}
    assert np.allclose(eval_formula(Not(x), env), eval_formula(Implies(x, Const(0)), env))
    assert np.allclose(
        eval_formula(StrongDisj(x, y), env), eval_formula(Implies(Not(x), y), env)
    )


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_involution(n):
    rng = np.random.default_rng(n)
    names = ["a", "b", "c", "d"]
    pts = grid_points(LogicGrain(n), 4)
    for _ in range(30):
        f = random_formula(rng, 4, names)
        val = formula_valuation(f, names)
        # thirds are not dyadic, so 1 - (1 - x) may differ from x in the last bit
        assert np.allclose(formula_valuation(Not(Not(f)), names)(pts), val(pts), rtol=0, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_adjunction(n):
    v = LogicGrain(n).values
    for a, b, c in itertools.product(v, repeat=3):
        assert (t_norm(a, b) <= c + 1e-12) == (a <= residuum(b, c) + 1e-12)


def test_grid_closure():
    rng = np.random.default_rng(3)
    names = ["a", "b", "c"]
    for n in (1, 2, 3, 5):
        pts = grid_points(LogicGrain(n), 3)
        for _ in range(20):
            out = formula_valuation(random_formula(rng, 4, names), names)(pts)
            assert np.allclose(out * n, np.round(out * n))


def test_grain_values():
    assert LogicGrain(3).values.tolist() == [0.0, 1 / 3, 2 / 3, 1.0]
    with pytest.raises(ValueError):
        LogicGrain(0)


def test_truth_subtable_sizes():
    f = parse_formula("(x4 & x5 -> x6) & (x1 & x5 -> x2) & (x1 & x2 -> x3) & (x6 -> x4)")
    assert len(truth_subtable(f, LogicGrain(3))) == 4096


def test_truth_subtable_boolean_conjunction():
    t = truth_subtable(Fusion(x, y), LogicGrain(1))
    assert [r for r in t.rows()] == [
        ((0.0, 0.0), 0.0), ((0.0, 1.0), 0.0), ((1.0, 0.0), 0.0), ((1.0, 1.0), 1.0)
    ]


def test_truth_subtable_constant():
    t = truth_subtable(Const(1), LogicGrain(3))
    assert t.outputs.tolist() == [1.0]


def test_truth_subtable_extra_names():
    t = truth_subtable(x, LogicGrain(1), names=["y", "x"])
    assert t.variable_names == ("y", "x")
    assert t.outputs.tolist() == [0, 1, 0, 1]


def test_row_budget():
    with pytest.raises(RowBudgetExceeded):
        grid_points(LogicGrain(10), 12)


def test_csv(tmp_path):
    t = truth_subtable(Implies(x, y), LogicGrain(2))
    path = tmp_path / "t.csv"
    t.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,target"
    assert len(lines) == 10
    assert lines[2] == "0.0,0.5,1.0"


def test_grid_equivalent_examples():
    ok, dev = grid_equivalent(
        formula_valuation(StrongDisj(x, y), "xy"),
        formula_valuation(Not(Fusion(Not(x), Not(y))), "xy"),
        LogicGrain(4), 2,
    )
    assert ok and dev <= 1e-9
    ok, dev = grid_equivalent(
        formula_valuation(x, "x"), formula_valuation(Not(x), "x"), LogicGrain(1), 1
    )
    assert not ok and dev == 1.0
    f = formula_valuation(parse_formula("x -> y & x"), "xy")
    assert grid_equivalent(f, f, LogicGrain(3), 2) == (True, 0.0)


def test_grid_equivalent_arity_mismatch():
    f = formula_valuation(x, "x")
    with pytest.raises(ValueError):
        grid_equivalent(f, f, LogicGrain(1), 2, cases=np.zeros((2, 1)))
