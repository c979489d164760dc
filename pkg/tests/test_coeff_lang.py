import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peakscope.coeff_lang import (
    BinOp,
    CoefficientField,
    EvalDomainError,
    Num,
    ParseError,
    PositivityError,
    Var,
    eval_with_gradient,
    evaluate,
    parse,
    to_string,
)


def test_precedence_tree():
    tree = parse("1 + x1^2 + x2^2", 2)
    # left-associative sum
    assert tree == BinOp(
        "+",
        BinOp("+", Num(1.0), BinOp("^", Var(1), Num(2.0))),
        BinOp("^", Var(2), Num(2.0)),
    )


def test_power_is_right_associative():
    assert parse("2^3^2", 1) == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert evaluate(parse("2^3^2", 1), [0.0]).value == 512.0


def test_unary_minus_binds_looser_than_power():
    assert evaluate(parse("-x1^2", 1), [3.0]).value == -9.0


def test_nested_call_parses():
    parse("exp(-(x1-1)^2)", 3)


def test_index_beyond_dimension():
    with pytest.raises(ParseError, match="exceeds dimension"):
        parse("x4", 3)


@pytest.mark.parametrize(
    "text, offset",
    [("1 + ", 4), ("x1 $ 2", 3), ("foo(x1)", 0), ("(x1", 3), ("x1 ^ x1", 3), ("", 0)],
)
def test_syntax_errors_carry_byte_offsets(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text, 2)
    assert info.value.offset == offset


def test_offsets_are_bytes_not_characters():
    with pytest.raises(ParseError) as info:
        parse("1 + é", 1)
    assert info.value.offset == 4


def test_worked_gradients():
    assert eval_with_gradient(parse("1 + x1^2", 1), [3.0])[0] == 10.0
    assert eval_with_gradient(parse("1 + x1^2", 1), [3.0])[1].tolist() == [6.0]
    value, grad = eval_with_gradient(parse("exp(x1*x2)", 2), [0.0, 5.0])
    assert value == 1.0 and grad.tolist() == [5.0, 0.0]
    value, grad = eval_with_gradient(parse("sqrt(x1)", 1), [4.0])
    assert value == 2.0 and grad.tolist() == [0.25]


@pytest.mark.parametrize("text, z", [("log(x1)", [0.0]), ("1/x1", [0.0]), ("sqrt(x1)", [-1.0])])
def test_domain_errors_name_subexpression(text, z):
    with pytest.raises(EvalDomainError) as info:
        evaluate(parse(text, 1), z)
    assert info.value.subexpression is not None


def test_abs_kink_flags_nonsmooth():
    d = evaluate(parse("abs(x1) + x2", 2), [0.0, 1.0])
    assert d.nonsmooth
    assert d.grad.tolist() == [0.0, 1.0]
    assert not evaluate(parse("abs(x1)", 1), [2.0]).nonsmooth


def _polynomial(rng, n):
    terms = []
    for _ in range(rng.integers(1, 5)):
        coef = round(float(rng.uniform(-3, 3)), 3)
        factors = [f"x{rng.integers(1, n + 1)}^{rng.integers(1, 4)}" for _ in range(rng.integers(1, 3))]
        terms.append(f"({coef})*" + "*".join(factors))
    return " + ".join(terms)


def test_forward_mode_matches_finite_differences_on_random_polynomials():
    rng = np.random.default_rng(20240601)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        expr = parse(_polynomial(rng, n), n)
        z = rng.uniform(-2, 2, n)
        _, grad = eval_with_gradient(expr, z)
        h = 1e-6 * (1 + np.linalg.norm(z))
        fd = np.array(
            [
                (evaluate(expr, z + h * e).value - evaluate(expr, z - h * e).value) / (2 * h)
                for e in np.eye(n)
            ]
        )
        scale = max(1.0, np.max(np.abs(grad)))
        assert np.max(np.abs(grad - fd)) <= 1e-6 * scale


_atoms = st.one_of(
    st.floats(0, 100, allow_nan=False).map(lambda x: f"{x!r}"),
    st.integers(1, 3).map(lambda i: f"x{i}"),
)


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/"), children).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(children, st.integers(0, 3)).map(lambda t: f"{t[0]}^{t[1]}"),
        children.map(lambda c: f"-{c}"),
        st.tuples(st.sampled_from(["exp", "log", "sin", "tanh", "abs"]), children).map(
            lambda t: f"{t[0]}({t[1]})"
        ),
    )


@settings(max_examples=200, deadline=None)
@given(st.recursive(_atoms, _combine, max_leaves=12))
def test_print_round_trip(text):
    tree = parse(text, 3)
    assert parse(to_string(tree), 3) == tree


def test_evaluation_is_deterministic():
    e = parse("sin(x1) * exp(x2) / (1 + x3^2)", 3)
    a = eval_with_gradient(e, [0.3, -0.2, 1.5])
    b = eval_with_gradient(e, [0.3, -0.2, 1.5])
    assert a[0] == b[0] and np.array_equal(a[1], b[1])


def test_coefficient_field_gradients_and_positivity():
    field = CoefficientField.from_strings("2", "1 + x1^2", "1 + x2", 2)
    assert field.values([1.0, 0.5]) == (2.0, 2.0, 1.5)
    np.testing.assert_array_equal(field.gradients([1.0, 0.5]), [[0, 0], [2, 0], [0, 1]])
    lows = field.certify_positive([(-1, 1), (-0.5, 0.5)])
    assert lows["V"] == pytest.approx(1.0) and lows["K"] == pytest.approx(0.5)
    with pytest.raises(PositivityError) as info:
        field.certify_positive([(-1, 1), (-2, 0)])
    assert info.value.name == "K"
