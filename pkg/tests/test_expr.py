import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contact_tops.expr import (BinOp, Call, DivisionByZeroError, EvaluationError, ExprSyntaxError,
                               FDConfig, Neg, Num, UnknownFunctionError, UnknownIdentifierError, Var, compile_exprs,
                               compile_expr, directional_derivative, eval_expr, jacobian_fd, parse,
                               to_source, variables)

T = ["t1", "t2", "t3"]
X = ["x", "y", "z"]


def test_parse_function_application():
    assert parse("cos(t1)", T) == Call("cos", Var("t1"))


def test_parse_precedence():
    assert parse("t2 - 0.5*t1", T) == BinOp("-", Var("t2"), BinOp("*", Num(0.5), Var("t1")))


def test_parse_left_associative():
    assert parse("x - y - z", X) == BinOp("-", BinOp("-", Var("x"), Var("y")), Var("z"))
    assert eval_expr(parse("8/4/2", X), {}) == 1.0


def test_unary_minus_binds_tighter_than_product():
    assert parse("-x*y", X) == BinOp("*", Neg(Var("x")), Var("y"))
    assert eval_expr(parse("--x", X), {"x": 2}) == 2.0


def test_unknown_identifier_reports_position():
    with pytest.raises(UnknownIdentifierError) as err:
        parse("cos(t1 + e*t2)", T)
    assert err.value.position == 9


def test_unknown_function():
    with pytest.raises(UnknownFunctionError) as err:
        parse("1 + tan(x)", X)
    assert err.value.position == 4


@pytest.mark.parametrize("src,pos", [("1 +", 3), ("(x", 2), ("x y", 2), ("2 $ 3", 2), ("   ", 0), ("sin()", 4)])
def test_syntax_errors(src, pos):
    with pytest.raises(ExprSyntaxError) as err:
        parse(src, X)
    assert err.value.position == pos


def test_numbers_with_exponent():
    assert eval_expr(parse("1.5e-3*x", X), {"x": 2}) == pytest.approx(3e-3)
    assert eval_expr(parse(".5", X), {}) == 0.5


def test_eval_examples():
    assert eval_expr(parse("cos(t1)", T), {"t1": 0.0}) == 1.0
    assert eval_expr(parse("t1*t2", T), {"t1": 2, "t2": 3}) == 6.0


def test_division_by_zero():
    with pytest.raises(DivisionByZeroError):
        eval_expr(parse("1/t1", T), {"t1": 0.0})
    f = compile_expr(parse("1/t1", T), T)
    with pytest.raises(DivisionByZeroError):
        f(np.array([[1.0, 0, 0], [0.0, 0, 0]]))


@pytest.mark.parametrize("src", ["sqrt(x - 2)", "exp(1000*x)"])
def test_non_finite_results(src):
    with pytest.raises(EvaluationError):
        eval_expr(parse(src, X), {"x": 1.0})
    with pytest.raises(EvaluationError):
        compile_expr(parse(src, X), X)(np.array([1.0, 0, 0]))


def test_missing_value():
    with pytest.raises(EvaluationError):
        eval_expr(parse("x + y", X), {"x": 1.0})


def test_variables():
    assert variables(parse("sin(x)*exp(z) + 2", X)) == {"x", "z"}


def test_compiled_matches_pointwise():
    e = parse("sin(x + 0.5*y)*exp(-z) - sqrt(1 + x*x)/(2 + cos(y))", X)
    f = compile_expr(e, X)
    pts = np.random.default_rng(0).uniform(-2, 2, (20, 3))
    ref = [eval_expr(e, dict(zip(X, p))) for p in pts]
    assert np.allclose(f(pts), ref, rtol=0, atol=1e-14)
    assert f(pts.reshape(4, 5, 3)).shape == (4, 5)


def test_constant_broadcasts():
    assert compile_expr(parse("2", X), X)(np.zeros((6, 3))).shape == (6,)


# --- printer round trip -------------------------------------------------------

def _exprs():
    leaf = st.one_of(st.sampled_from([Var(v) for v in X]),
                     st.floats(-3, 3, allow_nan=False).map(Num))

    def extend(sub):
        return st.one_of(
            st.tuples(st.sampled_from("+-*"), sub, sub).map(lambda t: BinOp(*t)),
            st.tuples(sub, sub).map(lambda t: BinOp("/", t[0], BinOp("+", Num(2.0), Call("cos", t[1])))),
            sub.map(Neg),
            sub.map(lambda e: Call("sin", e)),
            sub.map(lambda e: Call("cos", e)),
            sub.map(lambda e: Call("exp", Call("sin", e))),
            sub.map(lambda e: Call("sqrt", BinOp("+", Num(1.0), BinOp("*", e, e)))),
        )
    return st.recursive(leaf, extend, max_leaves=12)


POINTS = np.random.default_rng(7).uniform(-1.5, 1.5, (100, 3))


@settings(max_examples=100, deadline=None)
@given(_exprs())
def test_print_parse_round_trip(e):
    src = to_source(e)
    back = parse(src, X)
    assert to_source(back) == src
    a = compile_expr(e, X)(POINTS)
    b = compile_expr(back, X)(POINTS)
    assert np.abs(a - b).max(initial=0.0) < 1e-12


def test_printer_keeps_needed_parentheses():
    e = BinOp("-", Var("x"), BinOp("-", Var("y"), Var("z")))
    assert to_source(e) == "x - (y - z)"
    assert to_source(BinOp("*", Var("x"), Num(-2.0))) == "x * -2.0"
    assert to_source(Neg(BinOp("+", Var("x"), Var("y")))) == "-(x + y)"


# --- finite differences -------------------------------------------------------

def test_directional_derivative_examples():
    sq = lambda x: x[..., 0] ** 2
    assert directional_derivative(sq, [1.0, 0, 0], [1.0, 0, 0]) == pytest.approx(2.0, abs=1e-9)
    assert directional_derivative(lambda x: 3.0 + 0 * x[..., 0], [0.2, 0.1, 0], [1.0, 2, 3]) == 0.0
    sin = lambda x: np.sin(x[..., 0])
    assert directional_derivative(sin, [0.0, 0, 0], [1.0, 0, 0]) == pytest.approx(1.0, abs=1e-10)


vec = st.lists(st.floats(-1, 1), min_size=3, max_size=3).map(np.array)


@settings(max_examples=50, deadline=None)
@given(vec, vec, vec, st.floats(-2, 2), st.floats(-2, 2))
def test_directional_derivative_is_linear(x, v, w, a, b):
    f = lambda p: np.sin(p[..., 0]) * np.exp(p[..., 1]) + p[..., 2] ** 3
    lhs = directional_derivative(f, x, a * v + b * w)
    rhs = a * directional_derivative(f, x, v) + b * directional_derivative(f, x, w)
    assert abs(lhs - rhs) < 1e-8


@settings(max_examples=50, deadline=None)
@given(vec, vec, st.lists(st.floats(-2, 2), min_size=6, max_size=6))
def test_quadratics_differentiate_exactly(x, v, coef):
    a = np.array(coef)
    f = lambda p: a[0] * p[..., 0] ** 2 + a[1] * p[..., 0] * p[..., 1] + a[2] * p[..., 2] ** 2 \
        + a[3] * p[..., 1] + a[4] * p[..., 2] + a[5]
    grad = np.array([2 * a[0] * x[0] + a[1] * x[1], a[1] * x[0] + a[3], 2 * a[2] * x[2] + a[4]])
    assert abs(directional_derivative(f, x, v) - grad @ v) < 1e-9


def test_jacobian_examples():
    x = np.array([0.3, -0.2, 0.5])
    assert np.abs(jacobian_fd(lambda p: p, x) - np.eye(3)).max() < 1e-10
    perm = jacobian_fd(lambda p: p[..., [1, 0, 2]], x)
    assert np.abs(perm - np.eye(3)[[1, 0, 2]]).max() < 1e-10
    q = np.array([0.5, 0.5, 0.5, 0.5])
    flip = jacobian_fd(lambda p: p * np.array([1, 1, -1, -1]), q)
    assert np.abs(flip - np.diag([1.0, 1, -1, -1])).max() < 1e-10


def test_jacobian_is_batched():
    pts = np.random.default_rng(1).normal(size=(5, 2, 3))
    J = jacobian_fd(lambda p: np.stack([p[..., 0] * p[..., 1], np.sin(p[..., 2])], -1), pts)
    assert J.shape == (5, 2, 2, 3)
    assert np.allclose(J[..., 0, 0], pts[..., 1], atol=1e-9)
    assert np.allclose(J[..., 1, 2], np.cos(pts[..., 2]), atol=1e-9)


def test_fd_config_validation():
    with pytest.raises(ValueError):
        FDConfig(h=0.0)
    with pytest.raises(ValueError):
        FDConfig(order=4)
    assert FDConfig().h == 1e-5


def test_compile_many_matches_single():
    srcs = ["sin(x)*y", "2", "exp(z) - x/(2 + cos(y))"]
    exprs = [parse(s, X) for s in srcs]
    pts = np.random.default_rng(2).uniform(-1, 1, (4, 3, 3))
    many = compile_exprs(exprs, X)(pts)
    assert many.shape == (4, 3, 3)
    for i, e in enumerate(exprs):
        assert np.array_equal(many[..., i], np.broadcast_to(compile_expr(e, X)(pts), (4, 3)))
    with pytest.raises(EvaluationError):
        compile_exprs([parse("sqrt(x)", X)], X)(np.array([-1.0, 0, 0]))
