from safmodel.solver import *
from safmodel.algebra import BINARY, CONTINUOUS, EQ, GE, LE, ModelIR, assemble_model
from safmodel.cases import ChainCase, ElectrolysisCase, HeatPairCase, TwoRouteCase, VentCase
from safmodel.modelfile import LP_HEADER, MPS_HEADER, ModelFileError, read_model

import itertools

import numpy as np
import pytest
from scipy.optimize import brentq, linprog

OPTS = SolverOptions(rel_gap=1e-6, abs_gap=1e-7)


def product_model(x_hi=1.0, y_kind=CONTINUOUS, y_hi=1.0):
    """``z = x * y`` over a box, nothing else"""
    m = ModelIR()
    x = m.add_var(("x",), CONTINUOUS, 0.0, x_hi)
    y = m.add_var(("y",), y_kind, 0.0, y_hi)
    z = m.add_var(("z",), CONTINUOUS, 0.0, x_hi * y_hi)
    m.add_bilinear(z, x, y)
    return m


def z_range(model, lo, hi):
    """Smallest and largest product value of the relaxation with fixed factors"""
    lp = relax_bilinear(model)
    lp = lp._replace(lo=lo, hi=hi)
    z = model.var(("z",)).id
    c = np.zeros(len(model))
    c[z] = 1.0
    low = solve_lp(lp._replace(c=c, constant=0.0))
    high = solve_lp(lp._replace(c=-c, constant=0.0))
    assert low.status == OPTIMAL and high.status == OPTIMAL
    return low.x[z], high.x[z]


def check_optimal(sol, objective, tol=1e-5):
    diff = []
    if sol.status != OPTIMAL:
        diff.append("status mismatch: expected {}, got {}".format(OPTIMAL, sol.status))
    elif abs(sol.objective - objective) > tol * max(1.0, abs(objective)):
        diff.append("objective mismatch: expected {}, got {}".format(objective, sol.objective))
    elif sol.bound > sol.objective + 1e-9 * max(1.0, abs(objective)):
        diff.append("bound {} above objective {}".format(sol.bound, sol.objective))
    if len(diff) > 0:
        msg = "Check failed\n{}".format("\n  ".join(diff))
        pytest.fail(msg)


def test_lp_hand():
    """max x + 2y s.t. x + y <= 1"""
    res = solve_lp(RelaxedLP([-1.0, -2.0], [[1.0, 1.0]], [1.0]))
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(-2.0)
    assert list(res.x) == pytest.approx([0.0, 1.0])


def test_lp_infeasible():
    res = solve_lp(RelaxedLP([1.0], [[1.0]], [-1.0]))
    assert res.status == INFEASIBLE
    assert res.x is None


def test_lp_unbounded():
    res = solve_lp(RelaxedLP([-1.0]))
    assert res.status == UNBOUNDED


def test_lp_free_and_equality():
    """min x + y s.t. x - y = 1, x >= -3 with x, y free"""
    lp = RelaxedLP([1.0, 1.0], [[-1.0, 0.0]], [3.0], [[1.0, -1.0]], [1.0], [-np.inf, -np.inf], [np.inf, np.inf])
    res = solve_lp(lp)
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(-7.0)
    assert list(res.x) == pytest.approx([-3.0, -4.0])


def test_lp_constant():
    res = solve_lp(RelaxedLP([1.0], lo=[2.0], hi=[5.0], constant=10.0))
    assert res.objective == pytest.approx(12.0)


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_lp_random(backend):
    """Random bounded LPs agree with scipy's HiGHS"""
    rng = np.random.default_rng(12)
    for _ in range(30):
        n, m = rng.integers(2, 7), rng.integers(1, 6)
        A = rng.uniform(0.1, 1.0, size=(m, n))
        b = rng.uniform(1.0, 5.0, size=m)
        c = rng.normal(size=n)
        hi = np.where(rng.uniform(size=n) < 0.3, rng.uniform(0.5, 2.0, size=n), np.inf)
        ref = linprog(c, A_ub=A, b_ub=b, bounds=list(zip(np.zeros(n), [None if not np.isfinite(h) else h
                                                                          for h in hi])), method="highs")
        res = solve_lp(RelaxedLP(c, A, b, hi=hi), backend)
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)


def test_mccormick_rows():
    m = product_model()
    lp = relax_bilinear(m)
    assert lp.mccormick == {0: [0, 1, 2, 3]}
    assert lp.A_ub.shape == (4, 3)


def test_mccormick_envelope():
    """At x = y = 0.5 the relaxation allows z in [0, 0.5]"""
    m = product_model()
    low, high = z_range(m, [0.5, 0.5, 0.0], [0.5, 0.5, 1.0])
    assert low == pytest.approx(0.0, abs=1e-9)
    assert high == pytest.approx(0.5, abs=1e-9)
    assert low <= 0.25 <= high


def test_mccormick_tighter_box():
    m = product_model()
    wide = z_range(m, [0.5, 0.5, 0.0], [0.5, 0.5, 1.0])
    m.set_bounds(("x",), 0.4, 0.6)
    narrow = z_range(m, [0.5, 0.5, 0.0], [0.5, 0.5, 1.0])
    assert narrow[1] - narrow[0] < wide[1] - wide[0]
    assert narrow[0] <= 0.25 <= narrow[1]


@pytest.mark.parametrize("y,expected", [(0.0, 0.0), (1.0, 1.3)])
def test_mccormick_binary_exact(y, expected):
    """With a binary factor at 0 or 1 the envelope collapses to the product"""
    m = product_model(x_hi=2.0, y_kind=BINARY)
    assert m.bilinears[0].exactness == EXACT_BINARY
    low, high = z_range(m, [1.3, y, 0.0], [1.3, y, 2.0])
    assert low == pytest.approx(expected, abs=1e-9)
    assert high == pytest.approx(expected, abs=1e-9)


def test_product_maximum():
    """max x * y s.t. x + y <= 1"""
    m = product_model()
    m.add_constraint([(("x",), 1.0), (("y",), 1.0)], LE, 1.0, ("sum",))
    m.set_objective({("z",): -1.0})
    sol = solve_miqcp(m, OPTS)
    check_optimal(sol, -0.25)
    assert m.value(sol.values, ("x",)) == pytest.approx(0.5, abs=1e-2)
    assert sol.report.passed


def test_knapsack():
    """max 3a + 2b s.t. 2a + b <= 2 over binaries"""
    m = ModelIR()
    m.add_var(("a",), BINARY)
    m.add_var(("b",), BINARY)
    m.add_constraint([(("a",), 2.0), (("b",), 1.0)], LE, 2.0, ("weight",))
    m.set_objective({("a",): -3.0, ("b",): -2.0})
    sol = solve_miqcp(m, OPTS)
    check_optimal(sol, -3.0)
    assert list(sol.values) == pytest.approx([1.0, 0.0])


def test_binary_program_enumeration():
    """Small random binary programs against complete enumeration"""
    rng = np.random.default_rng(21)
    for _ in range(10):
        n, k = 6, 3
        A = rng.normal(size=(k, n))
        b = rng.uniform(0.0, 2.0, size=k)
        c = rng.normal(size=n)
        m = ModelIR()
        for j in range(n):
            m.add_var(("x", j), BINARY)
        for r in range(k):
            m.add_constraint([(("x", j), A[r, j]) for j in range(n)], LE, b[r], ("row", r))
        m.set_objective({("x", j): c[j] for j in range(n)})
        best = min(float(c @ x) for x in itertools.product((0.0, 1.0), repeat=n)
                   if np.all(A @ np.array(x) <= b + 1e-12))
        check_optimal(solve_miqcp(m, OPTS), best)


def test_infeasible_model():
    m = ModelIR()
    m.add_var(("x",), CONTINUOUS, 0.0, 1.0)
    m.add_constraint([(("x",), 1.0)], GE, 2.0, ("too_much",))
    sol = solve_miqcp(m, OPTS)
    assert sol.status == INFEASIBLE
    assert sol.values is None


def test_empty_model():
    m = ModelIR()
    m.set_objective({}, 4.0)
    sol = solve_miqcp(m)
    assert sol.status == OPTIMAL
    assert sol.objective == 4.0


def test_node_limit():
    m = product_model()
    m.add_constraint([(("x",), 1.0), (("y",), 1.0)], LE, 1.0, ("sum",))
    m.set_objective({("z",): -1.0})
    sol = solve_miqcp(m, OPTS._replace(node_limit=1))
    assert sol.nodes <= 1
    assert sol.status in (OPTIMAL, FEASIBLE, ITERATION_LIMIT)


def test_deterministic():
    model = assemble_model(TwoRouteCase().spec)
    a = solve_miqcp(model, OPTS)
    b = solve_miqcp(model, OPTS)
    assert np.array_equal(a.values, b.values)
    assert a.nodes == b.nodes


def test_cheaper_route_chosen():
    c = TwoRouteCase()
    sol = solve_miqcp(assemble_model(c.spec), OPTS)
    check_optimal(sol, c.expects()["objective"])


def test_highs_backend():
    c = ElectrolysisCase()
    model = assemble_model(c.spec)
    a = solve_miqcp(model, OPTS)
    b = solve_miqcp(model, OPTS._replace(lp_backend="highs"))
    assert b.objective == pytest.approx(a.objective, rel=1e-6)


def test_threads():
    c = TwoRouteCase()
    sol = solve_miqcp(assemble_model(c.spec), OPTS._replace(threads=2))
    check_optimal(sol, c.expects()["objective"])


@pytest.mark.parametrize("backend", ["simplex", "highs"])
@pytest.mark.parametrize("case", [ElectrolysisCase, ChainCase, TwoRouteCase, HeatPairCase])
def test_cases_default_options(case, backend):
    """The bundled toy cases solve with the default tolerances on both backends"""
    c = case()
    sol = solve_miqcp(assemble_model(c.spec), SolverOptions(lp_backend=backend))
    check_optimal(sol, c.expects()["objective"], tol=2e-4)
    assert sol.gap >= 0.0


@pytest.mark.parametrize("backend", ["simplex", "highs"])
def test_vent_default_options(backend):
    c = VentCase(species="CH4")
    model = assemble_model(c.spec)
    sol = solve_miqcp(model, SolverOptions(lp_backend=backend))
    assert sol.status == OPTIMAL
    expected = c.expects()[("M_CO2_sink",)]
    assert model.value(sol.values, ("M_CO2_sink",)) == pytest.approx(expected, rel=1e-5)


def gated_products(seed):
    """
    Three switched products ``z_k = x_k * y_k`` with ``x_k + y_k = s_k b_k``
    and a shared budget on the ``x_k``; the objective rewards the products.
    """
    rng = np.random.default_rng(seed)
    s = rng.uniform(1.0, 3.0, 3)
    c = rng.uniform(0.0, 1.0, 3)
    g = rng.uniform(0.5, 2.0, 3)
    f = rng.uniform(0.0, 1.0, 3)
    budget = rng.uniform(1.0, 3.0)
    m = ModelIR()
    for k in range(3):
        m.add_var(("b", k), BINARY)
        x = m.add_var(("x", k), CONTINUOUS, 0.0, s[k])
        y = m.add_var(("y", k), CONTINUOUS, 0.0, s[k])
        z = m.add_var(("z", k), CONTINUOUS, 0.0, s[k] ** 2)
        m.add_bilinear(z, x, y)
        m.add_constraint([(("x", k), 1.0), (("y", k), 1.0), (("b", k), -s[k])], EQ, 0.0, ("gate", k))
    m.add_constraint([(("x", k), 1.0) for k in range(3)], LE, budget, ("budget",))
    objective = {}
    for k in range(3):
        objective[("b", k)] = f[k]
        objective[("x", k)] = c[k]
        objective[("z", k)] = -g[k]
    m.set_objective(objective)
    return m, (s, c, g, f, budget)


def gated_products_optimum(s, c, g, f, budget):
    """
    Exact optimum: per switching pattern the problem is a separable convex
    quadratic in x, solved from its KKT conditions with one budget multiplier.
    """
    best = 0.0
    for pattern in itertools.product((0, 1), repeat=3):
        on = [k for k in range(3) if pattern[k]]
        if not on:
            continue

        def xs(mu):
            return np.array([np.clip((g[k] * s[k] - c[k] - mu) / (2.0 * g[k]), 0.0, s[k]) for k in on])

        x = xs(0.0)
        if x.sum() > budget:
            mu = brentq(lambda mu: xs(mu).sum() - budget, 0.0, max(g[k] * s[k] - c[k] for k in on))
            x = xs(mu)
        value = sum(f[k] + c[k] * xk - g[k] * xk * (s[k] - xk) for k, xk in zip(on, x))
        best = min(best, value)
    return best


@pytest.mark.parametrize("seed", range(10))
def test_gated_products(seed):
    m, data = gated_products(seed)
    ref = gated_products_optimum(*data)
    sol = solve_miqcp(m, SolverOptions(rel_gap=1e-5, abs_gap=1e-7))
    assert sol.status == OPTIMAL
    assert abs(sol.objective - ref) <= 1e-4 * max(1.0, abs(ref)) + 1e-6
    assert sol.bound <= ref + 1e-6
    assert sol.report.passed


@pytest.mark.parametrize("seed", range(10))
def test_gated_products_loose_gap(seed):
    """A loose gap stops early but the bound stays below the optimum and the gap is the real one"""
    m, data = gated_products(seed)
    ref = gated_products_optimum(*data)
    sol = solve_miqcp(m, SolverOptions(rel_gap=0.05, abs_gap=1e-7))
    assert sol.status == OPTIMAL
    assert sol.bound <= ref + 1e-6
    assert sol.objective >= ref - 1e-5
    assert sol.objective - sol.bound >= 0.0
    expected_gap = max(sol.objective - sol.bound, 0.0) / max(abs(sol.objective), 1e-10)
    assert sol.gap == pytest.approx(expected_gap)
    assert sol.gap <= 0.05 or sol.objective - sol.bound <= 1e-7


def test_failed_lp_not_infeasible(monkeypatch):
    """A node whose LP fails keeps its bound, the search never reports infeasible"""
    monkeypatch.setattr("safmodel.solver._solve_relaxation",
                        lambda lp, opts: LPResult(NUMERICAL_FAILURE, None, None, 0))
    m = product_model()
    m.set_objective({("z",): -1.0})
    sol = solve_miqcp(m, OPTS)
    assert sol.status == ITERATION_LIMIT
    assert sol.values is None
    assert sol.bound == -np.inf


def test_unverified_leaf_keeps_bound(monkeypatch):
    """Leaves that fail verification and restoration stay in the bound"""
    failed = VerifierReport(False, 1.0, 0.0, 0.0, "weight")
    monkeypatch.setattr("safmodel.solver.verify_solution", lambda model, values: failed)
    m = ModelIR()
    m.add_var(("a",), BINARY)
    m.add_var(("b",), BINARY)
    m.add_constraint([(("a",), 2.0), (("b",), 1.0)], LE, 2.0, ("weight",))
    m.set_objective({("a",): -3.0, ("b",): -2.0})
    sol = solve_miqcp(m, OPTS)
    assert sol.status == ITERATION_LIMIT
    assert sol.values is None
    assert sol.bound <= -3.0 + 1e-9


def test_bound_propagation():
    """x + y <= 4, x >= 3 and x <= 10 b tighten y and round b up"""
    m = ModelIR()
    x = m.add_var(("x",), CONTINUOUS, 0.0, 10.0)
    y = m.add_var(("y",), CONTINUOUS, 0.0, 10.0)
    b = m.add_var(("b",), BINARY, 0.0, 1.0)
    m.add_constraint([(("x",), 1.0), (("y",), 1.0)], LE, 4.0, ("sum",))
    m.add_constraint([(("x",), 1.0)], GE, 3.0, ("floor",))
    m.add_constraint([(("x",), 1.0), (("b",), -10.0)], LE, 0.0, ("switch",))
    lo, hi = propagate_linear_bounds(m)
    assert lo[x.id] == pytest.approx(3.0, abs=1e-4)
    assert hi[x.id] == pytest.approx(4.0, abs=1e-4)
    assert hi[y.id] == pytest.approx(1.0, abs=1e-4)
    assert lo[x.id] <= 3.0 and hi[x.id] >= 4.0 and hi[y.id] >= 1.0
    assert lo[b.id] == 1.0


def test_bound_propagation_products():
    m = product_model(2.0, y_hi=3.0)
    z = m.var(("z",))
    m.set_bounds(z, hi=np.inf)
    lo, hi = propagate_linear_bounds(m)
    assert hi[z.id] == pytest.approx(6.0, abs=1e-4)
    assert hi[z.id] >= 6.0


def test_bound_propagation_infeasible():
    m = ModelIR()
    m.add_var(("x",), CONTINUOUS, 0.0, 1.0)
    m.add_var(("y",), CONTINUOUS, 0.0, 1.0)
    m.add_constraint([(("x",), 1.0), (("y",), 1.0)], GE, 3.0, ("too_much",))
    assert propagate_linear_bounds(m) is None


def test_verifier():
    model = assemble_model(ElectrolysisCase().spec)
    sol = solve_miqcp(model, OPTS)
    assert verify_solution(model, sol.values).passed
    values = sol.values.copy()
    values[model.var(("Msrc", "H2O", "AEC", 1)).id] += 1e-3
    report = verify_solution(model, values)
    assert not report.passed
    assert report.worst is not None
    assert report.max_linear_violation > VERIFY_TOL


def test_verifier_binary():
    m = ModelIR()
    m.add_var(("y",), BINARY)
    report = verify_solution(m, [0.5])
    assert not report.passed
    assert report.worst == "y"


def test_warm_start():
    c = TwoRouteCase()
    model = assemble_model(c.spec)
    first = solve_miqcp(model, OPTS)
    sol = solve_miqcp(model, OPTS._replace(warm_start=first.values))
    check_optimal(sol, first.objective)


def test_export_empty(tmp_path):
    lp, mps = str(tmp_path / "empty.lp"), str(tmp_path / "empty.mps")
    export_model(ModelIR(), lp, "lp")
    export_model(ModelIR(), mps, "mps")
    with open(lp) as f:
        assert f.readline().rstrip("\n") == LP_HEADER
    with open(mps) as f:
        assert f.readline().rstrip("\n") == MPS_HEADER


@pytest.mark.parametrize("format", ["lp", "mps"])
def test_export_read_back(tmp_path, format):
    model = assemble_model(ElectrolysisCase().spec)
    path = str(tmp_path / "model.{}".format(format))
    export_model(model, path, format)
    assert read_model(path) == model


@pytest.mark.parametrize("format", ["lp", "mps"])
def test_export_deterministic(tmp_path, format):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    export_model(assemble_model(TwoRouteCase().spec), a, format)
    export_model(assemble_model(TwoRouteCase().spec), b, format)
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


def test_export_bilinear_read_back(tmp_path):
    m = product_model()
    m.set_objective({("z",): -1.0}, 2.5)
    path = str(tmp_path / "product.lp")
    export_model(m, path)
    other = read_model(path)
    assert other == m
    assert other.bilinears[0].exactness == m.bilinears[0].exactness


def test_export_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        export_model(ModelIR(), str(tmp_path / "m.gms"), "gams")


def test_read_rejects_foreign(tmp_path):
    path = tmp_path / "foreign.lp"
    path.write_text("Minimize\n obj: x\nEnd\n")
    with pytest.raises(ModelFileError):
        read_model(str(path))
