# Licensed under the MIT License, see LICENSE for details.
# SPDX-License-Identifier: MIT
"""
Deterministic global solver for the mixed-integer bilinear models built by
:mod:`safmodel.algebra`.

The LP core is a dense two-phase tableau simplex (:func:`solve_lp`), with
scipy's HiGHS as an optional backend for larger models. Bilinear products are
relaxed with McCormick rows (:func:`relax_bilinear`), which are exact when one
factor is binary. :func:`solve_miqcp` runs best-first branch-and-bound over
binaries and spatial branching over continuous factors; incumbents come from a
feasibility restoration heuristic and are only accepted after
:func:`verify_solution` passes.
"""

import heapq
import logging
import math
import time
from collections import namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .algebra import BINARY, EXACT_BINARY, EQ, GE, LE, format_label

logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"
NUMERICAL_FAILURE = "numerical-failure"

SolverOptions = namedtuple("SolverOptions", [
    "rel_gap", "abs_gap", "node_limit", "time_limit", "feas_tol", "opt_tol", "int_tol",
    "bilinear_tol", "restoration_rounds", "restoration_tol", "lp_backend", "threads",
    "warm_start", "fbbt_passes"])
SolverOptions.__new__.__defaults__ = (1e-4, 1e-6, 100000, None, 1e-7, 1e-8, 1e-6,
                                      1e-6, 50, 1e-8, "simplex", 1, None, 3)
SolverOptions.__doc__ = """
All solver tolerances and limits.

:param rel_gap: relative optimality gap at which the search stops
:param abs_gap: absolute gap at which the search stops
:param node_limit: maximum number of processed nodes
:param time_limit: wall clock limit in seconds (None for no limit)
:param feas_tol: LP primal feasibility tolerance
:param opt_tol: LP reduced cost tolerance
:param int_tol: integrality tolerance of binaries
:param bilinear_tol: scaled residual below which a product counts as satisfied
:param restoration_rounds: alternations of the restoration heuristic
:param restoration_tol: relative improvement that continues the restoration
:param lp_backend: "simplex" (in-package) or "highs" (scipy.optimize.linprog)
:param threads: number of nodes evaluated concurrently
:param warm_start: value vector tried as first incumbent
:param fbbt_passes: bound propagation passes per node
"""

RelaxedLP = namedtuple("RelaxedLP", ["c", "A_ub", "b_ub", "A_eq", "b_eq", "lo", "hi", "constant", "mccormick"])
RelaxedLP.__new__.__defaults__ = (None, None, None, None, None, None, 0.0, None)
RelaxedLP.__doc__ = """
LP ``min c x + constant`` s.t. ``A_ub x <= b_ub``, ``A_eq x = b_eq``,
``lo <= x <= hi``. ``mccormick`` maps a bilinear term index to its rows in
``A_ub``.
"""

LPResult = namedtuple("LPResult", ["status", "x", "objective", "iterations"])

Node = namedtuple("Node", ["id", "lo", "hi", "bound", "depth"])

Solution = namedtuple("Solution", ["values", "objective", "gap", "status", "report", "bound", "nodes"])
Solution.__doc__ = """
Result of :func:`solve_miqcp`. ``values`` is indexed by variable id, ``bound``
is the proven lower bound and ``gap`` the relative gap between both.
"""

VerifierReport = namedtuple("VerifierReport", ["passed", "max_linear_violation", "max_bilinear_violation",
                                               "max_bound_violation", "worst"])

VERIFY_TOL = 1e-6


def _as_matrix(A, n):
    if A is None:
        return sparse.csr_matrix((0, n))
    if sparse.issparse(A):
        return A.tocsr()
    A = np.asarray(A, dtype=float)
    return sparse.csr_matrix(A.reshape(-1, n))


def _as_vector(b, m):
    if b is None:
        return np.zeros(m)
    return np.asarray(b, dtype=float).reshape(m)


def _normalize(lp):
    c = np.asarray(lp.c, dtype=float).ravel()
    n = c.size
    A_ub, A_eq = _as_matrix(lp.A_ub, n), _as_matrix(lp.A_eq, n)
    b_ub, b_eq = _as_vector(lp.b_ub, A_ub.shape[0]), _as_vector(lp.b_eq, A_eq.shape[0])
    lo = np.zeros(n) if lp.lo is None else np.asarray(lp.lo, dtype=float).ravel()
    hi = np.full(n, np.inf) if lp.hi is None else np.asarray(lp.hi, dtype=float).ravel()
    return c, A_ub, b_ub, A_eq, b_eq, lo, hi


class _Tableau(object):
    """Dense simplex tableau with an explicit reduced cost row."""
    PIVOT_TOL = 1e-9
    DEGENERATE_LIMIT = 50

    def __init__(self, T, basis, opts):
        self.T = T
        self.basis = basis
        self.opts = opts
        self.iterations = 0

    def pivot(self, r, s, z):
        T = self.T
        T[r] /= T[r, s]
        col = T[:, s].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        z -= z[s] * T[r]
        self.basis[r] = s

    def run(self, z, allowed, max_iter):
        """Minimize the cost row ``z`` over the columns marked ``allowed``."""
        T = self.T
        degenerate, bland = 0, False
        while self.iterations < max_iter:
            reduced = np.where(allowed, z[:-1], 0.0)
            candidates = np.flatnonzero(reduced < -self.opts.opt_tol)
            if candidates.size == 0:
                return OPTIMAL
            s = candidates[0] if bland else candidates[np.argmin(reduced[candidates])]
            col = T[:, s]
            rows = np.flatnonzero(col > self.PIVOT_TOL)
            if rows.size == 0:
                return UNBOUNDED
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + 1e-12]
            r = ties[np.argmin(self.basis[ties])]
            if best <= self.opts.feas_tol:
                degenerate += 1
                if degenerate > self.DEGENERATE_LIMIT and not bland:
                    logger.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                    bland = True
            else:
                degenerate = 0
            self.pivot(r, s, z)
            T[:, -1] = np.maximum(T[:, -1], 0.0)
            self.iterations += 1
        return ITERATION_LIMIT


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, lo, hi):
    """
    Substitute ``x = d + M x'`` with ``x' >= 0``: shifts for finite lower
    bounds, reflections for upper-bounded-only variables, splits for free
    variables. Fixed variables disappear. Finite upper bounds become rows.
    """
    n = c.size
    d = np.zeros(n)
    cols, signs, upper = [], [], []
    for j in range(n):
        l, u = lo[j], hi[j]
        if math.isfinite(l) and math.isfinite(u) and u - l <= 0.0:
            d[j] = l
        elif math.isfinite(l):
            d[j] = l
            cols.append(j)
            signs.append(1.0)
            if math.isfinite(u):
                upper.append((len(cols) - 1, u - l))
        elif math.isfinite(u):
            d[j] = u
            cols.append(j)
            signs.append(-1.0)
        else:
            cols.extend((j, j))
            signs.extend((1.0, -1.0))
    M = sparse.csr_matrix((signs, (cols, range(len(cols)))), shape=(n, len(cols)))
    A_ub2 = (A_ub @ M).toarray()
    A_eq2 = (A_eq @ M).toarray()
    b_ub2 = b_ub - A_ub @ d
    b_eq2 = b_eq - A_eq @ d
    if upper:
        U = np.zeros((len(upper), len(cols)))
        for k, (col, ub) in enumerate(upper):
            U[k, col] = 1.0
        A_ub2 = np.vstack([A_ub2, U])
        b_ub2 = np.concatenate([b_ub2, [ub for _, ub in upper]])
    return M, d, M.T @ c, A_ub2, b_ub2, A_eq2, b_eq2


def _drop_empty_rows(A, b, equality, tol):
    """Remove all-zero rows; returns None if one of them is violated."""
    scale = np.abs(A).max(axis=1) if A.shape[1] else np.zeros(A.shape[0])
    empty = scale <= 0.0
    if np.any(empty):
        if equality and np.any(np.abs(b[empty]) > tol):
            return None
        if not equality and np.any(b[empty] < -tol):
            return None
    keep = ~empty
    A, b, scale = A[keep], b[keep], scale[keep]
    return A / scale[:, None], b / scale


def _simplex(c, A_ub, b_ub, A_eq, b_eq, lo, hi, opts):
    M, d, c2, A_ub2, b_ub2, A_eq2, b_eq2 = _standard_form(c, A_ub, b_ub, A_eq, b_eq, lo, hi)
    # column equilibration, the tableau works on x' = s * x
    s = np.abs(np.vstack([A_ub2, A_eq2])).max(axis=0, initial=0.0)
    s = np.where(s > 0.0, s, 1.0)
    A_ub2, A_eq2, c2 = A_ub2 / s, A_eq2 / s, c2 / s
    ub = _drop_empty_rows(A_ub2, b_ub2, False, opts.feas_tol)
    eq = _drop_empty_rows(A_eq2, b_eq2, True, opts.feas_tol)
    if ub is None or eq is None:
        return LPResult(INFEASIBLE, None, None, 0)
    (A_ub2, b_ub2), (A_eq2, b_eq2) = ub, eq
    m_ub, m_eq, n = A_ub2.shape[0], A_eq2.shape[0], c2.size
    m = m_ub + m_eq

    # columns: structural | slacks | artificials | rhs
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub2
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq2
    b = np.concatenate([b_ub2, b_eq2])
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    needs_art = np.ones(m, dtype=bool)
    needs_art[:m_ub] = flip[:m_ub]
    art_rows = np.flatnonzero(needs_art)
    n_art = art_rows.size
    N = n + m_ub + n_art
    T = np.zeros((m, N + 1))
    T[:, :n + m_ub] = A
    T[art_rows, n + m_ub + np.arange(n_art)] = 1.0
    T[:, -1] = b
    basis = np.empty(m, dtype=int)
    basis[:m_ub] = n + np.arange(m_ub)
    basis[art_rows] = n + m_ub + np.arange(n_art)

    tableau = _Tableau(T, basis, opts)
    max_iter = 20000 + 50 * (m + N)
    if n_art:
        z = np.zeros(N + 1)
        z[n + m_ub:N] = 1.0
        for r in art_rows:
            z -= T[r]
        status = tableau.run(z, np.ones(N, dtype=bool), max_iter)
        if status == ITERATION_LIMIT:
            return LPResult(ITERATION_LIMIT, None, None, tableau.iterations)
        if -z[-1] > opts.feas_tol * max(1.0, np.abs(b).max()):
            return LPResult(INFEASIBLE, None, None, tableau.iterations)
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tableau.basis[r] >= n + m_ub:
                nonzero = np.flatnonzero(np.abs(tableau.T[r, :n + m_ub]) > _Tableau.PIVOT_TOL)
                if nonzero.size:
                    tableau.pivot(r, nonzero[0], z)
                else:
                    keep[r] = False
        tableau.T = np.hstack([tableau.T[keep, :n + m_ub], tableau.T[keep, -1:]])
        tableau.basis = tableau.basis[keep]
        N = n + m_ub

    cmax = max(1.0, np.abs(c2).max()) if c2.size else 1.0
    z = np.zeros(N + 1)
    z[:n] = c2 / cmax
    for r, j in enumerate(tableau.basis):
        if z[j] != 0.0:
            z -= z[j] * tableau.T[r]
    status = tableau.run(z, np.ones(N, dtype=bool), max_iter)
    if status != OPTIMAL:
        return LPResult(status, None, None, tableau.iterations)
    xp = np.zeros(N)
    xp[tableau.basis] = tableau.T[:, -1]
    x = d + M @ (xp[:n] / s)
    return LPResult(OPTIMAL, x, float(c @ x), tableau.iterations)


def _highs(c, A_ub, b_ub, A_eq, b_eq, lo, hi, opts):
    bounds = [(None if not math.isfinite(l) else l, None if not math.isfinite(u) else u) for l, u in zip(lo, hi)]
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": opts.feas_tol,
                           "dual_feasibility_tolerance": opts.opt_tol})
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, NUMERICAL_FAILURE)
    if status != OPTIMAL:
        return LPResult(status, None, None, int(getattr(res, "nit", 0)))
    return LPResult(OPTIMAL, np.asarray(res.x), float(c @ res.x), int(res.nit))


def _max_violation(A, b, x, equality):
    if A.shape[0] == 0:
        return 0.0
    r = A @ x - b
    r = np.abs(r) if equality else np.maximum(r, 0.0)
    norms = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())
    return float((r / np.maximum(norms, 1.0)).max())


def solve_lp(lp: RelaxedLP, backend="simplex", opts=None) -> LPResult:
    """
    Solve an LP.

    :param lp: problem, matrices dense, sparse or nested lists; ``lo``
        defaults to 0 and ``hi`` to +inf
    :param backend: "simplex" or "highs"
    :return: Result with status optimal, infeasible, unbounded,
        iteration-limit or numerical-failure. Never raises on numerical
        trouble.
    """
    opts = opts or SolverOptions()
    c, A_ub, b_ub, A_eq, b_eq, lo, hi = _normalize(lp)
    if np.any(lo > hi + opts.feas_tol):
        return LPResult(INFEASIBLE, None, None, 0)
    hi = np.maximum(lo, hi)
    solve = _highs if backend == "highs" else _simplex
    try:
        res = solve(c, A_ub, b_ub, A_eq, b_eq, lo, hi, opts)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
        logger.warning("LP backend %s failed: %s", backend, e)
        return LPResult(NUMERICAL_FAILURE, None, None, 0)
    if res.status != OPTIMAL:
        return res
    x = np.clip(res.x, lo, hi)
    violation = max(_max_violation(A_ub, b_ub, x, False), _max_violation(A_eq, b_eq, x, True))
    if not np.all(np.isfinite(x)) or violation > 10 * VERIFY_TOL:
        logger.warning("LP solution violates its constraints by %.3g", violation)
        return LPResult(NUMERICAL_FAILURE, None, None, res.iterations)
    return LPResult(OPTIMAL, x, float(c @ x) + lp.constant, res.iterations)


def _solve_relaxation(lp, opts) -> LPResult:
    """
    :func:`solve_lp` with the configured backend; an iteration limit or a
    numerical failure is retried once with the other backend.
    """
    res = solve_lp(lp, opts.lp_backend, opts)
    if res.status in (ITERATION_LIMIT, NUMERICAL_FAILURE):
        other = "simplex" if opts.lp_backend == "highs" else "highs"
        retry = solve_lp(lp, other, opts)
        if retry.status not in (ITERATION_LIMIT, NUMERICAL_FAILURE):
            logger.debug("LP %s with %s, %s with %s", res.status, opts.lp_backend, retry.status, other)
            return retry
    return res


class _Problem(object):
    """Linear part of a model in matrix form plus the bilinear index arrays."""
    def __init__(self, model):
        self.model = model
        n = len(model.vars)
        self.n = n
        self.c = np.zeros(n)
        for i, v in model.objective.items():
            self.c[i] = v
        self.constant = model.objective_constant
        ub_rows, eq_rows = [], []
        for con in model.lin_constraints:
            (eq_rows if con.sense == EQ else ub_rows).append(con)
        self.A_ub, self.b_ub = self._matrix(ub_rows, n)
        self.A_eq, self.b_eq = self._matrix(eq_rows, n)
        self.rows = [(np.fromiter(con.coeffs.keys(), dtype=int, count=len(con.coeffs)),
                      np.fromiter(con.coeffs.values(), dtype=float, count=len(con.coeffs)),
                      con.sense, con.rhs) for con in model.lin_constraints]
        self.lo = np.array(model.lower_bounds(), dtype=float)
        self.hi = np.array(model.upper_bounds(), dtype=float)
        self.binaries = np.array(model.binaries(), dtype=int)
        self.z = np.array([t.product_var.id for t in model.bilinears], dtype=int)
        self.a = np.array([t.factor_a.id for t in model.bilinears], dtype=int)
        self.b = np.array([t.factor_b.id for t in model.bilinears], dtype=int)
        self.exact = np.array([t.exactness == EXACT_BINARY for t in model.bilinears], dtype=bool)
        # variables whose bounds shape the relaxation
        self.branch_vars = np.unique(np.concatenate([self.a, self.b, self.binaries])).astype(int)

    @staticmethod
    def _matrix(rows, n):
        data, ri, ci, rhs = [], [], [], []
        for k, con in enumerate(rows):
            sign = -1.0 if con.sense == GE else 1.0
            for i, a in con.coeffs.items():
                data.append(sign * a)
                ri.append(k)
                ci.append(i)
            rhs.append(sign * con.rhs)
        return sparse.csr_matrix((data, (ri, ci)), shape=(len(rows), n)), np.array(rhs, dtype=float)

    def mccormick(self, lo, hi, terms=None):
        """McCormick rows of the selected terms for the box ``[lo, hi]``."""
        terms = np.arange(self.z.size) if terms is None else terms
        z, a, b = self.z[terms], self.a[terms], self.b[terms]
        aL, aU, bL, bU = lo[a], hi[a], lo[b], hi[b]
        k = terms.size
        rows = np.repeat(np.arange(4 * k), 3)
        cols = np.column_stack([np.repeat(z, 4), np.repeat(b, 4), np.repeat(a, 4)]).ravel()
        data = np.column_stack([
            np.tile([-1.0, -1.0, 1.0, 1.0], k),
            np.column_stack([aL, aU, -aU, -aL]).ravel(),
            np.column_stack([bL, bU, -bL, -bU]).ravel()]).ravel()
        rhs = np.column_stack([aL * bL, aU * bU, -aU * bL, -aL * bU]).ravel()
        A = sparse.csr_matrix((data, (rows, cols)), shape=(4 * k, self.n))
        return A, rhs

    def linearized(self, fixed_side, values):
        """Equalities ``z = a_val * b`` (side "a") or ``z = a * b_val`` (side "b")."""
        k = self.z.size
        if fixed_side == "a":
            other, coef = self.b, -values[self.a]
        else:
            other, coef = self.a, -values[self.b]
        rows = np.repeat(np.arange(k), 2)
        cols = np.column_stack([self.z, other]).ravel()
        data = np.column_stack([np.ones(k), coef]).ravel()
        return sparse.csr_matrix((data, (rows, cols)), shape=(k, self.n)), np.zeros(k)

    def relax(self, lo, hi):
        A, rhs = self.mccormick(lo, hi)
        k = self.z.size
        mc = {t: list(range(self.A_ub.shape[0] + 4 * t, self.A_ub.shape[0] + 4 * t + 4)) for t in range(k)}
        return RelaxedLP(self.c, sparse.vstack([self.A_ub, A]).tocsr(), np.concatenate([self.b_ub, rhs]),
                         self.A_eq, self.b_eq, lo, hi, self.constant, mc)


def relax_bilinear(model, lo=None, hi=None) -> RelaxedLP:
    """
    LP relaxation of a model over the box ``[lo, hi]`` (model bounds by
    default): linear constraints plus the four McCormick rows per product.
    Products with a binary factor are represented exactly at integral points.
    """
    problem = _Problem(model)
    lo = problem.lo if lo is None else np.asarray(lo, dtype=float)
    hi = problem.hi if hi is None else np.asarray(hi, dtype=float)
    return problem.relax(lo, hi)


def propagate_linear_bounds(model, lo=None, hi=None, passes=3, int_tol=1e-6, problem=None, margin=1e-6):
    """
    Feasibility-based bound tightening: activity bounds of the linear rows,
    interval products of the bilinear terms and rounding of binaries.

    Every derived bound is moved outward by ``margin * (1 + |bound|)``, so a
    variable pinned by equalities keeps a box an LP can still satisfy within
    its feasibility tolerance.

    :return: (lo, hi) arrays, or None if the box is proven infeasible
    """
    problem = problem or _Problem(model)
    lo = (problem.lo if lo is None else np.asarray(lo, dtype=float)).copy()
    hi = (problem.hi if hi is None else np.asarray(hi, dtype=float)).copy()
    for _ in range(passes):
        changed = False
        for idx, a, sense, rhs in problem.rows:
            if idx.size == 0:
                continue
            senses = [(a, rhs)] if sense == LE else [(-a, -rhs)] if sense == GE else [(a, rhs), (-a, -rhs)]
            for coef, b in senses:
                l, u = lo[idx], hi[idx]
                mins = np.where(coef > 0, coef * l, coef * u)
                inf = ~np.isfinite(mins)
                n_inf = inf.sum()
                finite_sum = mins[~inf].sum()
                if n_inf == 0 and finite_sum > b + 1e-6 * max(1.0, abs(b)):
                    return None
                if n_inf > 1:
                    continue
                rest = finite_sum - np.where(inf, 0.0, mins)
                ok = (n_inf - inf) == 0
                bound = (b - rest) / coef
                slack = margin * (1.0 + np.abs(bound))
                up = ok & (coef > 0) & (bound + slack < u)
                dn = ok & (coef < 0) & (bound - slack > l)
                if up.any():
                    hi[idx[up]] = bound[up] + slack[up]
                    changed = True
                if dn.any():
                    lo[idx[dn]] = bound[dn] - slack[dn]
                    changed = True
        if problem.z.size:
            a_lo, a_hi, b_lo, b_hi = lo[problem.a], hi[problem.a], lo[problem.b], hi[problem.b]
            with np.errstate(invalid="ignore"):
                corners = np.nan_to_num(np.stack([a_lo * b_lo, a_lo * b_hi, a_hi * b_lo, a_hi * b_hi]))
            zl, zu = corners.min(axis=0), corners.max(axis=0)
            zl = zl - margin * (1.0 + np.abs(zl))
            zu = zu + margin * (1.0 + np.abs(zu))
            if np.any(zl > lo[problem.z]) or np.any(zu < hi[problem.z]):
                changed = True
            lo[problem.z] = np.maximum(lo[problem.z], zl)
            hi[problem.z] = np.minimum(hi[problem.z], zu)
        if problem.binaries.size:
            lo[problem.binaries] = np.ceil(lo[problem.binaries] - int_tol)
            hi[problem.binaries] = np.floor(hi[problem.binaries] + int_tol)
        if np.any(lo > hi + 1e-6 * np.maximum(1.0, np.abs(lo))):
            return None
        hi = np.maximum(lo, hi)
        if not changed:
            break
    return lo, hi


def verify_solution(model, values) -> VerifierReport:
    """
    Re-evaluate every linear constraint, every product ``z = a * b``, all
    bounds and integrality at ``values``. Violations are scaled by the
    Euclidean norm of the row (at least 1); the solution passes if all of them
    are at most 1e-6.
    """
    x = np.asarray(values, dtype=float)
    worst, worst_value = None, 0.0
    lin = bil = bnd = 0.0
    for con in model.lin_constraints:
        act = math.fsum(a * x[i] for i, a in con.coeffs.items())
        r = act - con.rhs
        v = abs(r) if con.sense == EQ else max(r, 0.0) if con.sense == LE else max(-r, 0.0)
        v /= max(1.0, math.sqrt(sum(a * a for a in con.coeffs.values())))
        lin = max(lin, v)
        if v > worst_value:
            worst, worst_value = format_label(con.name), v
    for t in model.bilinears:
        z, a, b = x[t.product_var.id], x[t.factor_a.id], x[t.factor_b.id]
        v = abs(z - a * b) / max(1.0, math.sqrt(1.0 + a * a + b * b))
        bil = max(bil, v)
        if v > worst_value:
            worst, worst_value = format_label(t.product_var.label), v
    for var in model.vars:
        v = max(var.lo - x[var.id], x[var.id] - var.hi, 0.0) / max(1.0, abs(x[var.id]))
        if var.kind == BINARY:
            v = max(v, abs(x[var.id] - round(x[var.id])))
        bnd = max(bnd, v)
        if v > worst_value:
            worst, worst_value = format_label(var.label), v
    passed = max(lin, bil, bnd) <= VERIFY_TOL
    return VerifierReport(passed, lin, bil, bnd, None if passed else worst)


def restore_feasibility(model, x, opts=None, lo=None, hi=None, problem=None):
    """
    Feasibility restoration heuristic: binaries are fixed to their rounded
    values, then LPs are solved alternately with the second factor (the
    flows) and with the first factor (the fractions) of every product fixed,
    which turns all products into linear equalities. Every LP solution is
    verified; the best verified point is returned.

    :return: (values, objective) or None
    """
    opts = opts or SolverOptions()
    problem = problem or _Problem(model)
    lo = (problem.lo if lo is None else lo).copy()
    hi = (problem.hi if hi is None else hi).copy()
    current = np.clip(np.asarray(x, dtype=float), lo, hi)
    if problem.binaries.size:
        fixed = np.clip(np.round(current[problem.binaries]), lo[problem.binaries], hi[problem.binaries])
        lo[problem.binaries] = hi[problem.binaries] = fixed
        current[problem.binaries] = fixed
    best = None
    previous = math.inf
    for attempt in range(opts.restoration_rounds):
        for side in ("b", "a"):
            ids = problem.a if side == "a" else problem.b
            l, u = lo.copy(), hi.copy()
            l[ids] = u[ids] = current[ids]
            A, rhs = problem.linearized(side, current)
            lp = RelaxedLP(problem.c, problem.A_ub, problem.b_ub, sparse.vstack([problem.A_eq, A]).tocsr(),
                           np.concatenate([problem.b_eq, rhs]), l, u, problem.constant)
            res = _solve_relaxation(lp, opts)
            if res.status != OPTIMAL:
                continue
            current = res.x
            if best is None or res.objective < best[1]:
                report = verify_solution(model, res.x)
                if report.passed:
                    best = (res.x, res.objective)
        if best is None:
            if attempt >= 1:
                break
            continue
        if previous - best[1] <= opts.restoration_tol * max(1.0, abs(best[1])):
            break
        previous = best[1]
    return best


def _gap(incumbent, bound):
    if not math.isfinite(incumbent):
        return math.inf
    if not math.isfinite(bound):
        return math.inf
    return max(incumbent - bound, 0.0) / max(abs(incumbent), 1e-10)


def _closed(incumbent, bound, opts):
    return incumbent - bound <= opts.abs_gap or _gap(incumbent, bound) <= opts.rel_gap


class _BranchAndBound(object):
    def __init__(self, model, opts):
        self.model = model
        self.opts = opts
        self.problem = _Problem(model)
        self.incumbent = None
        self.incumbent_obj = math.inf
        self.next_id = 0
        self.open = []
        # smallest bound of nodes closed by the gap test
        self.pruned = math.inf
        # smallest bound of nodes whose LP could not be solved or verified
        self.unresolved = math.inf
        self.has_unresolved = False

    def push(self, lo, hi, bound, depth):
        node = Node(self.next_id, lo, hi, bound, depth)
        self.next_id += 1
        heapq.heappush(self.open, (bound, node.id, node))

    def offer(self, values, objective, source):
        if objective < self.incumbent_obj - 1e-12 * max(1.0, abs(objective)):
            self.incumbent, self.incumbent_obj = values, objective
            logger.debug("new incumbent %.9g from %s", objective, source)

    def closed(self, bound):
        return math.isfinite(self.incumbent_obj) and _closed(self.incumbent_obj, bound, self.opts)

    def prune(self, bound):
        self.pruned = min(self.pruned, bound)

    def keep_unresolved(self, node, bound, reason):
        logger.warning("node %d: %s, keeping its bound %.6g", node.id, reason, bound)
        self.unresolved = min(self.unresolved, bound)
        self.has_unresolved = True

    def evaluate(self, node):
        """
        Bound propagation and LP relaxation of one node. Propagated bounds are
        applied to factors and binaries only. Infeasibility is only concluded
        from an LP over the unpropagated node box.
        """
        p = self.problem
        tightened = propagate_linear_bounds(self.model, node.lo, node.hi, self.opts.fbbt_passes,
                                            self.opts.int_tol, p, margin=10.0 * self.opts.feas_tol)
        if tightened is not None:
            lo, hi = node.lo.copy(), node.hi.copy()
            lo[p.branch_vars] = tightened[0][p.branch_vars]
            hi[p.branch_vars] = tightened[1][p.branch_vars]
            res = _solve_relaxation(p.relax(lo, hi), self.opts)
            if res.status != INFEASIBLE:
                return node._replace(lo=lo, hi=hi), res, None
        return node, _solve_relaxation(p.relax(node.lo, node.hi), self.opts), None

    def branch(self, node, x):
        p = self.problem
        if p.binaries.size:
            frac = np.abs(x[p.binaries] - np.round(x[p.binaries]))
            if frac.max() > self.opts.int_tol:
                j = p.binaries[np.argmax(frac)]
                down_hi, up_lo = node.hi.copy(), node.lo.copy()
                down_hi[j], up_lo[j] = 0.0, 1.0
                return [(node.lo, down_hi), (up_lo, node.hi)]
        if p.z.size:
            a, b, z = x[p.a], x[p.b], x[p.z]
            viol = np.abs(z - a * b) / np.maximum(1.0, np.sqrt(1.0 + a * a + b * b))
            viol[p.exact] = 0.0
            order = np.argsort(-viol, kind="stable")
            for t in order:
                if viol[t] <= self.opts.bilinear_tol:
                    break
                candidates = []
                for j in (p.a[t], p.b[t]):
                    width = node.hi[j] - node.lo[j]
                    root = p.hi[j] - p.lo[j]
                    if width > 1e-9 * max(1.0, abs(node.hi[j])):
                        candidates.append((width / root if root > 0 else 0.0, j))
                if not candidates:
                    continue
                _, j = max(candidates, key=lambda c: c[0])
                l, u = node.lo[j], node.hi[j]
                split = min(max(x[j], l + 0.2 * (u - l)), l + 0.8 * (u - l))
                left_hi, right_lo = node.hi.copy(), node.lo.copy()
                left_hi[j], right_lo[j] = split, split
                return [(node.lo, left_hi), (right_lo, node.hi)]
        return []

    def process(self, node, res, count):
        opts = self.opts
        if res is None or res.status == INFEASIBLE:
            return
        if res.status != OPTIMAL:
            self.keep_unresolved(node, node.bound, "LP {}".format(res.status))
            return
        bound = max(res.objective, node.bound)
        if self.closed(bound):
            self.prune(bound)
            return
        x = res.x
        children = self.branch(node, x)
        if not children:
            report = verify_solution(self.model, x)
            if report.passed:
                self.offer(x, res.objective, "relaxation")
                return
        if self.incumbent is None or not children or count % 20 == 0:
            found = restore_feasibility(self.model, x, opts, problem=self.problem)
            if found is not None:
                self.offer(found[0], found[1], "restoration")
        if not children:
            if self.closed(bound):
                self.prune(bound)
            else:
                self.keep_unresolved(node, bound, "leaf fails verification")
            return
        for lo, hi in children:
            self.push(lo, hi, bound, node.depth + 1)

    def best_bound(self):
        """Smallest bound over open, pruned and unresolved nodes, capped by the incumbent."""
        bound = min(self.pruned, self.unresolved, self.incumbent_obj)
        if self.open:
            bound = min(bound, self.open[0][0])
        return bound

    def run(self, warm_start=None):
        opts = self.opts
        start = time.monotonic()
        if warm_start is not None:
            ws = np.asarray(warm_start, dtype=float)
            if verify_solution(self.model, ws).passed:
                self.offer(ws, float(self.problem.c @ ws) + self.problem.constant, "warm start")
            else:
                found = restore_feasibility(self.model, ws, opts, problem=self.problem)
                if found is not None:
                    self.offer(found[0], found[1], "warm start restoration")
        self.push(self.problem.lo, self.problem.hi, -math.inf, 0)
        count = 0
        limit = None
        pool = ThreadPoolExecutor(opts.threads) if opts.threads > 1 else None
        try:
            while self.open:
                if count >= opts.node_limit:
                    limit = "node limit"
                    break
                if opts.time_limit is not None and time.monotonic() - start > opts.time_limit:
                    limit = "time limit"
                    break
                batch = []
                while self.open and len(batch) < opts.threads:
                    bound, _, node = heapq.heappop(self.open)
                    if self.closed(bound):
                        self.prune(bound)
                        continue
                    batch.append(node)
                if not batch:
                    continue
                results = list(pool.map(self.evaluate, batch)) if pool else [self.evaluate(n) for n in batch]
                for node, res, _ in sorted(results, key=lambda r: r[0].id):
                    count += 1
                    self.process(node, res, count)
                    bound = self.best_bound()
                    logger.info("node=%d depth=%d bound=%.9g incumbent=%.9g gap=%.3g open=%d",
                                node.id, node.depth, bound, self.incumbent_obj,
                                _gap(self.incumbent_obj, bound), len(self.open))
                if self.open and self.closed(self.best_bound()):
                    self.prune(self.open[0][0])
                    self.open = []
        finally:
            if pool:
                pool.shutdown()

        bound = self.best_bound()
        if self.incumbent is None:
            status = ITERATION_LIMIT if limit or self.has_unresolved else INFEASIBLE
            report = VerifierReport(False, math.inf, math.inf, math.inf, None)
            return Solution(None, None, math.inf, status, report, bound, count)
        gap = _gap(self.incumbent_obj, bound)
        status = OPTIMAL if self.closed(bound) else FEASIBLE
        if limit:
            logger.info("%s reached after %d nodes, gap %.3g", limit, count, gap)
        if self.has_unresolved:
            logger.info("unresolved nodes hold the bound at %.9g", self.unresolved)
        report = verify_solution(self.model, self.incumbent)
        return Solution(self.incumbent, self.incumbent_obj, gap, status, report, bound, count)


def solve_miqcp(model, opts=None) -> Solution:
    """
    Solve a model to global optimality by best-first branch-and-bound.

    Nodes are processed in order of their parent LP bound with ties broken by
    node id. Fractional binaries are branched first (most fractional); once
    all binaries are integral, the continuous product with the largest scaled
    McCormick violation is split on the factor with the larger relative
    width, at the LP value clamped to the middle 60% of its range.

    :param model: assembled :class:`~safmodel.algebra.ModelIR`
    :param opts: :class:`SolverOptions`
    :return: Solution with status optimal, feasible (limit hit or
        unresolved nodes left, with an incumbent), infeasible or
        iteration-limit (the same without an incumbent). ``bound`` covers
        every node the search discarded, so it never exceeds the optimum.
    """
    opts = opts or SolverOptions()
    if len(model.vars) == 0:
        report = VerifierReport(True, 0.0, 0.0, 0.0, None)
        return Solution(np.zeros(0), model.objective_constant, 0.0, OPTIMAL, report, model.objective_constant, 0)
    bb = _BranchAndBound(model, opts)
    sol = bb.run(opts.warm_start)
    logger.info("finished: status=%s objective=%s bound=%.9g nodes=%d", sol.status, sol.objective,
                sol.bound, sol.nodes)
    return sol


def export_model(model, path, format="lp"):
    """Write a model as CPLEX-style lp-text (``"lp"``) or free MPS (``"mps"``)."""
    from .modelfile import write_model
    write_model(model, path, format)
