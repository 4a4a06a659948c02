"""Linear-program data model and solver adapter with primal and dual outputs.

This is the only module that talks to a numerical solver (scipy's HiGHS
interface). Everything else builds :class:`LinearProgram` values and consumes
:class:`LpSolution` values, so the solver can be swapped behind this contract.

Dual sign convention: the returned multiplier vector ``duals`` has one entry
per constraint row, in the row order of the program, normalized so that the
dual objective ``rhs @ duals`` equals the primal optimum for *both* senses.
Under this convention, for a minimization problem the multipliers of ``<=``
rows are nonpositive and those of ``>=`` rows nonnegative; for a maximization
problem the signs flip. Equality-row multipliers are free.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .errors import InfeasibleError, SizeCap, UnboundedError

REL_LE = -1
REL_EQ = 0
REL_GE = 1

_REL_TEXT = {REL_LE: "<=", REL_EQ: "=", REL_GE: ">="}

DEFAULT_COLUMN_CAP = 10**6
MAX_ABS_COEFF = 1e12

FEASIBILITY_TOL = 1e-8
DUALITY_GAP_TOL = 1e-8
COMPLEMENTARITY_TOL = 1e-6

_HIGHS_FEASIBILITY_TOL = 1e-10


@dataclass
class LinearProgram:
    """``sense`` objective over ``x >= lb`` (optionally ``x <= ub``) subject to
    sparse rows ``a`` with per-row relation codes ``rel`` and right-hand side
    ``rhs``."""

    sense: str
    c: np.ndarray
    a: sp.csr_matrix
    rel: np.ndarray
    rhs: np.ndarray
    lb: np.ndarray | float = 0.0
    ub: np.ndarray | float | None = None
    var_names: tuple[str, ...] | None = None

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.rhs.shape[0]

    def validate(self) -> None:
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        if self.a.shape != (self.m, self.n):
            raise ValueError(f"matrix shape {self.a.shape} != ({self.m}, {self.n})")
        if self.rel.shape != (self.m,):
            raise ValueError("one relation code required per row")
        if not np.all(np.isin(self.rel, (REL_LE, REL_EQ, REL_GE))):
            raise ValueError("unknown relation code")
        for name, arr in (("objective", self.c), ("rhs", self.rhs), ("matrix", self.a.data)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains NaN or infinite coefficients")
            if arr.size and np.abs(arr).max() > MAX_ABS_COEFF:
                raise ValueError(f"{name} coefficient magnitude exceeds {MAX_ABS_COEFF:g}")


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded | size_cap
    value: float
    x: np.ndarray
    duals: np.ndarray
    solve_ms: float = 0.0


@dataclass
class DualReport:
    """Residuals from re-checking an LP solution against its program."""

    primal_residual: float
    dual_residual: float
    duality_gap: float
    complementarity: float

    def ok(self) -> bool:
        return (
            self.primal_residual <= FEASIBILITY_TOL
            and self.duality_gap <= DUALITY_GAP_TOL
            and self.complementarity <= COMPLEMENTARITY_TOL
        )


def _bounds_list(lp: LinearProgram) -> list[tuple[float, float | None]]:
    lb = np.broadcast_to(np.asarray(lp.lb, dtype=np.float64), (lp.n,))
    if lp.ub is None:
        return [(float(l), None) for l in lb]
    ub = np.broadcast_to(np.asarray(lp.ub, dtype=np.float64), (lp.n,))
    return [(float(l), None if not np.isfinite(u) else float(u)) for l, u in zip(lb, ub)]


def solve(lp: LinearProgram, *, column_cap: int | None = DEFAULT_COLUMN_CAP) -> LpSolution:
    """Solve the program with HiGHS; return optimum, primal point, and row duals.

    Raises :class:`SizeCap` before touching the solver when the variable count
    exceeds ``column_cap``; :class:`InfeasibleError` / :class:`UnboundedError`
    mirror the solver verdicts. Deterministic for a fixed program and solver
    version (single-threaded dual simplex).
    """
    if column_cap is not None and lp.n > column_cap:
        raise SizeCap(lp.n, column_cap)
    lp.validate()

    minimize = lp.sense == "min"
    c = lp.c if minimize else -lp.c

    eq = lp.rel == REL_EQ
    le = lp.rel == REL_LE
    ge = lp.rel == REL_GE
    a_csr = lp.a.tocsr()
    a_eq = a_csr[eq] if eq.any() else None
    b_eq = lp.rhs[eq] if eq.any() else None
    if le.any() or ge.any():
        a_ub = sp.vstack(
            [blk for blk, use in ((a_csr[le], le.any()), (-a_csr[ge], ge.any())) if use],
            format="csr",
        )
        b_ub = np.concatenate(
            [blk for blk, use in ((lp.rhs[le], le.any()), (-lp.rhs[ge], ge.any())) if use]
        )
    else:
        a_ub = b_ub = None

    t0 = time.perf_counter()
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=b_eq,
        bounds=_bounds_list(lp),
        method="highs",
        options={
            # HiGHS defaults (1e-7) leave noise in the reported optimum of the
            # same magnitude, which is coarser than the 1e-8 equivalence
            # tolerance used throughout; 1e-10 is the tightest HiGHS accepts.
            "primal_feasibility_tolerance": _HIGHS_FEASIBILITY_TOL,
            "dual_feasibility_tolerance": _HIGHS_FEASIBILITY_TOL,
        },
    )
    ms = (time.perf_counter() - t0) * 1e3

    if res.status == 2:
        raise InfeasibleError("linear program is infeasible")
    if res.status == 3:
        raise UnboundedError("linear program is unbounded")
    if res.status != 0:
        raise InfeasibleError(f"solver failed with status {res.status}: {res.message}")

    # Reassemble row duals in original order; normalize so rhs @ duals equals
    # the primal optimum in the program's own sense.
    duals = np.zeros(lp.m, dtype=np.float64)
    if eq.any():
        duals[eq] = res.eqlin.marginals
    if a_ub is not None:
        mar = res.ineqlin.marginals
        n_le = int(le.sum())
        if n_le:
            duals[le] = mar[:n_le]
        if ge.any():
            duals[ge] = -mar[n_le:]
    if not minimize:
        duals = -duals

    value = float(res.fun) if minimize else -float(res.fun)
    return LpSolution(status="optimal", value=value, x=np.asarray(res.x), duals=duals, solve_ms=ms)


def check_duals(lp: LinearProgram, sol: LpSolution) -> DualReport:
    """Recompute feasibility, dual-sign, complementarity, and gap residuals."""
    x, lam = sol.x, sol.duals
    ax = lp.a @ x

    resid = np.zeros(lp.m)
    eq = lp.rel == REL_EQ
    le = lp.rel == REL_LE
    ge = lp.rel == REL_GE
    resid[eq] = np.abs(ax[eq] - lp.rhs[eq])
    resid[le] = np.maximum(0.0, ax[le] - lp.rhs[le])
    resid[ge] = np.maximum(0.0, lp.rhs[ge] - ax[ge])
    lb = np.broadcast_to(np.asarray(lp.lb, dtype=np.float64), (lp.n,))
    primal = max(float(resid.max(initial=0.0)), float(np.maximum(0.0, lb - x).max(initial=0.0)))

    # Dual sign feasibility and stationarity (reduced costs).
    sign = 1.0 if lp.sense == "min" else -1.0
    dual = 0.0
    if le.any():
        dual = max(dual, float(np.maximum(0.0, sign * lam[le]).max()))
    if ge.any():
        dual = max(dual, float(np.maximum(0.0, -sign * lam[ge]).max()))
    reduced = lp.c - lp.a.T @ lam
    if lp.ub is None:
        # With only lower bounds, reduced costs must be >= 0 (min) / <= 0 (max).
        dual = max(dual, float(np.maximum(0.0, -sign * reduced).max(initial=0.0)))

    comp = float(np.abs(reduced * (x - lb)).max(initial=0.0))
    slack = lp.rhs - ax
    ineq = ~eq
    if ineq.any():
        comp = max(comp, float(np.abs(lam[ineq] * slack[ineq]).max()))

    gap = abs(float(lp.c @ x) - float(lp.rhs @ lam))
    return DualReport(primal_residual=primal, dual_residual=dual, duality_gap=gap, complementarity=comp)


def to_mps(lp: LinearProgram, name: str = "CAUSALBOUNDS") -> str:
    """Render the program in MPS text form (columns in variable-index order).

    Objective row is named ``COST``; constraint rows ``R0000001`` onward. For a
    ``max`` program the objective coefficients are emitted negated (MPS solvers
    minimize), which is noted in a comment line.
    """
    lines = [f"NAME          {name}"]
    if lp.sense == "max":
        lines.append("* objective negated: source program maximizes")
    lines.append("ROWS")
    lines.append(" N  COST")
    row_kind = {REL_LE: "L", REL_EQ: "E", REL_GE: "G"}
    row_names = [f"R{i + 1:07d}" for i in range(lp.m)]
    for i in range(lp.m):
        lines.append(f" {row_kind[int(lp.rel[i])]}  {row_names[i]}")

    names = lp.var_names or tuple(f"X{j + 1:07d}" for j in range(lp.n))
    csc = lp.a.tocsc()
    obj = lp.c if lp.sense == "min" else -lp.c
    lines.append("COLUMNS")
    for j in range(lp.n):
        entries: list[tuple[str, float]] = []
        if obj[j] != 0.0:
            entries.append(("COST", float(obj[j])))
        start, end = csc.indptr[j], csc.indptr[j + 1]
        for k in range(start, end):
            entries.append((row_names[csc.indices[k]], float(csc.data[k])))
        for t in range(0, len(entries), 2):
            pair = entries[t : t + 2]
            cells = "".join(f"  {rn:<10}{val: .12g}".ljust(26) for rn, val in pair)
            lines.append(f"    {names[j]:<10}{cells}")
    lines.append("RHS")
    for i in range(lp.m):
        if lp.rhs[i] != 0.0:
            lines.append(f"    RHS       {row_names[i]:<10}{float(lp.rhs[i]): .12g}")
    lb = np.broadcast_to(np.asarray(lp.lb, dtype=np.float64), (lp.n,))
    need_bounds = lp.ub is not None or np.any(lb != 0.0)
    if need_bounds:
        lines.append("BOUNDS")
        ub = None if lp.ub is None else np.broadcast_to(np.asarray(lp.ub, dtype=np.float64), (lp.n,))
        for j in range(lp.n):
            if lb[j] != 0.0:
                lines.append(f" LO BND       {names[j]:<10}{float(lb[j]): .12g}")
            if ub is not None and np.isfinite(ub[j]):
                lines.append(f" UP BND       {names[j]:<10}{float(ub[j]): .12g}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def dense_program(
    sense: str,
    c,
    rows,
    rel,
    rhs,
    **kwargs,
) -> LinearProgram:
    """Convenience constructor from dense row data (tests and small programs)."""
    a = sp.csr_matrix(np.asarray(rows, dtype=np.float64).reshape(len(rhs), -1))
    return LinearProgram(
        sense=sense,
        c=np.asarray(c, dtype=np.float64),
        a=a,
        rel=np.asarray(rel, dtype=np.int8),
        rhs=np.asarray(rhs, dtype=np.float64),
        **kwargs,
    )
