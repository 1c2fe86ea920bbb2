"""A small log-barrier interior-point solver for smooth convex programs.

Canonical form (maximisation)::

    maximise   c.z + c0 - sum_k w_k exp(G_k z + h_k)          (w_k >= 0)
    subject to A_i z + b_i + z' Q_i z + sum_{k in i} w_k exp(G_k z + h_k) <= 0
               lower <= z <= upper

Every nonlinear term is convex on the ``<=`` side, so the objective is concave
and the feasible set convex.  Problems are dense and small (tens of
variables); the solver makes no attempt to exploit sparsity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

EXP_CLAMP = 60.0


@dataclass
class ExpTerms:
    G: np.ndarray
    h: np.ndarray
    w: np.ndarray

    @classmethod
    def empty(cls, n):
        return cls(np.zeros((0, n)), np.zeros(0), np.zeros(0))

    def __len__(self):
        return self.h.size


@dataclass
class ConvexProgram:
    n: int
    lower: np.ndarray
    upper: np.ndarray
    obj_lin: np.ndarray
    obj_const: float
    obj_exp: ExpTerms
    con_lin: np.ndarray
    con_const: np.ndarray
    con_quad: np.ndarray
    con_exp: ExpTerms
    con_owner: np.ndarray
    names: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(self.obj_exp.w < 0) or np.any(self.con_exp.w < 0):
            raise ValueError("exponential weights must be nonnegative")
        self._owner_matrix = np.zeros((self.m, len(self.con_exp)))
        self._owner_matrix[self.con_owner, np.arange(len(self.con_exp))] = 1.0
        self._quad_rows = np.flatnonzero(np.any(self.con_quad != 0, axis=(1, 2)))

    @property
    def m(self):
        return self.con_const.size

    # -- evaluation -------------------------------------------------------

    def objective(self, z, dtype=float):
        z = np.asarray(z, dtype=dtype)
        ex = self.obj_exp
        G, lin = (ex.G, self.obj_lin) if dtype is float else (ex.G.astype(dtype), self.obj_lin.astype(dtype))
        terms = ex.w * np.exp(np.minimum(G @ z + ex.h, EXP_CLAMP))
        return lin @ z + self.obj_const - terms.sum()

    def objective_derivatives(self, z):
        ex = self.obj_exp
        e = ex.w * np.exp(np.minimum(ex.G @ z + ex.h, EXP_CLAMP))
        grad = self.obj_lin - ex.G.T @ e
        hess = -(ex.G.T * e) @ ex.G
        return grad, hess

    def constraints(self, z, dtype=float):
        z = np.asarray(z, dtype=dtype)
        ex = self.con_exp
        if dtype is float:
            G, lin, owner = ex.G, self.con_lin, self._owner_matrix
        else:
            G, lin, owner = ex.G.astype(dtype), self.con_lin.astype(dtype), self._owner_matrix.astype(dtype)
        vals = lin @ z + self.con_const
        if self._quad_rows.size:
            q = self.con_quad[self._quad_rows]
            if dtype is not float:
                q = q.astype(dtype)
            vals[self._quad_rows] += (q @ z) @ z
        if len(ex):
            vals = vals + owner @ (ex.w * np.exp(np.minimum(G @ z + ex.h, EXP_CLAMP)))
        return vals

    def constraint_derivatives(self, z):
        """Values, Jacobian and the exp-term data needed for weighted Hessians."""
        ex = self.con_exp
        e = ex.w * np.exp(np.minimum(ex.G @ z + ex.h, EXP_CLAMP))
        vals = self.con_lin @ z + self.con_const
        jac = self.con_lin.copy()
        if self._quad_rows.size:
            qz = self.con_quad[self._quad_rows] @ z
            vals[self._quad_rows] += qz @ z
            jac[self._quad_rows] += 2 * qz
        if e.size:
            vals = vals + self._owner_matrix @ e
            jac = jac + self._owner_matrix @ (ex.G * e[:, None])
        return vals, jac, e

    def constraint_hessian(self, i, z):
        ex = self.con_exp
        sel = self.con_owner == i
        e = ex.w[sel] * np.exp(np.minimum(ex.G[sel] @ z + ex.h[sel], EXP_CLAMP))
        return (ex.G[sel].T * e) @ ex.G[sel] + 2 * self.con_quad[i]

    def weighted_hessian(self, weights, e):
        """``sum_i weights_i * hess f_i`` using precomputed exp values ``e``."""
        ex = self.con_exp
        hess = (ex.G.T * (e * weights[self.con_owner])) @ ex.G
        if self._quad_rows.size:
            hess += 2 * np.tensordot(weights[self._quad_rows], self.con_quad[self._quad_rows], 1)
        return hess

    def violation(self, z):
        """Largest constraint value (bounds included); ``<= 0`` means feasible."""
        z = np.asarray(z, dtype=float)
        parts = [self.constraints(z)] if self.m else []
        parts += [z - self.upper, self.lower - z]
        return float(np.max(np.concatenate(parts)))

    def to_text(self):
        """Plain-text dump for cross-checking against an external modelling tool."""
        lines = [f"variables {self.n}"]
        for j in range(self.n):
            lines.append(f"  z{j} in [{self.lower[j]!r}, {self.upper[j]!r}]")
        lines.append("maximize")
        lines.append("  " + _affine_text(self.obj_lin, self.obj_const))
        for k in range(len(self.obj_exp)):
            lines.append("  - " + _exp_text(self.obj_exp, k))
        lines.append("subject to")
        for i in range(self.m):
            name = self.names[i] if i < len(self.names) else f"c{i}"
            lines.append(f"  [{name}] " + _affine_text(self.con_lin[i], self.con_const[i]))
            rows, cols = np.nonzero(self.con_quad[i])
            for r, c in zip(rows, cols):
                lines.append(f"      + {self.con_quad[i, r, c]!r}*z{r}*z{c}")
            for k in np.flatnonzero(self.con_owner == i):
                lines.append("      + " + _exp_text(self.con_exp, k))
            lines.append("      <= 0")
        return "\n".join(lines)


def _affine_text(coef, const):
    parts = [f"{c!r}*z{j}" for j, c in enumerate(coef) if c != 0]
    parts.append(repr(float(const)))
    return " + ".join(parts)


def _exp_text(ex, k):
    inner = _affine_text(ex.G[k], ex.h[k])
    return f"{ex.w[k]!r}*exp({inner})"


class ProgramBuilder:
    """Accumulates terms and freezes them into a :class:`ConvexProgram`."""

    def __init__(self, n, lower=None, upper=None):
        self.n = n
        self.lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, float).copy()
        self.upper = np.full(n, np.inf) if upper is None else np.asarray(upper, float).copy()
        self.obj_lin = np.zeros(n)
        self.obj_const = 0.0
        self._obj_exp = []
        self._rows = []

    def objective_affine(self, lin, const=0.0):
        self.obj_lin += lin
        self.obj_const += const

    def objective_exp(self, g, h, w):
        """Subtract ``w exp(g.z + h)`` from the objective."""
        self._obj_exp.append((np.asarray(g, float), float(h), float(w)))

    def constraint(self, lin=None, const=0.0, quad=None, exps=(), name=None):
        lin = np.zeros(self.n) if lin is None else np.asarray(lin, float)
        self._rows.append((lin, float(const), quad, list(exps), name))

    def build(self):
        n, m = self.n, len(self._rows)
        obj_exp = (ExpTerms(np.array([g for g, _, _ in self._obj_exp]).reshape(-1, n),
                            np.array([h for _, h, _ in self._obj_exp]),
                            np.array([w for _, _, w in self._obj_exp]))
                   if self._obj_exp else ExpTerms.empty(n))
        con_lin = np.zeros((m, n))
        con_const = np.zeros(m)
        con_quad = np.zeros((m, n, n))
        gs, hs, ws, owner, names = [], [], [], [], []
        for i, (lin, const, quad, exps, name) in enumerate(self._rows):
            con_lin[i] = lin
            con_const[i] = const
            if quad is not None:
                con_quad[i] = quad
            for g, h, w in exps:
                gs.append(np.asarray(g, float))
                hs.append(float(h))
                ws.append(float(w))
                owner.append(i)
            names.append(name or f"c{i}")
        con_exp = (ExpTerms(np.array(gs).reshape(-1, n), np.array(hs), np.array(ws))
                   if gs else ExpTerms.empty(n))
        return ConvexProgram(n, self.lower, self.upper, self.obj_lin.copy(), self.obj_const,
                             obj_exp, con_lin, con_const, con_quad, con_exp,
                             np.array(owner, dtype=int), names)


@dataclass
class SolverReport:
    status: str
    x: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    gap: float
    max_violation: float

    @property
    def optimal(self):
        return self.status == "optimal"


@dataclass
class SolverSettings:
    kkt_tol: float = 1e-7
    gap_tol: float = 1e-7
    mu: float = 10.0
    t0: float = 1.0
    newton_tol: float = 1e-10
    max_newton: int = 400
    alpha: float = 0.01
    backtrack: float = 0.5


class _Barrier:
    def __init__(self, prog):
        self.prog = prog
        self.lo_mask = np.isfinite(prog.lower)
        self.hi_mask = np.isfinite(prog.upper)
        self.n_ineq = prog.m + int(self.lo_mask.sum()) + int(self.hi_mask.sum())

    def strictly_feasible(self, z):
        p = self.prog
        if np.any(z[self.lo_mask] <= p.lower[self.lo_mask]):
            return False
        if np.any(z[self.hi_mask] >= p.upper[self.hi_mask]):
            return False
        return p.m == 0 or bool(np.all(p.constraints(z) < 0))

    def value(self, z, t):
        p = self.prog
        f = p.constraints(z) if p.m else np.zeros(0)
        if np.any(f >= 0):
            return np.inf
        lo = z[self.lo_mask] - p.lower[self.lo_mask]
        hi = p.upper[self.hi_mask] - z[self.hi_mask]
        if np.any(lo <= 0) or np.any(hi <= 0):
            return np.inf
        return (-t * p.objective(z) - np.sum(np.log(-f))
                - np.sum(np.log(lo)) - np.sum(np.log(hi)))

    def derivatives(self, z, t):
        p = self.prog
        g_obj, h_obj = p.objective_derivatives(z)
        grad = -t * g_obj
        hess = -t * h_obj
        if p.m:
            f, jac, e = p.constraint_derivatives(z)
            inv = 1.0 / (-f)
            grad += jac.T @ inv
            hess += (jac.T * inv ** 2) @ jac + p.weighted_hessian(inv, e)
        d = np.zeros(p.n)
        lo = np.where(self.lo_mask, z - np.where(self.lo_mask, p.lower, 0), 1.0)
        hi = np.where(self.hi_mask, np.where(self.hi_mask, p.upper, 0) - z, 1.0)
        grad += np.where(self.hi_mask, 1.0 / hi, 0) - np.where(self.lo_mask, 1.0 / lo, 0)
        d += np.where(self.hi_mask, 1.0 / hi ** 2, 0) + np.where(self.lo_mask, 1.0 / lo ** 2, 0)
        hess[np.diag_indices_from(hess)] += d
        return grad, hess, g_obj

    def kkt_residual(self, z, t):
        """Stationarity of the Lagrangian with barrier multipliers.

        Scaled by the size of the terms that cancel in it, so the measure
        reflects relative rather than absolute accuracy.
        """
        p = self.prog
        g_obj, _ = p.objective_derivatives(z)
        r = -g_obj
        mag = np.abs(g_obj)
        if p.m:
            f, jac, _ = p.constraint_derivatives(z)
            lam = 1.0 / (t * -f)
            r = r + jac.T @ lam
            mag = mag + np.abs(jac).T @ lam
        lam_hi = np.where(self.hi_mask, 1.0 / (t * (np.where(self.hi_mask, p.upper, 0) - z)), 0)
        lam_lo = np.where(self.lo_mask, 1.0 / (t * (z - np.where(self.lo_mask, p.lower, 0))), 0)
        r = r + lam_hi - lam_lo
        mag = mag + lam_hi + lam_lo
        return float(np.max(np.abs(r)) / (1.0 + np.max(mag)))


def _newton_direction(hess, grad):
    n = hess.shape[0]
    reg = 0.0
    base = 1e-10 * (1.0 + abs(np.trace(hess)) / n)
    for attempt in range(4):
        try:
            factor = scipy.linalg.cho_factor(hess + reg * np.eye(n), check_finite=True)
            return -scipy.linalg.cho_solve(factor, grad)
        except (np.linalg.LinAlgError, ValueError):
            reg = base * 10.0 ** attempt
    return None


def _center(barrier, z, t, settings, budget, stop=None):
    """Newton centring at fixed ``t``; returns (z, newton steps, status)."""
    used = 0
    val = barrier.value(z, t)
    while used < budget:
        grad, hess, _ = barrier.derivatives(z, t)
        step = _newton_direction(hess, grad)
        if step is None or not np.all(np.isfinite(step)):
            return z, used, "numerical-failure"
        used += 1
        decrement = -grad @ step
        if decrement / 2 <= settings.newton_tol or decrement <= 0:
            return z, used, "ok"
        s = 1.0
        if decrement < 0.1:
            # quadratic region: the full step is safe and Armijo tests would
            # drown in the rounding error of the barrier value
            cand = z + step
            cval = barrier.value(cand, t)
            if np.isfinite(cval):
                z, val = cand, cval
                if stop is not None and stop(z):
                    return z, used, "stopped"
                continue
        while True:
            cand = z + s * step
            cval = barrier.value(cand, t)
            if np.isfinite(cval) and cval <= val + settings.alpha * s * (grad @ step):
                break
            s *= settings.backtrack
            if s < 1e-20:
                return z, used, "ok"
        z, val = cand, cval
        if stop is not None and stop(z):
            return z, used, "stopped"
    return z, used, "iteration-cap"


def _barrier_loop(prog, z, settings, stop=None):
    barrier = _Barrier(prog)
    scale = max(1.0, abs(prog.objective(z)))
    t = settings.t0 / scale if settings.t0 is not None else 1.0
    iterations = 0
    status = "optimal"
    accurate = None
    while True:
        z, used, st = _center(barrier, z, t, settings, settings.max_newton - iterations, stop)
        iterations += used
        if st == "stopped":
            return z, iterations, "stopped", t, barrier
        if st == "numerical-failure":
            status = st
            break
        if st == "iteration-cap" or iterations >= settings.max_newton:
            status = "iteration-cap"
            break
        if stop is None:
            loose = barrier.n_ineq / t <= 1e-4 * max(1.0, abs(prog.objective(z)))
            if barrier.kkt_residual(z, t) <= settings.kkt_tol:
                accurate = (z, t) if loose else None
            elif accurate is not None:
                # rounding now dominates the multipliers; keep the last clean stage
                z, t = accurate
                break
        gap = barrier.n_ineq / t
        if gap <= settings.gap_tol * max(1.0, abs(prog.objective(z))):
            break
        t *= settings.mu
    return z, iterations, status, t, barrier


def phase1_feasible(prog, start=None, settings=None):
    """Find a strictly feasible point, or return ``None`` if there is none.

    Minimises a shared slack ``s`` subject to ``f_i(z) <= s`` inside the box.
    """
    settings = settings or SolverSettings()
    finite = np.isfinite(prog.lower) & np.isfinite(prog.upper)
    center = np.where(finite, 0.5 * (prog.lower + prog.upper),
                      np.where(np.isfinite(prog.lower), prog.lower + 1.0,
                               np.where(np.isfinite(prog.upper), prog.upper - 1.0, 0.0)))
    if start is None:
        z0 = center
    else:
        z0 = np.asarray(start, float).copy()
        width = np.where(finite, prog.upper - prog.lower, np.inf)
        margin = np.minimum(1e-6 * np.maximum(width, 1.0), 0.25 * width)
        z0 = np.clip(z0, prog.lower + margin, prog.upper - margin)
    if prog.m == 0:
        return z0 if start is not None else center
    f0 = prog.constraints(z0)
    if np.all(f0 < 0):
        return z0
    n = prog.n
    s0 = float(np.max(f0))
    spread = 1.0 + abs(s0)
    aug = ConvexProgram(
        n + 1,
        np.append(prog.lower, -1e3 * spread),
        np.append(prog.upper, s0 + spread),
        np.append(np.zeros(n), -1.0), 0.0, ExpTerms.empty(n + 1),
        np.column_stack([prog.con_lin, -np.ones(prog.m)]), prog.con_const.copy(),
        np.pad(prog.con_quad, ((0, 0), (0, 1), (0, 1))),
        ExpTerms(np.column_stack([prog.con_exp.G, np.zeros(len(prog.con_exp))]),
                 prog.con_exp.h, prog.con_exp.w),
        prog.con_owner, list(prog.names))
    target = -1e-9 * spread

    def stop(z):
        return z[-1] < target and np.all(prog.constraints(z[:-1]) < 0)

    local = SolverSettings(**{**settings.__dict__, "t0": 1.0})
    z, _, status, _, _ = _barrier_loop(aug, np.append(z0, s0 + 0.5 * spread), local, stop)
    if status == "stopped" or (z[-1] < 0 and np.all(prog.constraints(z[:-1]) < 0)):
        return z[:-1]
    return None


def solve(prog, start=None, settings=None, **overrides):
    """Maximise ``prog`` with a log-barrier method.

    ``start`` should be strictly feasible; otherwise phase one runs first.
    The returned point is never worse than a strictly feasible start.
    """
    settings = settings or SolverSettings()
    if overrides:
        settings = SolverSettings(**{**settings.__dict__, **overrides})
    barrier = _Barrier(prog)
    z0 = None if start is None else np.asarray(start, float).copy()
    if z0 is None or not barrier.strictly_feasible(z0):
        z0 = phase1_feasible(prog, z0, settings)
        if z0 is None:
            x = np.asarray(start if start is not None else np.zeros(prog.n), float)
            return SolverReport("infeasible", x, float("nan"), 0, float("inf"),
                                float("inf"), prog.violation(x))
    start_obj = prog.objective(z0)
    z, iterations, status, t, barrier = _barrier_loop(prog, z0, settings)
    kkt = barrier.kkt_residual(z, t)
    gap = barrier.n_ineq / t
    if status == "optimal" and kkt > settings.kkt_tol:
        status = "numerical-failure"
    obj = prog.objective(z)
    if obj < start_obj:
        z, obj = z0, start_obj
    return SolverReport(status, z, float(obj), iterations, kkt, gap, prog.violation(z))


def check_derivatives(prog, point, step=1e-6, hessians=True):
    """Worst relative error of analytic derivatives against central differences.

    Values are evaluated in extended precision so rounding stays far below
    the truncation error of the difference quotient.
    """
    z = np.asarray(point, dtype=float)
    n = z.size
    h = step * (1.0 + np.abs(z))
    wide = np.longdouble

    def rel(a, b):
        a, b = np.asarray(a, float), np.asarray(b, float)
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))

    g_obj, h_obj = prog.objective_derivatives(z)
    fd_grad = np.empty(n)
    for j in range(n):
        e = np.zeros(n, dtype=wide)
        e[j] = h[j]
        fd_grad[j] = (prog.objective(z + e, wide) - prog.objective(z - e, wide)) / (2 * wide(h[j]))
    worst = rel(g_obj, fd_grad) if np.any(g_obj) else float(np.max(np.abs(fd_grad)))
    if hessians and np.any(h_obj):
        fd_h = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h[j]
            fd_h[:, j] = (prog.objective_derivatives(z + e)[0]
                          - prog.objective_derivatives(z - e)[0]) / (2 * h[j])
        worst = max(worst, rel(h_obj, fd_h))
    if prog.m:
        _, jac, _ = prog.constraint_derivatives(z)
        fd_jac = np.empty((prog.m, n))
        for j in range(n):
            e = np.zeros(n, dtype=wide)
            e[j] = h[j]
            fd_jac[:, j] = (prog.constraints(z + e, wide)
                            - prog.constraints(z - e, wide)) / (2 * wide(h[j]))
        for i in range(prog.m):
            if np.any(jac[i]):
                worst = max(worst, rel(jac[i], fd_jac[i]))
            else:
                worst = max(worst, float(np.max(np.abs(fd_jac[i]))))
        if hessians:
            for i in range(prog.m):
                hi = prog.constraint_hessian(i, z)
                if not np.any(hi):
                    continue
                fd_h = np.empty((n, n))
                for j in range(n):
                    e = np.zeros(n)
                    e[j] = h[j]
                    fd_h[:, j] = (prog.constraint_derivatives(z + e)[1][i]
                                  - prog.constraint_derivatives(z - e)[1][i]) / (2 * h[j])
                worst = max(worst, rel(hi, fd_h))
    return worst
