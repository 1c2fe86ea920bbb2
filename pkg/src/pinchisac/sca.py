"""Successive convex approximation over TPA positions and span coefficients.

The aligned-channel problem is rewritten with log-domain auxiliaries so that
every nonlinearity becomes an exponential of an affine form:

* ``a, b`` bracket the squared TPA distances, ``e^{-2a} <= D^2 <= e^{-2b}``;
* ``p, q`` bracket ``|c_u|^2`` and ``|c_t|^2``; ``o, v`` bracket ``|c_u + c_t|^2``.

The user, power and sensing functions (``g_hat``) are then signed sums of
such exponentials.  Linearising the positive or negative part, whichever
sits on the nonconvex side, yields a convex subproblem whose feasible set is
inside the original one, so each iterate stays feasible and the objective
never decreases.

Internally coefficients are scaled by ``kappa = P_max / eta`` so that the
power constraint reads ``<= 1``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import convex
from .beamspan import AlignedChannelSummary, SpanCoefficients, aligned_summary, optimal_span_beamformer
from .geometry import target_distances_sq, user_distances_sq
from .sensing import effective_radar_gain_beta

LOG_FLOOR = np.log(1e-30)


class ScaInvariantError(RuntimeError):
    """The objective trace decreased, which a correct linearisation cannot do."""


@dataclass
class LiftedVariables:
    """A point of the lifted problem, in physical (unscaled) units."""

    c_u: complex
    c_t: complex
    x: np.ndarray
    a_u: np.ndarray
    b_u: np.ndarray
    a_t: np.ndarray
    b_t: np.ndarray
    p_u: float
    q_u: float
    p_t: float
    q_t: float
    o: float
    v: float

    @property
    def coeffs(self):
        return SpanCoefficients(complex(self.c_u), complex(self.c_t))

    @property
    def n_tx(self):
        return len(self.x)


@dataclass(frozen=True)
class ScaConfig:
    max_outer_iterations: int = 50
    objective_tolerance: float = 1e-5
    patience: int = 2
    trust_region_radius: float = 2.0
    constraint_margin: float = 1e-3
    power_backoff: float = 1e-4
    retighten_margin: float = 1e-8
    refresh_share: float = 1e-5
    refresh_floor: float = 1e-3
    init_floor: float = 1e-3
    extrapolate: bool = True
    max_extrapolation: float = 64.0
    solver: convex.SolverSettings = field(default_factory=lambda: convex.SolverSettings(t0=100.0))

    def __post_init__(self):
        for name in ("max_outer_iterations", "objective_tolerance", "patience",
                     "trust_region_radius", "constraint_margin"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class Infeasible:
    """No beamformer meets the radar requirement; the rate is recorded as 0."""

    max_radar_snr: float
    required: float
    rate: float = 0.0


@dataclass
class TraceRow:
    iteration: int
    objective: float
    max_residual: float
    step_norm: float
    solver_status: str


@dataclass
class ScaResult:
    solution: LiftedVariables
    trace: list
    status: str

    @property
    def objective(self):
        return self.trace[-1].objective

    def trace_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "objective", "max_residual", "step_norm", "solver_status"])
        for row in self.trace:
            writer.writerow([row.iteration, repr(row.objective), repr(row.max_residual),
                             repr(row.step_norm), row.solver_status])
        return buf.getvalue()


class Layout:
    """Index map of the real decision vector."""

    def __init__(self, m):
        self.m = m
        self.cu = np.array([0, 1])
        self.ct = np.array([2, 3])
        base = 4
        self.x, self.au, self.bu, self.at, self.bt = (
            np.arange(base + k * m, base + (k + 1) * m) for k in range(5))
        tail = base + 5 * m
        self.pu, self.qu, self.pt, self.qt, self.o, self.v = range(tail, tail + 6)
        self.n = tail + 6

    def unit(self, *pairs):
        """Coefficient vector from ``(index, weight)`` pairs."""
        g = np.zeros(self.n)
        for idx, w in pairs:
            g[idx] += w
        return g


@dataclass(frozen=True)
class ExpPoly:
    """``sum_k s_k exp(G_k . z)`` with ``s_k`` in ``{-1, +1}``."""

    G: np.ndarray
    sign: np.ndarray

    def terms(self, z):
        return np.exp(np.minimum(self.G @ z, convex.EXP_CLAMP))

    def value(self, z):
        return float(self.sign @ self.terms(z))


def _g_hat_polys(lay):
    """Exp-polynomials of the user, power and sensing functions."""
    m = lay.m
    u, p, t = [], [], []
    for i in range(m):
        for k in range(m):
            bu_i, bu_k, bt_i, bt_k = lay.bu[i], lay.bu[k], lay.bt[i], lay.bt[k]
            au_i, au_k, at_i, at_k = lay.au[i], lay.au[k], lay.at[i], lay.at[k]
            u += [(+1, lay.unit((lay.pu, 1), (bu_i, 2), (bu_k, 2))),
                  (+1, lay.unit((lay.pt, 1), (bu_i, 1), (bt_i, 1), (bu_k, 1), (bt_k, 1))),
                  (+1, lay.unit((lay.o, 1), (bu_i, 2), (bu_k, 1), (bt_k, 1)))]
            t += [(+1, lay.unit((lay.pu, 1), (bu_i, 1), (bt_i, 1), (bu_k, 1), (bt_k, 1))),
                  (+1, lay.unit((lay.pt, 1), (bt_i, 2), (bt_k, 2))),
                  (+1, lay.unit((lay.o, 1), (bt_i, 2), (bu_k, 1), (bt_k, 1)))]
            for q in (lay.qu, lay.qt):
                u.append((-1, lay.unit((q, 1), (au_i, 2), (au_k, 1), (at_k, 1))))
                t.append((-1, lay.unit((q, 1), (at_i, 2), (au_k, 1), (at_k, 1))))
        au_i, at_i, bu_i, bt_i = lay.au[i], lay.at[i], lay.bu[i], lay.bt[i]
        p += [(+1, lay.unit((au_i, 2), (lay.qu, 1))),
              (+1, lay.unit((at_i, 2), (lay.qt, 1))),
              (+1, lay.unit((au_i, 1), (at_i, 1), (lay.v, 1))),
              (-1, lay.unit((lay.pu, 1), (bu_i, 1), (bt_i, 1))),
              (-1, lay.unit((lay.pt, 1), (bu_i, 1), (bt_i, 1)))]

    def pack(items):
        return ExpPoly(np.array([g for _, g in items]), np.array([s for s, _ in items], float))

    return pack(u), pack(p), pack(t)


class ScaProblem:
    """One problem instance: geometry, budgets and the fixed exp-polynomials."""

    def __init__(self, geom, rf, spec, p_max, sigma_u2):
        if p_max <= 0 or sigma_u2 <= 0:
            raise ValueError("p_max and sigma_u2 must be positive")
        self.geom, self.rf, self.spec = geom, rf, spec
        self.p_max, self.sigma_u2 = float(p_max), float(sigma_u2)
        self.eta = rf.eta
        self.kappa = self.p_max / self.eta
        self.log_kappa = np.log(self.kappa)
        self.beta = effective_radar_gain_beta(geom, rf, spec)
        # illumination |h_t^H w|^2 needed, in watts-equivalent units
        self.tau = spec.gamma_req * spec.sigma_s2 / self.beta
        self.layout = Layout(geom.n_tx)
        self.poly_u, self.poly_p, self.poly_t = _g_hat_polys(self.layout)
        self.du_perp2 = (geom.user[1] - geom.tx_y) ** 2 + geom.height ** 2
        self.dt_perp2 = (geom.target[1] - geom.tx_y) ** 2 + geom.height ** 2

    @property
    def sensing_threshold(self):
        """Right-hand side of the lifted sensing constraint (physical units)."""
        return self.tau / self.eta ** 2

    @property
    def max_radar_snr(self):
        """Radar SNR with all power on the target and every TPA at ``x_t``."""
        dt2 = target_distances_sq(self.geom, np.full(self.geom.n_tx, self.geom.target[0]))
        return self.beta * self.p_max * self.eta * float(np.sum(1.0 / dt2)) / self.spec.sigma_s2

    def rate_from_user_gain(self, g_u):
        """Rate for a lifted user value ``g_u`` (physical units)."""
        return float(np.log2(1.0 + max(self.eta ** 2 * g_u, 0.0) / self.sigma_u2))

    # -- packing ---------------------------------------------------------

    def pack(self, lv):
        lay = self.layout
        z = np.empty(lay.n)
        s = 1.0 / np.sqrt(self.kappa)
        z[lay.cu] = [lv.c_u.real * s, lv.c_u.imag * s]
        z[lay.ct] = [lv.c_t.real * s, lv.c_t.imag * s]
        z[lay.x], z[lay.au], z[lay.bu], z[lay.at], z[lay.bt] = lv.x, lv.a_u, lv.b_u, lv.a_t, lv.b_t
        for idx, val in zip((lay.pu, lay.qu, lay.pt, lay.qt, lay.o, lay.v),
                            (lv.p_u, lv.q_u, lv.p_t, lv.q_t, lv.o, lv.v)):
            z[idx] = val - self.log_kappa
        return z

    def unpack(self, z):
        lay = self.layout
        s = np.sqrt(self.kappa)
        lk = self.log_kappa
        return LiftedVariables(
            complex(z[0], z[1]) * s, complex(z[2], z[3]) * s, z[lay.x].copy(),
            z[lay.au].copy(), z[lay.bu].copy(), z[lay.at].copy(), z[lay.bt].copy(),
            float(z[lay.pu] + lk), float(z[lay.qu] + lk), float(z[lay.pt] + lk),
            float(z[lay.qt] + lk), float(z[lay.o] + lk), float(z[lay.v] + lk))

    def scaled_g_hat(self, z):
        return self.poly_u.value(z), self.poly_p.value(z), self.poly_t.value(z)

    def residuals(self, z):
        """Relative violations of every lifted-problem constraint (``<= 0`` is feasible)."""
        lay = self.layout
        x = z[lay.x]
        du2 = (x - self.geom.user[0]) ** 2 + self.du_perp2
        dt2 = (x - self.geom.target[0]) ** 2 + self.dt_perp2
        cu = complex(z[0], z[1])
        ct = complex(z[2], z[3])
        parts = [np.exp(-2 * z[lay.au]) / du2 - 1, du2 * np.exp(2 * z[lay.bu]) - 1,
                 np.exp(-2 * z[lay.at]) / dt2 - 1, dt2 * np.exp(2 * z[lay.bt]) - 1]
        for lo, hi, mag in ((lay.pu, lay.qu, abs(cu) ** 2), (lay.pt, lay.qt, abs(ct) ** 2),
                            (lay.o, lay.v, abs(cu + ct) ** 2)):
            parts.append([np.exp(z[lo]) / mag - 1 if mag > 0 else np.inf,
                          mag * np.exp(-z[hi]) - 1])
        _, gp, gt = self.scaled_g_hat(z)
        parts.append([gp - 1.0])
        thr = self.sensing_threshold / self.kappa
        if thr > 0:
            parts.append([1.0 - gt / thr])
        return float(np.max(np.concatenate([np.ravel(np.asarray(p, float)) for p in parts])))


# -- public helpers ---------------------------------------------------------


def lift_tight(coeffs, x, geom, margin=0.0):
    """Lift ``(coeffs, x)`` with every bracketing inequality tight.

    A positive ``margin`` opens each bracket by that much in the log domain,
    giving a strictly feasible point instead.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = geom.bounds
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("positions outside the waveguide")
    du2 = user_distances_sq(geom, x)
    dt2 = target_distances_sq(geom, x)

    def log_mag(c):
        mag2 = abs(c) ** 2
        return max(np.log(mag2), LOG_FLOOR) if mag2 > 0 else LOG_FLOOR

    h = margin / 2
    lu, lt, ls = log_mag(coeffs.c_u), log_mag(coeffs.c_t), log_mag(coeffs.c_u + coeffs.c_t)
    return LiftedVariables(
        complex(coeffs.c_u), complex(coeffs.c_t), x.copy(),
        -0.5 * np.log(du2) + h, -0.5 * np.log(du2) - h,
        -0.5 * np.log(dt2) + h, -0.5 * np.log(dt2) - h,
        lu - margin, lu + margin, lt - margin, lt + margin, ls - margin, ls + margin)


def evaluate_g_hat(lv):
    """Lifted user, power and sensing functions in physical units.

    At a tight lift they equal ``f_hat_u / eta^2``, ``f_hat_p / eta`` and
    ``f_hat_t / eta^2``.
    """
    eu2, et2 = np.exp(2 * lv.b_u), np.exp(2 * lv.b_t)
    ebb = np.exp(lv.b_u + lv.b_t)
    au2, at2 = np.exp(2 * lv.a_u), np.exp(2 * lv.a_t)
    eaa = np.exp(lv.a_u + lv.a_t)
    q_sum = np.exp(lv.q_u) + np.exp(lv.q_t)
    g_u = (np.exp(lv.p_u) * eu2.sum() ** 2 + np.exp(lv.p_t) * ebb.sum() ** 2
           + np.exp(lv.o) * eu2.sum() * ebb.sum() - q_sum * au2.sum() * eaa.sum())
    g_p = np.sum(np.exp(2 * lv.a_u + lv.q_u) + np.exp(2 * lv.a_t + lv.q_t)
                 + np.exp(lv.a_u + lv.a_t + lv.v)
                 - (np.exp(lv.p_u) + np.exp(lv.p_t)) * ebb)
    g_t = (np.exp(lv.p_u) * ebb.sum() ** 2 + np.exp(lv.p_t) * et2.sum() ** 2
           + np.exp(lv.o) * et2.sum() * ebb.sum() - q_sum * at2.sum() * eaa.sum())
    return float(g_u), float(g_p), float(g_t)


def _tangent(poly, mask, z0):
    """Affine tangent ``sum s e^{y0}(1 + G (z - z0))`` of the masked terms."""
    e0 = poly.terms(z0)[mask] * poly.sign[mask]
    G = poly.G[mask]
    lin = e0 @ G
    const = float(e0.sum() - lin @ z0)
    return lin, const


def linearize(problem, base, cfg=None, objective_scale=None):
    """Convex subproblem around the scaled point ``base``.

    Returns ``(program, objective_scale)``; the program objective is the
    linearised user function times ``objective_scale``.
    """
    cfg = cfg or ScaConfig()
    lay, geom = problem.layout, problem.geom
    z0 = np.asarray(base, dtype=float)
    lo_x, hi_x = geom.bounds
    lower = np.full(lay.n, -np.inf)
    upper = np.full(lay.n, np.inf)
    for idx in (lay.cu, lay.ct):
        lower[idx], upper[idx] = -1e4, 1e4
    x0 = z0[lay.x]
    lower[lay.x] = np.maximum(lo_x, x0 - cfg.trust_region_radius)
    upper[lay.x] = np.minimum(hi_x, x0 + cfg.trust_region_radius)
    for idx in (lay.au, lay.bu, lay.at, lay.bt):
        lower[idx], upper[idx] = -12.0, 6.0
    for idx in (lay.pu, lay.qu, lay.pt, lay.qt, lay.o, lay.v):
        lower[idx], upper[idx] = -200.0, 40.0
    b = convex.ProgramBuilder(lay.n, lower, upper)

    pos_u = problem.poly_u.sign > 0
    if objective_scale is None:
        objective_scale = 1.0 / max(abs(problem.poly_u.value(z0)), 1e-300)
    lin, const = _tangent(problem.poly_u, pos_u, z0)
    b.objective_affine(objective_scale * lin, objective_scale * const)
    for g in problem.poly_u.G[~pos_u]:
        b.objective_exp(g, np.log(objective_scale), 1.0)

    # power: convex terms kept, subtracted terms replaced by their tangent
    pos_p = problem.poly_p.sign > 0
    lin, const = _tangent(problem.poly_p, ~pos_p, z0)
    b.constraint(lin, const - 1.0, exps=[(g, 0.0, 1.0) for g in problem.poly_p.G[pos_p]],
                 name="power")

    thr = problem.sensing_threshold / problem.kappa
    if thr > 0:
        pos_t = problem.poly_t.sign > 0
        lin, const = _tangent(problem.poly_t, pos_t, z0)
        b.constraint(-lin, thr - const, exps=[(g, 0.0, 1.0) for g in problem.poly_t.G[~pos_t]],
                     name="sensing")

    for (xe, perp2, a_idx, b_idx, tag) in (
            (geom.user[0], problem.du_perp2, lay.au, lay.bu, "u"),
            (geom.target[0], problem.dt_perp2, lay.at, lay.bt, "t")):
        for m in range(lay.m):
            xi, ai, bi = lay.x[m], a_idx[m], b_idx[m]
            xt = x0[m]
            # e^{-2a} <= tangent of the squared distance at x0
            lin = lay.unit((xi, -2 * (xt - xe)))
            const = -((xe - xt) ** 2 - 2 * (xt - xe) * xt + perp2[m])
            b.constraint(lin, const, exps=[(lay.unit((ai, -2)), 0.0, 1.0)], name=f"a_{tag}{m + 1}")
            # squared distance <= tangent of e^{-2b} at b0
            eb = np.exp(-2 * z0[bi])
            quad = np.zeros((lay.n, lay.n))
            quad[xi, xi] = 1.0
            lin = lay.unit((xi, -2 * xe), (bi, 2 * eb))
            const = xe ** 2 + perp2[m] - eb * (1 + 2 * z0[bi])
            b.constraint(lin, const, quad=quad, name=f"b_{tag}{m + 1}")

    for lo_idx, hi_idx, sel, tag in ((lay.pu, lay.qu, (0, 1, None, None), "u"),
                                     (lay.pt, lay.qt, (None, None, 2, 3), "t"),
                                     (lay.o, lay.v, (0, 1, 2, 3), "s")):
        proj = np.zeros((2, lay.n))
        if sel[0] is not None:
            proj[0, 0] = proj[1, 1] = 1.0
        if sel[2] is not None:
            proj[0, 2] = proj[1, 3] = 1.0
        c0 = proj @ z0
        # e^{p} <= 2 Re{c0^* c} - |c0|^2
        b.constraint(-2 * (c0 @ proj), float(c0 @ c0),
                     exps=[(lay.unit((lo_idx, 1)), 0.0, 1.0)], name=f"p_{tag}")
        # |c|^2 <= e^{q0} (1 + q - q0)
        eq = np.exp(z0[hi_idx])
        b.constraint(lay.unit((hi_idx, -eq)), -eq * (1 - z0[hi_idx]), quad=proj.T @ proj,
                     name=f"q_{tag}")
    return b.build(), objective_scale


def retighten(problem, z, cfg):
    """Close the lifting brackets around ``(c, x)`` of a scaled point.

    Returns a strictly feasible scaled point or ``None``.  Slack left in the
    brackets only lowers the user function, so a re-tightened base point
    usually moves the next subproblem much further.
    """
    lay = problem.layout
    lo, hi = problem.geom.bounds
    x = z[lay.x]
    if np.any(x <= lo) or np.any(x >= hi):
        return None
    root = np.sqrt(problem.kappa)
    coeffs = SpanCoefficients(complex(z[0], z[1]) * root, complex(z[2], z[3]) * root)
    if coeffs.c_u == 0 or coeffs.c_t == 0 or coeffs.c_u + coeffs.c_t == 0:
        return None
    cand = problem.pack(lift_tight(coeffs, x, problem.geom, cfg.retighten_margin))
    _, g_p, _ = problem.scaled_g_hat(cand)
    if g_p >= 1.0:
        shift = np.log((1.0 - cfg.retighten_margin) / g_p)
        cand[:4] *= np.exp(shift / 2)
        for idx in (lay.pu, lay.qu, lay.pt, lay.qt, lay.o, lay.v):
            cand[idx] += shift
    if problem.residuals(cand) >= 0:
        return None
    return cand


def refresh(problem, x, cfg):
    """Strictly feasible scaled point with the best beamformer for ``x``."""
    lv = feasible_init(problem, x, cfg.refresh_share, cfg, margin=cfg.retighten_margin,
                       floor=cfg.refresh_floor, backoff=cfg.retighten_margin)
    if lv is None or isinstance(lv, Infeasible):
        return None
    return problem.pack(lv)


def _extrapolate(problem, x_prev, z_best, g_best, cfg):
    """Stretch a successful position step while the lifted objective keeps rising."""
    lo, hi = problem.geom.bounds
    step = z_best[problem.layout.x] - x_prev
    if not np.any(step):
        return z_best, g_best
    factor = 2.0
    while factor <= cfg.max_extrapolation:
        x_try = np.clip(x_prev + factor * step, lo, hi)
        cand = refresh(problem, x_try, cfg)
        if cand is None:
            break
        g = problem.poly_u.value(cand)
        if g <= g_best:
            break
        z_best, g_best = cand, g
        factor *= 2.0
    return z_best, g_best


def sca_solve(problem, init, cfg=None):
    """Iterate linearise / solve from a strictly feasible lifted point."""
    cfg = cfg or ScaConfig()
    z = problem.pack(init) if isinstance(init, LiftedVariables) else np.asarray(init, float)
    g_u = problem.poly_u.value(z)
    trace = [TraceRow(0, problem.rate_from_user_gain(g_u * problem.kappa),
                      problem.residuals(z), 0.0, "start")]
    status = "max-iterations"
    quiet = 0
    for it in range(1, cfg.max_outer_iterations + 1):
        prog, _ = linearize(problem, z, cfg)
        report = convex.solve(prog, start=z, settings=cfg.solver)
        if report.status == "infeasible":
            status = "subproblem-infeasible"
            break
        z_new = report.x
        g_new = problem.poly_u.value(z_new)
        if g_new < g_u - 1e-8 * max(abs(g_u), 1e-300):
            raise ScaInvariantError(f"objective fell from {g_u!r} to {g_new!r} at iteration {it}")
        for cand in (retighten(problem, z_new, cfg), refresh(problem, z_new[problem.layout.x], cfg)):
            if cand is not None and problem.poly_u.value(cand) > g_new:
                z_new, g_new = cand, problem.poly_u.value(cand)
        if cfg.extrapolate and g_new > g_u:
            z_new, g_new = _extrapolate(problem, z[problem.layout.x], z_new, g_new, cfg)
        step = float(np.linalg.norm(z_new - z))
        change = (g_new - g_u) / max(abs(g_u), 1e-300)
        if g_new >= g_u:
            z, g_u = z_new, g_new
        trace.append(TraceRow(it, problem.rate_from_user_gain(g_u * problem.kappa),
                              problem.residuals(z), step, report.status))
        if report.status == "numerical-failure" and step == 0.0:
            status = "numerical-failure"
            break
        quiet = quiet + 1 if abs(change) < cfg.objective_tolerance else 0
        if quiet >= cfg.patience:
            status = "converged"
            break
    return ScaResult(problem.unpack(z), trace, status)


def _aligned_coefficients(problem, summary, tau):
    """Closed-form span coefficients for an aligned placement (or ``None``)."""
    eta = problem.eta
    su, st, rho = eta * summary.user_path, eta * summary.target_path, eta * summary.cross_path
    ht = np.array([np.sqrt(st), 0.0], dtype=complex)
    hu = np.array([rho / np.sqrt(st), np.sqrt(max(su - rho ** 2 / st, 0.0))], dtype=complex)
    return optimal_span_beamformer(hu, ht, problem.p_max, tau), su, st


def feasible_init(problem, x=None, sensing_share=0.5, cfg=None, margin=None, floor=None,
                  backoff=None):
    """Strictly feasible lifted start, or :class:`Infeasible`.

    Without ``x`` every TPA sits at the target.  The start beamformer is the
    closed-form optimum for an illumination target placed ``sensing_share``
    of the way from the requirement to the placement's maximum; both span
    coefficients are kept away from zero so the log lifts stay finite.
    Returns ``None`` when this particular placement admits no strict start.
    """
    cfg = cfg or ScaConfig()
    geom = problem.geom
    max_snr = problem.max_radar_snr
    if problem.spec.gamma_req > max_snr * (1 - 1e-12):
        return Infeasible(max_snr, problem.spec.gamma_req)
    lo, hi = geom.bounds
    pad = 1e-6 * (hi - lo)
    if x is None:
        x = np.full(geom.n_tx, geom.target[0])
    x = np.clip(np.asarray(x, dtype=float), lo + pad, hi - pad)
    summary = aligned_summary(geom, x)
    tau_max = problem.p_max * problem.eta * summary.target_path
    if problem.tau >= tau_max * (1 - 1e-9):
        return None
    tau = problem.tau + sensing_share * (tau_max - problem.tau)
    coeffs, su, st = _aligned_coefficients(problem, summary, tau)
    floor = cfg.init_floor if floor is None else floor
    floor_t = floor * np.sqrt(problem.p_max / st)
    floor_u = floor * np.sqrt(problem.p_max / su)
    c_u, c_t = coeffs.c_u, coeffs.c_t
    if abs(c_t) < floor_t:
        c_t = c_t + floor_t
    if abs(c_u) < floor_u:
        c_u = c_u + floor_u
    coeffs = SpanCoefficients(c_u, c_t)
    thr = problem.sensing_threshold
    backoff = cfg.power_backoff if backoff is None else backoff
    target_power = (1 - backoff) * problem.p_max / problem.eta
    margin = cfg.constraint_margin if margin is None else margin
    for _ in range(5):
        lv = lift_tight(coeffs, x, geom, margin)
        _, g_p, _ = evaluate_g_hat(lv)
        scale = target_power / g_p
        lv = lift_tight(coeffs.scaled(np.sqrt(scale)), x, geom, margin)
        _, g_p, g_t = evaluate_g_hat(lv)
        if g_p < problem.p_max / problem.eta and (thr == 0 or g_t > thr * (1 + 1e-9)):
            return lv
        margin /= 10
    return None


def start_placements(geom):
    """Target-oriented, user-leaning and midpoint starts."""
    lo, hi = geom.bounds
    xu, xt = geom.user[0], geom.target[0]
    m = geom.n_tx
    return {"target": np.full(m, xt),
            "user": np.full(m, np.clip(xu, lo, hi)),
            "midpoint": np.full(m, 0.5 * (xu + xt))}


_START_SHARE = {"target": 0.5, "user": 0.05, "midpoint": 0.5}


def multi_start(problem, cfg=None, starts=None):
    """Run SCA from each start; returns ``{name: ScaResult}`` or :class:`Infeasible`."""
    cfg = cfg or ScaConfig()
    starts = starts or start_placements(problem.geom)
    results = {}
    for name, x in starts.items():
        init = feasible_init(problem, x, _START_SHARE.get(name, 0.5), cfg)
        if isinstance(init, Infeasible):
            return init
        if init is None:
            continue
        results[name] = sca_solve(problem, init, cfg)
    return results


def with_gamma(problem, gamma_req):
    """Same instance with a different radar requirement."""
    return ScaProblem(problem.geom, problem.rf, replace(problem.spec, gamma_req=gamma_req),
                      problem.p_max, problem.sigma_u2)


__all__ = ["AlignedChannelSummary", "Infeasible", "Layout", "LiftedVariables", "ScaConfig",
           "ScaInvariantError", "ScaProblem", "ScaResult", "TraceRow", "evaluate_g_hat",
           "feasible_init", "lift_tight", "linearize", "multi_start", "sca_solve",
           "start_placements", "with_gamma"]
