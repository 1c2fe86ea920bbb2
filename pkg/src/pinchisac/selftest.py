"""Quick invariant checks runnable from the command line."""

from __future__ import annotations

import numpy as np

from . import convex, sca
from .beamspan import aligned_summary, evaluate_f_hat, span_projection
from .experiments import case_config, dbm_to_watts
from .geometry import build_channels
from .sensing import (detection_probability, monte_carlo_detector, optimal_receive_beamformer,
                      radar_snr_bound, radar_snr_full)


def _case_problem(gamma=2.0):
    cfg = case_config(1).replace(gamma_req=gamma)
    geom = cfg.geometry(cfg.user, cfg.target)
    return sca.ScaProblem(geom, cfg.rf, cfg.spec, cfg.p_max_watts, cfg.sigma_u2_watts)


def check_dbm():
    return abs(dbm_to_watts(-60.0) - 1e-9) <= 1e-15 * 1e-9


def check_detection():
    from .sensing import DetectionSpec
    spec = DetectionSpec()
    kappa = spec.sigma_s2 * (1 + 4.0)
    pd, _ = monte_carlo_detector(spec, kappa, 20000, seed=1)
    return abs(pd - detection_probability(4.0, spec.pfa)) < 0.02


def check_tight_lift():
    problem = _case_problem()
    lv = sca.feasible_init(problem)
    tight = sca.lift_tight(lv.coeffs, lv.x, problem.geom)
    g_u, g_p, g_t = sca.evaluate_g_hat(tight)
    f_u, f_p, f_t = evaluate_f_hat(lv.coeffs, aligned_summary(problem.geom, lv.x), problem.rf)
    eta = problem.eta
    return (np.isclose(g_u * eta ** 2, f_u, rtol=1e-10) and np.isclose(g_p * eta, f_p, rtol=1e-10)
            and np.isclose(g_t * eta ** 2, f_t, rtol=1e-10))


def check_tangency():
    problem = _case_problem()
    z = problem.pack(sca.feasible_init(problem))
    prog, scale = sca.linearize(problem, z)
    return abs(prog.objective(z) - scale * problem.poly_u.value(z)) <= 1e-10


def check_derivatives():
    problem = _case_problem()
    z = problem.pack(sca.feasible_init(problem))
    prog, _ = sca.linearize(problem, z)
    return convex.check_derivatives(prog, z) < 1e-5


def check_span_projection():
    rng = np.random.default_rng(3)
    problem = _case_problem()
    x = rng.uniform(-10, 10, problem.geom.n_tx)
    ch = build_channels(problem.geom, x, np.full(problem.geom.n_rx, problem.geom.target[0]),
                        problem.rf)
    w = rng.normal(size=x.size) + 1j * rng.normal(size=x.size)
    proj = span_projection(w, ch.h_u, ch.h_t)
    ok = np.linalg.norm(proj) <= np.linalg.norm(w) * (1 + 1e-12)
    fu0, ft0 = abs(ch.h_u.inner(w)) ** 2, abs(ch.h_t.inner(w)) ** 2
    return ok and np.isclose(abs(ch.h_u.inner(proj)) ** 2, fu0, rtol=1e-10) and np.isclose(
        abs(ch.h_t.inner(proj)) ** 2, ft0, rtol=1e-10)


def check_cauchy_schwarz():
    problem = _case_problem()
    geom, spec = problem.geom, problem.spec
    ch = build_channels(geom, np.zeros(geom.n_tx), np.full(geom.n_rx, geom.target[0]),
                        problem.rf)
    w = ch.h_t.coefficients / np.linalg.norm(ch.h_t.coefficients)
    v = optimal_receive_beamformer(ch.g_t)
    full = radar_snr_full(v, ch.g_t, ch.h_t, w, spec)
    return np.isclose(full, radar_snr_bound(ch.g_t, ch.h_t, w, spec), rtol=1e-10)


def check_sca_monotone():
    problem = _case_problem()
    run = sca.sca_solve(problem, sca.feasible_init(problem))
    obj = [r.objective for r in run.trace]
    return all(b >= a for a, b in zip(obj, obj[1:]))


CHECKS = {
    "dbm-conversion": check_dbm,
    "detection-closed-form": check_detection,
    "tight-lift-identity": check_tight_lift,
    "tangency": check_tangency,
    "solver-derivatives": check_derivatives,
    "span-projection": check_span_projection,
    "cauchy-schwarz": check_cauchy_schwarz,
    "sca-monotone": check_sca_monotone,
}


def run_selftest():
    """``[(name, passed)]`` for every check; exceptions count as failures."""
    out = []
    for name, fn in CHECKS.items():
        try:
            ok = bool(fn())
        except Exception:  # noqa: BLE001 - a crash is a failed check here
            ok = False
        out.append((name, ok))
    return out
