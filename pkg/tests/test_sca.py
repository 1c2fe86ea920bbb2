import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinchisac import sca
from pinchisac.beamspan import SpanCoefficients, aligned_summary, evaluate_f_hat
from pinchisac.geometry import RfConstants, SystemGeometry
from pinchisac.optimizer import optimize_placement
from pinchisac.sensing import DetectionSpec, effective_radar_gain_beta

from conftest import P_MAX, SIGMA_U2, case_geometry

RF = RfConstants()


def _problem(geom, gamma=2.0):
    return sca.ScaProblem(geom, RF, DetectionSpec(gamma_req=gamma), P_MAX, SIGMA_U2)


def test_lift_tight_log_distance():
    geom = SystemGeometry(40, 20, 3, [8.0], [8.0], (0.0, 8.0), (-5.0, 12.0))
    lv = sca.lift_tight(SpanCoefficients(1.0, 1.0), [4.0], geom)  # user distance^2 = 16 + 9
    assert lv.a_u[0] == pytest.approx(-np.log(5.0), rel=1e-15)
    assert lv.b_u[0] == lv.a_u[0]


def test_lift_tight_floors_zero_coefficient(case1):
    lv = sca.lift_tight(SpanCoefficients(0j, 1.0), [0.0, 0.0], case1)
    assert lv.p_u == lv.q_u == pytest.approx(np.log(1e-30))
    assert np.exp(lv.p_u) < 1e-29


coef = st.floats(1e-3, 3.0).flatmap(lambda r: st.floats(0, 2 * np.pi).map(
    lambda a: r * complex(np.cos(a), np.sin(a))))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=2, max_size=2), coef, coef)
def test_tight_lift_identity(x, c_u, c_t):
    geom = case_geometry(2)
    coeffs = SpanCoefficients(c_u, c_t)
    summary = aligned_summary(geom, np.array(x))
    g = np.array(sca.evaluate_g_hat(sca.lift_tight(coeffs, x, geom)))
    f = np.array(evaluate_f_hat(coeffs, summary, RF))
    # cancellation can leave f far below its terms; compare against the term scale
    scale = np.array(evaluate_f_hat(SpanCoefficients(abs(c_u), abs(c_t)), summary, RF))
    eta = RF.eta
    assert np.all(np.abs(g * [eta ** 2, eta, eta ** 2] - f) <= 1e-10 * scale)


def test_g_hat_single_antenna_expansion(rng):
    lv = sca.LiftedVariables(0j, 0j, np.zeros(1), *(rng.normal(size=(4, 1))),
                             *rng.normal(size=6))
    au, bu, at, bt = lv.a_u[0], lv.b_u[0], lv.a_t[0], lv.b_t[0]
    e = np.exp
    g_u = (e(lv.p_u + 4 * bu) + e(lv.p_t + 2 * bu + 2 * bt) + e(lv.o + 3 * bu + bt)
           - (e(lv.q_u) + e(lv.q_t)) * e(3 * au + at))
    g_p = e(2 * au + lv.q_u) + e(2 * at + lv.q_t) + e(au + at + lv.v) - (
        e(lv.p_u) + e(lv.p_t)) * e(bu + bt)
    g_t = (e(lv.p_u + 2 * bu + 2 * bt) + e(lv.p_t + 4 * bt) + e(lv.o + bu + 3 * bt)
           - (e(lv.q_u) + e(lv.q_t)) * e(au + 3 * at))
    assert np.allclose(sca.evaluate_g_hat(lv), (g_u, g_p, g_t), rtol=1e-12)


def test_g_hat_user_grows_with_b(case1, rng):
    lv = sca.lift_tight(SpanCoefficients(1.0, 0.5), [1.0, -2.0], case1)
    base = sca.evaluate_g_hat(lv)[0]
    lv.b_u = lv.b_u + np.array([0.01, 0.0])
    assert sca.evaluate_g_hat(lv)[0] > base


def test_scaled_polys_match_physical(case1):
    problem = _problem(case1)
    lv = sca.feasible_init(problem)
    z = problem.pack(lv)
    g = sca.evaluate_g_hat(lv)
    s = problem.scaled_g_hat(z)
    assert s[0] * problem.kappa == pytest.approx(g[0], rel=1e-10)
    assert s[1] * problem.kappa == pytest.approx(g[1], rel=1e-10)
    assert s[2] * problem.kappa == pytest.approx(g[2], rel=1e-10)
    back = problem.unpack(z)
    assert np.allclose(back.x, lv.x) and back.c_u == pytest.approx(lv.c_u)


def _base_points(geom, count=5):
    problem = _problem(geom)
    out = []
    for name, x in sca.start_placements(geom).items():
        lv = sca.feasible_init(problem, x)
        if lv is not None:
            out.append(problem.pack(lv))
    run = sca.sca_solve(problem, sca.feasible_init(problem))
    out.append(problem.pack(run.solution))
    return problem, out[:count]


@pytest.mark.parametrize("case", [1, 2, 3])
def test_tangency(case):
    problem, bases = _base_points(case_geometry(case))
    for z in bases:
        prog, scale = sca.linearize(problem, z)
        g_u, g_p, g_t = problem.scaled_g_hat(z)
        assert prog.objective(z) == pytest.approx(scale * g_u, rel=1e-10)
        cons = dict(zip(prog.names, prog.constraints(z)))
        assert cons["power"] == pytest.approx(g_p - 1.0, abs=1e-10 * max(1.0, g_p))
        thr = problem.sensing_threshold / problem.kappa
        assert cons["sensing"] == pytest.approx(thr - g_t, abs=1e-10 * g_t)


def test_majorization_direction(rng):
    problem, bases = _base_points(case_geometry(1))
    thr = problem.sensing_threshold / problem.kappa
    for z in bases:
        prog, scale = sca.linearize(problem, z)
        for _ in range(1000):
            zz = z + rng.normal(size=z.size) * 0.05
            g_u, g_p, g_t = problem.scaled_g_hat(zz)
            cons = dict(zip(prog.names, prog.constraints(zz)))
            assert prog.objective(zz) <= scale * g_u + 1e-9 * abs(scale * g_u)
            assert cons["power"] >= g_p - 1.0 - 1e-12
            assert cons["sensing"] >= thr - g_t - 1e-12 * g_t


def test_base_point_feasible_for_subproblem():
    for case in (1, 2, 3):
        problem, bases = _base_points(case_geometry(case))
        for z in bases:
            assert problem.residuals(z) < 0
            prog, _ = sca.linearize(problem, z)
            assert prog.violation(z) <= 0


@pytest.mark.parametrize("case,gamma", [(1, 0.5), (2, 3.0), (3, 4.5), (2, 0.0)])
def test_trace_monotone_and_feasible(case, gamma):
    problem = _problem(case_geometry(case), gamma)
    runs = sca.multi_start(problem)
    assert runs
    for run in runs.values():
        obj = [r.objective for r in run.trace]
        assert all(b >= a for a, b in zip(obj, obj[1:]))
        assert all(r.max_residual <= 1e-6 for r in run.trace)
        assert run.status in ("converged", "max-iterations")
        assert run.trace_csv().splitlines()[0] == (
            "iteration,objective,max_residual,step_norm,solver_status")


def test_single_antenna_zero_gamma_closed_form():
    geom = SystemGeometry.default(n_tx=1, user=(6.0, 9.0), target=(-10.0, 3.0))
    problem = _problem(geom, 0.0)
    runs = sca.multi_start(problem)
    best = max(runs.values(), key=lambda r: r.objective)
    d2 = (9.0 - geom.tx_y[0]) ** 2 + 9.0
    expected = np.log2(1 + P_MAX * RF.eta / (d2 * SIGMA_U2))
    assert best.solution.x[0] == pytest.approx(6.0, abs=0.05)
    assert best.objective == pytest.approx(expected, rel=1e-4)


def test_infeasible_instance_reports_maximum(case1):
    problem = _problem(case1, 1e3)
    res = sca.feasible_init(problem)
    assert isinstance(res, sca.Infeasible) and res.rate == 0.0
    beta = effective_radar_gain_beta(case1, RF, DetectionSpec())
    dt2 = (12.0 - case1.tx_y) ** 2 + 9.0
    assert res.max_radar_snr == pytest.approx(beta * P_MAX * RF.eta * np.sum(1 / dt2) / 1e-11,
                                              rel=1e-12)
    assert not optimize_placement(case1, RF, DetectionSpec(gamma_req=1e3), P_MAX,
                                  SIGMA_U2).feasible


def test_zero_gamma_always_feasible_and_default_feasible(default_geom):
    assert isinstance(sca.feasible_init(_problem(default_geom, 0.0)), sca.LiftedVariables)
    assert isinstance(sca.feasible_init(_problem(default_geom, 4.0)), sca.LiftedVariables)


@pytest.mark.parametrize("case", [1, 2, 3])
def test_upper_bound_chain(case):
    geom = case_geometry(case)
    for gamma in (0.5, 2.5, 4.5):
        res = optimize_placement(geom, RF, DetectionSpec(gamma_req=gamma), P_MAX, SIGMA_U2)
        for cand in res.candidates:
            if not cand.source.startswith("sca:"):
                continue
            run = res.sca_runs[cand.source[4:]]
            assert run.objective <= cand.p3_rate * (1 + 1e-9)
            if np.isfinite(cand.realized_rate):
                assert abs(cand.realized_rate - cand.p3_rate) <= 0.01 * cand.p3_rate


def test_config_validation():
    with pytest.raises(ValueError):
        sca.ScaConfig(trust_region_radius=0.0)
