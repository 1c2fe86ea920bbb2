"""End-to-end pinching-antenna design for one user/target instance."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import sca
from .baselines import POLICY_KINDS, PlacementPolicy, fixed_position_beamforming
from .beamspan import RealizationError, aligned_summary, evaluate_f_hat, fine_tune_positions, realize_solution


@dataclass
class Candidate:
    source: str
    x: np.ndarray
    rate: float
    radar_snr: float
    w: np.ndarray | None
    p3_rate: float = float("nan")
    realized_rate: float = float("nan")


@dataclass
class PinchingResult:
    """Best design found; ``rate`` is 0 and ``feasible`` False when no design exists."""

    rate: float
    feasible: bool
    x: np.ndarray | None
    w: np.ndarray | None
    radar_snr: float
    source: str
    iterations: int
    solve_time: float
    candidates: list = field(default_factory=list)
    sca_runs: dict = field(default_factory=dict)
    max_radar_snr: float = float("nan")


def _sca_candidate(name, run, problem):
    geom, rf, spec = problem.geom, problem.rf, problem.spec
    sol = run.solution
    x = geom.clamp(sol.x)
    f_u, _, _ = evaluate_f_hat(sol.coeffs, aligned_summary(geom, x), rf)
    p3_rate = float(np.log2(1 + f_u / problem.sigma_u2))
    realized = float("nan")
    try:
        real = realize_solution(sol.coeffs, x, geom, rf, spec, problem.p_max, problem.sigma_u2)
        realized = real.rate
        tuned = real.x
    except RealizationError:
        tuned = fine_tune_positions(x, geom, rf).x
    # the span optimum on the true channels can only match or beat the rotation
    polished = fixed_position_beamforming(tuned, geom, rf, spec, problem.p_max, problem.sigma_u2)
    if polished.feasible and not polished.rate < realized:
        return Candidate(f"sca:{name}", tuned, polished.rate, polished.radar_snr, polished.w,
                         p3_rate, realized)
    if np.isfinite(realized):
        return Candidate(f"sca:{name}", real.x, real.rate, real.radar_snr, real.w, p3_rate, realized)
    return None


def evaluate_placements(placements, geom, rf, spec, p_max, sigma_u2, tune=True):
    """Closed-form candidates for explicit placements (raw and fine tuned)."""
    out = []
    for name, x in placements.items():
        x = geom.clamp(np.asarray(x, float))
        variants = [(name, x)]
        if tune:
            # benchmark spots may sit where a phase crossing is out of reach; keep what moves
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                variants.append((f"{name}+tuned", fine_tune_positions(x, geom, rf).x))
        for label, xv in variants:
            res = fixed_position_beamforming(xv, geom, rf, spec, p_max, sigma_u2)
            if res.feasible:
                out.append(Candidate(label, xv, res.rate, res.radar_snr, res.w))
    return out


def optimize_placement(geom, rf, spec, p_max, sigma_u2, cfg=None, extra_starts=None,
                       include_benchmarks=True):
    """Multi-start SCA, realised on true channels, best of all candidates.

    Benchmark placements are evaluated as candidates too (they are valid
    pinching placements), so the returned rate never falls below them.
    """
    started = time.perf_counter()
    problem = sca.ScaProblem(geom, rf, spec, p_max, sigma_u2)
    starts = dict(sca.start_placements(geom))
    for name, x in (extra_starts or {}).items():
        starts[name] = geom.clamp(np.asarray(x, float))
    runs = sca.multi_start(problem, cfg, starts)
    if isinstance(runs, sca.Infeasible):
        return PinchingResult(0.0, False, None, None, 0.0, "infeasible", 0,
                              time.perf_counter() - started, max_radar_snr=runs.max_radar_snr)
    candidates = []
    for name, run in runs.items():
        cand = _sca_candidate(name, run, problem)
        if cand is not None:
            candidates.append(cand)
    if include_benchmarks:
        placements = {k: PlacementPolicy(k).positions(geom) for k in POLICY_KINDS}
        candidates += evaluate_placements(placements, geom, rf, spec, p_max, sigma_u2)
    iterations = sum(len(r.trace) - 1 for r in runs.values())
    elapsed = time.perf_counter() - started
    if not candidates:
        return PinchingResult(0.0, False, None, None, 0.0, "infeasible", iterations, elapsed,
                              sca_runs=runs, max_radar_snr=problem.max_radar_snr)
    best = max(candidates, key=lambda c: c.rate)
    return PinchingResult(best.rate, True, best.x, best.w, best.radar_snr, best.source,
                          iterations, elapsed, candidates, runs, problem.max_radar_snr)
