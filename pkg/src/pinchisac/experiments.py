"""Scenario configuration, Monte-Carlo harness, parameter sweeps and result
emission."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import POLICY_KINDS, PlacementPolicy, exhaustive_search, fixed_position_beamforming
from .geometry import RfConstants, SystemGeometry
from .optimizer import optimize_placement
from .sensing import DetectionSpec

ALGORITHMS = ("pinching",) + POLICY_KINDS + ("exhaustive",)
SWEEP_AXES = ("gamma", "p_max", "m", "n")
CASE_OFFSETS = {1: 0.1, 2: 0.2, 3: 0.3}


class ConfigError(ValueError):
    """Malformed or inconsistent scenario configuration."""


class EmptyResultError(ValueError):
    """Refusal to emit an empty result set."""


def dbm_to_watts(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to build and solve one family of instances.

    Key names carry their units. Noise powers are given in dBm and
    converted to watts once, on construction.
    """

    length_m: float = 40.0
    width_m: float = 20.0
    height_m: float = 3.0
    wavelength_m: float = 0.05
    n_eff: float = 1.4
    n_tx: int = 4
    n_rx: int = 4
    p_max_watts: float = 10.0
    sigma_u_dbm: float = -60.0
    sigma_s_dbm: float = -80.0
    gamma_req: float = 4.0
    pfa: float = 0.01
    alpha_abs: float = 1.0
    placement: str = "uniform"
    user_x_m: float = 4.0
    user_y_m: float = 8.0
    target_x_m: float = -4.0
    target_y_m: float = 12.0
    min_separation_m: float = 1.0
    seed: int = 0
    trials: int = 200
    sweep_axis: str = ""
    sweep_values: tuple = ()
    algorithms: tuple = ("pinching",) + POLICY_KINDS
    exhaustive_step_m: float = 0.5
    tx_y_m: tuple = ()
    sigma_u2_watts: float = field(init=False, repr=False)
    sigma_s2_watts: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "tx_y_m", tuple(float(v) for v in self.tx_y_m))
        object.__setattr__(self, "sigma_u2_watts", dbm_to_watts(self.sigma_u_dbm))
        object.__setattr__(self, "sigma_s2_watts", dbm_to_watts(self.sigma_s_dbm))
        self.validate()

    def validate(self):
        for name in ("length_m", "width_m", "height_m", "wavelength_m", "n_eff", "p_max_watts",
                     "alpha_abs", "exhaustive_step_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_tx < 1 or self.n_rx < 1:
            raise ConfigError("n_tx and n_rx must be at least 1")
        if self.gamma_req < 0:
            raise ConfigError("gamma_req must be nonnegative")
        if not 0 < self.pfa < 1:
            raise ConfigError("pfa must lie in (0, 1)")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.min_separation_m < 0:
            raise ConfigError("min_separation_m must be nonnegative")
        if self.placement not in ("uniform", "fixed"):
            raise ConfigError("placement must be 'uniform' or 'fixed'")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ConfigError(f"unknown algorithms {sorted(unknown)}; choose from {ALGORITHMS}")
        if self.sweep_axis and self.sweep_axis not in SWEEP_AXES:
            raise ConfigError(f"sweep_axis must be one of {SWEEP_AXES}")
        if list(self.sweep_values) != sorted(self.sweep_values):
            raise ConfigError("sweep_values must be sorted ascending")
        if self.tx_y_m and len(self.tx_y_m) != self.n_tx:
            raise ConfigError("tx_y_m needs one entry per TPA waveguide")
        if self.placement == "fixed":
            try:
                self.geometry(self.user, self.target)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @classmethod
    def from_text(cls, text, **overrides):
        """Parse ``key = value`` lines; ``#`` starts a comment, lists are comma separated."""
        hints = typing.get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls) if f.init}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in names:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            values[key] = _parse_value(hints[key], value, key, lineno)
        values.update(overrides)
        try:
            return cls(**values)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_file(cls, path, **overrides):
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, **overrides)

    def replace(self, **changes):
        kwargs = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.init}
        kwargs.update(changes)
        return ScenarioConfig(**kwargs)

    @property
    def user(self):
        return (self.user_x_m, self.user_y_m)

    @property
    def target(self):
        return (self.target_x_m, self.target_y_m)

    @property
    def rf(self):
        return RfConstants(self.wavelength_m, self.n_eff)

    @property
    def spec(self):
        return DetectionSpec(self.pfa, self.gamma_req, self.sigma_s2_watts, self.alpha_abs)

    def geometry(self, user, target):
        geom = SystemGeometry.default(self.n_tx, self.n_rx, self.length_m, self.width_m,
                                      self.height_m, user, target)
        return geom.replace(tx_y=np.array(self.tx_y_m)) if self.tx_y_m else geom


def _parse_value(hint, value, key, lineno):
    try:
        if hint is tuple:
            items = [s.strip() for s in value.split(",") if s.strip()]
            if key in ("sweep_values", "tx_y_m"):
                return tuple(float(s) for s in items)
            return tuple(items)
        if hint is int:
            return int(value)
        if hint is float:
            return float(value)
        return value
    except ValueError:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {value!r}") from None


@dataclass
class TrialResult:
    """One algorithm on one realization. Infeasible designs carry rate 0."""

    trial: int
    algorithm: str
    user_x: float
    user_y: float
    target_x: float
    target_y: float
    rate: float
    radar_snr: float
    feasible: bool
    solve_time: float
    sca_iterations: int
    x: list
    sweep_axis: str = ""
    sweep_value: float = float("nan")

    def __post_init__(self):
        if not self.feasible:
            self.rate, self.radar_snr = 0.0, 0.0


@dataclass(frozen=True)
class Summary:
    """Mean rate with infeasible-as-zero and its standard error."""

    algorithm: str
    mean_rate: float
    std_error: float
    feasible_fraction: float
    trials: int
    sweep_axis: str = ""
    sweep_value: float = float("nan")


def draw_entities(rng, config):
    """User and target uniform over the area, at least ``min_separation_m`` apart."""
    half = config.length_m / 2
    while True:
        pts = rng.uniform([-half, 0.0, -half, 0.0],
                          [half, config.width_m, half, config.width_m])
        if math.hypot(pts[0] - pts[2], pts[1] - pts[3]) >= config.min_separation_m:
            return (float(pts[0]), float(pts[1])), (float(pts[2]), float(pts[3]))


def trial_entities(config, count):
    if config.placement == "fixed":
        return [(config.user, config.target)] * count
    seqs = np.random.SeedSequence(config.seed).spawn(count)
    return [draw_entities(np.random.default_rng(s), config) for s in seqs]


def _row(trial, algorithm, user, target, rate, snr, feasible, elapsed=0.0, iterations=0, x=None):
    return TrialResult(trial, algorithm, user[0], user[1], target[0], target[1], float(rate),
                       float(snr), bool(feasible), float(elapsed), int(iterations),
                       [] if x is None else [float(v) for v in x])


def solve_instance(config, user, target, trial=0):
    """Run every configured algorithm on one user/target realization."""
    geom = config.geometry(user, target)
    rf, spec = config.rf, config.spec
    p, s2 = config.p_max_watts, config.sigma_u2_watts
    rows = []
    for alg in config.algorithms:
        if alg == "pinching":
            res = optimize_placement(geom, rf, spec, p, s2)
            rows.append(_row(trial, alg, user, target, res.rate, res.radar_snr, res.feasible,
                             res.solve_time, res.iterations, res.x))
        elif alg == "exhaustive":
            res = exhaustive_search(geom, rf, spec, p, s2, step=config.exhaustive_step_m)
            rows.append(_row(trial, alg, user, target, res.rate, res.radar_snr, res.feasible,
                             x=res.x))
        else:
            x = PlacementPolicy(alg).positions(geom)
            res = fixed_position_beamforming(x, geom, rf, spec, p, s2)
            rows.append(_row(trial, alg, user, target, res.rate, res.radar_snr, res.feasible,
                             x=x))
    return rows


def _solve_job(args):
    config, user, target, trial = args
    return solve_instance(config, user, target, trial)


def _map(fn, jobs, threads):
    if threads is None or threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def summarize(rows, axis="", value=float("nan")):
    """Per-algorithm mean and standard error, in first-seen algorithm order."""
    out = []
    for alg in dict.fromkeys(r.algorithm for r in rows):
        rates = np.array([r.rate for r in rows if r.algorithm == alg])
        feas = np.array([r.feasible for r in rows if r.algorithm == alg])
        se = float(rates.std(ddof=1) / np.sqrt(rates.size)) if rates.size > 1 else 0.0
        out.append(Summary(alg, float(rates.mean()), se, float(feas.mean()), int(rates.size),
                           axis, value))
    return out


@dataclass
class MonteCarloResult:
    trials: list
    summary: list

    def by_algorithm(self):
        return {s.algorithm: s for s in self.summary}


def monte_carlo(config, trials=None, threads=1):
    """Seeded realizations; every trial draws from its own spawned seed."""
    trials = config.trials if trials is None else trials
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    jobs = [(config, u, t, i) for i, (u, t) in enumerate(trial_entities(config, trials))]
    rows = [r for chunk in _map(_solve_job, jobs, threads) for r in chunk]
    return MonteCarloResult(rows, summarize(rows))


def _axis_config(config, axis, value):
    if axis == "gamma":
        return config.replace(gamma_req=value)
    if axis == "p_max":
        return config.replace(p_max_watts=value)
    if int(value) != value or value < 1:
        raise ConfigError(f"{axis} sweep values must be positive integers")
    if axis == "m":
        return config.replace(n_tx=int(value), tx_y_m=())
    return config.replace(n_rx=int(value))


def _sweep_instance(args):
    """All sweep values on one realization.

    When the TPA layout is shared across values (every axis except ``m``),
    the pinching placements found at any value are also tried at every
    other value. For Γ_Req and P_max the per-realization rate then inherits
    the monotonicity of the fixed-placement optimum; N still moves the RPA
    waveguides, so it carries no such guarantee.
    """
    config, axis, values, user, target, trial = args
    cfgs = [_axis_config(config, axis, v) for v in values]
    per_value = [solve_instance(c, user, target, trial) for c in cfgs]
    if axis != "m" and "pinching" in config.algorithms:
        pool = [r.x for rows in per_value for r in rows
                if r.algorithm == "pinching" and r.feasible]
        for c, rows in zip(cfgs, per_value):
            geom = c.geometry(user, target)
            row = next(r for r in rows if r.algorithm == "pinching")
            for x in pool:
                res = fixed_position_beamforming(np.array(x), geom, c.rf, c.spec, c.p_max_watts,
                                                 c.sigma_u2_watts)
                if res.feasible and res.rate > row.rate:
                    row.rate, row.radar_snr, row.feasible, row.x = (res.rate, res.radar_snr,
                                                                    True, list(x))
    for v, rows in zip(values, per_value):
        for r in rows:
            r.sweep_axis, r.sweep_value = axis, float(v)
    return per_value


@dataclass
class SweepResult:
    axis: str
    values: tuple
    trials: list
    summary: list

    def curve(self, algorithm):
        return np.array([s.mean_rate for s in self.summary if s.algorithm == algorithm])


def run_sweep(axis, values, config, trials=None, threads=1):
    """Monte-Carlo average per sweep value; realizations are shared across values."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}")
    values = tuple(float(v) for v in values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    if list(values) != sorted(values):
        raise ConfigError("sweep values must be sorted ascending")
    trials = config.trials if trials is None else trials
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    for v in values:
        _axis_config(config, axis, v)
    jobs = [(config, axis, values, u, t, i)
            for i, (u, t) in enumerate(trial_entities(config, trials))]
    per_trial = _map(_sweep_instance, jobs, threads)
    rows, summary = [], []
    for k, v in enumerate(values):
        value_rows = [r for trial_rows in per_trial for r in trial_rows[k]]
        rows += value_rows
        summary += summarize(value_rows, axis, v)
    return SweepResult(axis, values, rows, summary)


@dataclass
class CaseStudyRow:
    case: int
    gamma_req: float
    sca_rate: float
    exhaustive_rate: float
    sca_x: list
    exhaustive_x: list
    sca_feasible: bool
    exhaustive_feasible: bool
    sca_source: str = ""
    p3_rate: float = float("nan")


def case_config(case, config=None):
    """Two TPAs at W/3 and 2W/3 with the user and target of a numbered case."""
    if case not in CASE_OFFSETS:
        raise ConfigError(f"case must be one of {sorted(CASE_OFFSETS)}")
    config = config or ScenarioConfig()
    f = CASE_OFFSETS[case]
    w = config.width_m
    return config.replace(n_tx=2, tx_y_m=(w / 3, 2 * w / 3), placement="fixed",
                          user_x_m=f * config.length_m, user_y_m=0.4 * config.width_m,
                          target_x_m=-f * config.length_m, target_y_m=0.6 * config.width_m)


def _case_point(args):
    cfg, case = args
    geom = cfg.geometry(cfg.user, cfg.target)
    rf, spec, p, s2 = cfg.rf, cfg.spec, cfg.p_max_watts, cfg.sigma_u2_watts
    sca_res = optimize_placement(geom, rf, spec, p, s2)
    ex = exhaustive_search(geom, rf, spec, p, s2, step=cfg.exhaustive_step_m)
    p3 = float("nan")
    if sca_res.feasible:
        p3 = next((c.p3_rate for c in sca_res.candidates if c.source == sca_res.source),
                  float("nan"))
    return CaseStudyRow(case, cfg.gamma_req, sca_res.rate if sca_res.feasible else 0.0,
                        ex.rate if ex.feasible else 0.0,
                        [] if sca_res.x is None else [float(v) for v in sca_res.x],
                        [] if ex.x is None else [float(v) for v in ex.x],
                        sca_res.feasible, ex.feasible, sca_res.source, p3)


def run_case_study(case, gammas, config=None, threads=1):
    """SCA and exhaustive search across radar requirements for one case."""
    base = case_config(case, config)
    jobs = [(base.replace(gamma_req=float(g)), case) for g in gammas]
    return _map(_case_point, jobs, threads)


def _column(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return " ".join(repr(float(v)) for v in value)
    return str(value)


def to_csv(results):
    """CSV text with shortest round-trip float formatting."""
    results = list(results)
    if not results:
        raise EmptyResultError("no results to emit")
    names = [f.name for f in dataclasses.fields(results[0])]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for r in results:
        writer.writerow([_column(getattr(r, n)) for n in names])
    return buf.getvalue()


def _json_value(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json(results):
    results = list(results)
    if not results:
        raise EmptyResultError("no results to emit")
    payload = [{k: _json_value(v) for k, v in dataclasses.asdict(r).items()} for r in results]
    return json.dumps(payload, indent=1, allow_nan=False) + "\n"


def emit(results, fmt, path):
    """Write ``results`` as CSV or JSON to ``path`` (``-`` for standard output)."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    text = to_csv(results) if fmt == "csv" else to_json(results)
    if path in (None, "-"):
        return text
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from None
    return text


def read_csv(path_or_text, row_type=TrialResult):
    """Parse CSV written by :func:`emit` back into ``row_type`` instances."""
    text = path_or_text
    if os.path.exists(str(path_or_text)):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    hints = typing.get_type_hints(row_type)
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kwargs = {}
        for name, raw in rec.items():
            hint = hints[name]
            if hint is bool:
                kwargs[name] = raw == "true"
            elif hint is float:
                kwargs[name] = float(raw)
            elif hint is int:
                kwargs[name] = int(raw)
            elif hint is list:
                kwargs[name] = [float(v) for v in raw.split()]
            else:
                kwargs[name] = raw
        out.append(row_type(**kwargs))
    return out


def schema_path():
    return os.path.join(os.path.dirname(__file__), "schemas", "trial_result.schema.json")
