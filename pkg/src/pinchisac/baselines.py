"""Fixed-placement beamforming, the four placement benchmarks and the
exhaustive-search oracle over TPA positions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .beamspan import (SpanCoefficients, aligned_summary, best_user_gain, fine_tune_positions,
                       gram_forms, optimal_span_beamformer, reconstruct_beamformer)
from .geometry import build_channels, target_distances_sq, user_distances_sq
from .sensing import effective_radar_gain_beta

POLICY_KINDS = ("conventional", "user-centric", "target-oriented", "midpoint")


class SearchTooLargeError(ValueError):
    """Exhaustive search refused because of its grid size."""


@dataclass(frozen=True)
class PlacementPolicy:
    """Where to put the TPAs before beamforming.

    ``kind`` is one of ``conventional`` (x = 0), ``user-centric``,
    ``target-oriented``, ``midpoint``, ``grid`` or ``optimized``; the last two
    carry explicit coordinates in ``x``.
    """

    kind: str
    x: tuple | None = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS + ("grid", "optimized"):
            raise ValueError(f"unknown placement kind {self.kind!r}")
        if self.kind in ("grid", "optimized") and self.x is None:
            raise ValueError(f"{self.kind} placement needs explicit coordinates")

    def positions(self, geom):
        xu, xt = geom.user[0], geom.target[0]
        value = {"conventional": 0.0, "user-centric": xu, "target-oriented": xt,
                 "midpoint": 0.5 * (xu + xt)}.get(self.kind)
        x = np.full(geom.n_tx, value) if value is not None else np.asarray(self.x, float)
        if x.size != geom.n_tx:
            raise ValueError("placement length does not match the TPA count")
        return geom.clamp(x)


@dataclass(frozen=True)
class BeamformingResult:
    coeffs: SpanCoefficients | None
    w: np.ndarray | None
    rate: float
    radar_snr: float
    feasible: bool


def illumination_requirement(geom, rf, spec):
    """``|h_t^H w|^2`` needed to reach the radar SNR requirement."""
    return spec.gamma_req * spec.sigma_s2 / effective_radar_gain_beta(geom, rf, spec)


def _grid_beamformer(h_u, h_t, p_max, tau, resolution=64):
    """Dense grid over magnitudes and relative phase, then Nelder-Mead.

    ``c_u`` is gauged real and nonnegative and every candidate is scaled to
    full power, so only the power split and the phase matter.
    """
    hu, ht = h_u.coefficients, h_t.coefficients
    su, st = hu @ hu.conj(), ht @ ht.conj()
    su, st = su.real, st.real
    cross = np.vdot(ht, hu)
    mags = np.linspace(0.0, 1.0, resolution)
    phases = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    A, B, PH = np.meshgrid(mags / np.sqrt(su), mags / np.sqrt(st), phases, indexing="ij")
    cu, ct = A.astype(complex), B * np.exp(1j * PH)
    re = (cu * np.conj(ct) * cross).real
    f_p = np.abs(cu) ** 2 * su + np.abs(ct) ** 2 * st + 2 * re
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(f_p > 0, p_max / f_p, 0.0)
    f_u = scale * (np.abs(cu) ** 2 * su ** 2 + np.abs(ct) ** 2 * abs(cross) ** 2 + 2 * su * re)
    f_t = scale * (np.abs(cu) ** 2 * abs(cross) ** 2 + np.abs(ct) ** 2 * st ** 2 + 2 * st * re)
    ok = (f_t >= tau) & (f_p > 0)
    if not np.any(ok):
        return None
    idx = np.unravel_index(np.argmax(np.where(ok, f_u, -np.inf)), f_u.shape)
    start = np.array([A[idx] * np.sqrt(su), B[idx] * np.sqrt(st), PH[idx]])

    def forms(v):
        c_u, c_t = v[0] / np.sqrt(su), v[1] * np.exp(1j * v[2]) / np.sqrt(st)
        fu, fp, ft = gram_forms(c_u, c_t, su, st, cross)
        if fp <= 0:
            return None
        s = p_max / fp
        return c_u * np.sqrt(s), c_t * np.sqrt(s), fu * s, ft * s

    def loss(v):
        out = forms(v)
        if out is None:
            return np.inf
        _, _, fu, ft = out
        return -fu + 1e3 * max(0.0, tau - ft) * (su / max(st, 1e-300))

    res = minimize(loss, start, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14 * max(1.0, -loss(start))})
    best = start
    refined = forms(res.x)
    if refined is not None and refined[3] >= tau * (1 - 1e-9) and loss(res.x) < loss(start):
        best = res.x
    c_u, c_t, _, _ = forms(best)
    return SpanCoefficients(complex(c_u), complex(c_t))


def fixed_position_beamforming(x, geom, rf, spec, p_max, sigma_u2, method="closed-form"):
    """Best beamformer for TPAs frozen at ``x`` on the true channels.

    ``method="closed-form"`` uses the exact two-dimensional solution;
    ``method="grid"`` runs a 64^3 grid plus Nelder-Mead as a cross-check.
    """
    x = np.asarray(x, dtype=float)
    ch = build_channels(geom, x, np.full(geom.n_rx, geom.target[0]), rf)
    tau = illumination_requirement(geom, rf, spec)
    if method == "closed-form":
        coeffs = optimal_span_beamformer(ch.h_u, ch.h_t, p_max, tau)
    elif method == "grid":
        coeffs = _grid_beamformer(ch.h_u, ch.h_t, p_max, tau)
    else:
        raise ValueError(f"unknown beamforming method {method!r}")
    if coeffs is None:
        return BeamformingResult(None, None, 0.0, 0.0, False)
    w = reconstruct_beamformer(coeffs, ch.h_u, ch.h_t)
    beta = effective_radar_gain_beta(geom, rf, spec)
    gain = abs(ch.h_u.inner(w)) ** 2
    radar_snr = beta * abs(ch.h_t.inner(w)) ** 2 / spec.sigma_s2
    return BeamformingResult(coeffs, w, float(np.log2(1 + gain / sigma_u2)), float(radar_snr),
                             True)


def benchmark_rate(policy, geom, rf, spec, p_max, sigma_u2):
    """Rate of a placement policy; 0 when the radar requirement cannot be met."""
    res = fixed_position_beamforming(policy.positions(geom), geom, rf, spec, p_max, sigma_u2)
    return res.rate if res.feasible else 0.0


@dataclass(frozen=True)
class ExhaustiveResult:
    x: np.ndarray | None
    model_rate: float
    rate: float
    radar_snr: float
    feasible: bool
    coeffs: SpanCoefficients | None = None


def _grid_rates(points, geom, rf, p_max, sigma_u2, tau):
    du2 = user_distances_sq(geom, points)
    dt2 = target_distances_sq(geom, points)
    eta = rf.eta
    su = eta * np.sum(1.0 / du2, axis=-1)
    st = eta * np.sum(1.0 / dt2, axis=-1)
    rho = eta * np.sum(1.0 / np.sqrt(du2 * dt2), axis=-1)
    gain, feasible = best_user_gain(su, st, rho, p_max, tau)
    return np.where(feasible, np.log2(1 + gain / sigma_u2), -np.inf)


def exhaustive_search(geom, rf, spec, p_max, sigma_u2, step=0.5, allow_large=False,
                      chunk=1 << 16):
    """Grid search over TPA positions with phase-aligned channels.

    Each grid point is scored with the aligned-channel closed form, which is
    what fine tuning achieves there up to sub-wavelength shifts.  The winner
    (lowest lexicographic ``x`` on ties) is then fine tuned and re-evaluated
    on the true channels.
    """
    m = geom.n_tx
    if step <= 0:
        raise ValueError("step must be positive")
    if m >= 4 and step < 1.0 and not allow_large:
        raise SearchTooLargeError(f"{m} TPAs at step {step} m; pass allow_large=True to force")
    lo, hi = geom.bounds
    axis = lo + step * np.arange(int(np.floor((hi - lo) / step + 1e-9)) + 1)
    tau = illumination_requirement(geom, rf, spec)
    best_rate, best_x = -np.inf, None
    total = axis.size ** m
    combos = itertools.product(axis, repeat=m)
    done = 0
    while done < total:
        size = min(chunk, total - done)
        pts = np.fromiter(itertools.chain.from_iterable(itertools.islice(combos, size)),
                          dtype=float, count=size * m).reshape(size, m)
        rates = _grid_rates(pts, geom, rf, p_max, sigma_u2, tau)
        k = int(np.argmax(rates))
        if rates[k] > best_rate:
            best_rate, best_x = float(rates[k]), pts[k].copy()
        done += size
    if best_x is None or not np.isfinite(best_rate):
        return ExhaustiveResult(None, 0.0, 0.0, 0.0, False)
    tuned = fine_tune_positions(best_x, geom, rf).x
    res = fixed_position_beamforming(tuned, geom, rf, spec, p_max, sigma_u2)
    return ExhaustiveResult(tuned, best_rate, res.rate, res.radar_snr, res.feasible, res.coeffs)


def aligned_rate(x, geom, rf, spec, p_max, sigma_u2):
    """Closed-form rate of a placement under ideal phase alignment (0 if infeasible)."""
    s = aligned_summary(geom, np.asarray(x, float))
    tau = illumination_requirement(geom, rf, spec)
    gain, ok = best_user_gain(rf.eta * s.user_path, rf.eta * s.target_path,
                              rf.eta * s.cross_path, p_max, tau)
    return float(np.log2(1 + gain / sigma_u2)) if ok else 0.0
