"""Two-coefficient beamformer parametrisation and phase-alignment fine tuning.

The optimal transmit beamformer spends full power and lies in
``span{h_u, h_t}``, so it is described by two complex numbers ``(c_u, c_t)``.
Every quantity the optimizer needs is then a quadratic form in those two
numbers whose coefficients are ``||h_u||^2``, ``||h_t||^2`` and ``h_t^H h_u``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .geometry import (build_channels, phase_difference_theta, target_distances_sq,
                       user_distances_sq)
from .sensing import effective_radar_gain_beta


class NumericalInfeasibilityError(ArithmeticError):
    pass


class RealizationError(RuntimeError):
    """The realised beamformer misses the radar SNR requirement."""

    def __init__(self, deficit, radar_snr, required):
        super().__init__(f"realised radar SNR {radar_snr:.6g} below requirement "
                         f"{required:.6g} (relative deficit {deficit:.3g})")
        self.deficit = deficit
        self.radar_snr = radar_snr
        self.required = required


@dataclass(frozen=True)
class SpanCoefficients:
    c_u: complex
    c_t: complex

    def rotated(self, angle):
        """Rotate ``c_u`` only (the relative-phase degree of freedom)."""
        return SpanCoefficients(self.c_u * np.exp(1j * angle), self.c_t)

    def scaled(self, factor):
        return SpanCoefficients(self.c_u * factor, self.c_t * factor)

    @property
    def cross(self):
        """``c_u c_t^*``; every cross term of the quadratic forms goes through it."""
        return self.c_u * np.conj(self.c_t)


@dataclass(frozen=True)
class AlignedChannelSummary:
    """Squared TPA-user / TPA-target distances of a placement."""

    du2: np.ndarray
    dt2: np.ndarray

    @property
    def user_path(self):
        """``sum 1/D_u^2`` (``||h_u||^2 / eta``)."""
        return float(np.sum(1.0 / self.du2))

    @property
    def target_path(self):
        return float(np.sum(1.0 / self.dt2))

    @property
    def cross_path(self):
        """``sum 1/(D_u D_t)``: the inner product once all phases are aligned."""
        return float(np.sum(1.0 / np.sqrt(self.du2 * self.dt2)))


def aligned_summary(geom, x):
    x = np.asarray(x, dtype=float)
    return AlignedChannelSummary(user_distances_sq(geom, x), target_distances_sq(geom, x))


def _vec(h):
    if hasattr(h, "coefficients"):
        return h.coefficients
    return np.asarray(h, dtype=complex)


def reconstruct_beamformer(coeffs, h_u, h_t):
    return coeffs.c_u * _vec(h_u) + coeffs.c_t * _vec(h_t)


def gram_forms(c_u, c_t, user_gain, target_gain, cross):
    """(f_u, f_p, f_t) from the Gram entries ``||h_u||^2, ||h_t||^2, h_t^H h_u``."""
    cu2, ct2 = abs(c_u) ** 2, abs(c_t) ** 2
    re = (c_u * np.conj(c_t) * cross).real
    f_u = cu2 * user_gain ** 2 + ct2 * abs(cross) ** 2 + 2 * user_gain * re
    f_p = cu2 * user_gain + ct2 * target_gain + 2 * re
    f_t = cu2 * abs(cross) ** 2 + ct2 * target_gain ** 2 + 2 * target_gain * re
    return float(f_u), float(f_p), float(f_t)


def evaluate_f(coeffs, h_u, h_t):
    """Received user power, transmit power and target illumination power."""
    hu, ht = _vec(h_u), _vec(h_t)
    return gram_forms(coeffs.c_u, coeffs.c_t, np.vdot(hu, hu).real,
                      np.vdot(ht, ht).real, np.vdot(ht, hu))


def evaluate_f_hat(coeffs, aligned, rf):
    """Phase-aligned counterparts of :func:`evaluate_f`.

    Written in the per-antenna summed form; cross terms use
    ``|c_u + c_t|^2 - |c_u|^2 - |c_t|^2 = 2 Re{c_u c_t^*}``.
    """
    eta = rf.eta
    du2, dt2 = aligned.du2, aligned.dt2
    cu, ct = abs(coeffs.c_u), abs(coeffs.c_t)
    mix = abs(coeffs.c_u + coeffs.c_t) ** 2 - cu ** 2 - ct ** 2
    duc = np.sqrt(du2 * dt2)
    f_u = (np.sum(eta * cu / du2) ** 2 + np.sum(eta * ct / duc) ** 2
           + np.sum(eta / du2) * np.sum(eta * mix / duc))
    f_p = np.sum(eta * cu ** 2 / du2 + eta * ct ** 2 / dt2 + eta * mix / duc)
    f_t = (np.sum(eta * cu / duc) ** 2 + np.sum(eta * ct / dt2) ** 2
           + np.sum(eta / dt2) * np.sum(eta * mix / duc))
    return float(f_u), float(f_p), float(f_t)


def span_projection(w, h_u, h_t):
    """Orthogonal projection of ``w`` onto ``span{h_u, h_t}``."""
    basis = np.column_stack([_vec(h_u), _vec(h_t)])
    q, _ = np.linalg.qr(basis)
    return q @ (q.conj().T @ np.asarray(w, dtype=complex))


def power_repair(w, h_u, h_t, p_max):
    """Spend leftover power along the part of ``h_u`` orthogonal to ``h_t``.

    Leaves ``|h_t^H w|`` unchanged and never exceeds ``p_max``.
    """
    w = np.asarray(w, dtype=complex)
    hu, ht = _vec(h_u), _vec(h_t)
    z = hu - ht * np.vdot(ht, hu) / np.vdot(ht, ht)
    znorm = np.linalg.norm(z)
    spare = np.sqrt(p_max) - np.linalg.norm(w)
    if znorm == 0 or spare <= 0:
        return w.copy()
    theta = np.angle(np.vdot(hu, w))
    return w + np.exp(1j * theta) * spare * z / znorm


def best_user_gain(user_gain, target_gain, cross_abs, p_max, tau):
    """Largest ``|h_u^H w|^2`` under ``||w||^2 <= p_max``, ``|h_t^H w|^2 >= tau``.

    Vectorised over the Gram statistics.  Returns ``(gain, feasible)``;
    infeasible entries carry gain 0.

    Write ``w = sqrt(P)(cos(phi) e_t + sin(phi) e_perp)`` with ``e_t`` along
    ``h_t`` and ``e_perp`` along the rest of ``h_u``.  The gain
    ``P (a1 cos + a2 sin)^2`` peaks at the MRT angle; if MRT illuminates the
    target too weakly, the sensing constraint is active instead.
    """
    su, st, rho = np.broadcast_arrays(*(np.asarray(v, dtype=float)
                                        for v in (user_gain, target_gain, cross_abs)))
    a1 = rho / np.sqrt(st)
    a2 = np.sqrt(np.maximum(su - a1 ** 2, 0.0))
    feasible = tau <= p_max * st * (1 + 1e-12)
    cos_need = np.sqrt(np.clip(tau / (p_max * st), 0.0, 1.0))
    cos_mrt = a1 / np.sqrt(su)
    cos_phi = np.where(cos_mrt >= cos_need, cos_mrt, cos_need)
    sin_phi = np.sqrt(np.maximum(1 - cos_phi ** 2, 0.0))
    gain = p_max * (a1 * cos_phi + a2 * sin_phi) ** 2
    gain = np.where(feasible, gain, 0.0)
    if gain.ndim == 0:
        return float(gain), bool(feasible)
    return gain, feasible


def optimal_span_beamformer(h_u, h_t, p_max, tau):
    """Coefficients of the optimal fixed-placement beamformer, or ``None``."""
    hu, ht = _vec(h_u), _vec(h_t)
    st = np.vdot(ht, ht).real
    su = np.vdot(hu, hu).real
    if tau > p_max * st * (1 + 1e-12):
        return None
    ht_norm = np.sqrt(st)
    alpha1 = np.vdot(ht, hu) / ht_norm
    alpha2 = np.sqrt(max(su - abs(alpha1) ** 2, 0.0))
    cos_need = np.sqrt(min(max(tau / (p_max * st), 0.0), 1.0))
    cos_mrt = abs(alpha1) / np.sqrt(su)
    cos_phi = max(cos_mrt, cos_need)
    sin_phi = np.sqrt(max(1 - cos_phi ** 2, 0.0))
    psi = np.angle(alpha1)
    amp = np.sqrt(p_max)
    if alpha2 <= 1e-14 * np.sqrt(su):
        return SpanCoefficients(0j, amp * np.exp(1j * psi) / ht_norm)
    c_u = amp * sin_phi / alpha2
    c_t = amp * (cos_phi * np.exp(1j * psi) - sin_phi * alpha1 / alpha2) / ht_norm
    return SpanCoefficients(complex(c_u), complex(c_t))


@dataclass(frozen=True)
class FineTuneResult:
    x: np.ndarray
    shift: np.ndarray
    converged: np.ndarray

    @property
    def ok(self):
        return bool(np.all(self.converged))


def _nearest_crossing(f, x0, lo, hi, reach, step):
    """Nearest root of ``frac(f)`` around ``x0`` within ``reach``, else ``None``."""
    best = None
    for direction in (1.0, -1.0):
        end = min(hi, x0 + reach) if direction > 0 else max(lo, x0 - reach)
        if (end - x0) * direction <= 0:
            continue
        n = max(2, int(np.ceil(abs(end - x0) / step)) + 1)
        grid = np.linspace(x0, end, n)
        level = np.floor(f(grid))
        jumps = np.flatnonzero(np.diff(level) != 0)
        if jumps.size == 0:
            continue
        j = jumps[0]
        a, b = grid[j], grid[j + 1]
        k = max(level[j], level[j + 1])
        root = brentq(lambda s: f(s) - k, a, b, xtol=1e-15, rtol=1e-15)
        if best is None or abs(root - x0) < abs(best - x0):
            best = root
    return best


def fine_tune_positions(x, geom, rf, reach=None, tol=1e-9):
    """Move every TPA to the nearest position where its path difference is a
    whole number of wavelengths.

    The search looks both ways up to ``reach`` (default ten wavelengths)
    inside the movable range.  Antennas without a crossing stay put and are
    flagged in ``converged``.
    """
    x = np.asarray(x, dtype=float).copy()
    reach = 10 * rf.wavelength if reach is None else reach
    lo, hi = geom.bounds
    step = rf.wavelength / 16
    out = x.copy()
    converged = np.ones(x.size, dtype=bool)
    for m in range(x.size):
        def theta(s, m=m):
            return phase_difference_theta(geom, m, s, rf)
        t0 = theta(x[m])
        if abs(t0 - np.rint(t0)) <= tol:
            continue
        root = _nearest_crossing(theta, x[m], lo, hi, reach, step)
        if root is None:
            converged[m] = False
            warnings.warn(f"TPA {m + 1}: no integer phase crossing within {reach} m",
                          RuntimeWarning, stacklevel=2)
            continue
        out[m] = min(max(root, lo), hi)
    return FineTuneResult(out, out - x, converged)


def solve_zeta(coeffs, aligned_inner, raw_inner, clip=False, tol=1e-9):
    """Rotation of ``c_u`` that carries the cross term over to new channels.

    Solves ``Re{e^{j zeta} A} = Re{B}`` with ``A = c_u c_t^* aligned_inner``
    and ``B = c_u c_t^* raw_inner``, returning the principal root
    ``arccos(Re B / |A|) - arg A`` reduced to ``[0, 2 pi)``.  With
    ``clip=True`` an unreachable ``Re B`` is clipped to ``[-|A|, |A|]``.
    """
    a = coeffs.cross * aligned_inner
    b = coeffs.cross * raw_inner
    mag = abs(a)
    if mag == 0.0:
        if abs(b.real) > tol * max(1.0, abs(b)):
            raise NumericalInfeasibilityError("cross term cannot be reproduced")
        return 0.0
    ratio = b.real / mag
    if abs(ratio) > 1.0:
        if not clip and abs(b.real) - mag > tol * mag:
            raise NumericalInfeasibilityError(
                f"|Re B| exceeds |A| by {abs(b.real) - mag:.3g}; channels not aligned")
        ratio = float(np.clip(ratio, -1.0, 1.0))
    zeta = np.arccos(ratio) - np.angle(a)
    zeta = float(np.mod(zeta, 2 * np.pi))
    return 0.0 if np.isclose(zeta, 2 * np.pi, rtol=0, atol=1e-15) else zeta


@dataclass(frozen=True)
class Realization:
    w: np.ndarray
    x: np.ndarray
    coeffs: SpanCoefficients
    rate: float
    radar_snr: float
    zeta: float
    fine_tune: FineTuneResult


def realize_solution(coeffs, x, geom, rf, spec, p_max, sigma_u2, tolerance=1e-3):
    """Turn an aligned-model optimum into a beamformer on the true channels.

    Positions are fine tuned, ``c_u`` is rotated so the cross term matches
    the aligned model at the original positions, and ``w`` is rescaled to
    exactly ``p_max`` and gauged so that ``h_u^H w`` is real positive.
    """
    x = np.asarray(x, dtype=float)
    tuned = fine_tune_positions(x, geom, rf)
    model_cross = rf.eta * aligned_summary(geom, x).cross_path
    rx = np.full(geom.n_rx, geom.target[0])
    ch = build_channels(geom, tuned.x, rx, rf)
    zeta = solve_zeta(coeffs, ch.cross, model_cross, clip=True)
    rotated = coeffs.rotated(zeta)
    w = reconstruct_beamformer(rotated, ch.h_u, ch.h_t)
    norm2 = np.vdot(w, w).real
    if norm2 == 0:
        raise NumericalInfeasibilityError("reconstructed beamformer vanished")
    scale = np.sqrt(p_max / norm2)
    gauge = np.exp(-1j * np.angle(np.vdot(ch.h_u.coefficients, w)))
    w = w * scale * gauge
    rotated = rotated.scaled(scale * gauge)
    beta = effective_radar_gain_beta(geom, rf, spec)
    user_power = abs(ch.h_u.inner(w)) ** 2
    radar_snr = beta * abs(ch.h_t.inner(w)) ** 2 / spec.sigma_s2
    if radar_snr < spec.gamma_req * (1 - tolerance):
        raise RealizationError((spec.gamma_req - radar_snr) / spec.gamma_req,
                               radar_snr, spec.gamma_req)
    return Realization(w, tuned.x, rotated, float(np.log2(1 + user_power / sigma_u2)),
                       float(radar_snr), zeta, tuned)
