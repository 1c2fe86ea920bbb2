"""Radar-side metrics: receive combining, radar SNR and Neyman-Pearson detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ChannelVector


class DegenerateChannelError(ValueError):
    pass


@dataclass(frozen=True)
class DetectionSpec:
    """Detection requirements and radar noise.

    Attributes
    ----------
    pfa : float
        False-alarm probability, strictly inside (0, 1).
    gamma_req : float
        Minimum radar SNR (linear).
    sigma_s2 : float
        Noise power at each receive pinching antenna in watts.
    alpha : complex
        Target reflection coefficient.
    """

    pfa: float = 1e-2
    gamma_req: float = 4.0
    sigma_s2: float = 1e-11
    alpha: complex = 1.0

    def __post_init__(self):
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")
        if self.sigma_s2 <= 0:
            raise ValueError("sigma_s2 must be positive")
        if self.gamma_req < 0:
            raise ValueError("gamma_req must be nonnegative")


@dataclass(frozen=True)
class RadarMetrics:
    radar_snr: float
    detection_probability: float
    np_threshold: float
    beta: float


def _coef(g):
    return g.coefficients if isinstance(g, ChannelVector) else np.asarray(g, dtype=complex)


def optimal_receive_beamformer(g_t):
    """Matched filter ``g_t / ||g_t||``."""
    g = _coef(g_t)
    norm = np.linalg.norm(g)
    if not norm > 0:
        raise DegenerateChannelError("receive channel is identically zero")
    return g / norm


def radar_snr_full(v, g_t, h_t, w, spec):
    v = np.asarray(v, dtype=complex)
    vv = np.vdot(v, v).real
    if not vv > 0:
        raise DegenerateChannelError("receive beamformer must be nonzero")
    echo = spec.alpha * np.vdot(v, _coef(g_t)) * np.vdot(_coef(h_t), w)
    return float(abs(echo) ** 2 / (spec.sigma_s2 * vv))


def radar_snr_bound(g_t, h_t, w, spec):
    """Cauchy-Schwarz bound, attained by the matched filter."""
    g = _coef(g_t)
    return float(abs(spec.alpha) ** 2 * np.vdot(g, g).real
                 * abs(np.vdot(_coef(h_t), w)) ** 2 / spec.sigma_s2)


def effective_radar_gain_beta(geom, rf, spec):
    """Aggregate receive gain with every RPA placed at ``x = x_t``."""
    yt = geom.target[1]
    return float(np.sum(rf.eta * abs(spec.alpha) ** 2
                        / ((yt - geom.rx_y) ** 2 + geom.height ** 2)))


def detection_probability(radar_snr, pfa):
    """P_D for the two-degree-of-freedom chi-squared energy detector.

    With CDF ``1 - exp(-x/2)`` the NP expression collapses to
    ``pfa ** (1 / (1 + snr))``.
    """
    radar_snr = np.asarray(radar_snr, dtype=float)
    if np.any(radar_snr < 0):
        raise ValueError("radar SNR must be nonnegative")
    out = np.power(pfa, 1.0 / (1.0 + radar_snr))
    return float(out) if out.ndim == 0 else out


def np_threshold(pfa, sigma_s2):
    if not 0.0 < pfa < 1.0:
        raise ValueError("pfa must lie in (0, 1)")
    return -sigma_s2 * np.log(pfa)


def radar_metrics(radar_snr, geom, rf, spec):
    return RadarMetrics(radar_snr, detection_probability(radar_snr, spec.pfa),
                        np_threshold(spec.pfa, spec.sigma_s2),
                        effective_radar_gain_beta(geom, rf, spec))


def monte_carlo_detector(spec, kappa, trials, seed=None, block=1 << 16):
    """Empirical (P_D, P_FA) of the energy test ``|y|^2 > delta``.

    Under H1 the combined echo is ``sqrt(kappa - sigma^2) s + n`` with a
    unit-power circular Gaussian symbol ``s``; under H0 it is noise only.
    Trials are generated in blocks from per-block child seeds so the result
    does not depend on the block size used by a caller's workers.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if kappa < spec.sigma_s2:
        raise ValueError("kappa cannot be below the noise power")
    delta = np_threshold(spec.pfa, spec.sigma_s2)
    amp = np.sqrt(kappa - spec.sigma_s2)
    noise_sd = np.sqrt(spec.sigma_s2 / 2)
    n_blocks = -(-trials // block)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    hits_1 = hits_0 = 0
    for k, child in enumerate(children):
        size = min(block, trials - k * block)
        rng = np.random.default_rng(child)
        s = (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)
        n1 = noise_sd * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        n0 = noise_sd * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        hits_1 += int(np.count_nonzero(np.abs(amp * s + n1) ** 2 > delta))
        hits_0 += int(np.count_nonzero(np.abs(n0) ** 2 > delta))
    return hits_1 / trials, hits_0 / trials
