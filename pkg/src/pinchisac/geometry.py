"""System geometry, RF constants and the spherical-wave pinching-antenna channel."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PlacementError(ValueError):
    """An antenna coordinate lies outside the movable range [-L/2, L/2]."""


@dataclass(frozen=True)
class RfConstants:
    """Carrier-level constants.

    Everything is derived from the free-space wavelength and the waveguide's
    effective refractive index, so the invariants ``guided_wavelength =
    wavelength / n_eff`` and ``eta = (wavelength / 4 pi)**2`` hold exactly.
    """

    wavelength: float = 0.05
    n_eff: float = 1.4
    speed_of_light: float = 3e8

    def __post_init__(self):
        if not (self.wavelength > 0 and self.n_eff > 0 and self.speed_of_light > 0):
            raise ValueError("RF constants must be strictly positive")

    @classmethod
    def from_frequency(cls, carrier_frequency, n_eff=1.4, speed_of_light=3e8):
        return cls(speed_of_light / carrier_frequency, n_eff, speed_of_light)

    @property
    def carrier_frequency(self):
        return self.speed_of_light / self.wavelength

    @property
    def guided_wavelength(self):
        return self.wavelength / self.n_eff

    @property
    def eta(self):
        return (self.wavelength / (4.0 * np.pi)) ** 2


def _readonly(values):
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


def uniform_waveguides(count, width):
    """Waveguide y-coordinates (m - 1/2) W / count, m = 1..count."""
    return (np.arange(1, count + 1) - 0.5) * width / count


@dataclass(frozen=True)
class SystemGeometry:
    """Serving area, waveguide layout and the two ground entities.

    Feed points sit at ``x = -L/2`` on every waveguide and are derived on
    demand rather than stored.
    """

    length: float
    width: float
    height: float
    tx_y: np.ndarray
    rx_y: np.ndarray
    user: tuple = (0.0, 0.0)
    target: tuple = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "tx_y", _readonly(self.tx_y))
        object.__setattr__(self, "rx_y", _readonly(self.rx_y))
        object.__setattr__(self, "user", tuple(float(v) for v in self.user))
        object.__setattr__(self, "target", tuple(float(v) for v in self.target))
        if self.height <= 0:
            raise ValueError("waveguide height must be positive")
        if self.length <= 0 or self.width <= 0:
            raise ValueError("area dimensions must be positive")
        for name, ys in (("tx_y", self.tx_y), ("rx_y", self.rx_y)):
            if ys.size == 0:
                raise ValueError(f"{name} must hold at least one waveguide")
            if np.any(ys < 0) or np.any(ys > self.width):
                raise ValueError(f"{name} outside [0, W]")
        half = self.length / 2
        for name, (x, y) in (("user", self.user), ("target", self.target)):
            if not (-half <= x <= half and 0 <= y <= self.width):
                raise ValueError(f"{name} position {(x, y)} outside the serving area")

    @classmethod
    def default(cls, n_tx=4, n_rx=4, length=40.0, width=20.0, height=3.0,
                user=(0.0, 0.0), target=(0.0, 0.0)):
        return cls(length, width, height, uniform_waveguides(n_tx, width),
                   uniform_waveguides(n_rx, width), user, target)

    def with_entities(self, user, target):
        return SystemGeometry(self.length, self.width, self.height, self.tx_y,
                              self.rx_y, user, target)

    def replace(self, **changes):
        fields = dict(length=self.length, width=self.width, height=self.height,
                      tx_y=self.tx_y, rx_y=self.rx_y, user=self.user, target=self.target)
        fields.update(changes)
        return SystemGeometry(**fields)

    @property
    def n_tx(self):
        return self.tx_y.size

    @property
    def n_rx(self):
        return self.rx_y.size

    @property
    def bounds(self):
        return -self.length / 2, self.length / 2

    @property
    def user_point(self):
        return np.array([self.user[0], self.user[1], 0.0])

    @property
    def target_point(self):
        return np.array([self.target[0], self.target[1], 0.0])

    def tx_points(self, x):
        x = np.asarray(x, dtype=float)
        return np.column_stack([x, self.tx_y, np.full(self.n_tx, self.height)])

    def rx_points(self, x):
        x = np.asarray(x, dtype=float)
        return np.column_stack([x, self.rx_y, np.full(self.n_rx, self.height)])

    @property
    def tx_feed_points(self):
        return self.tx_points(np.full(self.n_tx, -self.length / 2))

    @property
    def rx_feed_points(self):
        return self.rx_points(np.full(self.n_rx, -self.length / 2))

    def clamp(self, x):
        lo, hi = self.bounds
        return np.clip(np.asarray(x, dtype=float), lo, hi)

    def check_positions(self, x, which="TPA"):
        x = np.asarray(x, dtype=float)
        lo, hi = self.bounds
        bad = np.flatnonzero((x < lo) | (x > hi) | ~np.isfinite(x))
        if bad.size:
            i = int(bad[0])
            raise PlacementError(
                f"{which} {i + 1} at x={x[i]!r} lies outside [{lo}, {hi}]")
        return x


@dataclass(frozen=True)
class ChannelVector:
    coefficients: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        coef = np.array(self.coefficients, dtype=complex).reshape(-1)
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)

    @property
    def squared_norm(self):
        return float(np.vdot(self.coefficients, self.coefficients).real)

    @property
    def norm(self):
        return float(np.sqrt(self.squared_norm))

    def inner(self, other):
        """``self^H other``."""
        other = other.coefficients if isinstance(other, ChannelVector) else other
        return complex(np.vdot(self.coefficients, other))

    def __len__(self):
        return self.coefficients.size


@dataclass(frozen=True)
class Channels:
    """The three channels of one placement with cached Gram quantities."""

    h_u: ChannelVector
    h_t: ChannelVector
    g_t: ChannelVector

    @property
    def user_gain(self):
        return self.h_u.squared_norm

    @property
    def target_gain(self):
        return self.h_t.squared_norm

    @property
    def cross(self):
        """``h_t^H h_u``."""
        return self.h_t.inner(self.h_u)


def spherical_wave(endpoints, antennas, feeds, rf):
    """Vectorised channel coefficient for rows of (endpoint, antenna, feed)."""
    endpoints = np.atleast_2d(endpoints)
    antennas = np.atleast_2d(antennas)
    feeds = np.atleast_2d(feeds)
    d_free = np.linalg.norm(endpoints - antennas, axis=-1)
    d_guide = np.linalg.norm(feeds - antennas, axis=-1)
    phase = -2j * np.pi * (d_free / rf.wavelength + d_guide / rf.guided_wavelength)
    return np.sqrt(rf.eta) * np.exp(phase) / d_free


def channel_coefficient(endpoint, antenna, feed, rf):
    """Free-space plus in-waveguide propagation from one pinching antenna."""
    return complex(spherical_wave(endpoint, antenna, feed, rf)[0])


def build_channels(geom, tx_x, rx_x, rf):
    """Stack per-antenna coefficients into ``(h_u, h_t, g_t)``."""
    tx_x = geom.check_positions(np.asarray(tx_x, dtype=float).reshape(-1), "TPA")
    rx_x = geom.check_positions(np.asarray(rx_x, dtype=float).reshape(-1), "RPA")
    if tx_x.size != geom.n_tx or rx_x.size != geom.n_rx:
        raise ValueError("antenna coordinate count does not match the waveguide layout")
    tx, rx = geom.tx_points(tx_x), geom.rx_points(rx_x)
    h_u = spherical_wave(geom.user_point, tx, geom.tx_feed_points, rf)
    h_t = spherical_wave(geom.target_point, tx, geom.tx_feed_points, rf)
    g_t = spherical_wave(geom.target_point, rx, geom.rx_feed_points, rf)
    return Channels(ChannelVector(h_u, "user<-tx"), ChannelVector(h_t, "target<-tx"),
                    ChannelVector(g_t, "target->rx"))


def user_distances_sq(geom, x):
    """(x_u - x_m)^2 + (y_u - y_m)^2 + H^2, broadcast over leading axes of x."""
    xu, yu = geom.user
    return (xu - np.asarray(x)) ** 2 + (yu - geom.tx_y) ** 2 + geom.height ** 2


def target_distances_sq(geom, x):
    xt, yt = geom.target
    return (xt - np.asarray(x)) ** 2 + (yt - geom.tx_y) ** 2 + geom.height ** 2


def phase_difference_theta(geom, m, x, rf):
    """Target-minus-user path difference of TPA ``m`` in wavelengths.

    ``x`` may be an array of candidate positions for that antenna.
    """
    x = np.asarray(x, dtype=float)
    xu, yu = geom.user
    xt, yt = geom.target
    y, h2 = geom.tx_y[m], geom.height ** 2
    d_t = np.sqrt((xt - x) ** 2 + (yt - y) ** 2 + h2)
    d_u = np.sqrt((xu - x) ** 2 + (yu - y) ** 2 + h2)
    out = (d_t - d_u) / rf.wavelength
    return float(out) if out.ndim == 0 else out
