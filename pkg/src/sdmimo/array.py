"""Array geometry, spatial frequencies and steering responses for ULAs and UPAs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HALF_PI = np.pi / 2


def _check_angle(angle, name="angle"):
    a = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(a)) or np.any(np.abs(a) >= HALF_PI):
        raise ValueError(f"{name} must lie strictly inside (-pi/2, pi/2), got {angle!r}")
    return a


def _check_spacing(ratio: float) -> float:
    if not (0.0 < ratio <= 0.5):
        raise ValueError(f"spacing ratio d/lambda must be in (0, 0.5], got {ratio!r}")
    return float(ratio)


@dataclass(frozen=True)
class UlaGeometry:
    n_antennas: int
    spacing_ratio: float = 0.25

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        _check_spacing(self.spacing_ratio)

    @property
    def n_effective(self) -> int:
        return self.n_antennas


@dataclass(frozen=True)
class UpaGeometry:
    n1: int
    n2: int
    spacing_ratio_1: float = 0.25
    spacing_ratio_2: float = 0.25

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError("n1 and n2 must be >= 1")
        _check_spacing(self.spacing_ratio_1)
        _check_spacing(self.spacing_ratio_2)

    @property
    def n_effective(self) -> int:
        return self.n1 * self.n2


@dataclass(frozen=True)
class UserChannel:
    """Single-path far-field user: complex gain and direction (radians).

    The channel vector is never stored; call :meth:`vector` with a geometry.
    """

    gain: complex
    angle_azimuth: float
    angle_elevation: float = 0.0

    def __post_init__(self):
        if abs(self.gain) <= 0:
            raise ValueError("channel gain must be nonzero")
        _check_angle(self.angle_azimuth, "azimuth")
        _check_angle(self.angle_elevation, "elevation")

    def omega(self, geom):
        if isinstance(geom, UpaGeometry):
            return spatial_frequency_2d(self.angle_azimuth, self.angle_elevation, geom)
        return spatial_frequency(self.angle_azimuth, geom.spacing_ratio)

    def vector(self, geom) -> np.ndarray:
        """Channel h = alpha * response, flattened row-major for UPAs."""
        if isinstance(geom, UpaGeometry):
            resp = upa_response(self.angle_azimuth, self.angle_elevation, geom).ravel()
        else:
            resp = steering_vector(self.omega(geom), geom.n_antennas)
        return self.gain * resp


def spatial_frequency(theta, spacing_ratio: float):
    """omega = 2*pi*(d/lambda)*sin(theta); vectorised over theta."""
    theta = _check_angle(theta, "theta")
    _check_spacing(spacing_ratio)
    out = 2 * np.pi * spacing_ratio * np.sin(theta)
    return float(out) if out.ndim == 0 else out


def spatial_frequency_2d(theta, phi, g: UpaGeometry):
    theta = _check_angle(theta, "theta")
    phi = _check_angle(phi, "phi")
    w1 = 2 * np.pi * g.spacing_ratio_1 * np.cos(phi) * np.sin(theta)
    w2 = 2 * np.pi * g.spacing_ratio_2 * np.sin(phi)
    if w1.ndim == 0 and w2.ndim == 0:
        return float(w1), float(w2)
    return w1, w2


def steering_vector(omega: float, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("steering vector length must be >= 1")
    return np.exp(-1j * np.arange(n) * omega)


def upa_response(theta, phi, g: UpaGeometry) -> np.ndarray:
    w1, w2 = spatial_frequency_2d(theta, phi, g)
    return np.outer(steering_vector(w1, g.n1), steering_vector(w2, g.n2))


def deg2rad(x):
    return np.deg2rad(x)
