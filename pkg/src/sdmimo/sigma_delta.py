"""Multi-level quantizer and error-feedback Sigma-Delta modulators (1D and 2D).

Sign conventions follow the modulator recursion

    b_n = xbar_n + sum_{l>=1} g_l q_{n-l},   x_n = Qc(b_n),   q_n = x_n - b_n,

so the output noise is v_n = q_n + (g * q)_n with spectrum (1 + G(omega)) Q(omega).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

OVERLOAD_TOL = 1e-12
SAFE_TOL = 1e-6


@dataclass(frozen=True)
class SignalSet:
    """Per-component M-level alphabet: odd integers for even M, even integers for odd M."""

    m_levels: int

    def __post_init__(self):
        if int(self.m_levels) != self.m_levels or self.m_levels < 2:
            raise ValueError(f"m_levels must be an integer >= 2, got {self.m_levels!r}")

    @cached_property
    def levels(self) -> np.ndarray:
        return np.arange(-(self.m_levels - 1), self.m_levels, 2, dtype=float)

    @property
    def peak(self) -> int:
        return self.m_levels - 1


def quantize(y, s: SignalSet | int):
    """Nearest alphabet level; ties go toward +inf; saturates at +-(M-1)."""
    m = s.m_levels if isinstance(s, SignalSet) else int(s)
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise ValueError("quantizer input must be finite")
    if m % 2 == 0:
        out = 2.0 * np.floor(y_arr / 2.0) + 1.0
    else:
        out = 2.0 * np.floor((y_arr + 1.0) / 2.0)
    out = np.clip(out, -(m - 1), m - 1)
    return float(out) if out.ndim == 0 else out


def quantize_complex(z, s: SignalSet | int):
    z_arr = np.asarray(z, dtype=complex)
    out = quantize(z_arr.real, s) + 1j * quantize(z_arr.imag, s)
    return complex(out) if np.ndim(out) == 0 else out


def iq_norm1(g) -> float:
    g = np.asarray(g, dtype=complex)
    return float(np.abs(g.real).sum() + np.abs(g.imag).sum())


def iq_norm_inf(x) -> float:
    x = np.asarray(x, dtype=complex)
    if x.size == 0:
        return 0.0
    return float(max(np.abs(x.real).max(), np.abs(x.imag).max()))


@dataclass(frozen=True)
class FilterDesign:
    """Feedback coefficients plus the input amplitude A and level count M they were sized for.

    ``coeffs`` is g_1..g_L for a 1D modulator, or the (L1+1)x(L2+1) matrix G with
    G[0, 0] == 0 for a 2D modulator.
    """

    coeffs: np.ndarray
    amplitude: float
    m_levels: int
    label: str = ""

    def __post_init__(self):
        g = np.array(self.coeffs, dtype=complex)
        g.setflags(write=False)
        object.__setattr__(self, "coeffs", g)
        if g.ndim == 1:
            if g.size < 1:
                raise ValueError("1D design needs at least one coefficient")
        elif g.ndim == 2:
            if g[0, 0] != 0:
                raise ValueError("2D design requires G[0, 0] == 0")
        else:
            raise ValueError("coeffs must be a vector or a matrix")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude!r}")
        SignalSet(self.m_levels)

    @property
    def kind(self) -> str:
        return "1d" if self.coeffs.ndim == 1 else "2d"

    @property
    def order(self):
        if self.kind == "1d":
            return int(self.coeffs.size)
        return tuple(int(k) - 1 for k in self.coeffs.shape)

    @property
    def iq1(self) -> float:
        return iq_norm1(self.coeffs)

    @property
    def overload_safe(self) -> bool:
        return self.amplitude + self.iq1 <= self.m_levels + SAFE_TOL

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "order": self.order if self.kind == "1d" else list(self.order),
            "label": self.label,
            "coeffs_re": self.coeffs.real.tolist(),
            "coeffs_im": self.coeffs.imag.tolist(),
            "amplitude": float(self.amplitude),
            "m_levels": int(self.m_levels),
            "iq1": self.iq1,
            "overload_safe": self.overload_safe,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterDesign":
        re = np.asarray(d["coeffs_re"], dtype=float)
        im = np.asarray(d["coeffs_im"], dtype=float)
        if re.shape != im.shape:
            raise ValueError("coeffs_re and coeffs_im shapes differ")
        kind = d.get("kind", "1d" if re.ndim == 1 else "2d")
        if (kind == "1d") != (re.ndim == 1):
            raise ValueError(f"kind {kind!r} does not match coefficient shape {re.shape}")
        return cls(re + 1j * im, float(d["amplitude"]), int(d["m_levels"]), d.get("label", ""))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "FilterDesign":
        return cls.from_dict(json.loads(text))


@dataclass
class ModulationResult:
    output: np.ndarray
    errors: np.ndarray
    overload_count: int
    max_error_iq: float
    # per-sample feedback term (g * q)_n, kept so the step identity can be audited
    feedback: np.ndarray = field(repr=False, default=None)


def _quantize_arrays(b: np.ndarray, m: int) -> np.ndarray:
    # Inlined vectorised quantizer; callers guarantee finiteness.
    if m % 2 == 0:
        re = 2.0 * np.floor(b.real / 2.0) + 1.0
        im = 2.0 * np.floor(b.imag / 2.0) + 1.0
    else:
        re = 2.0 * np.floor((b.real + 1.0) / 2.0)
        im = 2.0 * np.floor((b.imag + 1.0) / 2.0)
    lim = m - 1
    np.clip(re, -lim, lim, out=re)
    np.clip(im, -lim, lim, out=im)
    return re + 1j * im


def _finish(x, out, q, fb) -> ModulationResult:
    # step identity x_n = xbar_n + (g * q)_n + q_n, up to rounding of the subtraction
    slack = np.abs(out - (x + fb + q))
    if slack.size and slack.max() > 1e-9 * (1.0 + np.abs(x).max() + np.abs(fb).max()):
        raise ArithmeticError("modulator step identity violated")
    mag = np.maximum(np.abs(q.real), np.abs(q.imag)) if q.size else np.zeros(0)
    return ModulationResult(
        output=out,
        errors=q,
        overload_count=int(np.count_nonzero(mag > 1 + OVERLOAD_TOL)),
        max_error_iq=float(mag.max()) if mag.size else 0.0,
        feedback=fb,
    )


def _check_input(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ValueError("input must have length >= 1")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    return x


def _run_1d(xs: np.ndarray, g_rev: np.ndarray, m: int):
    """Core recursion on rows of ``xs``; ``g_rev`` is reversed coefficients, shared (L,) or per row (B, L)."""
    n = xs.shape[1]
    L = g_rev.shape[-1]
    per_row = g_rev.ndim == 2
    qbuf = np.zeros((xs.shape[0], n + L), dtype=complex)
    out = np.empty_like(xs)
    fb = np.empty_like(xs)
    for k in range(n):
        win = qbuf[:, k : k + L]
        f = np.einsum("bl,bl->b", win, g_rev) if per_row else win @ g_rev
        b = xs[:, k] + f
        xk = _quantize_arrays(b, m)
        qbuf[:, k + L] = xk - b
        out[:, k] = xk
        fb[:, k] = f
    return out, qbuf[:, L:], fb


def modulate_1d(x, design: FilterDesign) -> ModulationResult:
    """Run the 1D modulator along the last axis; leading axes are independent sequences."""
    if design.kind != "1d":
        raise ValueError("modulate_1d needs a 1D design")
    x = _check_input(x)
    shape = x.shape
    out, q, fb = _run_1d(x.reshape(-1, shape[-1]), design.coeffs[::-1], design.m_levels)
    return _finish(x, out.reshape(shape), q.reshape(shape), fb.reshape(shape))


def modulate_1d_batch(x, coeffs, m_levels: int) -> ModulationResult:
    """Row-wise modulation where row b of ``x`` (B x N) uses coefficient row b of ``coeffs`` (B x L).

    Amplitudes are not needed by the recursion, so only the level count is shared.
    """
    x = _check_input(x)
    g = np.asarray(coeffs, dtype=complex)
    if x.ndim != 2 or g.ndim != 2 or g.shape[0] != x.shape[0]:
        raise ValueError("need x of shape (B, N) and coeffs of shape (B, L)")
    SignalSet(m_levels)
    out, q, fb = _run_1d(x, g[:, ::-1], int(m_levels))
    return _finish(x, out, q, fb)


def modulate_2d(x, design: FilterDesign) -> ModulationResult:
    """Run the 2D modulator on the last two axes in row-major raster order."""
    if design.kind != "2d":
        raise ValueError("modulate_2d needs a 2D design")
    x = np.asarray(x, dtype=complex)
    if x.ndim < 2 or x.shape[-1] < 1 or x.shape[-2] < 1:
        raise ValueError("input must be at least a 1x1 matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    lead, (n1, n2) = x.shape[:-2], x.shape[-2:]
    xs = x.reshape(-1, n1, n2)
    g_flip = design.coeffs[::-1, ::-1]
    l1, l2 = design.coeffs.shape[0] - 1, design.coeffs.shape[1] - 1
    qbuf = np.zeros((xs.shape[0], n1 + l1, n2 + l2), dtype=complex)
    out = np.empty_like(xs)
    fb = np.empty_like(xs)
    m = design.m_levels
    for i in range(n1):
        for j in range(n2):
            win = qbuf[:, i : i + l1 + 1, j : j + l2 + 1]
            f = np.tensordot(win, g_flip, axes=([1, 2], [0, 1]))
            b = xs[:, i, j] + f
            xk = _quantize_arrays(b, m)
            qbuf[:, i + l1, j + l2] = xk - b
            out[:, i, j] = xk
            fb[:, i, j] = f
    q = qbuf[:, l1:, l2:]
    shape = lead + (n1, n2)
    return _finish(x, out.reshape(shape), q.reshape(shape), fb.reshape(shape))


def modulate(x, design: FilterDesign) -> ModulationResult:
    return modulate_1d(x, design) if design.kind == "1d" else modulate_2d(x, design)


def shaping_response(design_or_coeffs, omega):
    """1 + G(omega) for a 1D design; vectorised over omega."""
    g = design_or_coeffs.coeffs if isinstance(design_or_coeffs, FilterDesign) else np.asarray(design_or_coeffs, complex)
    if g.ndim != 1:
        raise ValueError("shaping_response needs 1D coefficients")
    w = np.asarray(omega, dtype=float)
    ls = np.arange(1, g.size + 1)
    resp = 1 + np.exp(-1j * np.multiply.outer(w, ls)) @ g
    return complex(resp) if resp.ndim == 0 else resp


def shaping_response_2d(design_or_coeffs, omega1, omega2):
    g = design_or_coeffs.coeffs if isinstance(design_or_coeffs, FilterDesign) else np.asarray(design_or_coeffs, complex)
    if g.ndim != 2:
        raise ValueError("shaping_response_2d needs a coefficient matrix")
    w1, w2 = np.broadcast_arrays(np.asarray(omega1, float), np.asarray(omega2, float))
    e1 = np.exp(-1j * np.multiply.outer(w1, np.arange(g.shape[0])))
    e2 = np.exp(-1j * np.multiply.outer(w2, np.arange(g.shape[1])))
    resp = 1 + np.einsum("...i,ij,...j->...", e1, g, e2)
    return complex(resp) if resp.ndim == 0 else resp


@dataclass
class NoiseMeasurement:
    omega: np.ndarray
    power: np.ndarray
    predicted: np.ndarray
    n_trials: int
    overload_count: int


def predicted_noise_power(design: FilterDesign, omega, n_antennas: int):
    return np.abs(shaping_response(design, omega)) ** 2 * (2 * n_antennas / 3)


def measure_noise_power(design: FilterDesign, omega, n_antennas: int, n_trials: int, seed=0) -> NoiseMeasurement:
    """Empirical E|sum_n v_n e^{-j n omega}|^2 with i.i.d. uniform inputs on [-A, A]."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    a = design.amplitude
    x = rng.uniform(-a, a, (n_trials, n_antennas)) + 1j * rng.uniform(-a, a, (n_trials, n_antennas))
    res = modulate_1d(x, design)
    v = res.output - x
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    steer = np.exp(-1j * np.multiply.outer(np.arange(n_antennas), w))
    power = np.mean(np.abs(v @ steer) ** 2, axis=0)
    return NoiseMeasurement(
        omega=w,
        power=power,
        predicted=predicted_noise_power(design, w, n_antennas),
        n_trials=n_trials,
        overload_count=res.overload_count,
    )
