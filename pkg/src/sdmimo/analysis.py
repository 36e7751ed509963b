"""Reproductions of the coefficient-norm statistics, bound sweeps and noise-model checks."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import __version__
from .array import UpaGeometry, spatial_frequency, spatial_frequency_2d
from .designs import band_stop, prop2_bounds, zero_noise_coeffs
from .sigma_delta import FilterDesign, measure_noise_power, shaping_response, shaping_response_2d

RNSR_FLOOR_DB = -400.0
NOTCH_GUARD = 1e-3
_CHUNK = 10_000

# Published mean / RMS of ||g||_IQ-1 for K = 2..8 random nulls.
TABLE1_MEAN = {2: 2.89, 3: 5.28, 4: 8.37, 5: 12.85, 6: 18.83, 7: 27.17, 8: 38.06}
TABLE1_RMS = {2: 3.01, 3: 5.60, 4: 9.27, 5: 14.72, 6: 22.53, 7: 33.78, 8: 50.37}


@dataclass(frozen=True)
class NormStats:
    k: int
    min: float
    mean: float
    rms: float
    max: float
    n_samples: int
    seed: int


def _iq1_rows(g: np.ndarray) -> np.ndarray:
    return np.abs(g.real).sum(axis=1) + np.abs(g.imag).sum(axis=1)


def table1_stats(k: int, n_samples: int = 100_000, seed: int = 0) -> NormStats:
    """||g||_IQ-1 statistics of the K-null design with i.i.d. uniform nulls on (-pi, pi)."""
    if k < 1:
        raise ValueError("K must be >= 1")
    # fixed-size chunks, each on its own substream, so the result depends only on (k, n, seed)
    n_chunks = -(-n_samples // _CHUNK)
    streams = np.random.SeedSequence([seed, k]).spawn(n_chunks)
    norms = []
    for i, ss in enumerate(streams):
        size = min(_CHUNK, n_samples - i * _CHUNK)
        w = np.random.default_rng(ss).uniform(-np.pi, np.pi, (size, k))
        norms.append(_iq1_rows(zero_noise_coeffs(w)))
    v = np.concatenate(norms)
    return NormStats(k, float(v.min()), float(v.mean()), float(np.sqrt(np.mean(v**2))), float(v.max()), n_samples, seed)


def bounds_sweep(orders=range(1, 9), n_omega: int = 1000, seed: int = 0) -> list[dict]:
    """Band-stop ||g||_IQ-1 against its bracket, at omega_c = 0 and over random centres."""
    rng = np.random.default_rng(seed)
    rows = []
    for L in orders:
        lo, hi = prop2_bounds(L)
        wc = rng.uniform(-np.pi, np.pi, n_omega)
        n = np.array([np.abs(band_stop(L, w).real).sum() + np.abs(band_stop(L, w).imag).sum() for w in wc])
        g0 = band_stop(L, 0.0)
        rows.append(
            {
                "L": L,
                "lower": lo,
                "norm_at_zero": float(np.abs(g0.real).sum() + np.abs(g0.imag).sum()),
                "norm_min": float(n.min()),
                "norm_max": float(n.max()),
                "upper": hi,
            }
        )
    return rows


@dataclass
class NoiseModelRow:
    omega: float
    empirical: float
    predicted: float
    ratio_db: float  # nan where the predicted response is a deep notch


def validate_noise_model(design: FilterDesign, omegas, n_antennas: int, n_trials: int, seed=0) -> list[NoiseModelRow]:
    m = measure_noise_power(design, omegas, n_antennas, n_trials, seed)
    resp = np.abs(shaping_response(design, m.omega))
    rows = []
    for w, emp, pred, r in zip(m.omega, m.power, m.predicted, resp):
        ratio = np.nan if r < NOTCH_GUARD else 10 * np.log10(emp / pred)
        rows.append(NoiseModelRow(float(w), float(emp), float(pred), float(ratio)))
    return rows


def to_db(x, floor_db: float = RNSR_FLOOR_DB):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(x)
    return np.maximum(db, floor_db)


def rnsr_sweep(design: FilterDesign, thetas, spacing_ratio: float):
    """(theta, RNSR in dB) with exact zeros clamped to the -400 dB sentinel."""
    th = np.asarray(thetas, dtype=float)
    w = spatial_frequency(th, spacing_ratio)
    lin = np.abs(shaping_response(design, w)) ** 2 / design.amplitude**2
    return th, to_db(lin)


def rnsr_sweep_2d(design: FilterDesign, thetas, phis, geom: UpaGeometry):
    th, ph = np.meshgrid(np.asarray(thetas, float), np.asarray(phis, float), indexing="ij")
    w1, w2 = spatial_frequency_2d(th, ph, geom)
    lin = np.abs(shaping_response_2d(design, w1, w2)) ** 2 / design.amplitude**2
    return th, ph, to_db(lin)


def rows_to_csv(header: list[str], rows, kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"# sdmimo {__version__} {kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()
