"""Link-level Monte-Carlo BER simulation of ZF precoding with coarse DACs.

Schemes
-------
sd-fs    fixed-sector optimised Sigma-Delta (designed once per run and SNR point)
sd-ut    user-targeted optimised Sigma-Delta (re-designed every trial)
sd-1st   first-order Sigma-Delta, A = M - 1 (2D: separable first order, A = M - 3)
sd-2nd   second-order Sigma-Delta, A = M - 3 (1D only)
direct   quantize the scaled ZF signal directly
unquant  unquantized ZF with the same peak amplitude budget
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .array import UlaGeometry, UpaGeometry, UserChannel
from .conic import DesignSpec, SolverError, design
from .designs import InfeasibleAmplitudeError, SqnrContext, first_order, first_order_2d, second_order
from .sigma_delta import FilterDesign, iq_norm_inf, modulate, quantize_complex, shaping_response, shaping_response_2d

log = logging.getLogger(__name__)

SCHEMES = ("sd-fs", "sd-ut", "sd-1st", "sd-2nd", "direct", "unquant")
SIGMA_W_FLOOR = 1e-12
BITS_PER_SYMBOL = 6
MAX_REDRAWS = 20

_QAM_SCALE = np.sqrt(42.0)
_GRAY3 = np.array([i ^ (i >> 1) for i in range(8)])  # index -> gray code
_GRAY3_INV = np.argsort(_GRAY3)  # gray code -> index


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# 64-QAM
# ---------------------------------------------------------------------------


def _bits_to_int3(bits):
    return bits[..., 0] * 4 + bits[..., 1] * 2 + bits[..., 2]


def _int3_to_bits(v):
    return np.stack([(v >> 2) & 1, (v >> 1) & 1, v & 1], axis=-1)


def qam64_mod(bits) -> np.ndarray:
    """Gray-mapped square 64-QAM, unit average energy. ``bits`` has a trailing axis of 6."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] != BITS_PER_SYMBOL:
        raise ValueError("64-QAM needs groups of 6 bits")
    i_idx = _GRAY3_INV[_bits_to_int3(bits[..., :3])]
    q_idx = _GRAY3_INV[_bits_to_int3(bits[..., 3:])]
    return ((2 * i_idx - 7) + 1j * (2 * q_idx - 7)) / _QAM_SCALE


def qam64_demod(y) -> np.ndarray:
    y = np.asarray(y, dtype=complex) * _QAM_SCALE
    i_idx = np.clip(np.floor((y.real + 8) / 2), 0, 7).astype(np.int64)
    q_idx = np.clip(np.floor((y.imag + 8) / 2), 0, 7).astype(np.int64)
    return np.concatenate([_int3_to_bits(_GRAY3[i_idx]), _int3_to_bits(_GRAY3[q_idx])], axis=-1)


# ---------------------------------------------------------------------------
# Scenario
# ---------------------------------------------------------------------------


@dataclass
class ScenarioConfig:
    """Simulation scenario. Angles in degrees, SNRs in dB."""

    geometry: UlaGeometry | UpaGeometry = field(default_factory=lambda: UlaGeometry(256, 0.25))
    n_users: int = 8
    sector_deg: tuple = (-30.0, 30.0)
    elevation_deg: tuple = (0.0, 20.0)
    m_levels: int = 5
    schemes: tuple = ("sd-fs", "sd-1st", "sd-2nd", "direct", "unquant")
    order: int | tuple = 16
    ut_order: int | tuple | None = None
    fs_samples: int | None = None
    snr_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_symbols: int = 500
    n_trials: int = 100
    seed: int = 0
    r0: float = 30.0
    r1_range: tuple = (20.0, 100.0)
    min_separation_deg: float = 1.0
    noise_var: float = 1.0

    def __post_init__(self):
        self.sector_deg = tuple(float(v) for v in self.sector_deg)
        self.elevation_deg = tuple(float(v) for v in self.elevation_deg)
        self.schemes = tuple(self.schemes)
        self.snr_db = tuple(float(v) for v in self.snr_db)
        if isinstance(self.order, list):
            self.order = tuple(self.order)
        if isinstance(self.ut_order, list):
            self.ut_order = tuple(self.ut_order)
        self.validate()

    @property
    def is_2d(self) -> bool:
        return isinstance(self.geometry, UpaGeometry)

    @property
    def gain_range(self) -> tuple[float, float]:
        lo, hi = self.r1_range
        return self.r0 / hi, self.r0 / lo

    def validate(self):
        if self.n_users < 1:
            raise ConfigError("n_users must be >= 1")
        if self.n_symbols < 1 or self.n_trials < 1:
            raise ConfigError("n_symbols and n_trials must be >= 1")
        for lo, hi, what in (self.sector_deg + ("azimuth",), self.elevation_deg + ("elevation",)):
            if not (-90 < lo <= hi < 90):
                raise ConfigError(f"{what} sector must satisfy -90 < lo <= hi < 90 degrees")
        if not self.snr_db:
            raise ConfigError("SNR grid is empty")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown:
            raise ConfigError(f"unknown schemes: {sorted(unknown)}")
        if self.m_levels < 2:
            raise ConfigError("m_levels must be >= 2")
        if self.is_2d:
            if "sd-2nd" in self.schemes:
                raise ConfigError("sd-2nd is only defined for linear arrays")
            if isinstance(self.order, int):
                raise ConfigError("2D scenarios need order = [L1, L2]")
        elif not isinstance(self.order, int):
            raise ConfigError("1D scenarios need an integer order")
        if "sd-2nd" in self.schemes and self.m_levels < 4:
            raise ConfigError(
                f"sd-2nd needs A = M - 3 > 0 (at least M = 4 levels); got M = {self.m_levels}"
            )
        if self.is_2d and "sd-1st" in self.schemes and self.m_levels < 4:
            raise ConfigError(
                f"2D first-order modulator needs A = M - 3 > 0 (at least M = 4); got M = {self.m_levels}"
            )
        lo, hi = self.r1_range
        if not (0 < lo <= hi):
            raise ConfigError("r1_range must satisfy 0 < lo <= hi")
        _check_capacity(self)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["geometry"] = {"kind": "upa" if self.is_2d else "ula", **asdict(self.geometry)}
        return d


def _slots(width: float, sep: float) -> int:
    # continuous draws need width > (K - 1) sep strictly, which allows ceil(width / sep) users
    return max(1, int(np.ceil(width / sep - 1e-9))) if sep > 0 else 10**9


def _check_capacity(cfg: ScenarioConfig):
    sep = cfg.min_separation_deg
    cap = _slots(cfg.sector_deg[1] - cfg.sector_deg[0], sep)
    if cfg.is_2d:
        cap *= _slots(cfg.elevation_deg[1] - cfg.elevation_deg[0], sep)
    if cfg.n_users > cap:
        raise ConfigError(f"sector too narrow to place {cfg.n_users} users {sep} degrees apart")


def generate_users(cfg: ScenarioConfig, rng: np.random.Generator, max_tries: int = 100_000) -> list[UserChannel]:
    """Angles uniform in the sector with pairwise separation >= min_separation_deg.

    Gains: |alpha| = r0 / r1 with r1 ~ U[r1_range], phase ~ U[-pi, pi].
    In 2D the separation is the Chebyshev distance over (azimuth, elevation).
    """
    _check_capacity(cfg)
    sep = cfg.min_separation_deg
    angles: list[tuple[float, float]] = []
    tries = 0
    while len(angles) < cfg.n_users:
        tries += 1
        if tries > max_tries:
            raise ConfigError("could not place users with the requested separation")
        th = rng.uniform(*cfg.sector_deg)
        ph = rng.uniform(*cfg.elevation_deg) if cfg.is_2d else 0.0
        if all(max(abs(th - a), abs(ph - b) if cfg.is_2d else 0.0) >= sep for a, b in angles):
            angles.append((th, ph))
    r1 = rng.uniform(*cfg.r1_range, cfg.n_users)
    phase = rng.uniform(-np.pi, np.pi, cfg.n_users)
    gains = cfg.r0 / r1 * np.exp(1j * phase)
    return [
        UserChannel(complex(g), float(np.deg2rad(th)), float(np.deg2rad(ph)))
        for g, (th, ph) in zip(gains, angles)
    ]


def channel_matrix(users: list[UserChannel], geom) -> np.ndarray:
    return np.stack([u.vector(geom) for u in users])


def user_omegas(users: list[UserChannel], geom) -> np.ndarray:
    return np.array([u.omega(geom) for u in users])


# ---------------------------------------------------------------------------
# Transmitters
# ---------------------------------------------------------------------------


def noise_loading(design: FilterDesign, omegas, gains, ctx: SqnrContext) -> np.ndarray:
    """sigma_w,i = sqrt(rho |alpha_i|^2 (2N/3)|1+G(omega_i)|^2 + sigma^2), floored away from zero."""
    if design.kind == "1d":
        resp = shaping_response(design, np.asarray(omegas, float))
    else:
        w = np.asarray(omegas, float).reshape(-1, 2)
        resp = shaping_response_2d(design, w[:, 0], w[:, 1])
    var = ctx.rho * np.abs(gains) ** 2 * (2 * ctx.n_effective / 3) * np.abs(resp) ** 2 + ctx.noise_var
    return np.maximum(np.sqrt(var), SIGMA_W_FLOOR)


def _peak(z) -> float:
    c = iq_norm_inf(z)
    if c == 0:
        raise ValueError("all precoded symbols are zero; cannot normalise")
    return c


@dataclass
class Transmission:
    x: np.ndarray  # T x N transmitted (pre-amplification) signals
    gain: np.ndarray  # per-user effective scalar gain before sqrt(rho)
    overloads: int = 0
    peak_in: float = 0.0


def sd_transmit(h_pinv, d_diag, symbols, design: FilterDesign, shape2d=None) -> Transmission:
    """xbar_t = (A / C) H^+ D s_t followed by the modulator; ``symbols`` is K x T."""
    z = (h_pinv * d_diag) @ symbols  # N x T
    c = _peak(z)
    xbar = (design.amplitude / c) * z.T
    if shape2d is not None:
        res = modulate(xbar.reshape(-1, *shape2d), design)
        out = res.output.reshape(xbar.shape)
    else:
        res = modulate(xbar, design)
        out = res.output
    return Transmission(out, design.amplitude / c * d_diag, res.overload_count, iq_norm_inf(xbar))


def direct_quant_transmit(h_pinv, symbols, m_levels: int) -> Transmission:
    """x_t = Qc(M H^+ s_t / C), C = max_t ||H^+ s_t||_IQ-inf."""
    z = h_pinv @ symbols
    c = _peak(z)
    x = quantize_complex(m_levels / c * z.T, m_levels)
    k = symbols.shape[0]
    return Transmission(x, np.full(k, m_levels / c))


def unquantized_transmit(h_pinv, symbols, m_levels: int) -> Transmission:
    """x_t = (M - 1) H^+ s_t / C, peak-limited to M - 1."""
    z = h_pinv @ symbols
    c = _peak(z)
    x = (m_levels - 1) / c * z.T
    k = symbols.shape[0]
    return Transmission(x, np.full(k, (m_levels - 1) / c))


def receive_and_detect(x, h, rho: float, noise, gain) -> np.ndarray:
    """y = sqrt(rho) H x_t + eta, equalised by the known per-user gain, then 64-QAM decisions.

    ``x`` is T x N, ``noise`` is K x T; returns bits of shape K x T x 6.
    """
    g = np.sqrt(rho) * np.asarray(gain, float)
    if np.any(g == 0):
        raise ZeroDivisionError("zero effective gain at the receiver")
    y = np.sqrt(rho) * (h @ x.T) + noise
    return qam64_demod(y / g[:, None])


# ---------------------------------------------------------------------------
# Monte-Carlo driver
# ---------------------------------------------------------------------------


@dataclass
class BerReport:
    config: dict
    snr_db: list
    bit_errors: dict  # scheme -> list per SNR
    bits: dict
    overloads: dict
    redraws: int = 0
    seeds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def ber(self, scheme: str) -> np.ndarray:
        return np.asarray(self.bit_errors[scheme], float) / np.asarray(self.bits[scheme], float)

    def rows(self):
        for s in self.bit_errors:
            for i, snr in enumerate(self.snr_db):
                e, b = self.bit_errors[s][i], self.bits[s][i]
                yield s, snr, e / b, e, b, self.overloads[s][i]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# sdmimo {__version__} ber-report\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "snr_db", "ber", "bit_errors", "bits", "overloads"])
        for s, snr, ber, e, b, o in self.rows():
            w.writerow([s, f"{snr:g}", f"{ber:.10g}", e, b, o])
        return buf.getvalue()

    def to_json(self) -> str:
        summary = {
            "version": __version__,
            "config": self.config,
            "snr_db": self.snr_db,
            "ber": {s: self.ber(s).tolist() for s in self.bit_errors},
            "bit_errors": self.bit_errors,
            "bits": self.bits,
            "overloads": self.overloads,
            "redraws": self.redraws,
            "seeds": self.seeds,
            "notes": self.notes,
        }
        return json.dumps(summary, indent=2, sort_keys=True)


def _rho(snr_db: float, cfg: ScenarioConfig) -> float:
    return 10 ** (snr_db / 10) * cfg.noise_var / (cfg.m_levels - 1) ** 2


def _geometry_spacing(geom):
    if isinstance(geom, UpaGeometry):
        return (geom.spacing_ratio_1, geom.spacing_ratio_2)
    return geom.spacing_ratio


def _sector_rad(cfg: ScenarioConfig):
    az = tuple(np.deg2rad(cfg.sector_deg))
    if cfg.is_2d:
        return (az, tuple(np.deg2rad(cfg.elevation_deg)))
    return az


def fixed_sector_designs(cfg: ScenarioConfig) -> list[FilterDesign]:
    """One fixed-sector design per SNR point, sized for the scenario's gain range."""
    r_min, r_max = cfg.gain_range
    out = []
    for snr in cfg.snr_db:
        ctx = SqnrContext(_rho(snr, cfg), cfg.noise_var, cfg.geometry.n_effective)
        spec = DesignSpec(
            "fixed-sector",
            cfg.order,
            cfg.m_levels,
            ctx,
            sector=_sector_rad(cfg),
            spacing=_geometry_spacing(cfg.geometry),
            r_min=r_min,
            r_max=r_max,
            n_samples=cfg.fs_samples,
        )
        out.append(design(spec).design)
    return out


def closed_form_designs(cfg: ScenarioConfig) -> dict[str, FilterDesign]:
    out = {}
    try:
        if "sd-1st" in cfg.schemes:
            out["sd-1st"] = first_order_2d(cfg.m_levels) if cfg.is_2d else first_order(cfg.m_levels)
        if "sd-2nd" in cfg.schemes:
            out["sd-2nd"] = second_order(cfg.m_levels)
    except InfeasibleAmplitudeError as exc:
        raise ConfigError(str(exc)) from exc
    return out


def _trial_seed(cfg: ScenarioConfig, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=cfg.seed, spawn_key=(trial,))


def _user_targeted(cfg, users, omegas, snr) -> FilterDesign:
    ctx = SqnrContext(_rho(snr, cfg), cfg.noise_var, cfg.geometry.n_effective)
    spec = DesignSpec(
        "user-targeted",
        cfg.ut_order or cfg.order,
        cfg.m_levels,
        ctx,
        omegas=[tuple(w) for w in omegas] if cfg.is_2d else list(omegas),
        gains=[abs(u.gain) for u in users],
    )
    return design(spec).design


def run_trial(cfg: ScenarioConfig, trial: int, fs_designs, fixed: dict) -> dict:
    """Bit-error and overload counts of one trial, per scheme and SNR point."""
    n_snr = len(cfg.snr_db)
    errs = {s: np.zeros(n_snr, np.int64) for s in cfg.schemes}
    ovl = {s: np.zeros(n_snr, np.int64) for s in cfg.schemes}
    geom = cfg.geometry
    shape2d = (geom.n1, geom.n2) if cfg.is_2d else None
    redraws = 0
    with threadpool_limits(limits=1):
        root = _trial_seed(cfg, trial)
        for attempt in range(MAX_REDRAWS):
            ss_users, ss_bits, ss_noise = root.spawn(3) if attempt == 0 else np.random.SeedSequence(
                entropy=cfg.seed, spawn_key=(trial, attempt)
            ).spawn(3)
            users = generate_users(cfg, np.random.default_rng(ss_users))
            omegas = user_omegas(users, geom)
            ut = {}
            if "sd-ut" in cfg.schemes:
                try:
                    ut = {i: _user_targeted(cfg, users, omegas, snr) for i, snr in enumerate(cfg.snr_db)}
                except SolverError as exc:
                    log.warning("trial %d: user-targeted design failed (%s); redrawing", trial, exc)
                    redraws += 1
                    continue
            break
        else:
            raise SolverError(f"trial {trial}: user-targeted design failed {MAX_REDRAWS} times")

        h = channel_matrix(users, geom)
        h_pinv = np.linalg.pinv(h)
        gains = np.array([u.gain for u in users])
        k, t = cfg.n_users, cfg.n_symbols
        bits = np.random.default_rng(ss_bits).integers(0, 2, (k, t, BITS_PER_SYMBOL))
        symbols = qam64_mod(bits)
        noise_rng = np.random.default_rng(ss_noise)
        base = {}
        if "direct" in cfg.schemes:
            base["direct"] = direct_quant_transmit(h_pinv, symbols, cfg.m_levels)
        if "unquant" in cfg.schemes:
            base["unquant"] = unquantized_transmit(h_pinv, symbols, cfg.m_levels)
        for i, snr in enumerate(cfg.snr_db):
            rho = _rho(snr, cfg)
            ctx = SqnrContext(rho, cfg.noise_var, geom.n_effective)
            # shared across schemes at this SNR point
            noise = np.sqrt(cfg.noise_var / 2) * (
                noise_rng.standard_normal((k, t)) + 1j * noise_rng.standard_normal((k, t))
            )
            for s in cfg.schemes:
                if s in base:
                    tx = base[s]
                else:
                    fd = {"sd-fs": fs_designs[i] if fs_designs else None, "sd-ut": ut.get(i)}.get(s) or fixed[s]
                    d = noise_loading(fd, omegas, gains, ctx)
                    tx = sd_transmit(h_pinv, d, symbols, fd, shape2d)
                    ovl[s][i] += tx.overloads
                decided = receive_and_detect(tx.x, h, rho, noise, tx.gain)
                errs[s][i] += int(np.count_nonzero(decided != bits))
    return {"errors": errs, "overloads": ovl, "redraws": redraws}


def _run_trial_star(args):
    return run_trial(*args)


def default_threads() -> int:
    return os.cpu_count() or 1


def run_ber(cfg: ScenarioConfig, threads: int = 1, progress=None) -> BerReport:
    """Monte-Carlo BER; identical output for any ``threads`` value."""
    fixed = closed_form_designs(cfg)
    fs = fixed_sector_designs(cfg) if "sd-fs" in cfg.schemes else None
    n_snr = len(cfg.snr_db)
    errs = {s: np.zeros(n_snr, np.int64) for s in cfg.schemes}
    ovl = {s: np.zeros(n_snr, np.int64) for s in cfg.schemes}
    redraws = 0
    jobs = [(cfg, tr, fs, fixed) for tr in range(cfg.n_trials)]
    if threads > 1 and cfg.n_trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = ex.map(_run_trial_star, jobs, chunksize=max(1, cfg.n_trials // (4 * threads)))
            results = list(results)
    else:
        results = []
        for j in jobs:
            results.append(_run_trial_star(j))
            if progress:
                progress(len(results), cfg.n_trials)
    for r in results:
        for s in cfg.schemes:
            errs[s] += r["errors"][s]
            ovl[s] += r["overloads"][s]
        redraws += r["redraws"]
    total = cfg.n_trials * cfg.n_users * cfg.n_symbols * BITS_PER_SYMBOL
    notes = []
    if any(o.any() for o in ovl.values()):
        notes.append("overload events observed in Sigma-Delta transmission")
    return BerReport(
        config=cfg.to_dict(),
        snr_db=list(cfg.snr_db),
        bit_errors={s: errs[s].tolist() for s in cfg.schemes},
        bits={s: [total] * n_snr for s in cfg.schemes},
        overloads={s: ovl[s].tolist() for s in cfg.schemes},
        redraws=redraws,
        seeds={"master": cfg.seed, "trial_streams": "SeedSequence(seed, spawn_key=(trial,))"},
        notes=notes,
    )
