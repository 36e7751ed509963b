"""Max-min SQNR modulator design as a second-order cone program.

After the substitution nu = g / A, xi = 1 / A the design becomes

    minimize    t
    subject to  || (w_i (xi + a_i^T nu), sqrt(gamma_i) xi) ||_2 <= t     for every target i
                1 + ||nu||_IQ-1 <= M xi,   xi >= 0

with a_i the row of e^{-j l omega_i} over the free coefficients. The IQ-1 norm is
linearised with one slack per real/imaginary coefficient part. The real decision
vector is laid out as [Re nu, Im nu, xi, t, u_re, u_im].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

from .array import UpaGeometry, spatial_frequency, spatial_frequency_2d
from .designs import SqnrContext
from .sigma_delta import FilterDesign, iq_norm1, shaping_response, shaping_response_2d

log = logging.getLogger(__name__)

RECOVER_TOL = 1e-6
CERTIFY_TOL = 1e-8
DENSE_1D = 4001
DENSE_2D = 101
GRID_2D = 33


class SolverError(RuntimeError):
    pass


@dataclass
class ConicProblem:
    """SOCP data in the form  min c^T x  s.t.  A x + s = b,  s in (R+^n_nonneg x SOC(4)^n_cones)."""

    c: np.ndarray
    A: sparse.csc_matrix
    b: np.ndarray
    n_nonneg: int
    n_cones: int
    steering: np.ndarray  # targets x free coefficients, complex
    weights: np.ndarray
    gammas: np.ndarray
    m_levels: int
    coeff_shape: tuple  # (L,) or (L1+1, L2+1)

    @property
    def n_free(self) -> int:
        return self.steering.shape[1]

    @property
    def n_vars(self) -> int:
        return self.c.size

    def pack(self, nu, xi: float, t: float | None = None) -> np.ndarray:
        """Decision vector for (nu, xi) with the tightest slacks and, if not given, the smallest t."""
        nu = np.asarray(nu, dtype=complex).ravel()
        p = self.n_free
        if t is None:
            t = self.objective(nu, xi)
        x = np.zeros(self.n_vars)
        x[:p], x[p : 2 * p] = nu.real, nu.imag
        x[2 * p], x[2 * p + 1] = xi, t
        x[2 * p + 2 : 3 * p + 2] = np.abs(nu.real)
        x[3 * p + 2 :] = np.abs(nu.imag)
        return x

    def objective(self, nu, xi: float) -> float:
        """max_i sqrt(w_i^2 |xi + a_i^T nu|^2 + gamma_i xi^2)."""
        nu = np.asarray(nu, dtype=complex).ravel()
        r = xi + self.steering @ nu
        return float(np.sqrt(np.max(self.weights**2 * np.abs(r) ** 2 + self.gammas * xi**2)))

    def residual(self, x: np.ndarray) -> float:
        """Largest cone violation of s = b - A x."""
        s = self.b - self.A @ x
        viol = max(0.0, -float(s[: self.n_nonneg].min())) if self.n_nonneg else 0.0
        if self.n_cones:
            soc = s[self.n_nonneg :].reshape(self.n_cones, 4)
            v = np.linalg.norm(soc[:, 1:], axis=1) - soc[:, 0]
            viol = max(viol, float(v.max()))
        return viol


@dataclass
class ConicSolution:
    nu: np.ndarray
    xi: float
    objective: float
    status: str
    kkt_residuals: dict = field(default_factory=dict)
    m_levels: int = 0
    coeff_shape: tuple = ()
    iterations: int = 0


def _assemble(steering, weights, gammas, m_levels: int, coeff_shape) -> ConicProblem:
    if m_levels < 2:
        raise ValueError("m_levels must be >= 2")
    S = np.atleast_2d(np.asarray(steering, dtype=complex))
    k, p = S.shape
    if k < 1:
        raise ValueError("need at least one target")
    w = np.broadcast_to(np.asarray(weights, float), (k,)).copy()
    gam = np.broadcast_to(np.asarray(gammas, float), (k,)).copy()
    if np.any(gam < 0):
        raise ValueError("gammas must be nonnegative")
    n = 4 * p + 2
    i_re, i_im = np.arange(p), np.arange(p, 2 * p)
    i_xi, i_t = 2 * p, 2 * p + 1
    i_ure, i_uim = np.arange(2 * p + 2, 3 * p + 2), np.arange(3 * p + 2, 4 * p + 2)
    eye = sparse.identity(p, format="csr")

    def block(cols_pairs, nrows):
        m = sparse.lil_matrix((nrows, n))
        for cols, mat in cols_pairs:
            m[:, cols] = mat
        return m.tocsr()

    rows = [
        block([(i_re, eye), (i_ure, -eye)], p),  # u_re >= Re nu
        block([(i_re, -eye), (i_ure, -eye)], p),  # u_re >= -Re nu
        block([(i_im, eye), (i_uim, -eye)], p),
        block([(i_im, -eye), (i_uim, -eye)], p),
    ]
    budget = sparse.lil_matrix((2, n))
    budget[0, i_xi] = -m_levels
    budget[0, np.r_[i_ure, i_uim]] = 1.0  # 1 + sum u <= M xi
    budget[1, i_xi] = -1.0  # xi >= 0
    rows.append(budget.tocsr())
    b = [np.zeros(4 * p), np.array([-1.0, 0.0])]

    # each cone: s = (t, w Re(xi + a nu), w Im(xi + a nu), sqrt(gamma) xi)
    cone = np.zeros((k, 4, n))
    cone[:, 0, i_t] = -1.0
    cone[:, 1, i_xi] = -w
    cone[:, 1, i_re] = -w[:, None] * S.real
    cone[:, 1, i_im] = w[:, None] * S.imag
    cone[:, 2, i_re] = -w[:, None] * S.imag
    cone[:, 2, i_im] = -w[:, None] * S.real
    cone[:, 3, i_xi] = -np.sqrt(gam)
    rows.append(sparse.csr_matrix(cone.reshape(4 * k, n)))
    b.append(np.zeros(4 * k))

    c = np.zeros(n)
    c[i_t] = 1.0
    return ConicProblem(
        c=c,
        A=sparse.vstack(rows, format="csc"),
        b=np.concatenate(b),
        n_nonneg=4 * p + 2,
        n_cones=k,
        steering=S,
        weights=w,
        gammas=gam,
        m_levels=int(m_levels),
        coeff_shape=tuple(coeff_shape),
    )


def steering_rows(omegas, order_l: int) -> np.ndarray:
    """Rows (e^{-j omega}, ..., e^{-j L omega}) so that xi + a^T nu = (1 + G(omega)) / A."""
    w = np.atleast_1d(np.asarray(omegas, dtype=float))
    return np.exp(-1j * np.multiply.outer(w, np.arange(1, order_l + 1)))


def _free_index_2d(l1: int, l2: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(l1 + 1) for j in range(l2 + 1) if (i, j) != (0, 0)]


def steering_rows_2d(omega1, omega2, l1: int, l2: int) -> np.ndarray:
    w1 = np.atleast_1d(np.asarray(omega1, float))
    w2 = np.atleast_1d(np.asarray(omega2, float))
    idx = np.array(_free_index_2d(l1, l2))
    return np.exp(-1j * (np.multiply.outer(w1, idx[:, 0]) + np.multiply.outer(w2, idx[:, 1])))


def build_user_targeted(omegas, gammas, order_l: int, m_levels: int) -> ConicProblem:
    omegas = np.atleast_1d(np.asarray(omegas, float))
    gammas = np.atleast_1d(np.asarray(gammas, float))
    if omegas.shape != gammas.shape:
        raise ValueError("omegas and gammas must have the same length")
    if order_l < 1:
        raise ValueError("order must be >= 1")
    return _assemble(steering_rows(omegas, order_l), 1.0, gammas, m_levels, (order_l,))


def default_sector_samples(order_l: int) -> int:
    return max(64, 8 * order_l)


def sector_samples(omega_l: float, omega_u: float, i_samples: int) -> np.ndarray:
    if omega_l > omega_u:
        raise ValueError("sector lower edge exceeds upper edge")
    if i_samples < 1:
        raise ValueError("need at least one sector sample")
    if i_samples == 1:
        return np.array([(omega_l + omega_u) / 2])
    return np.linspace(omega_l, omega_u, i_samples)


def build_fixed_sector(
    omega_l: float,
    omega_u: float,
    i_samples: int | None,
    gamma_sector: float,
    order_l: int,
    m_levels: int,
    gain_ratio: float = 1.0,
) -> ConicProblem:
    """Worst-case sector design.

    ``gamma_sector`` is 3 sigma^2 / (2 N rho r_min^2) and ``gain_ratio`` is r_max / r_min.
    """
    if i_samples is None:
        i_samples = default_sector_samples(order_l)
    w = sector_samples(omega_l, omega_u, i_samples)
    return _assemble(steering_rows(w, order_l), gain_ratio, gamma_sector, m_levels, (order_l,))


def sector_grid_2d(theta_bounds, phi_bounds, geom: UpaGeometry, n_grid: int = GRID_2D):
    """Uniform (theta, phi) grid mapped to distinct (omega1, omega2) pairs."""
    if n_grid < 1:
        raise ValueError("2D sector grid is empty")
    th = np.linspace(*theta_bounds, n_grid) if n_grid > 1 else np.array([np.mean(theta_bounds)])
    ph = np.linspace(*phi_bounds, n_grid) if n_grid > 1 else np.array([np.mean(phi_bounds)])
    T, P = np.meshgrid(th, ph, indexing="ij")
    w1, w2 = spatial_frequency_2d(T.ravel(), P.ravel(), geom)
    pairs = np.unique(np.round(np.column_stack([np.atleast_1d(w1), np.atleast_1d(w2)]), 12), axis=0)
    return pairs[:, 0], pairs[:, 1]


def build_2d(omega1, omega2, gammas, order, m_levels: int, weight: float = 1.0) -> ConicProblem:
    l1, l2 = order
    if l1 < 0 or l2 < 0 or (l1 + 1) * (l2 + 1) < 2:
        raise ValueError("2D order must leave at least one free coefficient")
    w1 = np.atleast_1d(np.asarray(omega1, float))
    if w1.size == 0:
        raise ValueError("2D target grid is empty")
    S = steering_rows_2d(omega1, omega2, l1, l2)
    gammas = np.broadcast_to(np.asarray(gammas, float), (S.shape[0],))
    return _assemble(S, weight, gammas, m_levels, (l1 + 1, l2 + 1))


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "almost-optimal",
    "MaxIterations": "max-iterations",
    "MaxTime": "max-iterations",
}


def solve(p: ConicProblem, tol: float = 1e-10, max_iter: int = 200) -> ConicSolution:
    """Interior-point solve; never raises on non-convergence, the status says so."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.max_threads = 1
    cones = [clarabel.NonnegativeConeT(p.n_nonneg)] + [clarabel.SecondOrderConeT(4)] * p.n_cones
    P = sparse.csc_matrix((p.n_vars, p.n_vars))
    solver = clarabel.DefaultSolver(P, p.c, p.A, p.b, cones, settings)
    res = solver.solve()
    x = np.asarray(res.x, dtype=float)
    k = p.n_free
    status = _STATUS.get(str(res.status).split(".")[-1], "failed")
    nu = x[:k] + 1j * x[k : 2 * k]
    xi = float(x[2 * k])
    pobj, dobj = float(res.obj_val), float(res.obj_val_dual)
    kkt = {
        "primal": p.residual(x),
        "gap_abs": abs(pobj - dobj),
        "gap_rel": abs(pobj - dobj) / max(1.0, abs(pobj)),
        "solver_r_prim": float(res.r_prim),
        "solver_r_dual": float(res.r_dual),
    }
    if status != "optimal":
        certified = max(kkt["primal"], kkt["gap_rel"]) <= CERTIFY_TOL
        log.log(logging.INFO if certified else logging.WARNING, "SOCP solve ended with status %s (%s), residuals %s", status, res.status, kkt)
    return ConicSolution(
        nu=nu,
        xi=xi,
        objective=float(x[2 * k + 1]),
        status=status,
        kkt_residuals=kkt,
        m_levels=p.m_levels,
        coeff_shape=p.coeff_shape,
        iterations=int(res.iterations),
    )


def _embed(nu: np.ndarray, coeff_shape) -> np.ndarray:
    if len(coeff_shape) == 1:
        return np.asarray(nu, complex)
    G = np.zeros(coeff_shape, dtype=complex)
    for val, (i, j) in zip(nu, _free_index_2d(coeff_shape[0] - 1, coeff_shape[1] - 1)):
        G[i, j] = val
    return G


def transform(design: FilterDesign) -> tuple[np.ndarray, float]:
    """(g, A) -> (nu, xi) = (g / A, 1 / A); 2D coefficients are returned as free-entry vectors."""
    g = design.coeffs
    if g.ndim == 2:
        g = np.array([g[i, j] for i, j in _free_index_2d(g.shape[0] - 1, g.shape[1] - 1)])
    return g / design.amplitude, 1.0 / design.amplitude


def recover(sol: ConicSolution, label: str = "") -> FilterDesign:
    """(nu, xi) -> (g, A) = (nu / xi, 1 / xi), checked against A + ||g||_IQ-1 <= M."""
    if not sol.xi > 0:
        raise ArithmeticError(f"xi must be positive to invert the substitution, got {sol.xi!r}")
    g = _embed(np.asarray(sol.nu) / sol.xi, sol.coeff_shape)
    amp = 1.0 / sol.xi
    m = sol.m_levels
    excess = amp + iq_norm1(g) - m
    if excess > RECOVER_TOL:
        raise ArithmeticError(f"recovered design violates the no-overload budget by {excess:.3g}")
    if excess > 0:
        # trim solver-tolerance slack so the runtime guarantee holds exactly
        amp = m - iq_norm1(g)
    return FilterDesign(g, amp, m, label)


@dataclass
class DesignSpec:
    """What to design. Angles are radians, spacings are d / lambda.

    user-targeted: ``omegas`` (floats, or (omega1, omega2) pairs for 2D) and ``gains`` |alpha_i|.
    fixed-sector: ``sector`` = (theta_l, theta_u) or ((theta_l, theta_u), (phi_l, phi_u)),
    ``spacing`` = d/lambda or (d1/lambda, d2/lambda), gain range [r_min, r_max].
    """

    mode: str
    order: int | tuple
    m_levels: int
    ctx: SqnrContext
    omegas: list | None = None
    gains: list | None = None
    sector: tuple | None = None
    spacing: float | tuple = 0.25
    r_min: float = 1.0
    r_max: float = 1.0
    n_samples: int | None = None

    def __post_init__(self):
        if self.mode not in ("user-targeted", "fixed-sector"):
            raise ValueError(f"unknown design mode {self.mode!r}")
        if self.m_levels < 2:
            raise ValueError("m_levels must be >= 2")
        if self.r_min > self.r_max or self.r_min <= 0:
            raise ValueError("need 0 < r_min <= r_max")
        if self.mode == "user-targeted":
            if not self.omegas:
                raise ValueError("user-targeted design needs at least one target")
            if self.gains is None:
                self.gains = [1.0] * len(self.omegas)
            if len(self.gains) != len(self.omegas):
                raise ValueError("gains and omegas lengths differ")
        elif self.sector is None:
            raise ValueError("fixed-sector design needs a sector")

    @property
    def is_2d(self) -> bool:
        return not isinstance(self.order, (int, np.integer))


@dataclass
class DesignReport:
    design: FilterDesign
    solution: ConicSolution
    targets: np.ndarray  # omegas (K,) or (K, 2)
    target_sqnr: np.ndarray
    min_sqnr: float
    worst_rnsr_targets: float
    worst_rnsr_dense: float | None = None

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "objective": self.solution.objective,
            "status": self.solution.status,
            "kkt_residuals": self.solution.kkt_residuals,
            "iterations": self.solution.iterations,
            "min_sqnr": self.min_sqnr,
            "target_sqnr": self.target_sqnr.tolist(),
            "worst_rnsr_targets": self.worst_rnsr_targets,
            "worst_rnsr_dense": self.worst_rnsr_dense,
            "targets": np.asarray(self.targets).tolist(),
        }


def _sqnr_bound(resp_abs2, amp, ctx: SqnrContext, r_lo, r_hi):
    num = ctx.rho * r_lo**2 * amp**2
    den = (2 * ctx.n_effective * ctx.rho * r_hi**2 / 3) * resp_abs2 + ctx.noise_var
    with np.errstate(divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)


def build(spec: DesignSpec) -> tuple[ConicProblem, np.ndarray]:
    """Problem plus the target frequencies it encodes."""
    ctx = spec.ctx
    if spec.mode == "user-targeted":
        gam = ctx.gamma(spec.gains)
        if spec.is_2d:
            w = np.asarray(spec.omegas, float).reshape(-1, 2)
            return build_2d(w[:, 0], w[:, 1], gam, spec.order, spec.m_levels), w
        w = np.asarray(spec.omegas, float)
        return build_user_targeted(w, gam, spec.order, spec.m_levels), w
    gamma = float(ctx.gamma(spec.r_min))
    ratio = spec.r_max / spec.r_min
    if spec.is_2d:
        d1, d2 = spec.spacing
        (tl, tu), (pl, pu) = spec.sector
        geom = UpaGeometry(1, 1, d1, d2)
        w1, w2 = sector_grid_2d((tl, tu), (pl, pu), geom, spec.n_samples or GRID_2D)
        return build_2d(w1, w2, gamma, spec.order, spec.m_levels, ratio), np.column_stack([w1, w2])
    tl, tu = spec.sector
    wl, wu = spatial_frequency(tl, spec.spacing), spatial_frequency(tu, spec.spacing)
    n = spec.n_samples or default_sector_samples(spec.order)
    p = build_fixed_sector(wl, wu, n, gamma, spec.order, spec.m_levels, ratio)
    return p, sector_samples(wl, wu, n)


def design(spec: DesignSpec, tol: float = 1e-10) -> DesignReport:
    """Build, solve and invert; report the achieved worst SQNR and worst RNSR."""
    problem, targets = build(spec)
    sol = solve(problem, tol)
    if sol.status not in ("optimal", "almost-optimal"):
        raise SolverError(f"SOCP did not converge: status={sol.status}, residuals={sol.kkt_residuals}")
    label = f"{spec.mode}{'-2d' if spec.is_2d else ''}"
    fd = recover(sol, label)
    amp2 = fd.amplitude**2
    if spec.is_2d:
        resp2 = np.abs(shaping_response_2d(fd, targets[:, 0], targets[:, 1])) ** 2
    else:
        resp2 = np.abs(shaping_response(fd, targets)) ** 2
    if spec.mode == "user-targeted":
        g = np.asarray(spec.gains, float)
        sq = _sqnr_bound(resp2, fd.amplitude, spec.ctx, g, g)
    else:
        sq = _sqnr_bound(resp2, fd.amplitude, spec.ctx, spec.r_min, spec.r_max)
    dense = None
    if spec.mode == "fixed-sector":
        dense = worst_sector_rnsr(fd, spec.sector, spec.spacing)
    return DesignReport(
        design=fd,
        solution=sol,
        targets=targets,
        target_sqnr=np.atleast_1d(sq),
        min_sqnr=float(np.min(sq)),
        worst_rnsr_targets=float(np.max(resp2) / amp2),
        worst_rnsr_dense=dense,
    )


def worst_sector_rnsr(fd: FilterDesign, sector, spacing) -> float:
    """Maximum RNSR over a dense uniform grid covering the sector."""
    if fd.kind == "1d":
        tl, tu = sector
        w = np.linspace(spatial_frequency(tl, spacing), spatial_frequency(tu, spacing), DENSE_1D)
        return float(np.max(np.abs(shaping_response(fd, w)) ** 2) / fd.amplitude**2)
    (tl, tu), (pl, pu) = sector
    d1, d2 = spacing
    th, ph = np.meshgrid(np.linspace(tl, tu, DENSE_2D), np.linspace(pl, pu, DENSE_2D), indexing="ij")
    w1, w2 = spatial_frequency_2d(th, ph, UpaGeometry(1, 1, d1, d2))
    return float(np.max(np.abs(shaping_response_2d(fd, w1, w2)) ** 2) / fd.amplitude**2)
