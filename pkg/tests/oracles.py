"""Independent reference computations used to cross-check the library.

Nothing here imports the solver or the coefficient expansion under test.
"""
from itertools import combinations

import numpy as np

_GOLD = (np.sqrt(5) - 1) / 2


def esp_coeffs(omegas) -> np.ndarray:
    """g_l as the l-th elementary symmetric sum of beta_k = -e^{j omega_k}, by explicit subsets."""
    beta = -np.exp(1j * np.asarray(omegas, float))
    k = beta.size
    return np.array([sum(np.prod(beta[list(s)]) for s in combinations(range(k), l)) for l in range(1, k + 1)])


def _min_over_xi(z, gammas, lo, hi, iters=100):
    """Golden-section minimum of f(xi) = max_k sqrt(|xi + z_k|^2 + gamma_k xi^2) on [lo, hi], per row."""

    def f(xi):
        return np.sqrt(np.max(np.abs(xi[:, None] + z) ** 2 + gammas * xi[:, None] ** 2, axis=1))

    a, b = lo.copy(), hi.copy()
    for _ in range(iters):
        c, d = b - _GOLD * (b - a), a + _GOLD * (b - a)
        left = f(c) < f(d)
        a, b = np.where(left, a, c), np.where(left, d, b)
    xi = (a + b) / 2
    return f(xi), xi


def grid_search_minmax(omegas, gammas, order_l: int, m_levels: int, n_grid=None, levels=40, shrink=0.5):
    """Brute-force min over (nu, xi) of max_k sqrt(|xi + a_k nu|^2 + gamma_k xi^2), 1 + ||nu||_IQ1 <= M xi.

    ``nu`` is searched on a zooming tensor grid over its 2L real parts; ``xi`` is
    minimised exactly enough per grid point by golden section (the inner problem is
    convex in xi). Requires every gamma_k > 0 so that xi stays bounded.
    """
    w = np.atleast_1d(np.asarray(omegas, float))
    gam = np.atleast_1d(np.asarray(gammas, float))
    assert gam.min() > 0
    S = np.exp(-1j * np.outer(w, np.arange(1, order_l + 1)))
    dim = 2 * order_l
    n_grid = n_grid or {2: 41, 4: 11}.get(dim, 7)
    t_witness = np.sqrt(1 + gam.max()) / m_levels
    radius = m_levels * t_witness / np.sqrt(gam.min())
    centre = np.zeros(dim)
    best = (np.inf, None, None)
    ticks = np.linspace(-1, 1, n_grid)
    for _ in range(levels):
        axes = [centre[i] + radius * ticks for i in range(dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        nu = pts[:, :order_l] + 1j * pts[:, order_l:]
        z = nu @ S.T
        lo = (1 + np.abs(pts).sum(axis=1)) / m_levels
        # f(xi) >= sqrt(gamma_min) xi, so no minimiser lies beyond f(lo) / sqrt(gamma_min)
        f_lo = np.sqrt(np.max(np.abs(lo[:, None] + z) ** 2 + gam * lo[:, None] ** 2, axis=1))
        hi = np.maximum(lo, f_lo / np.sqrt(gam.min()))
        val, xi = _min_over_xi(z, gam, lo, hi)
        i = int(np.argmin(val))
        if val[i] < best[0]:
            best = (float(val[i]), nu[i], float(xi[i]))
        centre = pts[i]
        radius *= shrink
    return best
