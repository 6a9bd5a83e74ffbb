"""Stationary monotone profiles on a half line: the invading sub-solution.

Two building blocks:

* `halfline_green_solve` solves -u'' + mu u = psi(x) on (0, inf) with u(0) = 0 and
  u bounded, for nondecreasing bounded psi, through the half-line Green
  kernel.  The quadrature uses exponentially weighted cumulative recurrences
  (per-cell Gauss-Legendre), which are stable for arbitrarily large domains.

* `build_stationary_F` integrates the first-order reduction
  F' = sqrt(2 (G(F_m) - G(F))) of the female equation, where G is the wave
  potential from `equilibria.potential_G` and F_m its smallest maximizer; the
  resulting profile rises from 0 to F_m.  `build_stationary_M` then produces
  the companion male profile by the Green solve.

Profiles are built in diffusion-rescaled coordinates y = x / sqrt(D) (the
closed-form identities hold with unit diffusion) and returned on physical
grids.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .equilibria import (
    _wave_integrand,
    potential_G,
    solve_equilibria,
)
from .model import ModelParams

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class MonotoneProfile:
    """A sampled nondecreasing function on [0, x_max] with a limit at infinity."""

    grid: np.ndarray
    values: np.ndarray
    limit: float

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g.size < 2:
            raise ValueError("grid and values must be 1D arrays of equal size >= 2")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        scale = max(abs(self.limit), float(np.max(np.abs(v))), 1e-300)
        if np.any(np.diff(v) < -1e-9 * scale):
            raise ValueError("profile values must be nondecreasing")
        if np.any(v > self.limit * (1.0 + 1e-9) + 1e-12 * scale):
            raise ValueError("profile values must not exceed the limit")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.grid, self.values,
                        left=self.values[0], right=self.limit)
        return out if out.ndim else float(out)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.grid, self.values]),
                   delimiter=",", header="position,value", comments="",
                   fmt="%.17g")


def _cell_exp_integrals(psi: Callable, grid: np.ndarray, s: float):
    """Per-cell integrals of psi against e^{-s (y_right - y)} and e^{-s (y - y_left)}."""
    y0 = grid[:-1]
    y1 = grid[1:]
    h = y1 - y0
    # Gauss-Legendre nodes mapped into each cell, shape (n_cells, 5)
    mid = 0.5 * (y0 + y1)[:, None]
    half = 0.5 * h[:, None]
    nodes = mid + half * _GL_NODES[None, :]
    vals = np.asarray(psi(nodes.ravel()), dtype=float).reshape(nodes.shape)
    w = half * _GL_WEIGHTS[None, :]
    a = np.sum(w * vals * np.exp(-s * (y1[:, None] - nodes)), axis=1)
    bint = np.sum(w * vals * np.exp(-s * (nodes - y0[:, None])), axis=1)
    return a, bint


def halfline_green_solve(mu: float, psi: Callable, x, *, psi_limit: Optional[float] = None,
                 tail_tol: float = 1e-16, min_nodes: int = 2001):
    """Nondecreasing solution of -u'' + mu u = psi on (0, inf), u(0) = 0.

    psi must be a vectorized nonnegative nondecreasing callable with a finite
    limit psi_limit (estimated from the far grid end when omitted); the tail
    integral is truncated where e^{-sqrt(mu) y} drops below tail_tol and
    closed with the constant-psi tail in closed form.  Returns u at x (scalar
    or array).  Raises if psi is detected decreasing on the quadrature grid.
    """
    if not mu > 0:
        raise ValueError("mu must be > 0")
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x_arr < 0):
        raise ValueError("x must be >= 0")
    s = np.sqrt(mu)
    y_trunc = -np.log(tail_tol) / s
    y_max = max(float(x_arr.max()) if x_arr.size else 0.0, y_trunc)
    base = np.linspace(0.0, y_max, max(min_nodes, int(20 * s * y_max) + 2))
    grid = np.unique(np.concatenate([base, x_arr]))

    probe = np.asarray(psi(grid), dtype=float)
    scale = max(float(np.max(np.abs(probe))), 1e-300)
    if np.any(np.diff(probe) < -1e-9 * scale):
        raise ValueError("psi must be nondecreasing")
    if np.any(probe < -1e-12 * scale):
        raise ValueError("psi must be nonnegative")
    if psi_limit is None:
        psi_limit = float(probe[-1])

    a_cells, b_cells = _cell_exp_integrals(psi, grid, s)
    decay = np.exp(-s * np.diff(grid))

    n = grid.size
    A = np.empty(n)
    B = np.empty(n)
    A[0] = 0.0
    for k in range(n - 1):
        A[k + 1] = decay[k] * A[k] + a_cells[k]
    B[-1] = psi_limit / s  # constant-psi closed-form tail
    for k in range(n - 2, -1, -1):
        B[k] = decay[k] * B[k + 1] + b_cells[k]

    u = (A + B - np.exp(-s * grid) * B[0]) / (2.0 * s)
    out = u[np.searchsorted(grid, x_arr)]
    return out if np.ndim(x) else float(out[0])


def halfline_green_lower_bound(mu: float, psi_at_x, x):
    """Pointwise bound psi(x) (1 - e^{-2 sqrt(mu) x}) / (2 mu) <= u(x)."""
    x = np.asarray(x, dtype=float)
    return np.asarray(psi_at_x, dtype=float) * (-np.expm1(-2.0 * np.sqrt(mu) * x)) / (2.0 * mu)


def _cumulative_simpson_uniform(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative integral on a uniform grid, Simpson-accurate at every node.

    Even nodes accumulate standard Simpson panel pairs; odd nodes add the
    integral of the local quadratic through their three surrounding nodes.
    """
    n = y.size
    cum = np.zeros(n)
    if n < 2:
        return cum
    if n == 2:
        cum[1] = 0.5 * h * (y[0] + y[1])
        return cum
    n_pairs = (n - 1) // 2
    pans = h / 3.0 * (y[0:2 * n_pairs - 1:2] + 4.0 * y[1:2 * n_pairs:2]
                      + y[2:2 * n_pairs + 1:2])
    cum[2:2 * n_pairs + 1:2] = np.cumsum(pans)
    # odd node 2k+1 with forward neighbor 2k+2 available
    n_mid = pans.size
    mids = h / 12.0 * (5.0 * y[0:2 * n_mid:2] + 8.0 * y[1:2 * n_mid + 1:2]
                       - y[2:2 * n_mid + 2:2])
    cum[1:2 * n_mid + 1:2] = cum[0:2 * n_mid:2] + mids
    if n % 2 == 0:
        # trailing odd cell: quadratic through the last three nodes
        cum[-1] = cum[-2] + h / 12.0 * (-y[-3] + 8.0 * y[-2] + 5.0 * y[-1])
    return cum


def find_eps0(params: ModelParams, gamma: Optional[float], F_star: float,
              panels: int = 4096, safety: float = 0.5) -> Optional[float]:
    """A sterile-tail amplitude eps with G_eps(F*) > 0, halved for safety.

    Halves eps from 1 until the tail-weighted potential at F* is positive;
    None if even eps = 2^-200 fails (condition violated for the bare G too).
    """
    eps = 1.0
    for _ in range(200):
        if potential_G(params, gamma, F_star, F_star, eps=eps, panels=panels) > 0:
            return eps * safety
        eps *= 0.5
    return None


def _locate_maximizer(pw: ModelParams, gamma, F_star: float, eps,
                      scan_nodes: int = 1 << 14):
    """Smallest maximizer of the potential on [0, F*], or None if G <= 0.

    The maximizer is either F* (integrand still positive there) or a + -> -
    crossing of the integrand, refined by bisection; among tabulated ties the
    first (smallest) wins.
    """
    F_scan = np.linspace(0.0, F_star, scan_nodes + 1)
    integrand = _wave_integrand(pw, gamma, F_star, F_scan, eps)
    G_scan = _cumulative_simpson_uniform(integrand, F_star / scan_nodes)
    i_max = int(np.argmax(G_scan))
    if G_scan[i_max] <= 0.0:
        return None
    if i_max == scan_nodes and integrand[-1] >= 0.0:
        return F_star
    cross = np.flatnonzero((integrand[:-1] > 0.0) & (integrand[1:] <= 0.0))
    if not cross.size:
        return F_scan[i_max]
    k = int(cross[np.argmin(np.abs(cross - i_max))])
    lo, hi = F_scan[k], F_scan[k + 1]
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(_wave_integrand(pw, gamma, F_star, np.array([mid]), eps)[0]) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class _PotentialGap:
    """Machine-accurate H(F) = G(F_m) - G(F) and speed v = sqrt(2 H).

    H is accumulated backward from F_m with per-cell Gauss-Legendre (so the
    small values near the top carry no cancellation), and evaluated between
    nodes by one further local quadrature of the analytic integrand.
    """

    def __init__(self, pw, gamma, F_star, F_m, eps, n_cells: int = 1 << 15):
        self.pw, self.gamma, self.F_star, self.eps = pw, gamma, F_star, eps
        self.F_m = F_m
        self.nodes = np.linspace(0.0, F_m, n_cells + 1)
        mid = 0.5 * (self.nodes[:-1] + self.nodes[1:])[:, None]
        half = 0.5 * np.diff(self.nodes)[:, None]
        pts = mid + half * _GL_NODES[None, :]
        vals = _wave_integrand(pw, gamma, F_star, pts.ravel(), eps).reshape(pts.shape)
        cells = np.sum(half * _GL_WEIGHTS[None, :] * vals, axis=1)
        H = np.zeros(n_cells + 1)
        H[:-1] = np.cumsum(cells[::-1])[::-1]
        self.H_nodes = H

    def H(self, F):
        F = np.asarray(F, dtype=float)
        Fc = np.clip(F, 0.0, self.F_m)
        k = np.minimum(np.searchsorted(self.nodes, Fc, side="left"),
                       self.nodes.size - 1)
        upper = self.nodes[k]
        half = 0.5 * (upper - Fc)
        mid = 0.5 * (upper + Fc)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        vals = _wave_integrand(self.pw, self.gamma, self.F_star,
                               pts.ravel(), self.eps).reshape(pts.shape)
        local = np.sum(half[..., None] * _GL_WEIGHTS * vals, axis=-1)
        return self.H_nodes[k] + local

    def v(self, F):
        return np.sqrt(np.maximum(2.0 * self.H(F), 0.0))


def build_stationary_F(params: ModelParams, gamma: Optional[float] = None,
                       eps: Optional[float] = None, *, dy_out: float = 0.01,
                       approach_tol: float = 1e-10) -> Optional[MonotoneProfile]:
    """Nondecreasing female profile rising from 0 to the potential's maximizer.

    gamma defaults to the params' own Allee coefficient (None = monostable).
    When the potential never becomes positive on (0, F*] there is no profile
    and None is returned (the regime does not support an invading
    sub-solution).  With eps given, the sterile-tail-weighted potential is
    used; the profile then certifies invasion against a small sterile remnant.

    The first-order reduction F' = sqrt(2 (G(F_m) - G(F))) separates: the
    inverse map x(F) is accumulated by per-cell quadrature on an F-grid
    graded toward F_m, then the profile is resampled onto a uniform grid
    (spacing dy_out in diffusion-rescaled units) by Newton inversion, so the
    sampled values solve the profile equation to near machine accuracy.
    """
    if gamma is None and params.gamma is not None:
        gamma = params.gamma
    pw = params.with_gamma(gamma)
    eq = solve_equilibria(pw)
    if eq.upper is None:
        return None
    F_star = eq.upper[2]

    F_m = _locate_maximizer(pw, gamma, F_star, eps)
    if F_m is None:
        return None
    gap = _PotentialGap(pw, gamma, F_star, F_m, eps)
    if gap.H(0.0) <= 0.0:
        return None

    # F-grid graded geometrically toward F_m, where 1/v blows up like
    # 1/(F_m - F); per-cell Gauss-Legendre handles the constant-ratio cells
    delta_geo = 0.05
    F_uniform = np.linspace(0.0, F_m * (1.0 - delta_geo), 4097)
    n_geo = int(np.ceil(np.log(approach_tol / delta_geo) / np.log(0.92)))
    deltas = delta_geo * 0.92 ** np.arange(1, n_geo + 1)
    deltas = np.maximum(deltas, approach_tol)
    F_geo = F_m * (1.0 - deltas)
    F_knots = np.unique(np.concatenate([F_uniform, F_geo]))

    mid = 0.5 * (F_knots[:-1] + F_knots[1:])[:, None]
    half = 0.5 * np.diff(F_knots)[:, None]
    pts = mid + half * _GL_NODES[None, :]
    inv_v = 1.0 / gap.v(pts.ravel()).reshape(pts.shape)
    x_knots = np.concatenate([[0.0],
                              np.cumsum(np.sum(half * _GL_WEIGHTS * inv_v,
                                               axis=1))])

    def x_of_F(F):
        F = np.asarray(F, dtype=float)
        k = np.clip(np.searchsorted(F_knots, F, side="right") - 1, 0,
                    F_knots.size - 2)
        lo = F_knots[k]
        half = 0.5 * (F - lo)
        mid = 0.5 * (F + lo)
        pts = mid[..., None] + half[..., None] * _GL_NODES
        inv = 1.0 / gap.v(pts.reshape(-1)).reshape(pts.shape)
        return x_knots[k] + np.sum(half[..., None] * _GL_WEIGHTS * inv, axis=-1)

    x_max = float(x_knots[-1])
    x_out = np.arange(0.0, x_max, dy_out)
    F_out = np.interp(x_out, x_knots, F_knots)
    # Newton refinement of x(F) = x_target (dx/dF = 1/v)
    for _ in range(4):
        F_out = np.clip(F_out - (x_of_F(F_out) - x_out) * gap.v(F_out),
                        0.0, F_m * (1.0 - approach_tol))
    F_out[0] = 0.0

    x_phys = x_out * np.sqrt(params.D)
    return MonotoneProfile(x_phys, np.minimum.accumulate(F_out[::-1])[::-1],
                           F_m)


def slaved_E(params: ModelParams, F, K=None):
    """Egg density slaved to F: E = bF / (bF/K + mu_E + nu_E).

    K defaults to the scalar carrying capacity; pass the sampled nodewise
    values in the heterogeneous case.
    """
    F = np.asarray(F, dtype=float)
    if K is None:
        K = params.K_scalar
    out = params.b * F / (params.b * F / K + params.mu_E + params.nu_E)
    return out if out.ndim else float(out)


def recruitment_psi(params: ModelParams, F):
    """Male production term (1 - rho) nu_E E(F) along a female profile."""
    return (1.0 - params.rho) * params.nu_E * slaved_E(params, F)


def build_stationary_M(params: ModelParams,
                       F_profile: MonotoneProfile) -> MonotoneProfile:
    """Companion male profile solving -D M'' = (1-rho) nu_E E(F) - mu_M M."""
    sqrt_D = np.sqrt(params.D)
    y_grid = F_profile.grid / sqrt_D

    def psi(y):
        return recruitment_psi(params, F_profile(np.asarray(y) * sqrt_D))

    psi_inf = recruitment_psi(params, F_profile.limit)
    M_vals = halfline_green_solve(params.mu_M, psi, y_grid, psi_limit=psi_inf)
    return MonotoneProfile(F_profile.grid, np.asarray(M_vals),
                           psi_inf / params.mu_M)
