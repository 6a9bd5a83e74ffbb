"""Steady states, bifurcation thresholds, and the traveling-wave potential.

The spatially homogeneous system has the extinction state (0,0,0) and, in the
bistable case for gamma above a critical gamma_c, two positive steady states.
All scalar unknowns here come from monotone equations solved by bisection:

* zeta_c is the root of an increasing-minus-decreasing function built from
  the basic offspring number N;
* the equilibrium F-components reduce, through the substitution
  m = bF / (bF + K(mu_E + nu_E)), to the scalar equation
  N (1 - e^{-m/zeta}) (1 - m) = 1, whose concave left side is maximized at
  m0 with 1 - m0 = zeta (e^{m0/zeta} - 1);
* gamma_0 is where the potential G (integral of the wave's reaction term
  against the worst-case male bound phi) vanishes at the upper equilibrium,
  marking the sign change of the bistable wave speed.

The published threshold values for the Table-1 parameter set correspond to
evaluating the gamma_0 condition with the equilibrium F* frozen at the
current parameter set's equilibrium; `solve_gamma_0` does that by default and
also offers the fully self-consistent variant (re-solving F* for every trial
gamma), which lands lower.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import Bistable, ModelParams, Monostable, StatePoint, gamma_fn, jacobian_ode

BISECT_TOL = 1e-12
DEFAULT_PANELS = 4096
_DEGENERATE_BAND = 1e-10


def bisect(f: Callable[[float], float], lo: float, hi: float,
           tol: float = BISECT_TOL, max_iter: int = 400) -> float:
    """Bisection for f with f(lo) < 0 < f(hi); absolute tolerance on the root."""
    flo = f(lo)
    fhi = f(hi)
    if flo > 0 or fhi < 0:
        raise ValueError(f"bisect: bracket does not straddle a root "
                         f"(f({lo})={flo:g}, f({hi})={fhi:g})")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            return mid
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ThresholdReport:
    n_offspring: float
    zeta: Optional[float]
    zeta_c: Optional[float]
    gamma_c: Optional[float]
    gamma_0: Optional[float]
    regime: str
    natural_extinction: bool


@dataclass(frozen=True)
class EquilibriumSet:
    extinction: StatePoint
    middle: Optional[tuple[float, float, float]]
    upper: Optional[tuple[float, float, float]]
    extinction_stable: bool
    middle_stable: Optional[bool]
    upper_stable: Optional[bool]
    degenerate: bool = False


def offspring_number(params: ModelParams) -> float:
    """Basic offspring number N = b rho nu_E / (mu_F (nu_E + mu_E))."""
    return params.b * params.rho * params.nu_E / (
        params.mu_F * (params.nu_E + params.mu_E))


def zeta_of_gamma(params: ModelParams, gamma: float) -> float:
    """zeta = mu_M / ((1 - rho) nu_E gamma K)."""
    return params.mu_M / ((1.0 - params.rho) * params.nu_E * gamma * params.K_scalar)


def solve_zeta_c(n_offspring: float) -> Optional[float]:
    """Root of (1+sqrt(4 z N + 1))/(2N) = 1 - z ln((2zN+1+sqrt(4zN+1))/(2zN)).

    The left side increases and the right side decreases in z, so the root is
    unique; it exists only for N > 1.
    """
    N = n_offspring
    if N <= 1.0:
        return None

    def h(z: float) -> float:
        s = np.sqrt(4.0 * z * N + 1.0)
        lhs = (1.0 + s) / (2.0 * N)
        rhs = 1.0 - z * np.log((2.0 * z * N + 1.0 + s) / (2.0 * z * N))
        return lhs - rhs

    hi = 1.0
    while h(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("zeta_c bracket search failed")
    return bisect(h, 1e-300, hi)


def phi0(params: ModelParams, F):
    """Slaved male density (1-rho) nu_E b F / (mu_M (bF/K + mu_E + nu_E))."""
    F = np.asarray(F, dtype=float)
    K = params.K_scalar
    out = ((1.0 - params.rho) * params.nu_E * params.b * F
           / (params.mu_M * params.b * F / K
              + params.mu_M * (params.mu_E + params.nu_E)))
    return out if out.ndim else float(out)


def phi(params: ModelParams, F, F_star: float):
    """Worst-case male bound along a nondecreasing female profile.

    phi(F) = (1/(2 mu_M)) * (1-rho) nu_E b F / (bF/K + mu_E + nu_E)
             * (1 - (1 - F/F*)^(2 sqrt(mu_M/mu_F))).

    For 1 - F/F* below 1e-14 (and for F >= F*) the value switches to the
    analytic limit, which equals M*/2 when F* is the upper equilibrium.
    """
    F = np.asarray(F, dtype=float)
    K = params.K_scalar
    base = ((1.0 - params.rho) * params.nu_E * params.b * F
            / (2.0 * params.mu_M * (params.b * F / K + params.mu_E + params.nu_E)))
    rem = 1.0 - F / F_star
    expo = 2.0 * np.sqrt(params.mu_M / params.mu_F)
    safe = np.maximum(rem, 1e-14)
    factor = np.where(rem < 1e-14, 1.0, -np.expm1(expo * np.log(safe)))
    out = base * factor
    return out if out.ndim else float(out)


def phi_s_eps(params: ModelParams, eps: float, F, F_star: float):
    """Sterile-male tail bound eps * (1 - F/F*)^(sqrt(mu_s/mu_F))."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    F = np.asarray(F, dtype=float)
    rem = np.maximum(1.0 - F / F_star, 0.0)
    out = eps * rem ** np.sqrt(params.mu_s / params.mu_F)
    return out if out.ndim else float(out)


def _wave_integrand(params: ModelParams, gamma: Optional[float], F_star: float,
                    u: np.ndarray, eps: Optional[float]) -> np.ndarray:
    """rho nu_E b u/(bu/K + mu_E + nu_E) * w(u) * Gamma(phi(u)) - mu_F u."""
    K = params.K_scalar
    recruit = (params.rho * params.nu_E * params.b * u
               / (params.b * u / K + params.mu_E + params.nu_E))
    ph = phi(params, u, F_star)
    kind = Monostable() if gamma is None else Bistable(gamma)
    gam = gamma_fn(kind, ph)
    if eps is None:
        w = 1.0
    else:
        ps = phi_s_eps(params, eps, u, F_star)
        denom = ph + ps
        w = np.where(denom > 0, ph / np.where(denom > 0, denom, 1.0), 0.0)
    return recruit * w * gam - params.mu_F * u


def _simpson_uniform(y: np.ndarray, h: float) -> float:
    # composite Simpson on an even number of uniform panels
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


def potential_G(params: ModelParams, gamma: Optional[float], F_star: float,
                F: float, eps: Optional[float] = None,
                panels: int = DEFAULT_PANELS) -> float:
    """Potential G(F): integral of the wave reaction term from 0 to F.

    gamma = None evaluates the monostable case (Gamma identically 1); eps, when
    given, weights the integrand by phi/(phi + phi_s^eps), the sterile-tail
    variant.  Composite Simpson with `panels` panels (made even if needed).
    """
    if F < 0 or F > F_star * (1.0 + 1e-12):
        raise ValueError("potential_G requires 0 <= F <= F_star")
    if F == 0.0:
        return 0.0
    panels = max(2, panels + (panels % 2))
    u = np.linspace(0.0, F, panels + 1)
    y = _wave_integrand(params, gamma, F_star, u, eps)
    return float(_simpson_uniform(y, F / panels))


def solve_m0(zeta: float) -> float:
    """Maximizer of N(1-e^{-m/zeta})(1-m): root of 1 - m = zeta(e^{m/zeta}-1)."""
    def h(m: float) -> float:
        return zeta * np.expm1(m / zeta) - (1.0 - m)

    return bisect(h, 1e-300, 1.0 - 1e-16)


def _m_to_F(params: ModelParams, m: float) -> float:
    # bF/K = (mu_E + nu_E) m / (1 - m)
    return params.K_scalar * (params.mu_E + params.nu_E) * m / (params.b * (1.0 - m))


def _equilibrium_from_F(params: ModelParams, F: float) -> tuple[float, float, float]:
    E = params.b * F / (params.b * F / params.K_scalar + params.mu_E + params.nu_E)
    M = (1.0 - params.rho) * params.nu_E * E / params.mu_M
    return E, M, F


def _is_stable(params: ModelParams, E: float, M: float, F: float) -> bool:
    eig = np.linalg.eigvals(jacobian_ode(params, StatePoint(E, M, F, 0.0)))
    return bool(np.max(eig.real) < 0.0)


def solve_equilibria(params: ModelParams) -> EquilibriumSet:
    """All homogeneous steady states with Ms = 0, plus stability flags.

    Monostable: closed form, upper state exists iff N > 1.  Bistable: solve
    the scalar m-equation; 0, 1 (degenerate tangency), or 2 positive roots.
    Stability is classified by the eigenvalues of the analytic Jacobian.
    """
    N = offspring_number(params)
    ext = StatePoint(0.0, 0.0, 0.0, 0.0)
    ext_stable = _is_stable(params, 0.0, 0.0, 0.0)

    if isinstance(params.gamma_kind, Monostable):
        if N <= 1.0:
            return EquilibriumSet(ext, None, None, ext_stable, None, None)
        F_star = params.K_scalar * (params.mu_E + params.nu_E) * (N - 1.0) / params.b
        E_star = params.mu_F * F_star / (params.rho * params.nu_E)
        M_star = (1.0 - params.rho) * params.mu_F * F_star / (params.rho * params.mu_M)
        upper = (E_star, M_star, F_star)
        return EquilibriumSet(ext, None, upper, ext_stable, None,
                              _is_stable(params, *upper))

    zeta = zeta_of_gamma(params, params.gamma_kind.gamma)
    m0 = solve_m0(zeta)

    def varphi(m: float) -> float:
        return N * float(-np.expm1(-m / zeta)) * (1.0 - m)

    peak = varphi(m0)
    if peak < 1.0 - _DEGENERATE_BAND:
        return EquilibriumSet(ext, None, None, ext_stable, None, None)
    degenerate = abs(peak - 1.0) <= _DEGENERATE_BAND
    if degenerate:
        eq = _equilibrium_from_F(params, _m_to_F(params, m0))
        return EquilibriumSet(ext, None, eq, ext_stable, None,
                              _is_stable(params, *eq), degenerate=True)

    m_minus = bisect(lambda m: varphi(m) - 1.0, 1e-300, m0)
    m_plus = bisect(lambda m: 1.0 - varphi(m), m0, 1.0 - 1e-16)
    middle = _equilibrium_from_F(params, _m_to_F(params, m_minus))
    upper = _equilibrium_from_F(params, _m_to_F(params, m_plus))
    return EquilibriumSet(ext, middle, upper, ext_stable,
                          _is_stable(params, *middle), _is_stable(params, *upper))


def solve_gamma_0(params: ModelParams, freeze_equilibrium: bool = True,
                  panels: int = DEFAULT_PANELS) -> Optional[float]:
    """Allee coefficient gamma_0 above which the bistable wave advances.

    Root of G(F*; gamma) = 0 in gamma.  With freeze_equilibrium (default) the
    equilibrium F* is the one of `params` and only the integrand's Gamma
    varies with the trial gamma, matching the published Table-1 values;
    otherwise F*(gamma) is re-solved for every trial gamma.  Returns None when
    the current params admit no positive equilibrium to freeze (then only the
    self-consistent variant is meaningful) or when N <= 1.
    """
    N = offspring_number(params)
    if N <= 1.0:
        return None
    zeta_c = solve_zeta_c(N)
    gamma_c = params.mu_M / ((1.0 - params.rho) * params.nu_E * zeta_c * params.K_scalar)

    if freeze_equilibrium:
        eq = solve_equilibria(params)
        if eq.upper is None:
            return None
        F_star = eq.upper[2]

        def h(g: float) -> float:
            return potential_G(params, g, F_star, F_star, panels=panels)
    else:
        def h(g: float) -> float:
            eq_g = solve_equilibria(params.with_gamma(g))
            if eq_g.upper is None:
                return -1.0
            Fs = eq_g.upper[2]
            return potential_G(params.with_gamma(g), g, Fs, Fs, panels=panels)

    hi = 10.0 * gamma_c
    while h(hi) <= 0:
        hi *= 2.0
        if hi > 1e9:
            return None
    lo = min(gamma_c * (1.0 + 1e-12), hi / 2.0)
    while h(lo) >= 0:
        lo *= 0.5
        if lo < 1e-300:
            return None
    return bisect(h, lo, hi)


def thresholds(params: ModelParams, panels: int = DEFAULT_PANELS) -> ThresholdReport:
    """N, zeta, zeta_c, gamma_c, gamma_0, and the regime classification."""
    N = offspring_number(params)
    natural_extinction = N <= 1.0
    zeta_c = solve_zeta_c(N)
    gamma_c = None
    if zeta_c is not None:
        gamma_c = params.mu_M / (
            (1.0 - params.rho) * params.nu_E * zeta_c * params.K_scalar)

    if isinstance(params.gamma_kind, Monostable):
        return ThresholdReport(N, None, zeta_c, gamma_c, None, "Monostable",
                               natural_extinction)

    gamma = params.gamma_kind.gamma
    zeta = zeta_of_gamma(params, gamma)
    gamma_0 = solve_gamma_0(params, panels=panels)
    if natural_extinction or (gamma_c is not None and gamma <= gamma_c):
        regime = "BistableBelowGammaC"
    elif gamma_0 is not None and gamma > gamma_0:
        regime = "BistableAboveGamma0"
    else:
        regime = "BistableBetweenGammaCAndGamma0"
    return ThresholdReport(N, zeta, zeta_c, gamma_c, gamma_0, regime,
                           natural_extinction)
