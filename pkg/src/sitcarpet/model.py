"""Model parameters, reaction kinetics, cone order, and local Jacobian.

The population model has four compartments on the plane (or the line):
aquatic phase E (no diffusion), fertile males M, fertilized females F, and
released sterile males Ms (the last three diffuse with coefficient D).

    dE/dt            = b F (1 - E/K) - (mu_E + nu_E) E
    dM/dt  - D lap M = (1 - rho) nu_E E - mu_M M
    dF/dt  - D lap F = rho nu_E E * M/(M + gamma_s Ms) * Gamma(M + gamma_s Ms)
                       - mu_F F
    dMs/dt - D lap Ms = Lambda - mu_s Ms

Gamma is the mate-finding factor: identically 1 (monostable kinetics) or
1 - exp(-gamma m) (bistable kinetics, Allee effect).  The mating probability
M/(M + gamma_s Ms) * Gamma(M + gamma_s Ms) is defined as Gamma(0) * 0-limit
value at M = Ms = 0 so the kinetics are total on the invariant region
[0, K] x R^3_+.

Everything here is a pure function of value types; the PDE solver and the
profile builders vectorize over numpy arrays through the same kinetics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Union

import numpy as np


@dataclass(frozen=True)
class Monostable:
    """Gamma identically 1 (no Allee effect)."""


@dataclass(frozen=True)
class Bistable:
    """Gamma(m) = 1 - exp(-gamma m); gamma > 0 has units 1/density."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"bistable gamma must be > 0, got {self.gamma}")


GammaKind = Union[Monostable, Bistable]

# K may be a constant or a function of position (heterogeneous carrying
# capacity; it only enters the E equation, which has no diffusion).
KField = Union[float, Callable[[np.ndarray], np.ndarray]]


class StatePoint(NamedTuple):
    E: float
    M: float
    F: float
    Ms: float


class ReactionRates(NamedTuple):
    fE: float
    fM: float
    fF: float
    fs: float


@dataclass(frozen=True)
class ModelParams:
    """All biological and diffusion constants, plus the Gamma choice.

    Rates are per unit time, K is a density (scalar or function of position),
    D is length^2/time, rho in (0,1) is the sex ratio, gamma_s >= 0 the
    sterile-male competitiveness.
    """

    b: float
    nu_E: float
    mu_E: float
    mu_M: float
    mu_F: float
    mu_s: float
    rho: float
    K: KField
    D: float
    gamma_kind: GammaKind
    gamma_s: float = 1.0

    def __post_init__(self):
        for name in ("b", "nu_E", "mu_E", "mu_M", "mu_F", "mu_s", "D"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be > 0, got {v}")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if not self.gamma_s >= 0:
            raise ValueError(f"gamma_s must be >= 0, got {self.gamma_s}")
        if not callable(self.K) and not self.K > 0:
            raise ValueError(f"K must be > 0, got {self.K}")

    def K_at(self, x) -> np.ndarray:
        """Carrying capacity at position(s) x (scalar K broadcasts)."""
        if callable(self.K):
            K = np.asarray(self.K(np.asarray(x, dtype=float)), dtype=float)
            if np.any(K <= 0):
                raise ValueError("K(x) must be > 0 pointwise")
            return K
        return np.asarray(self.K, dtype=float)

    @property
    def K_scalar(self) -> float:
        if callable(self.K):
            raise ValueError("operation requires a scalar carrying capacity")
        return float(self.K)

    @property
    def gamma(self) -> float | None:
        """Allee coefficient, or None in the monostable case."""
        return self.gamma_kind.gamma if isinstance(self.gamma_kind, Bistable) else None

    def with_gamma(self, gamma: float | None) -> "ModelParams":
        kind: GammaKind = Monostable() if gamma is None else Bistable(gamma)
        return replace(self, gamma_kind=kind)


def gamma_fn(kind: GammaKind, m):
    """Mate-finding factor Gamma evaluated at total male density m >= 0."""
    m = np.asarray(m, dtype=float)
    if np.any(m < 0):
        raise ValueError("gamma_fn requires m >= 0")
    if isinstance(kind, Monostable):
        out = np.ones_like(m)
    else:
        out = -np.expm1(-kind.gamma * m)
    return out if out.ndim else float(out)


def gamma_fn_prime(kind: GammaKind, m):
    """d Gamma / dm (0 for monostable, gamma e^{-gamma m} for bistable)."""
    m = np.asarray(m, dtype=float)
    if isinstance(kind, Monostable):
        out = np.zeros_like(m)
    else:
        out = kind.gamma * np.exp(-kind.gamma * m)
    return out if out.ndim else float(out)


def mating_factor(params: ModelParams, M, Ms):
    """M/(M + gamma_s Ms) * Gamma(M + gamma_s Ms), 0 at M = Ms = 0."""
    M = np.asarray(M, dtype=float)
    Ms = np.asarray(Ms, dtype=float)
    P = M + params.gamma_s * Ms
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(P > 0, M / np.where(P > 0, P, 1.0), 0.0)
    out = frac * gamma_fn(params.gamma_kind, np.maximum(P, 0.0))
    return out if out.ndim else float(out)


def reaction_arrays(params: ModelParams, E, M, F, Ms, lam, K):
    """Vectorized kinetics; K is the (already sampled) carrying capacity."""
    fE = params.b * F * (1.0 - E / K) - (params.mu_E + params.nu_E) * E
    fM = (1.0 - params.rho) * params.nu_E * E - params.mu_M * M
    fF = params.rho * params.nu_E * E * mating_factor(params, M, Ms) - params.mu_F * F
    fs = lam - params.mu_s * Ms
    return fE, fM, fF, fs


def reaction(params: ModelParams, s: StatePoint, lambda_val: float = 0.0,
             x: float = 0.0) -> ReactionRates:
    """Reaction rates at one state point.

    Requires the state to lie in the invariant region and lambda_val >= 0;
    total there (the mating factor is extended by 0 at M = Ms = 0).
    """
    if lambda_val < 0:
        raise ValueError("release rate must be >= 0")
    if min(s.E, s.M, s.F, s.Ms) < 0:
        raise ValueError(f"state outside the invariant region: {s}")
    K = float(params.K_at(x))
    fE, fM, fF, fs = reaction_arrays(params, s.E, s.M, s.F, s.Ms, lambda_val, K)
    return ReactionRates(float(fE), float(fM), float(fF), float(fs))


def cone_leq(u: StatePoint, v: StatePoint, atol: float = 0.0) -> bool:
    """Partial order of the cone R^3_+ x R_-: (E,M,F) componentwise <=, Ms >=."""
    return (u.E <= v.E + atol and u.M <= v.M + atol and u.F <= v.F + atol
            and u.Ms >= v.Ms - atol)


def _mating_and_dM(params: ModelParams, M: float, Ms: float) -> tuple[float, float]:
    """Mating factor g and dg/dM, extended continuously where M + gamma_s Ms = 0.

    Along Ms = 0 the factor reduces to Gamma(M), so the extension at the origin
    is g = Gamma(0), dg/dM = Gamma'(0) (gamma in the bistable case).
    """
    P = M + params.gamma_s * Ms
    kind = params.gamma_kind
    if P <= 0.0:
        return float(gamma_fn(kind, 0.0)), float(gamma_fn_prime(kind, 0.0))
    g = M / P * gamma_fn(kind, P)
    dg = params.gamma_s * Ms / P**2 * gamma_fn(kind, P) + M / P * gamma_fn_prime(kind, P)
    return float(g), float(dg)


def jacobian_ode(params: ModelParams, s: StatePoint, x: float = 0.0) -> np.ndarray:
    """Analytic 3x3 Jacobian of (fE, fM, fF) in (E, M, F), with Ms frozen.

    Sign pattern: d fE/d F >= 0, d fM/d E >= 0, d fF/d E >= 0, d fF/d M >= 0
    on the invariant region, which is what makes the system monotone for the
    cone order.
    """
    K = float(params.K_at(x))
    g, dg = _mating_and_dM(params, s.M, s.Ms)
    ce = params.mu_E + params.nu_E
    return np.array([
        [-params.b * s.F / K - ce, 0.0, params.b * (1.0 - s.E / K)],
        [(1.0 - params.rho) * params.nu_E, -params.mu_M, 0.0],
        [params.rho * params.nu_E * g, params.rho * params.nu_E * s.E * dg, -params.mu_F],
    ])


def reaction_spectral_bound(params: ModelParams, F_cap: float | None = None,
                            E_cap: float | None = None) -> float:
    """Conservative bound on the reaction Jacobian spectral radius.

    Gershgorin row sums with entrywise maxima over the invariant region
    (F capped by the closed-state bound rho nu_E K / mu_F unless the caller
    knows a larger initial sup).  The bistable mating derivative is bounded by
    2 gamma using Gamma(P) <= gamma P and Gamma' <= gamma; the monostable
    factor only damps fF and contributes no growth.
    """
    K = params.K_at(0.0)
    K_max = float(np.max(K)) if np.ndim(K) else float(K)
    if callable(params.K):
        # heterogeneous K: sample a broad window for a sup estimate
        K_max = float(np.max(params.K_at(np.linspace(-1e3, 1e3, 4097))))
    if E_cap is None:
        E_cap = K_max
    if F_cap is None:
        F_cap = params.rho * params.nu_E * K_max / params.mu_F
    dg_cap = 2.0 * params.gamma if isinstance(params.gamma_kind, Bistable) else 0.0
    rows = (
        params.b * F_cap / K_max + params.mu_E + params.nu_E + params.b,
        (1.0 - params.rho) * params.nu_E + params.mu_M,
        params.rho * params.nu_E * (1.0 + E_cap * dg_cap) + params.mu_F,
        params.mu_s,
    )
    return max(rows)
