"""Semi-implicit time stepping on 1D Cartesian and radially symmetric grids.

Diffusion is treated implicitly (one tridiagonal solve per diffusing field
per step, unconditionally stable), reactions explicitly with a step-size
gate dt <= 0.5 / rho_max, rho_max a conservative bound on the reaction
Jacobian spectral radius over the invariant region.  The egg field has no
diffusion and advances by the same explicit step.

The radial Laplacian is u'' + u'/r with the r = 0 node closed by symmetry
(limit 2 u''(0)); boundaries are homogeneous Neumann by default with an
optional Dirichlet clamp at the outer edge for invasion runs.

Under the step-size gate the full update is monotone for the cone order
(E, M, F up, Ms down), which is what the comparison-principle property tests
exercise; it also preserves the invariant region up to roundoff, and any
nodewise undershoot is clamped, counted, and bounded by a hard failure
threshold.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from .equilibria import solve_equilibria
from .model import ModelParams, reaction_arrays, reaction_spectral_bound
from .profiles import slaved_E

CLAMP_COUNT_THRESHOLD = 1e-12
CLAMP_FAIL_THRESHOLD = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    kind: str  # "cartesian1d" | "radial2d"
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        dx = np.diff(x)
        if np.any(dx <= 0) or not np.allclose(dx, dx[0], rtol=1e-12):
            raise ValueError("grid must be uniform and increasing")
        if self.kind == "radial2d" and abs(x[0]) > 1e-14:
            raise ValueError("radial grid must start at r = 0")
        if self.kind not in ("cartesian1d", "radial2d"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        object.__setattr__(self, "x", x)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def radius(self) -> np.ndarray:
        """|x| at the nodes (used by release schedules and probes)."""
        return np.abs(self.x)

    @staticmethod
    def cartesian(x_min: float, x_max: float, n: int) -> "Grid":
        return Grid("cartesian1d", np.linspace(x_min, x_max, n))

    @staticmethod
    def radial(r_max: float, n: int) -> "Grid":
        return Grid("radial2d", np.linspace(0.0, r_max, n))


@dataclass
class SimState:
    t: float
    E: np.ndarray
    M: np.ndarray
    F: np.ndarray
    Ms: np.ndarray

    def copy(self) -> "SimState":
        return SimState(self.t, self.E.copy(), self.M.copy(),
                        self.F.copy(), self.Ms.copy())


@dataclass(frozen=True)
class ReleaseSchedule:
    """Sterile-male release field Lambda(x, t).

    Kinds: "none"; "annulus" (lambda_bar on R1+ct <= |x| <= R2+ct);
    "annulus_tail" (adds lambda_bar e^{eta(|x|-R1-ct)} inside, the
    release-with-tail variant); "disc" (growing disc |x| <= R2+ct, the naive
    strategy); "fixed_region" (static band R1 <= |x| <= R2).
    """

    kind: str = "none"
    lambda_bar: float = 0.0
    R1: float = 0.0
    R2: float = 0.0
    c: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "annulus", "annulus_tail", "disc",
                             "fixed_region"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.lambda_bar < 0:
            raise ValueError("lambda_bar must be >= 0")
        if self.kind in ("annulus", "annulus_tail", "fixed_region"):
            if not 0 < self.R1 < self.R2:
                raise ValueError("annulus needs 0 < R1 < R2")
        if self.kind == "annulus_tail" and not self.eta > 0:
            raise ValueError("tail variant needs eta > 0")

    @property
    def speed(self) -> Optional[float]:
        return self.c if self.kind in ("annulus", "annulus_tail", "disc") else None


def release_value(schedule: ReleaseSchedule, x, t: float):
    """Lambda at |x| (vectorized) and time t."""
    r = np.abs(np.asarray(x, dtype=float))
    s = schedule
    if s.kind == "none" or s.lambda_bar == 0.0:
        out = np.zeros_like(r)
    elif s.kind == "annulus":
        out = s.lambda_bar * ((r >= s.R1 + s.c * t) & (r <= s.R2 + s.c * t))
    elif s.kind == "annulus_tail":
        inner = s.R1 + s.c * t
        out = np.where(
            r < inner,
            s.lambda_bar * np.exp(s.eta * (r - inner)),
            s.lambda_bar * (r <= s.R2 + s.c * t))
    elif s.kind == "disc":
        out = s.lambda_bar * (r <= s.R2 + s.c * t)
    else:  # fixed_region
        out = s.lambda_bar * ((r >= s.R1) & (r <= s.R2))
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class InitialData:
    """Well-prepared initial fields: cleared, pre-dosed center; equilibrium far out.

    F0 = F* (u0 inside R0_0, linear ramp on [R0_0, R0_1], 1 outside); E0 and
    M0 at the slaved quasi-equilibrium values capped by C0 F0 (and K); Ms0
    ramps from lambda_bar/mu_s inside R0_0 to 0 at R0_1.  The "step" kind is
    the 1D invasion setup: equilibrium on one side of x_step, zero beyond.
    """

    kind: str = "well_prepared"
    R0_0: float = 10.0
    R0_1: float = 15.0
    u0: float = 0.0
    C0: Optional[float] = None
    x_step: float = 0.0
    step_side: str = "left"  # equilibrium on x < x_step ("left") or x > x_step

    def __post_init__(self):
        if self.kind not in ("well_prepared", "step", "uniform"):
            raise ValueError(f"unknown initial kind {self.kind!r}")
        if self.kind == "well_prepared":
            if not 0 <= self.u0 < 1:
                raise ValueError("u0 must be in [0, 1)")
            if not 0 < self.R0_0 < self.R0_1:
                raise ValueError("need 0 < R0_0 < R0_1")


def make_initial(params: ModelParams, data: InitialData, grid: Grid,
                 lambda_bar: float = 0.0) -> SimState:
    """Construct fields satisfying the well-prepared bounds nodewise."""
    eq = solve_equilibria(params if not callable(params.K)
                          else replace(params, K=float(np.max(params.K_at(grid.x)))))
    if eq.upper is None:
        raise SolverError("no positive equilibrium for this parameter set")
    E_star, M_star, F_star = eq.upper
    x = grid.x
    r = grid.radius
    K = np.broadcast_to(params.K_at(x), x.shape)

    if data.kind == "step":
        mask = (x < data.x_step) if data.step_side == "left" else (x > data.x_step)
        E0 = np.where(mask, np.minimum(E_star, K), 0.0)
        M0 = np.where(mask, M_star, 0.0)
        F0 = np.where(mask, F_star, 0.0)
        Ms0 = np.zeros_like(x)
        return SimState(0.0, E0, M0, F0, Ms0)
    if data.kind == "uniform":
        return SimState(0.0, np.minimum(E_star, K) * np.ones_like(x),
                        M_star * np.ones_like(x), F_star * np.ones_like(x),
                        np.zeros_like(x))

    C0 = data.C0
    if C0 is None:
        C0 = max(E_star / F_star, M_star / F_star)
    ramp = np.clip((data.R0_1 - r) / (data.R0_1 - data.R0_0), 0.0, 1.0)
    F0 = F_star * (data.u0 * ramp + (1.0 - ramp))
    E0 = np.minimum(np.minimum(slaved_E(params, F0, K=K), C0 * F0), K)
    M0 = np.minimum((1.0 - params.rho) * params.nu_E * E0 / params.mu_M, C0 * F0)
    Ms0 = (lambda_bar / params.mu_s) * ramp

    # self-check of the well-prepared bounds
    tol = 1e-9 * max(F_star, 1.0)
    if np.any(F0 > F_star + tol) or np.any(E0 > np.minimum(K, C0 * F0) + tol) \
            or np.any(M0 > C0 * F0 + tol):
        raise SolverError("constructed initial data violates its bounds")
    inside = r <= data.R0_0
    if lambda_bar > 0 and np.any(Ms0[inside] < lambda_bar / params.mu_s - tol):
        raise SolverError("sterile pre-dose below lambda_bar/mu_s in the core")
    outside = r > data.R0_1
    if np.any(np.abs(F0[outside] - F_star) > tol):
        raise SolverError("far field is not at equilibrium")
    return SimState(0.0, E0, M0, F0, Ms0)


def implicit_diffusion_matrix(grid: Grid, D: float, dt: float,
                              boundary: str = "neumann") -> np.ndarray:
    """(1,1)-banded form of I - dt D L for scipy.linalg.solve_banded."""
    n = grid.n
    dx = grid.dx
    lam = D * dt / dx**2
    ab = np.zeros((3, n))
    ab[1, :] = 1.0 + 2.0 * lam
    ab[0, 1:] = -lam   # superdiagonal, column-indexed
    ab[2, :-1] = -lam  # subdiagonal

    if grid.kind == "radial2d":
        # r = 0: symmetry limit lap u = 2 u''(0) => 4 (u1 - u0)/dx^2
        ab[1, 0] = 1.0 + 4.0 * lam
        ab[0, 1] = -4.0 * lam
        ri = grid.x[1:-1]
        adv = D * dt / (2.0 * ri * dx)
        ab[0, 2:] = -(lam + adv)       # u_{i+1} coefficient
        ab[2, :-2] = -(lam - adv)      # u_{i-1} coefficient
    else:
        # Neumann mirror at the left edge
        ab[1, 0] = 1.0 + 2.0 * lam
        ab[0, 1] = -2.0 * lam

    # outer boundary
    if boundary == "neumann":
        ab[1, -1] = 1.0 + 2.0 * lam
        ab[2, -2] = -2.0 * lam
    elif boundary == "dirichlet":
        ab[1, -1] = 1.0
        ab[2, -2] = 0.0
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    return ab


def reaction_dt_bound(params: ModelParams, F_sup: float = 0.0) -> float:
    """Largest admissible explicit step, 0.5 / rho_max."""
    rho_max = reaction_spectral_bound(params)
    if F_sup > 0.0:
        rho_max = max(rho_max, reaction_spectral_bound(params, F_cap=F_sup))
    return 0.5 / rho_max


@dataclass
class ClampStats:
    count: int = 0
    worst_rel: float = 0.0


def step(state: SimState, params: ModelParams, schedule: ReleaseSchedule,
         dt: float, grid: Grid, ab: Optional[np.ndarray] = None,
         boundary: str = "neumann", K_nodes: Optional[np.ndarray] = None,
         clamps: Optional[ClampStats] = None,
         dt_max: Optional[float] = None) -> SimState:
    """One semi-implicit step; rejects dt above the reaction-stability gate."""
    if dt_max is None:
        dt_max = reaction_dt_bound(params, F_sup=float(np.max(state.F, initial=0.0)))
    if dt > dt_max * (1.0 + 1e-12):
        raise SolverError(f"dt={dt:g} exceeds the reaction-stability bound "
                          f"{dt_max:g}")
    if ab is None:
        ab = implicit_diffusion_matrix(grid, params.D, dt, boundary)
    if K_nodes is None:
        K_nodes = np.broadcast_to(params.K_at(grid.x), grid.x.shape)

    lam = release_value(schedule, grid.radius, state.t)
    fE, fM, fF, fs = reaction_arrays(params, state.E, state.M, state.F,
                                     state.Ms, lam, K_nodes)
    E_new = np.clip(state.E + dt * fE, 0.0, K_nodes)
    eq_scale = max(float(np.max(state.F, initial=0.0)), 1.0)

    def diffuse(u, f, scale):
        rhs = u + dt * f
        if boundary == "dirichlet":
            rhs[-1] = u[-1]
        out = solve_banded((1, 1), ab, rhs, overwrite_ab=False, overwrite_b=True)
        worst = -float(np.min(out, initial=0.0))
        if worst > 0.0:
            rel = worst / scale
            if rel > CLAMP_FAIL_THRESHOLD:
                raise SolverError(f"negative undershoot {worst:g} exceeds "
                                  f"{CLAMP_FAIL_THRESHOLD:g} of scale {scale:g}")
            if clamps is not None and rel > CLAMP_COUNT_THRESHOLD:
                clamps.count += 1
                clamps.worst_rel = max(clamps.worst_rel, rel)
            np.maximum(out, 0.0, out=out)
        return out

    M_new = diffuse(state.M, fM, eq_scale)
    F_new = diffuse(state.F, fF, eq_scale)
    Ms_scale = max(float(np.max(state.Ms, initial=0.0)),
                   schedule.lambda_bar / params.mu_s, 1.0)
    Ms_new = diffuse(state.Ms, fs, Ms_scale)
    return SimState(state.t + dt, E_new, M_new, F_new, Ms_new)


@dataclass(frozen=True)
class Scenario:
    params: ModelParams
    grid: Grid
    schedule: ReleaseSchedule
    initial: InitialData
    t_end: float
    dt: Optional[float] = None  # None: auto from the stability gate
    snapshot_every: int = 100
    boundary: str = "neumann"


@dataclass
class Trajectory:
    scenario: Scenario
    times: np.ndarray
    E: np.ndarray   # (n_snapshots, n_nodes)
    M: np.ndarray
    F: np.ndarray
    Ms: np.ndarray
    clamps: ClampStats
    dt: float

    @property
    def grid(self) -> Grid:
        return self.scenario.grid


def run(scenario: Scenario, state0: Optional[SimState] = None) -> Trajectory:
    """Integrate to t_end, snapshotting every snapshot_every steps.

    Deterministic: no randomness, fixed evaluation order; identical scenarios
    reproduce identical arrays bit for bit.
    """
    sc = scenario
    if state0 is None:
        state0 = make_initial(sc.params, sc.initial, sc.grid,
                              lambda_bar=sc.schedule.lambda_bar)
    dt_max = reaction_dt_bound(sc.params, F_sup=float(np.max(state0.F)))
    dt = sc.dt if sc.dt is not None else dt_max
    if dt > dt_max * (1.0 + 1e-12):
        raise SolverError(f"dt={dt:g} exceeds the stability bound {dt_max:g}")
    n_steps = int(np.ceil(sc.t_end / dt - 1e-12))
    dt = sc.t_end / n_steps  # land exactly on t_end
    ab = implicit_diffusion_matrix(sc.grid, sc.params.D, dt, sc.boundary)
    K_nodes = np.array(np.broadcast_to(sc.params.K_at(sc.grid.x),
                                       sc.grid.x.shape))
    clamps = ClampStats()

    state = state0.copy()
    times = [state.t]
    snaps = [[state.E.copy(), state.M.copy(), state.F.copy(), state.Ms.copy()]]
    for k in range(n_steps):
        state = step(state, sc.params, sc.schedule, dt, sc.grid, ab=ab,
                     boundary=sc.boundary, K_nodes=K_nodes, clamps=clamps,
                     dt_max=dt_max)
        if (k + 1) % sc.snapshot_every == 0 or k == n_steps - 1:
            times.append(state.t)
            snaps.append([state.E.copy(), state.M.copy(), state.F.copy(),
                          state.Ms.copy()])
    arr = np.array(snaps)  # (n_snap, 4, n)
    return Trajectory(sc, np.array(times), arr[:, 0], arr[:, 1], arr[:, 2],
                      arr[:, 3], clamps, dt)


def scenario_digest(scenario: Scenario) -> str:
    """Stable hash of the full scenario definition (for run records)."""
    p = scenario.params
    K_desc = "callable" if callable(p.K) else repr(p.K)
    parts = [
        f"b={p.b!r} nu_E={p.nu_E!r} mu_E={p.mu_E!r} mu_M={p.mu_M!r}",
        f"mu_F={p.mu_F!r} mu_s={p.mu_s!r} rho={p.rho!r} K={K_desc} D={p.D!r}",
        f"gamma={p.gamma!r} gamma_s={p.gamma_s!r}",
        f"grid={scenario.grid.kind} x0={scenario.grid.x[0]!r} "
        f"x1={scenario.grid.x[-1]!r} n={scenario.grid.n}",
        f"schedule={scenario.schedule!r}",
        f"initial={scenario.initial!r}",
        f"t_end={scenario.t_end!r} dt={scenario.dt!r} "
        f"every={scenario.snapshot_every} boundary={scenario.boundary}",
    ]
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]
