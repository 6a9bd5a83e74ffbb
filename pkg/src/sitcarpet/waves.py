"""Front tracking, wave-speed estimation, outcome classification, and costs.

A front is the outermost level crossing of the female field (default level
F*/2).  Speeds are trailing least-squares slopes of the front trace with the
initial transient discarded.  Classification probes the final quarter of a
run: for scheduled (moving-release) runs, the interior cone {|x| < c_under t}
must be empty and the exterior cone {|x| > c_over t} must contain
near-equilibrium states (the finite-horizon surrogate of the blocking
statement); unscheduled runs are classified by global decay or by growth of
the above-level region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .equilibria import solve_equilibria
from .solver import Grid, ReleaseSchedule, Scenario, Trajectory, run

DEFAULT_TOL_IN = 1e-3
DEFAULT_TOL_OUT = 1e-2
# A failed blocking run is called Invasion when some interior point has come
# back within this relative distance of the positive equilibrium.  The
# re-grown core is a diffusive dome (it keeps draining into the suppressed
# annulus), so its top settles a few percent below the equilibrium at any
# finite horizon; 0.25 separates that cleanly from a cleared interior, where
# the distance stays ~1.
INVASION_PROXIMITY = 0.25


@dataclass(frozen=True)
class FrontTrace:
    times: np.ndarray
    positions: np.ndarray  # nan where no crossing
    multiple: np.ndarray   # True where several crossings existed

    def valid(self) -> "FrontTrace":
        ok = np.isfinite(self.positions)
        return FrontTrace(self.times[ok], self.positions[ok], self.multiple[ok])


@dataclass(frozen=True)
class SpeedEstimate:
    speed: float
    rms: float
    n_samples: int


@dataclass(frozen=True)
class Outcome:
    kind: str  # "Invasion" | "Extinction" | "Carpet" | "Indeterminate"
    speed: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)


def front_position(f: np.ndarray, grid: Grid, level: float):
    """Outermost crossing of `level`, linearly interpolated between nodes.

    Returns (position, multiple) or (None, False) when the field never
    crosses the level.
    """
    f = np.asarray(f, dtype=float)
    d = f - level
    sign_change = d[:-1] * d[1:] < 0.0
    exact = d == 0.0
    idx = np.flatnonzero(sign_change)
    positions = []
    if idx.size:
        x0 = grid.x[idx]
        frac = d[idx] / (d[idx] - d[idx + 1])
        positions.extend(x0 + frac * grid.dx)
    positions.extend(grid.x[np.flatnonzero(exact)])
    if not positions:
        return None, False
    positions = np.asarray(positions)
    return float(positions.max()), positions.size > 1


def front_trace(traj: Trajectory, level: Optional[float] = None,
                F_star: Optional[float] = None) -> FrontTrace:
    """Trace of the outermost F-front across all snapshots."""
    if level is None:
        if F_star is None:
            eq = solve_equilibria(_scalarized(traj.scenario))
            if eq.upper is None:
                raise ValueError("no equilibrium to set the default level")
            F_star = eq.upper[2]
        level = 0.5 * F_star
    pos = np.full(traj.times.shape, np.nan)
    mult = np.zeros(traj.times.shape, dtype=bool)
    for i in range(traj.times.size):
        p, m = front_position(traj.F[i], traj.grid, level)
        if p is not None:
            pos[i] = p
            mult[i] = m
    return FrontTrace(traj.times.copy(), pos, mult)


def estimate_speed(trace: FrontTrace, window: Optional[float] = None,
                   min_samples: int = 10) -> Optional[SpeedEstimate]:
    """Least-squares slope of position vs time over the trailing window.

    The first 20% of samples are discarded as transient; None when fewer
    than min_samples remain.
    """
    tr = trace.valid()
    n = tr.times.size
    if n == 0:
        return None
    k0 = int(np.ceil(0.2 * n))
    t = tr.times[k0:]
    p = tr.positions[k0:]
    if window is not None and t.size:
        keep = t >= t[-1] - window
        t, p = t[keep], p[keep]
    if t.size < min_samples:
        return None
    A = np.column_stack([t - t.mean(), np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(A, p, rcond=None)
    resid = p - A @ coef
    return SpeedEstimate(float(coef[0]), float(np.sqrt(np.mean(resid**2))),
                         int(t.size))


def _scalarized(scenario: Scenario):
    """Params with heterogeneous K replaced by its max (reference equilibrium)."""
    p = scenario.params
    if callable(p.K):
        from dataclasses import replace
        return replace(p, K=float(np.max(p.K_at(scenario.grid.x))))
    return p


def _relative_fields(traj: Trajectory, i: int, eq) -> tuple[np.ndarray, np.ndarray]:
    """(sup-style size relative to eq, distance to eq relative to eq) at snapshot i."""
    E_star, M_star, F_star = eq
    size = np.maximum.reduce([traj.E[i] / E_star, traj.M[i] / M_star,
                              traj.F[i] / F_star])
    dist = np.maximum.reduce([np.abs(traj.E[i] - E_star) / E_star,
                              np.abs(traj.M[i] - M_star) / M_star,
                              np.abs(traj.F[i] - F_star) / F_star])
    return size, dist


def classify(traj: Trajectory, c: Optional[float] = None,
             probe: Optional[tuple[float, float]] = None,
             level: Optional[float] = None,
             tol_in: float = DEFAULT_TOL_IN, tol_out: float = DEFAULT_TOL_OUT,
             invasion_proximity: float = INVASION_PROXIMITY,
             exterior_check: str = "equilibrium") -> Outcome:
    """Classify a trajectory as Carpet / Extinction / Invasion / Indeterminate.

    Scheduled runs (c from the release schedule unless given): over the final
    quarter of the run, s_in is the worst interior-cone relative sup and
    s_out the worst exterior-cone relative distance to the equilibrium
    (or, with exterior_check="positivity", a positivity floor instead, for
    heterogeneous-K runs).  Carpet needs s_in < tol_in and the exterior
    condition; Extinction needs the global sup < tol_in; Invasion (fallback)
    holds when some interior point has re-approached the equilibrium.

    Unscheduled runs: Extinction by global decay, Invasion when the
    above-level region grows, else Indeterminate.
    """
    sc = traj.scenario
    eqs = solve_equilibria(_scalarized(sc))
    if eqs.upper is None:
        raise ValueError("classification needs a positive equilibrium")
    eq = eqs.upper
    F_star = eq[2]
    if level is None:
        level = 0.5 * F_star
    if c is None:
        c = sc.schedule.speed
    diag: dict = {}

    size_final, _ = _relative_fields(traj, traj.times.size - 1, eq)
    global_sup = float(size_final.max())
    diag["global_relative_sup"] = global_sup

    trace = front_trace(traj, level=level)
    est = estimate_speed(trace)

    if c is None:
        if global_sup < tol_in:
            return Outcome("Extinction", None, diag)
        filled0 = float(np.mean(traj.F[0] > level))
        filled1 = float(np.mean(traj.F[-1] > level))
        diag["filled_fraction_initial"] = filled0
        diag["filled_fraction_final"] = filled1
        if est is not None:
            diag["front_speed"] = est.speed
            diag["front_rms"] = est.rms
        if filled1 > filled0 + 0.05:
            return Outcome("Invasion", est.speed if est else None, diag)
        return Outcome("Indeterminate", est.speed if est else None, diag)

    if probe is None:
        probe = (0.75 * c, 1.25 * c)
    c_under, c_over = probe
    if not c_under < c < c_over:
        raise ValueError("probe speeds must straddle the carpet speed")
    r = traj.grid.radius
    t_final = traj.times[-1]
    if c_over * t_final > float(r.max()):
        diag["domain_too_small"] = True
        return Outcome("Indeterminate", None, diag)

    window = traj.times >= 0.75 * t_final
    idxs = np.flatnonzero(window)
    s_in = 0.0
    s_out = 0.0
    inv_in = np.inf
    for i in idxs:
        size, dist = _relative_fields(traj, i, eq)
        t = traj.times[i]
        inner = r < c_under * t
        outer = r > c_over * t
        if inner.any():
            s_in = max(s_in, float(size[inner].max()))
            inv_in = min(inv_in, float(dist[inner].min()))
        if outer.any():
            if exterior_check == "positivity":
                mins = np.minimum.reduce([traj.E[i] / eq[0], traj.M[i] / eq[1],
                                          traj.F[i] / eq[2]])
                best = float(mins[outer].max())
                diag["exterior_positivity"] = min(
                    diag.get("exterior_positivity", np.inf), best)
            else:
                s_out = max(s_out, float(dist[outer].min()))
    diag["interior_sup"] = s_in
    diag["exterior_mismatch"] = s_out
    diag["interior_best_equilibrium_distance"] = inv_in

    if exterior_check == "positivity":
        exterior_ok = diag.get("exterior_positivity", 0.0) > tol_in
    else:
        exterior_ok = s_out < tol_out
    if s_in < tol_in and exterior_ok:
        speed = est.speed if est is not None else None
        return Outcome("Carpet", speed, diag)
    if global_sup < tol_in:
        return Outcome("Extinction", None, diag)
    if inv_in < invasion_proximity:
        return Outcome("Invasion", est.speed if est else None, diag)
    return Outcome("Indeterminate", est.speed if est else None, diag)


def sterile_cost(schedule: ReleaseSchedule, T: float) -> float:
    """Total sterile males released over [0, T], in closed form.

    Disc: lambda_bar pi ((R2 + cT)^3 - R2^3)/(3c) (the naive strategy).
    Annulus: lambda_bar pi (R2 - R1) ((R1 + R2) T + c T^2).
    Tail adds 2 pi lambda_bar [(R1 T + c T^2/2)/eta - T/eta^2
        + e^{-eta R1}(1 - e^{-eta c T})/(eta^3 c)].
    """
    s = schedule
    if T < 0:
        raise ValueError("T must be >= 0")
    if s.kind == "none" or s.lambda_bar == 0.0 or T == 0.0:
        return 0.0
    if s.kind == "disc":
        if s.c > 0:
            return s.lambda_bar * np.pi * ((s.R2 + s.c * T) ** 3 - s.R2**3) / (3 * s.c)
        return s.lambda_bar * np.pi * s.R2**2 * T
    if s.kind == "fixed_region":
        return s.lambda_bar * np.pi * (s.R2**2 - s.R1**2) * T
    base = s.lambda_bar * np.pi * (s.R2 - s.R1) * ((s.R1 + s.R2) * T + s.c * T**2)
    if s.kind == "annulus":
        return float(base)
    # annulus_tail: integral of the exponential skirt over the inner disc
    eta, c, R1 = s.eta, s.c, s.R1
    if c > 0:
        tail_time = T - np.exp(-eta * R1) * (-np.expm1(-eta * c * T)) / (eta * c)
    else:
        tail_time = T * (1.0 - np.exp(-eta * R1))
    tail = 2.0 * np.pi * s.lambda_bar * (
        (R1 * T + 0.5 * c * T**2) / eta - tail_time / eta**2)
    return float(base + tail)


def cost_exponent(schedule: ReleaseSchedule, T_grid) -> float:
    """Slope of log(total) vs log(T) over a grid of horizons."""
    T_grid = np.asarray(T_grid, dtype=float)
    totals = np.array([sterile_cost(schedule, T) for T in T_grid])
    if np.any(totals <= 0):
        raise ValueError("cost exponent needs positive totals")
    return float(np.polyfit(np.log(T_grid), np.log(totals), 1)[0])


def sterile_cost_report(schedule: ReleaseSchedule, T_grid) -> dict:
    T_grid = list(T_grid)
    return {
        "totals": {T: sterile_cost(schedule, T) for T in T_grid},
        "exponent": cost_exponent(schedule, T_grid),
    }


def speed_monotonicity(scenario_for_gamma, gammas, level: Optional[float] = None):
    """Measured front speeds across a gamma sweep (same scenario otherwise).

    scenario_for_gamma: callable gamma -> Scenario.  Rows are (gamma, speed,
    rms) sorted by gamma; runs whose speed cannot be estimated are flagged
    with None and excluded from the monotonicity verdict.
    """
    rows = []
    for g in sorted(gammas):
        traj = run(scenario_for_gamma(g))
        eq = solve_equilibria(_scalarized(traj.scenario))
        lv = level if level is not None else 0.5 * eq.upper[2]
        est = estimate_speed(front_trace(traj, level=lv))
        rows.append((g, est.speed if est else None, est.rms if est else None))
    speeds = [s for _, s, _ in rows if s is not None]
    nondecreasing = all(b >= a - 1e-9 for a, b in zip(speeds, speeds[1:]))
    return {"rows": rows, "nondecreasing": nondecreasing}
