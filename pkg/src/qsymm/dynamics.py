"""Fixed-step RK4 integration of dρ/dt = ℒ(ρ, t) with invariant monitoring."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import config
from .config import Tolerances
from .errors import BudgetExceeded, ConfigError, InvariantBreach, StepTooLarge
from .generators import GeneratorHandle, UnitaryNoiseSpec
from .operators import NetworkLayout, frob, min_eig
from .permutations import conjugate, symmetrize

# relative slack when checking that T and schedule jumps sit on the step grid
_GRID_SLACK = 1e-9


def lyapunov_V(rho, layout: NetworkLayout) -> float:
    """½ Tr((ρ - Ē(ρ))²), the Hilbert-Schmidt distance to consensus."""
    rho = np.asarray(rho)
    d = rho - symmetrize(rho, layout)
    return 0.5 * float(np.real(np.trace(d @ d)))


def lyapunov_V_rate(spec: UnitaryNoiseSpec, rho, t: float = 0.0) -> float:
    """-Σ_k α_k Tr((ρ - U_k ρ U_k^†)²) / 2."""
    rho = np.asarray(rho)
    total = 0.0
    for term in spec.terms:
        a = term.schedule(t)
        if a:
            d = rho - conjugate(term.perm, rho, spec.layout.n)
            total -= a * 0.5 * float(np.real(np.trace(d @ d)))
    return total


def _v_rate_general(gen: GeneratorHandle, rho, t: float) -> float:
    # Tr((ρ - Ēρ)(ℒρ - Ē ℒρ)), valid for any generator
    layout = gen.layout
    drho = gen(rho, t)
    a = rho - symmetrize(rho, layout)
    b = drho - symmetrize(drho, layout)
    return float(np.real(np.trace(a @ b)))


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[np.ndarray]
    trace_dev: np.ndarray
    min_eig: np.ndarray
    V: np.ndarray
    dVdt: np.ndarray
    dist_to_symm: np.ndarray
    converged_time: float | None = None
    target: np.ndarray | None = field(default=None, repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[i], t, rel_tol=1e-9, abs_tol=1e-9):
            raise KeyError(f"no snapshot at t = {t}")
        return self.states[i]

    def rows(self):
        for i, t in enumerate(self.times):
            yield {
                "t": float(t),
                "trace_dev": float(self.trace_dev[i]),
                "min_eig": float(self.min_eig[i]),
                "V": float(self.V[i]),
                "dVdt": float(self.dVdt[i]),
                "dist_to_symm": float(self.dist_to_symm[i]),
            }


def step_count(T: float, dt: float) -> int:
    if T <= 0 or dt <= 0:
        raise ConfigError(f"need T > 0 and dt > 0, got T={T}, dt={dt}")
    n = round(T / dt)
    if n == 0 or abs(n * dt - T) > _GRID_SLACK * max(1.0, T):
        raise ConfigError(f"T = {T} is not a multiple of dt = {dt}")
    return n


def check_step(gen: GeneratorHandle, dt: float, tol: Tolerances | None = None) -> None:
    tol = tol or config.TOL
    lam = gen.stability_rate()
    if lam > 0 and dt > tol.stability / lam * (1 + 1e-12):
        raise StepTooLarge(f"dt = {dt} exceeds the stability bound {tol.stability}/Λ = {tol.stability / lam:.4g}")


def check_grid(gen: GeneratorHandle, T: float, dt: float) -> None:
    for s in gen.jumps(0.0, T):
        k = s / dt
        if abs(k - round(k)) > _GRID_SLACK * max(1.0, k):
            raise ConfigError(f"schedule changes at t = {s}, not on the dt = {dt} step grid")


def evolve(
    gen: GeneratorHandle,
    rho0,
    T: float,
    dt: float,
    stride: int = 1,
    tol: Tolerances | None = None,
    diagnostics: bool = True,
) -> Trajectory:
    """Integrate the master equation from ``rho0`` over ``[0, T]``.

    Schedules are piecewise constant and their jumps must sit on the step
    grid, so each step freezes the rates at its midpoint. Snapshots are
    taken every ``stride`` steps and at ``T``. The run aborts with
    :class:`InvariantBreach` if the trace or positivity drifts past the
    abort thresholds in ``tol``.
    """
    tol = tol or config.TOL
    layout = gen.layout
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (layout.dim, layout.dim):
        raise ConfigError(f"initial state has shape {rho.shape}, expected {(layout.dim,) * 2}")
    check_step(gen, dt, tol)
    nsteps = step_count(T, dt)
    check_grid(gen, T, dt)
    if stride < 1:
        raise ConfigError("stride must be >= 1")

    try:
        target = symmetrize(rho, layout) if diagnostics else None
    except BudgetExceeded:
        target = None
    pure_unitary = gen.general is None and gen.u_spec is not None

    times, states, tdev, meig, vs, dvs, dists = [], [], [], [], [], [], []
    below = 0
    converged = None

    def snapshot(t: float, rho: np.ndarray):
        nonlocal below, converged
        trace_dev = abs(np.trace(rho) - 1)
        lo = min_eig(rho)
        if trace_dev > tol.breach_trace:
            raise InvariantBreach(t, "trace deviation", trace_dev)
        if lo < tol.breach_min_eig:
            raise InvariantBreach(t, "minimum eigenvalue", lo)
        times.append(t)
        states.append(rho.copy())
        tdev.append(trace_dev)
        meig.append(lo)
        if target is None:
            vs.append(math.nan)
            dvs.append(math.nan)
            dists.append(math.nan)
            return
        d = rho - symmetrize(rho, layout)
        vs.append(0.5 * float(np.real(np.vdot(d, d))))
        if pure_unitary:
            dvs.append(lyapunov_V_rate(gen.u_spec, rho, t))
        else:
            dvs.append(_v_rate_general(gen, rho, t))
        dist = frob(rho - target)
        dists.append(dist)
        if converged is None:
            below = below + 1 if dist < tol.conv else 0
            if below == 2:
                converged = times[-2]

    snapshot(0.0, rho)
    for i in range(nsteps):
        t = i * dt
        tm = t + dt / 2
        k1 = gen(rho, tm)
        k2 = gen(rho + 0.5 * dt * k1, tm)
        k3 = gen(rho + 0.5 * dt * k2, tm)
        k4 = gen(rho + dt * k3, tm)
        rho = rho + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        tr = abs(np.trace(rho) - 1)
        if tr > tol.breach_trace:
            raise InvariantBreach((i + 1) * dt, "trace deviation", tr)
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            snapshot((i + 1) * dt, rho)

    return Trajectory(
        np.array(times), states, np.array(tdev), np.array(meig),
        np.array(vs), np.array(dvs), np.array(dists), converged, target,
    )


@dataclass(frozen=True)
class ConnectivityReport:
    passed: bool
    windows_checked: int
    failing_window: tuple[float, float] | None = None
    components: tuple[tuple[int, ...], ...] | None = None


def _components(m: int, edges) -> list[tuple[int, ...]]:
    parent = list(range(m + 1))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: dict[int, list[int]] = {}
    for v in range(1, m + 1):
        groups.setdefault(find(v), []).append(v)
    return sorted(tuple(g) for g in groups.values())


def check_persistent_connectivity(spec: UnitaryNoiseSpec, T: float, alpha_min: float, horizon: float) -> ConnectivityReport:
    """Check that edges with ∫_t^{t+T} α > alpha_min connect the network.

    Window integrals are piecewise linear in t with kinks where t or t + T
    meets a schedule jump, so checking windows starting at 0, at every jump
    s and at every s - T inside ``[0, horizon - T]`` covers every window.
    """
    if not spec.is_pairwise():
        raise ConfigError("connectivity check needs a pairwise-swap spec")
    if T <= 0 or horizon < T:
        raise ConfigError(f"need 0 < T <= horizon, got T={T}, horizon={horizon}")
    last = horizon - T
    starts = {0.0}
    for term in spec.terms:
        for s in term.schedule.jumps(0.0, horizon):
            starts.update(x for x in (s, s - T) if 0.0 <= x <= last)
    starts = sorted(starts)
    m = spec.layout.m
    for t0 in starts:
        weight: dict[tuple[int, int], float] = {}
        for term in spec.terms:
            edge = tuple(sorted(term.perm.support()))
            weight[edge] = weight.get(edge, 0.0) + term.schedule.integral(t0, t0 + T)
        comps = _components(m, [e for e, w in weight.items() if w > alpha_min])
        if len(comps) > 1:
            return ConnectivityReport(False, starts.index(t0) + 1, (t0, t0 + T), tuple(comps))
    return ConnectivityReport(True, len(starts))
