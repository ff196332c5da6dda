"""Classical lift of the permutation-noise dynamics to weights over S_m.

A state of the form ρ_t = Σ_π p_π(t) U_π ρ_0 U_π^† evolves under L_U exactly
when the weights follow the rate equation

    dp_π/dt = Σ_k α_k (p_{pred_k(π)} - p_π).

Because ``U_k U_σ = U_{σ∘k}`` (see :mod:`qsymm.permutations`), term k moves
weight from σ to σ∘k, so ``pred_k(π) = π∘k⁻¹``. Written with the product
read in representation order (a·b := b∘a) this is the familiar k⁻¹·π.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import config
from .config import Tolerances
from .errors import ConfigError, NormDrift, StepTooLarge
from .dynamics import check_grid, step_count
from .generators import UnitaryNoiseSpec, unitary_generator
from .operators import NetworkLayout
from .permutations import Permutation, all_permutations, compose, conjugate


@lru_cache(maxsize=1024)
def predecessor_map(k: Permutation) -> np.ndarray:
    """Ranks of π∘k⁻¹ for every π, in rank order."""
    kinv = k.inverse()
    out = np.array([compose(p, kinv).rank() for p in all_permutations(k.m)])
    out.setflags(write=False)
    return out


@lru_cache(maxsize=1024)
def successor_map(k: Permutation) -> np.ndarray:
    """Ranks of π∘k for every π (inverse of :func:`predecessor_map`)."""
    out = np.array([compose(p, k).rank() for p in all_permutations(k.m)])
    out.setflags(write=False)
    return out


def delta_identity(m: int) -> np.ndarray:
    p = np.zeros(math.factorial(m))
    p[0] = 1.0  # identity has rank 0
    return p


def uniform(m: int) -> np.ndarray:
    return np.full(math.factorial(m), 1.0 / math.factorial(m))


def check_weights(p, m: int, tol: float = 1e-12) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (math.factorial(m),):
        raise ConfigError(f"weight vector must have length {m}! = {math.factorial(m)}")
    if (p < 0).any() or abs(p.sum() - 1) > tol:
        raise ConfigError("weights must be nonnegative and sum to one")
    return p


def lifted_rhs(spec: UnitaryNoiseSpec, p: np.ndarray, t: float = 0.0) -> np.ndarray:
    out = np.zeros_like(p)
    for term in spec.terms:
        a = term.schedule(t)
        if a:
            out += a * (p[predecessor_map(term.perm)] - p)
    return out


def kl_to_uniform(p) -> float:
    """D(p) = Σ p_π (log p_π + log m!), with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(np.sum(nz * np.log(nz)) + math.log(p.size))


def kl_rate(spec: UnitaryNoiseSpec, p, t: float = 0.0) -> float:
    """-Σ_k α_k K(p || p∘succ_k); returns -inf when a relative entropy diverges."""
    p = np.asarray(p, dtype=float)
    total = 0.0
    pos = p > 0
    for term in spec.terms:
        a = term.schedule(t)
        if not a:
            continue
        q = p[successor_map(term.perm)]
        if np.any(pos & (q <= 0)):
            return -math.inf
        total -= a * float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))))
    return total


@dataclass
class LiftedTrajectory:
    times: np.ndarray
    weights: np.ndarray  # (snapshots, m!)
    D: np.ndarray
    min_p: np.ndarray
    max_p: np.ndarray

    def rows(self):
        for i, t in enumerate(self.times):
            yield {"t": float(t), "D": float(self.D[i]), "min_p": float(self.min_p[i]), "max_p": float(self.max_p[i])}


def evolve_lifted(
    spec: UnitaryNoiseSpec,
    p0=None,
    T: float = 1.0,
    dt: float = 0.01,
    stride: int = 1,
    tol: Tolerances | None = None,
) -> LiftedTrajectory:
    """RK4 on the m!-dimensional rate equation; rates frozen at step midpoints."""
    tol = tol or config.TOL
    m = spec.layout.m
    p = check_weights(delta_identity(m) if p0 is None else p0, m).copy()
    lam = 2 * spec.sup_rate_sum()
    if lam > 0 and dt > tol.stability / lam * (1 + 1e-12):
        raise StepTooLarge(f"dt = {dt} exceeds {tol.stability}/(2 Σ sup α) = {tol.stability / lam:.4g}")
    nsteps = step_count(T, dt)
    check_grid(unitary_generator(spec), T, dt)

    times, snaps = [0.0], [p.copy()]
    for i in range(nsteps):
        tm = i * dt + dt / 2
        k1 = lifted_rhs(spec, p, tm)
        k2 = lifted_rhs(spec, p + 0.5 * dt * k1, tm)
        k3 = lifted_rhs(spec, p + 0.5 * dt * k2, tm)
        k4 = lifted_rhs(spec, p + dt * k3, tm)
        p = p + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(p.sum() - 1)
        if drift > tol.norm_drift:
            raise NormDrift((i + 1) * dt, "weight-sum drift", drift)
        if (i + 1) % stride == 0 or i + 1 == nsteps:
            times.append((i + 1) * dt)
            snaps.append(p.copy())
    w = np.array(snaps)
    return LiftedTrajectory(
        np.array(times), w,
        np.array([kl_to_uniform(x) for x in w]), w.min(axis=1), w.max(axis=1),
    )


def reconstruct_state(p, rho0, layout: NetworkLayout) -> np.ndarray:
    """Σ_π p_π U_π ρ_0 U_π^†."""
    p = check_weights(p, layout.m, tol=1e-9)
    rho0 = np.asarray(rho0, dtype=complex)
    out = np.zeros_like(rho0)
    for w, perm in zip(p, all_permutations(layout.m)):
        if w:
            out += w * conjugate(perm, rho0, layout.n)
    return out


def rate_matrix(spec: UnitaryNoiseSpec, t: float = 0.0) -> np.ndarray:
    """Dense generator A of dp/dt = A p (small m only)."""
    size = math.factorial(spec.layout.m)
    a = np.zeros((size, size))
    for term in spec.terms:
        alpha = term.schedule(t)
        pred = predecessor_map(term.perm)
        a[np.arange(size), pred] += alpha
        a[np.arange(size), np.arange(size)] -= alpha
    return a
