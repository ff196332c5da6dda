"""Pure-state preparation with one stubborn subsystem.

The permutation noise spreads whatever the stubborn subsystem is pinned to
across the network; the only state fixed by both parts is |ψ⟩⟨ψ|^{⊗m}.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space

from . import config
from .dynamics import Trajectory, evolve
from .errors import ConfigError
from .generators import GeneralLindbladSpec, UnitaryNoiseSpec, build_combined_generator
from .operators import NetworkLayout, product_state
from .permutations import generates_full_group


def build_local_stabilizer(psi) -> GeneralLindbladSpec:
    """Noise operators |ψ⟩⟨e_k| over an orthonormal basis {e_k} of ψ^⊥.

    For ψ = |0⟩ on a qubit this is plain amplitude damping. The target
    |ψ⟩⟨ψ| is the unique invariant state.
    """
    psi = np.asarray(psi, dtype=complex).ravel()
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-12:
        raise ConfigError(f"target vector has norm {norm}, expected 1")
    comp = null_space(psi.conj()[None, :])
    # canonical phase: make the largest entry of each basis vector real positive
    for k in range(comp.shape[1]):
        c = comp[:, k]
        i = int(np.argmax(np.abs(c)))
        comp[:, k] = c * (abs(c[i]) / c[i])
    ops = tuple(np.outer(psi, comp[:, k].conj()) for k in range(comp.shape[1]))
    return GeneralLindbladSpec(None, ops)


def target_state(psi, m: int) -> np.ndarray:
    return product_state([psi] * m)


def fidelity(rho, psi, m: int) -> float:
    """⟨ψ|^{⊗m} ρ |ψ⟩^{⊗m}."""
    v = np.asarray(psi, dtype=complex)
    full = v
    for _ in range(m - 1):
        full = np.kron(full, v)
    return float(np.real(full.conj() @ np.asarray(rho) @ full))


@dataclass
class PreparationResult:
    trajectory: Trajectory
    fidelity: np.ndarray
    generates_full_group: bool


def prepare_network_state(
    layout: NetworkLayout,
    psi,
    j: int,
    u_spec: UnitaryNoiseSpec,
    rho0=None,
    T: float = 100.0,
    dt: float | None = None,
    stride: int = 100,
) -> PreparationResult:
    """Evolve under L_U + ℒ^(j) ⊗ ℐ and record the fidelity with |ψ⟩^{⊗m}.

    ``rho0`` defaults to the maximally mixed state. ``dt`` defaults to the
    largest grid step within the stability bound that divides ``T``.
    """
    closure = generates_full_group(u_spec.perms, layout.m)
    if not closure.generates:
        warnings.warn(
            f"permutation terms generate a subgroup of order {closure.closure_size}; "
            "convergence to the product target is not guaranteed",
            stacklevel=2,
        )
    gen = build_combined_generator(u_spec, build_local_stabilizer(psi), j)
    if rho0 is None:
        rho0 = np.eye(layout.dim, dtype=complex) / layout.dim
    if dt is None:
        dt = default_step(gen.stability_rate(), T)
    traj = evolve(gen, rho0, T, dt, stride=stride)
    fid = np.array([fidelity(r, psi, layout.m) for r in traj.states])
    return PreparationResult(traj, fid, closure.generates)


def default_step(rate: float, T: float, tol=None) -> float:
    """Largest T/N with N integer that respects dt <= stability / rate."""
    tol = tol or config.TOL
    if rate <= 0:
        return T / max(1, int(np.ceil(T / 0.01)))
    steps = int(np.ceil(T * rate / tol.stability))
    return T / steps
