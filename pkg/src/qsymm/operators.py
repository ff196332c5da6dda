"""Dense operator algebra on the network space (C^n)^{⊗m}.

Basis ordering: subsystem 1 is the most significant base-n digit of a basis
index, so an operator on subsystem i sits at position i of a plain kron chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from . import config
from .config import Tolerances
from .errors import (
    DimensionMismatch,
    HermiticityViolation,
    NegativityViolation,
    TraceViolation,
)


@dataclass(frozen=True)
class NetworkLayout:
    """m subsystems of local dimension n, with 1-based neighborhoods."""

    m: int
    n: int = 2
    neighborhoods: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValueError(f"need m >= 2 and n >= 2, got m={self.m}, n={self.n}")
        hoods = tuple(tuple(sorted(set(int(i) for i in h))) for h in self.neighborhoods)
        for h in hoods:
            if not h:
                raise ValueError("empty neighborhood")
            if h[0] < 1 or h[-1] > self.m:
                raise ValueError(f"neighborhood {h} not inside 1..{self.m}")
        object.__setattr__(self, "neighborhoods", hoods)

    @property
    def dim(self) -> int:
        return self.n**self.m

    @classmethod
    def path(cls, m: int, n: int = 2) -> "NetworkLayout":
        return cls(m, n, tuple((i, i + 1) for i in range(1, m)))

    def covers(self) -> bool:
        covered = {i for h in self.neighborhoods for i in h}
        return covered == set(range(1, self.m + 1))

    def to_json(self) -> dict:
        return {"m": self.m, "n": self.n, "neighborhoods": [list(h) for h in self.neighborhoods]}

    @classmethod
    def from_json(cls, d: dict) -> "NetworkLayout":
        return cls(int(d["m"]), int(d.get("n", 2)), tuple(tuple(h) for h in d.get("neighborhoods", ())))


def _square(a: np.ndarray, name: str = "operator") -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    return a


def kron(a, b) -> np.ndarray:
    return np.kron(_square(a, "A"), _square(b, "B"))


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(kron, ops)


def embed_local(x, i: int, layout: NetworkLayout) -> np.ndarray:
    """Return I^{⊗(i-1)} ⊗ x ⊗ I^{⊗(m-i)} for 1-based subsystem index i."""
    x = _square(x, "X")
    if x.shape[0] != layout.n:
        raise DimensionMismatch(f"local operator has dim {x.shape[0]}, layout n = {layout.n}")
    if not 1 <= i <= layout.m:
        raise IndexError(f"subsystem index {i} outside 1..{layout.m}")
    left = np.eye(layout.n ** (i - 1))
    right = np.eye(layout.n ** (layout.m - i))
    return np.kron(np.kron(left, x), right)


def embed_on(x, sites: Sequence[int], layout: NetworkLayout) -> np.ndarray:
    """Embed ``x`` on the listed subsystems.

    The k tensor factors of ``x`` go to ``sites`` in the order given; the
    sites need not be contiguous or sorted. All other factors are identities.
    """
    sites = [int(s) for s in sites]
    if len(set(sites)) != len(sites) or not all(1 <= s <= layout.m for s in sites):
        raise IndexError(f"sites {sites} must be distinct and inside 1..{layout.m}")
    k = len(sites)
    x = _square(x, "X")
    if x.shape[0] != layout.n**k:
        raise DimensionMismatch(f"operator dim {x.shape[0]} != n^{k}")
    n, m = layout.n, layout.m
    rest = [s for s in range(1, m + 1) if s not in sites]
    full = np.kron(x, np.eye(n ** (m - k)))
    # full acts on (sites..., rest...) ordering; permute axes back to 1..m
    order = sites + rest
    perm = [order.index(s) for s in range(1, m + 1)]
    t = full.reshape([n] * (2 * m))
    t = t.transpose(perm + [p + m for p in perm])
    return t.reshape(n**m, n**m)


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt inner product Tr(A^† B)."""
    a, b = _square(a, "A"), _square(b, "B")
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return complex(np.vdot(a, b))


def frob(a) -> float:
    return float(np.linalg.norm(a))


def min_eig(a) -> float:
    a = np.asarray(a)
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2)[0])


def state_diagnostics(rho) -> dict:
    rho = np.asarray(rho)
    return {
        "herm": float(np.abs(rho - rho.conj().T).max()),
        "trace_dev": float(abs(np.trace(rho) - 1)),
        "min_eig": min_eig(rho),
    }


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated state. Construct through :func:`validate_state`."""

    data: np.ndarray

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    @property
    def dim(self) -> int:
        return self.data.shape[0]


def validate_state(rho, layout: NetworkLayout | None = None, tol: Tolerances | None = None) -> DensityMatrix:
    """Check the density-matrix invariants and return a read-only copy.

    Raises the first violated invariant (Hermiticity, then trace, then
    positivity), carrying the measured violation.
    """
    tol = tol or config.TOL
    rho = _square(rho, "rho")
    if layout is not None and rho.shape[0] != layout.dim:
        raise DimensionMismatch(f"state dim {rho.shape[0]} != n^m = {layout.dim}")
    d = state_diagnostics(rho)
    if d["herm"] > tol.herm:
        raise HermiticityViolation(d["herm"])
    if d["trace_dev"] > tol.trace:
        raise TraceViolation(d["trace_dev"])
    if d["min_eig"] < tol.min_eig:
        raise NegativityViolation(-d["min_eig"])
    out = np.array(rho, dtype=complex)
    out.setflags(write=False)
    return DensityMatrix(out)


# --- common constructors -------------------------------------------------

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1
    return v


def basis_state(digits: Sequence[int], n: int = 2) -> np.ndarray:
    """Projector onto the product basis vector with the given digit string."""
    idx = 0
    for d in digits:
        idx = idx * n + int(d)
    dim = n ** len(digits)
    rho = np.zeros((dim, dim), dtype=complex)
    rho[idx, idx] = 1
    return rho


def product_state(vecs: Sequence[np.ndarray]) -> np.ndarray:
    psi = reduce(np.kron, [np.asarray(v, dtype=complex) for v in vecs])
    return np.outer(psi, psi.conj())


def maximally_mixed(layout: NetworkLayout) -> np.ndarray:
    return np.eye(layout.dim, dtype=complex) / layout.dim


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Ginibre-induced random state (Hilbert-Schmidt measure at full rank)."""
    g = rng.standard_normal((dim, rank or dim)) + 1j * rng.standard_normal((dim, rank or dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# --- JSON ---------------------------------------------------------------

def matrix_to_json(a) -> dict:
    a = _square(a)
    flat = np.asarray(a, dtype=complex).ravel()
    return {"dim": int(a.shape[0]), "entries": [[float(z.real), float(z.imag)] for z in flat]}


def matrix_from_json(d: dict) -> np.ndarray:
    dim = int(d["dim"])
    entries = np.asarray(d["entries"], dtype=float)
    if entries.shape != (dim * dim, 2):
        raise DimensionMismatch(f"expected {dim * dim} [re, im] pairs, got shape {entries.shape}")
    return (entries[:, 0] + 1j * entries[:, 1]).reshape(dim, dim)
