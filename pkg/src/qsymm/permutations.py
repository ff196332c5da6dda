"""Subsystem permutations, their unitary representation and the symmetrizer.

Conventions
-----------
* Permutations are stored in 1-based one-line notation, ``image[i-1] = π(i)``.
* Composition is function composition: ``compose(a, b)(i) == a(b(i))``.
* ``U_π`` is defined by ``U_π (X_1 ⊗ … ⊗ X_m) U_π^† = X_{π(1)} ⊗ … ⊗ X_{π(m)}``,
  which makes it act on product kets as ``U_π|x_1…x_m⟩ = |x_{π(1)}…x_{π(m)}⟩``.
  With function composition this representation reverses products:
  ``U_a U_b = U_{compose(b, a)}``.
* Vectors indexed by the whole group use the lexicographic rank of the
  one-line notation (Lehmer code).
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import config
from .errors import BudgetExceeded, DimensionMismatch
from .operators import NetworkLayout, _square


@dataclass(frozen=True, order=True)
class Permutation:
    image: tuple[int, ...]

    def __post_init__(self):
        img = tuple(int(v) for v in self.image)
        if sorted(img) != list(range(1, len(img) + 1)):
            raise ValueError(f"{img} is not a permutation of 1..{len(img)}")
        object.__setattr__(self, "image", img)

    @classmethod
    def identity(cls, m: int) -> "Permutation":
        return cls(tuple(range(1, m + 1)))

    @classmethod
    def transposition(cls, i: int, j: int, m: int) -> "Permutation":
        img = list(range(1, m + 1))
        img[i - 1], img[j - 1] = j, i
        return cls(tuple(img))

    @classmethod
    def from_cycles(cls, m: int, *cycles: Sequence[int]) -> "Permutation":
        img = list(range(1, m + 1))
        for c in cycles:
            for a, b in zip(c, list(c[1:]) + [c[0]]):
                img[a - 1] = b
        return cls(tuple(img))

    @property
    def m(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i - 1]

    def __repr__(self):
        return f"Permutation({list(self.image)})"

    def inverse(self) -> "Permutation":
        inv = [0] * self.m
        for i, v in enumerate(self.image, start=1):
            inv[v - 1] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return self.image == tuple(range(1, self.m + 1))

    def support(self) -> frozenset[int]:
        return frozenset(i for i, v in enumerate(self.image, start=1) if i != v)

    def is_transposition(self) -> bool:
        return len(self.support()) == 2

    def cycles(self) -> list[tuple[int, ...]]:
        seen, out = set(), []
        for start in range(1, self.m + 1):
            if start in seen or self(start) == start:
                continue
            c, i = [], start
            while i not in seen:
                seen.add(i)
                c.append(i)
                i = self(i)
            out.append(tuple(c))
        return out

    def rank(self) -> int:
        return lehmer_rank(self.image)

    def to_json(self) -> list[int]:
        return list(self.image)


def compose(a: Permutation, b: Permutation) -> Permutation:
    """(a ∘ b)(i) = a(b(i))."""
    if a.m != b.m:
        raise DimensionMismatch(f"permutations on {a.m} and {b.m} labels")
    return Permutation(tuple(a.image[v - 1] for v in b.image))


def lehmer_rank(image: Sequence[int]) -> int:
    m = len(image)
    r = 0
    for i in range(m):
        smaller = sum(1 for j in range(i + 1, m) if image[j] < image[i])
        r += smaller * math.factorial(m - 1 - i)
    return r


def lehmer_unrank(r: int, m: int) -> Permutation:
    pool = list(range(1, m + 1))
    img = []
    for i in range(m - 1, -1, -1):
        q, r = divmod(r, math.factorial(i))
        img.append(pool.pop(q))
    return Permutation(tuple(img))


def _check_budget(m: int) -> None:
    cap = config.TOL.max_m
    if m > cap:
        raise BudgetExceeded(f"m = {m} exceeds the m! enumeration cap m <= {cap}")


@lru_cache(maxsize=None)
def all_permutations(m: int) -> tuple[Permutation, ...]:
    """Every permutation of 1..m, ordered by lexicographic rank."""
    _check_budget(m)
    return tuple(Permutation(p) for p in itertools.permutations(range(1, m + 1)))


@dataclass(frozen=True)
class LocalPermutation:
    perm: Permutation
    neighborhoods: tuple[int, ...]  # 0-based indices into layout.neighborhoods


def local_permutations(layout: NetworkLayout, pairwise_only: bool = False) -> list[LocalPermutation]:
    """Non-identity permutations moving only labels inside one neighborhood.

    Each permutation appears once, tagged with every neighborhood that allows
    it. Output is ordered by lexicographic rank.
    """
    found: dict[Permutation, list[int]] = {}
    for j, hood in enumerate(layout.neighborhoods):
        if pairwise_only:
            cands = (Permutation.transposition(a, b, layout.m) for a, b in itertools.combinations(hood, 2))
        else:
            _check_budget(len(hood))
            cands = []
            for arrangement in itertools.permutations(hood):
                img = list(range(1, layout.m + 1))
                for src, dst in zip(hood, arrangement):
                    img[src - 1] = dst
                cands.append(Permutation(tuple(img)))
        for p in cands:
            if not p.is_identity():
                found.setdefault(p, []).append(j)
    return [LocalPermutation(p, tuple(js)) for p, js in sorted(found.items(), key=lambda kv: kv[0].rank())]


@dataclass(frozen=True)
class Closure:
    generates: bool
    closure_size: int


def group_closure(gens: Iterable[Permutation], m: int) -> set[Permutation]:
    _check_budget(m)
    gens = list(gens)
    for g in gens:
        if g.m != m:
            raise DimensionMismatch(f"generator {g} is not on {m} labels")
    e = Permutation.identity(m)
    seen = {e}
    queue = deque([e])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = compose(g, x)
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def generates_full_group(gens: Iterable[Permutation], m: int) -> Closure:
    size = len(group_closure(gens, m))
    return Closure(size == math.factorial(m), size)


# --- unitary representation ----------------------------------------------

@lru_cache(maxsize=None)
def basis_digits(m: int, n: int) -> np.ndarray:
    idx = np.arange(n**m)
    return np.stack([(idx // n ** (m - 1 - k)) % n for k in range(m)], axis=1)


@lru_cache(maxsize=4096)
def index_map(perm: Permutation, n: int) -> np.ndarray:
    """Basis-index map f with U_π|x⟩ = |f(x)⟩ (read-only array)."""
    m = perm.m
    digits = basis_digits(m, n)
    moved = digits[:, [v - 1 for v in perm.image]]
    weights = n ** np.arange(m - 1, -1, -1)
    f = moved @ weights
    f.setflags(write=False)
    return f


def conjugate(perm: Permutation, x: np.ndarray, n: int) -> np.ndarray:
    """U_π X U_π^† by re-indexing rows and columns."""
    f = index_map(perm, n)
    finv = np.empty_like(f)
    finv[f] = np.arange(f.size)
    return x[np.ix_(finv, finv)]


@dataclass(frozen=True, eq=False)
class PermutationUnitary:
    perm: Permutation
    matrix: np.ndarray


def permutation_unitary(perm: Permutation, layout: NetworkLayout) -> PermutationUnitary:
    if perm.m != layout.m:
        raise DimensionMismatch(f"{perm} does not act on m = {layout.m}")
    f = index_map(perm, layout.n)
    u = np.zeros((layout.dim, layout.dim))
    u[f, np.arange(layout.dim)] = 1.0
    u.setflags(write=False)
    return PermutationUnitary(perm, u)


def symmetrize(q, layout: NetworkLayout) -> np.ndarray:
    """Uniform average of U_π Q U_π^† over all m! permutations."""
    q = _square(q, "Q")
    if q.shape[0] != layout.dim:
        raise DimensionMismatch(f"operator dim {q.shape[0]} != n^m = {layout.dim}")
    perms = all_permutations(layout.m)
    acc = np.zeros(q.shape, dtype=np.result_type(q, float))
    for p in perms:
        acc += conjugate(p, q, layout.n)
    return acc / len(perms)
