"""Lindblad generators built from subsystem permutations and local noise.

The permutation-noise generator is applied as a map,
``L_U(X) = Σ_k α_k(t) (U_k X U_k^† - X)``, by re-indexing X; no
superoperator is ever formed except through :func:`superoperator`, which is
meant for small spectral checks.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import config
from .errors import ConfigError, DimensionMismatch
from .operators import NetworkLayout, _square, embed_local, embed_on, random_unitary
from .permutations import Permutation, conjugate, index_map, local_permutations


@dataclass(frozen=True)
class WeightSchedule:
    """Piecewise-constant, right-continuous nonnegative rate.

    ``values[0]`` holds before ``breakpoints[0]``, ``values[i]`` on
    ``[breakpoints[i-1], breakpoints[i])`` and ``values[-1]`` afterwards.
    With ``period`` set the pattern on ``[0, period)`` repeats; breakpoints
    must then lie strictly inside ``(0, period)``.
    """

    breakpoints: tuple[float, ...] = ()
    values: tuple[float, ...] = (1.0,)
    period: float | None = None

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bp) + 1:
            raise ConfigError(f"need len(values) == len(breakpoints) + 1, got {len(vals)} and {len(bp)}")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ConfigError(f"breakpoints must be strictly ascending: {bp}")
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ConfigError(f"rates must be finite and nonnegative: {vals}")
        if self.period is not None:
            if self.period <= 0:
                raise ConfigError("period must be positive")
            if bp and (bp[0] <= 0 or bp[-1] >= self.period):
                raise ConfigError("periodic breakpoints must lie inside (0, period)")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, rate: float) -> "WeightSchedule":
        return cls((), (rate,))

    def __call__(self, t: float) -> float:
        if self.period is not None:
            t = t % self.period
        return self.values[bisect.bisect_right(self.breakpoints, t)]

    @property
    def sup(self) -> float:
        return max(self.values)

    def _cumulative_flat(self, t: float) -> float:
        # ∫_0^t, no periodic wrap
        pts = [0.0] + [b for b in self.breakpoints if 0.0 < b < t] + [t]
        return sum(self(a) * (b - a) for a, b in zip(pts, pts[1:]))

    def cumulative(self, t: float) -> float:
        """Exact ∫_0^t of the rate, for t >= 0."""
        if self.period is None:
            return self._cumulative_flat(t)
        q, r = divmod(t, self.period)
        return q * self._cumulative_flat(self.period) + self._cumulative_flat(r)

    def integral(self, a: float, b: float) -> float:
        return self.cumulative(b) - self.cumulative(a)

    def jumps(self, a: float, b: float) -> list[float]:
        """Times in [a, b] where the rate may change."""
        if self.period is None:
            return [t for t in self.breakpoints if a <= t <= b]
        base = [0.0, *self.breakpoints]
        out = []
        k = math.floor(a / self.period)
        while k * self.period <= b:
            out.extend(k * self.period + s for s in base if a <= k * self.period + s <= b)
            k += 1
        return out

    def to_json(self) -> dict:
        d = {"breakpoints": list(self.breakpoints), "values": list(self.values)}
        if self.period is not None:
            d["period"] = self.period
        return d

    @classmethod
    def from_json(cls, d: dict) -> "WeightSchedule":
        return cls(tuple(d.get("breakpoints", ())), tuple(d["values"]), d.get("period"))


@dataclass(frozen=True)
class UnitaryTerm:
    perm: Permutation
    schedule: WeightSchedule = field(default_factory=lambda: WeightSchedule.constant(1.0))
    neighborhood: int | None = None  # 0-based index into layout.neighborhoods


@dataclass(frozen=True)
class UnitaryNoiseSpec:
    """Weighted permutation-noise terms on a layout.

    With ``strict`` (the default) every permutation must be local for its
    declared neighborhood, or for some neighborhood when none is declared.
    """

    layout: NetworkLayout
    terms: tuple[UnitaryTerm, ...] = ()
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if t.perm.m != self.layout.m:
                raise DimensionMismatch(f"{t.perm} does not act on m = {self.layout.m}")
        if self.strict:
            for t in self.terms:
                if not _term_is_local(t, self.layout):
                    raise ConfigError(f"{t.perm} is not allowed by neighborhood {t.neighborhood}")

    @classmethod
    def pairwise(cls, layout: NetworkLayout, rate: float = 1.0) -> "UnitaryNoiseSpec":
        """One transposition per allowed pair, all at a constant rate."""
        terms = [
            UnitaryTerm(lp.perm, WeightSchedule.constant(rate), lp.neighborhoods[0])
            for lp in local_permutations(layout, pairwise_only=True)
        ]
        return cls(layout, tuple(terms))

    @property
    def perms(self) -> list[Permutation]:
        return [t.perm for t in self.terms]

    def rates(self, t: float) -> list[float]:
        return [term.schedule(t) for term in self.terms]

    def sup_rate_sum(self) -> float:
        return sum(t.schedule.sup for t in self.terms)

    def is_pairwise(self) -> bool:
        return all(t.perm.is_transposition() for t in self.terms)

    def to_json(self) -> dict:
        return {
            "layout": self.layout.to_json(),
            "terms": [
                {"perm": t.perm.to_json(), "schedule": t.schedule.to_json(), "neighborhood": t.neighborhood}
                for t in self.terms
            ],
        }

    @classmethod
    def from_json(cls, d: dict, layout: NetworkLayout | None = None) -> "UnitaryNoiseSpec":
        layout = layout or NetworkLayout.from_json(d["layout"])
        terms = tuple(
            UnitaryTerm(
                Permutation(tuple(t["perm"])),
                WeightSchedule.from_json(t.get("schedule", {"values": [1.0]})),
                t.get("neighborhood"),
            )
            for t in d.get("terms", [])
        )
        return cls(layout, terms)


def _term_is_local(term: UnitaryTerm, layout: NetworkLayout) -> bool:
    supp = term.perm.support()
    if term.neighborhood is not None:
        if not 0 <= term.neighborhood < len(layout.neighborhoods):
            return False
        return supp <= set(layout.neighborhoods[term.neighborhood])
    return any(supp <= set(h) for h in layout.neighborhoods)


@dataclass(frozen=True, eq=False)
class GeneralLindbladSpec:
    """Hamiltonian plus noise operators; ``locality`` tags are optional.

    A tag is either an int (0-based neighborhood index of a layout) or an
    explicit tuple of 1-based sites. ``locality[k]`` belongs to
    ``noise_ops[k]``; ``hamiltonian_locality`` to H.
    """

    H: np.ndarray | None = None
    noise_ops: tuple[np.ndarray, ...] = ()
    locality: tuple | None = None
    hamiltonian_locality: object = None

    def __post_init__(self):
        ops = tuple(np.asarray(_square(op, "L"), dtype=complex) for op in self.noise_ops)
        object.__setattr__(self, "noise_ops", ops)
        if self.H is not None:
            h = np.asarray(_square(self.H, "H"), dtype=complex)
            if np.abs(h - h.conj().T).max() > config.TOL.herm:
                raise ConfigError("Hamiltonian is not Hermitian")
            object.__setattr__(self, "H", h)
        dims = {op.shape[0] for op in ops} | ({self.H.shape[0]} if self.H is not None else set())
        if len(dims) > 1:
            raise DimensionMismatch(f"inconsistent operator dims {sorted(dims)}")
        if self.locality is not None and len(self.locality) != len(ops):
            raise ConfigError("one locality tag per noise operator")

    @property
    def dim(self) -> int | None:
        if self.H is not None:
            return self.H.shape[0]
        return self.noise_ops[0].shape[0] if self.noise_ops else None

    def is_empty(self) -> bool:
        return self.H is None and not self.noise_ops

    def embedded(self, j: int, layout: NetworkLayout) -> "GeneralLindbladSpec":
        """Lift a single-subsystem spec to subsystem j of the network."""
        if self.dim not in (None, layout.n):
            raise DimensionMismatch(f"local operators have dim {self.dim}, expected n = {layout.n}")
        h = None if self.H is None else embed_local(self.H, j, layout)
        ops = tuple(embed_local(op, j, layout) for op in self.noise_ops)
        return GeneralLindbladSpec(h, ops, tuple((j,) for _ in ops), (j,) if h is not None else None)

    def stability_rate(self) -> float:
        h = 0.0 if self.H is None else np.linalg.norm(self.H, 2)
        return 2 * h + sum(np.linalg.norm(op, 2) ** 2 for op in self.noise_ops)


def apply_unitary_generator(spec: UnitaryNoiseSpec, x, t: float = 0.0) -> np.ndarray:
    x = _square(x, "X")
    if x.shape[0] != spec.layout.dim:
        raise DimensionMismatch(f"operator dim {x.shape[0]} != n^m = {spec.layout.dim}")
    out = np.zeros(x.shape, dtype=np.result_type(x, float))
    n = spec.layout.n
    for term in spec.terms:
        a = term.schedule(t)
        if a:
            out += a * (conjugate(term.perm, x, n) - x)
    return out


def apply_general_generator(spec: GeneralLindbladSpec, rho) -> np.ndarray:
    rho = _square(rho, "rho")
    if spec.dim is not None and rho.shape[0] != spec.dim:
        raise DimensionMismatch(f"state dim {rho.shape[0]} != generator dim {spec.dim}")
    out = np.zeros(rho.shape, dtype=complex)
    if spec.H is not None:
        out += -1j * (spec.H @ rho - rho @ spec.H)
    for op in spec.noise_ops:
        ld = op.conj().T
        ldl = ld @ op
        out += op @ rho @ ld - 0.5 * (ldl @ rho + rho @ ldl)
    return out


@dataclass(frozen=True)
class LocalityReport:
    term: int
    kind: str  # "permutation" | "noise" | "hamiltonian"
    sites: tuple[int, ...] | None
    passed: bool
    residual: float


def _resolve_sites(tag, layout: NetworkLayout) -> tuple[int, ...] | None:
    if tag is None:
        return None
    if isinstance(tag, (int, np.integer)):
        return layout.neighborhoods[int(tag)] if 0 <= tag < len(layout.neighborhoods) else None
    return tuple(sorted(int(s) for s in tag))


def _locality_residual(op: np.ndarray, sites, layout: NetworkLayout, rng, trials: int) -> float:
    outside = [s for s in range(1, layout.m + 1) if s not in sites]
    if not outside:
        return 0.0
    worst = 0.0
    for _ in range(trials):
        w = embed_on(random_unitary(layout.n ** len(outside), rng), outside, layout)
        worst = max(worst, float(np.linalg.norm(w @ op @ w.conj().T - op)))
    return worst


def validate_quasi_local(spec, layout: NetworkLayout | None = None, seed: int = 0, trials: int = 2) -> list[LocalityReport]:
    """Check that every term acts as the identity off its declared neighborhood.

    Each term is conjugated by Haar-random unitaries supported on the
    complement of its neighborhood; a term passes if it is left unchanged.
    Untagged terms fail.
    """
    rng = np.random.default_rng(seed)
    reports = []
    if isinstance(spec, UnitaryNoiseSpec):
        layout = spec.layout
        for k, term in enumerate(spec.terms):
            sites = _resolve_sites(term.neighborhood, layout)
            if sites is None:
                reports.append(LocalityReport(k, "permutation", None, False, math.inf))
                continue
            u = np.zeros((layout.dim, layout.dim))
            u[index_map(term.perm, layout.n), np.arange(layout.dim)] = 1
            r = _locality_residual(u, sites, layout, rng, trials)
            reports.append(LocalityReport(k, "permutation", sites, r <= config.TOL.locality, r))
        return reports

    if layout is None:
        raise ConfigError("a layout is required to check a general Lindblad spec")
    tags = spec.locality or (None,) * len(spec.noise_ops)
    items = [("noise", op, tag) for op, tag in zip(spec.noise_ops, tags)]
    if spec.H is not None:
        items.append(("hamiltonian", spec.H, spec.hamiltonian_locality))
    for k, (kind, op, tag) in enumerate(items):
        sites = _resolve_sites(tag, layout)
        if sites is None:
            reports.append(LocalityReport(k, kind, None, False, math.inf))
            continue
        r = _locality_residual(op, sites, layout, rng, trials)
        reports.append(LocalityReport(k, kind, sites, r <= config.TOL.locality, r))
    return reports


def commutant_residual(spec: UnitaryNoiseSpec, x) -> float:
    """max_k ||X U_k - U_k X||_F over the spec's permutation unitaries."""
    x = _square(x, "X")
    if x.shape[0] != spec.layout.dim:
        raise DimensionMismatch(f"operator dim {x.shape[0]} != n^m = {spec.layout.dim}")
    worst = 0.0
    for term in spec.terms:
        f = index_map(term.perm, spec.layout.n)
        finv = np.empty_like(f)
        finv[f] = np.arange(f.size)
        xu = x[:, f]
        ux = x[finv, :]
        worst = max(worst, float(np.linalg.norm(xu - ux)))
    return worst


class GeneratorHandle:
    """ℒ(ρ, t) = L_U(ρ, t) + general Lindblad part, on one layout.

    Immutable after construction; evaluation is pure.
    """

    def __init__(
        self,
        layout: NetworkLayout,
        u_spec: UnitaryNoiseSpec | None = None,
        general: GeneralLindbladSpec | None = None,
    ):
        if u_spec is not None and u_spec.layout != layout:
            if (u_spec.layout.m, u_spec.layout.n) != (layout.m, layout.n):
                raise DimensionMismatch("unitary spec and handle use different layouts")
        if general is not None and general.dim not in (None, layout.dim):
            raise DimensionMismatch(f"general spec dim {general.dim} != n^m = {layout.dim}")
        self._layout = layout
        self._u = u_spec if u_spec is not None and u_spec.terms else None
        self._g = general if general is not None and not general.is_empty() else None

    @property
    def layout(self) -> NetworkLayout:
        return self._layout

    @property
    def u_spec(self) -> UnitaryNoiseSpec | None:
        return self._u

    @property
    def general(self) -> GeneralLindbladSpec | None:
        return self._g

    def __call__(self, rho, t: float = 0.0) -> np.ndarray:
        out = np.zeros(np.shape(rho), dtype=complex)
        if self._u is not None:
            out += apply_unitary_generator(self._u, rho, t)
        if self._g is not None:
            out += apply_general_generator(self._g, rho)
        return out

    def stability_rate(self) -> float:
        """Λ = 2 Σ_k sup α_k + 2‖H‖ + Σ ‖L_k‖²."""
        lam = 0.0
        if self._u is not None:
            lam += 2 * self._u.sup_rate_sum()
        if self._g is not None:
            lam += self._g.stability_rate()
        return lam

    def jumps(self, a: float, b: float) -> list[float]:
        if self._u is None:
            return []
        return sorted({s for term in self._u.terms for s in term.schedule.jumps(a, b)})


def unitary_generator(u_spec: UnitaryNoiseSpec) -> GeneratorHandle:
    return GeneratorHandle(u_spec.layout, u_spec)


def zero_generator(layout: NetworkLayout) -> GeneratorHandle:
    return GeneratorHandle(layout)


def build_combined_generator(u_spec: UnitaryNoiseSpec, local_spec: GeneralLindbladSpec, j: int) -> GeneratorHandle:
    """ℒ_tot = L_U + ℒ^(j) ⊗ ℐ with the local part embedded at subsystem j."""
    layout = u_spec.layout
    if not 1 <= j <= layout.m:
        raise IndexError(f"subsystem index {j} outside 1..{layout.m}")
    return GeneratorHandle(layout, u_spec, local_spec.embedded(j, layout))


def superoperator(gen, dim: int, t: float = 0.0) -> np.ndarray:
    """Matrix of X ↦ gen(X, t) on row-major vec(X); for small dims only."""
    cols = []
    for k in range(dim * dim):
        e = np.zeros(dim * dim, dtype=complex)
        e[k] = 1
        cols.append(gen(e.reshape(dim, dim), t).ravel())
    return np.array(cols).T


def spec_from_perms(layout: NetworkLayout, perms: Sequence[Permutation], rate: float = 1.0, strict: bool = True) -> UnitaryNoiseSpec:
    terms = []
    for p in perms:
        hood = next((j for j, h in enumerate(layout.neighborhoods) if p.support() <= set(h)), None)
        terms.append(UnitaryTerm(p, WeightSchedule.constant(rate), hood))
    return UnitaryNoiseSpec(layout, tuple(terms), strict=strict)
