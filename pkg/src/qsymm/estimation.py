"""Network-size estimation from marker counts after symmetrization.

Protocol: fill every subsystem with |φ⟩, reset the p accessible probes to the
marker |ψ⟩ (⟨φ|ψ⟩ = 0), symmetrize, then count markers on the probes. The
count K is hypergeometric with mean p²/m, giving the estimate m̂ = p²/K̂.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import evolve
from .errors import BudgetExceeded, ConfigError
from .generators import UnitaryNoiseSpec, unitary_generator
from .operators import NetworkLayout, basis_state, embed_local
from .permutations import basis_digits, symmetrize
from .preparation import default_step

EXACT_MAX_M = 6
MC_BLOCK = 4096  # trials per RNG stream; fixed so results don't depend on --threads

MARKER, FILL = 0, 1


def _check_mp(m: int, p: int) -> None:
    if not (1 <= p <= m and m >= 2):
        raise ConfigError(f"need 1 <= p <= m and m >= 2, got m={m}, p={p}")


def hypergeometric_pmf(m: int, p: int, k: int) -> float:
    """P(K = k) = C(p, k) C(m-p, p-k) / C(m, p)."""
    if not (0 <= k <= p <= m):
        raise ConfigError(f"need 0 <= k <= p <= m, got m={m}, p={p}, k={k}")
    return math.comb(p, k) * math.comb(m - p, p - k) / math.comb(m, p)


def pmf_vector(m: int, p: int) -> np.ndarray:
    return np.array([hypergeometric_pmf(m, p, k) for k in range(p + 1)])


def zero_count_probability(m: int, p: int) -> float:
    """Probability that no marker is seen, i.e. the estimate is undefined."""
    return hypergeometric_pmf(m, p, 0)


@dataclass(frozen=True)
class EstimationOutcome:
    K_hat: int
    m_hat: float  # math.inf when K_hat == 0
    p: int
    seed: int | None = None
    mode: str = "hypergeometric-mc"
    trial: int | None = None

    @property
    def defined(self) -> bool:
        return self.K_hat > 0


def estimate_size(K_hat: int, p: int, **meta) -> EstimationOutcome:
    """m̂ = p²/K̂, unrounded; K̂ = 0 gives an infinite estimate."""
    if not 0 <= K_hat <= p:
        raise ConfigError(f"need 0 <= K_hat <= p, got K_hat={K_hat}, p={p}")
    m_hat = math.inf if K_hat == 0 else p * p / K_hat
    return EstimationOutcome(int(K_hat), m_hat, p, **meta)


def relative_error_variance(m: int, p: int) -> float:
    """E[((m̂⁻¹ - m⁻¹)/m⁻¹)²] = (m-p)² / (p² (m-1))."""
    _check_mp(m, p)
    return (m - p) ** 2 / (p * p * (m - 1))


def relative_error_variance_bruteforce(m: int, p: int) -> float:
    """Σ_k pmf(k) (k/E[K] - 1)², summed over every outcome."""
    _check_mp(m, p)
    mean = p * p / m
    return sum(hypergeometric_pmf(m, p, k) * (k / mean - 1) ** 2 for k in range(p + 1))


# --- exact quantum route ---------------------------------------------------

def reset_subsystem(rho, i: int, layout: NetworkLayout, level: int) -> np.ndarray:
    """Apply the reset channel sending subsystem i to |level⟩, whatever its state."""
    n = layout.n
    out = np.zeros_like(rho, dtype=complex)
    for src in range(n):
        k = np.zeros((n, n), dtype=complex)
        k[level, src] = 1
        kk = embed_local(k, i, layout)
        out += kk @ rho @ kk.conj().T
    return out


def readout_distribution(rho, p: int, layout: NetworkLayout, marker: int = MARKER) -> np.ndarray:
    """Joint marker-count law on the first p subsystems.

    P(K = k) = Tr(ρ Π_k), Π_k the sum of products of local projectors with
    exactly k markers among the probes. All Π_k are diagonal in the product
    basis, so only the diagonal of ρ enters.
    """
    counts = (basis_digits(layout.m, layout.n)[:, :p] == marker).sum(axis=1)
    diag = np.real(np.diag(rho))
    return np.bincount(counts, weights=diag, minlength=p + 1)[: p + 1]


def protocol_state(m: int, p: int, prepared=None) -> np.ndarray:
    """State after preparation (all |φ⟩) and perturbation (probes reset to |ψ⟩)."""
    layout = NetworkLayout(m, 2)
    rho = basis_state([FILL] * m) if prepared is None else np.asarray(prepared, dtype=complex)
    for i in range(1, p + 1):
        rho = reset_subsystem(rho, i, layout, MARKER)
    return rho


def exact_readout(m: int, p: int, slow_T: float | None = None, prepared=None) -> np.ndarray:
    """Readout law after symmetrization, computed on the full quantum state.

    Symmetrization is the t → ∞ projection by default; with ``slow_T`` the
    pairwise path-graph generator is integrated for that long instead.
    """
    _check_mp(m, p)
    if m > EXACT_MAX_M:
        raise BudgetExceeded(f"exact mode supports m <= {EXACT_MAX_M}, got {m}")
    layout = NetworkLayout.path(m, 2)
    rho = protocol_state(m, p, prepared)
    if slow_T is None:
        rho = symmetrize(rho, layout)
    else:
        gen = unitary_generator(UnitaryNoiseSpec.pairwise(layout))
        rho = evolve(gen, rho, slow_T, default_step(gen.stability_rate(), slow_T), stride=10**9, diagnostics=False).final
    return readout_distribution(rho, p, layout)


# --- sampling ----------------------------------------------------------------

def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def sample_counts(dist, trials: int, seed: int, threads: int = 1) -> np.ndarray:
    """Inverse-CDF samples of K; trial i always comes from block i // MC_BLOCK."""
    cdf = np.cumsum(np.asarray(dist, dtype=float))
    cdf /= cdf[-1]
    nblocks = -(-trials // MC_BLOCK)

    def block(b: int) -> np.ndarray:
        size = min(MC_BLOCK, trials - b * MC_BLOCK)
        u = _block_rng(seed, b).random(size)
        return np.searchsorted(cdf, u, side="right")

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(block, range(nblocks)))
    else:
        parts = [block(b) for b in range(nblocks)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=int)


@dataclass
class ProtocolReport:
    m: int
    p: int
    mode: str
    trials: int
    seed: int
    K_histogram: list[int]
    mhat_mean: float | None
    undefined_count: int
    zero_count_probability: float
    mhat_inv_relerr_var: float | None
    mhat_inv_relerr_mean: float | None
    K_mean: float | None
    K_std_error: float | None
    paper_variance: float
    expected_K: float
    pmf: list[float]
    readout: list[float] | None = None
    pmf_max_abs_dev: float | None = None
    counts: np.ndarray = field(default=None, repr=False)

    def outcomes(self) -> list[EstimationOutcome]:
        return [estimate_size(int(k), self.p, seed=self.seed, mode=self.mode, trial=i) for i, k in enumerate(self.counts)]

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("counts")
        return d


def run_estimation_protocol(
    m: int,
    p: int,
    mode: str = "hypergeometric-mc",
    seed: int = 0,
    trials: int = 1,
    threads: int = 1,
    slow_T: float | None = None,
) -> ProtocolReport:
    """Run the four-step protocol ``trials`` times and summarize.

    ``exact-quantum`` builds the network state and reads the marker law off
    the symmetrized density matrix (m <= 6); ``hypergeometric-mc`` samples
    the count law directly and works at any size.
    """
    _check_mp(m, p)
    pmf = pmf_vector(m, p)
    readout = dev = None
    if mode == "exact-quantum":
        readout = exact_readout(m, p, slow_T)
        dev = float(np.abs(readout - pmf).max())
        dist = np.clip(readout, 0, None)
    elif mode == "hypergeometric-mc":
        dist = pmf
    else:
        raise ConfigError(f"unknown mode {mode!r}")

    counts = sample_counts(dist, trials, seed, threads)
    hist = np.bincount(counts, minlength=p + 1)[: p + 1]
    defined = counts[counts > 0]
    rel = m * counts / (p * p) - 1.0
    n = counts.size
    return ProtocolReport(
        m=m, p=p, mode=mode, trials=trials, seed=seed,
        K_histogram=[int(h) for h in hist],
        mhat_mean=float(np.mean(p * p / defined)) if defined.size else None,
        undefined_count=int(n - defined.size),
        zero_count_probability=zero_count_probability(m, p),
        mhat_inv_relerr_var=float(np.var(rel, ddof=1)) if n > 1 else None,
        mhat_inv_relerr_mean=float(rel.mean()) if n else None,
        K_mean=float(counts.mean()) if n else None,
        K_std_error=float(counts.std(ddof=1) / math.sqrt(n)) if n > 1 else None,
        paper_variance=relative_error_variance(m, p),
        expected_K=p * p / m,
        pmf=[float(x) for x in pmf],
        readout=None if readout is None else [float(x) for x in readout],
        pmf_max_abs_dev=dev,
        counts=counts,
    )
