"""Numerical tolerances shared by every module."""

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    herm: float = 1e-10
    trace: float = 1e-10
    min_eig: float = -1e-9
    # integrator abort thresholds
    breach_trace: float = 1e-7
    breach_min_eig: float = -1e-6
    # lifted weights
    norm_drift: float = 1e-9
    # convergence detector
    conv: float = 1e-6
    # quasi-locality / commutant checks
    locality: float = 1e-10
    commutant: float = 1e-10
    # factor in the step-size stability bound dt <= stability / Lambda
    stability: float = 0.1
    # m! enumeration cap
    max_m: int = 8

    def with_overrides(self, **kw) -> "Tolerances":
        unknown = set(kw) - set(self.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(self, **kw)


TOL = Tolerances()
