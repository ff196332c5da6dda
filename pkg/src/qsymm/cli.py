"""Command-line front end.

    qsymm symmetrize --preset two-qubit-swap --out runs/swap
    qsymm estimate --config my_estimate.json --seed 7 --threads 4
    qsymm validate runs/swap

Exit codes: 0 success, 2 config error, 3 numerical invariant breach,
4 budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import io as qio
from . import config
from .dynamics import check_persistent_connectivity, evolve
from .errors import BudgetExceeded, ConfigError, InvariantBreach, StepTooLarge
from .estimation import pmf_vector, protocol_state, readout_distribution, run_estimation_protocol
from .generators import (
    GeneratorHandle,
    UnitaryNoiseSpec,
    UnitaryTerm,
    WeightSchedule,
    apply_unitary_generator,
    commutant_residual,
    unitary_generator,
    validate_quasi_local,
)
from .lifted import delta_identity, evolve_lifted, reconstruct_state, uniform
from .operators import (
    NetworkLayout,
    basis_state,
    matrix_from_json,
    matrix_to_json,
    maximally_mixed,
    product_state,
    random_density,
    random_hermitian,
    validate_state,
)
from .permutations import generates_full_group, local_permutations, symmetrize
from .preparation import default_step, prepare_network_state
from .presets import get_preset

EXIT_OK, EXIT_CONFIG, EXIT_BREACH, EXIT_BUDGET = 0, 2, 3, 4

# --- config schema -----------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer"}
_AMP = {"oneOf": [_NUM, {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}]}

_LAYOUT = {
    "type": "object",
    "properties": {
        "m": {"type": "integer", "minimum": 2},
        "n": {"type": "integer", "minimum": 2},
        "neighborhoods": {"type": "array", "items": {"type": "array", "items": _INT, "minItems": 1}},
    },
    "required": ["m", "neighborhoods"],
    "additionalProperties": False,
}

_SCHEDULE = {
    "type": "object",
    "properties": {
        "breakpoints": {"type": "array", "items": _NUM},
        "values": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "period": _POS,
    },
    "required": ["values"],
    "additionalProperties": False,
}

_TERMS = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "perm": {"type": "array", "items": _INT},
            "schedule": _SCHEDULE,
            "neighborhood": {"type": ["integer", "null"]},
        },
        "required": ["perm"],
        "additionalProperties": False,
    },
}

_STATE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["basis", "maximally_mixed", "random", "product", "matrix"]},
        "digits": {"type": "array", "items": _INT},
        "seed": _INT,
        "vectors": {"type": "array", "items": {"type": "array", "items": _AMP}},
        "dim": _INT,
        "entries": {"type": "array"},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

_GLOBAL = {
    "command": {"type": "string"},
    "seed": _INT,
    "dt": _POS,
    "T": _POS,
    "snapshot_stride": {"type": "integer", "minimum": 1},
    "output_dir": {"type": "string"},
    "tolerances": {"type": "object", "additionalProperties": _NUM},
    "threads": {"type": "integer", "minimum": 1},
}

_NETWORK = {
    "layout": _LAYOUT,
    "terms": _TERMS,
    "rate": {"type": "number", "minimum": 0},
    "pairwise_only": {"type": "boolean"},
}

_CONNECTIVITY = {"window": _POS, "alpha_min": {"type": "number", "minimum": 0}, "horizon": _POS}


def _schema(props: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "properties": {**_GLOBAL, **props},
        "required": required,
        "additionalProperties": False,
    }


SCHEMAS = {
    "symmetrize": _schema(
        {**_NETWORK, **_CONNECTIVITY, "initial_state": _STATE, "state_stride": {"type": "integer", "minimum": 1}},
        ["layout", "initial_state", "T"],
    ),
    "lift": _schema(
        {
            **_NETWORK,
            "initial_weights": {"oneOf": [{"enum": ["delta_identity", "uniform"]}, {"type": "array", "items": _NUM}]},
            "initial_state": _STATE,
            "weights_stride": {"type": "integer", "minimum": 1},
        },
        ["layout", "T"],
    ),
    "prepare": _schema(
        {
            **_NETWORK,
            "local": {
                "type": "object",
                "properties": {"j": {"type": "integer", "minimum": 1}, "target_state": {"type": "array", "items": _AMP}},
                "required": ["j", "target_state"],
                "additionalProperties": False,
            },
            "initial_state": _STATE,
        },
        ["layout", "local", "T"],
    ),
    "estimate": _schema(
        {
            "m": {"type": "integer", "minimum": 2},
            "p": {"type": "integer", "minimum": 1},
            "mode": {"enum": ["exact-quantum", "hypergeometric-mc"]},
            "trials": {"type": "integer", "minimum": 1},
            "slow_T": _POS,
            "prepare_first": {"type": "boolean"},
        },
        ["m", "p", "mode"],
    ),
    "check": _schema({**_NETWORK, **_CONNECTIVITY, "fixed_point_samples": {"type": "integer", "minimum": 0}}, ["layout"]),
}


# --- config -> objects -------------------------------------------------------

def _amplitudes(values) -> np.ndarray:
    return np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in values])


def _layout(cfg) -> NetworkLayout:
    try:
        return NetworkLayout.from_json(cfg["layout"])
    except ValueError as exc:
        raise ConfigError(f"layout: {exc}") from exc


def _u_spec(cfg, layout: NetworkLayout) -> UnitaryNoiseSpec:
    try:
        if "terms" in cfg:
            return UnitaryNoiseSpec.from_json({"terms": cfg["terms"]}, layout)
        if not cfg.get("pairwise_only", True):
            rate = cfg.get("rate", 1.0)
            terms = [UnitaryTerm(lp.perm, WeightSchedule.constant(rate), lp.neighborhoods[0]) for lp in local_permutations(layout)]
            return UnitaryNoiseSpec(layout, tuple(terms))
        return UnitaryNoiseSpec.pairwise(layout, cfg.get("rate", 1.0))
    except ValueError as exc:
        raise ConfigError(f"terms: {exc}") from exc


def _initial_state(spec: dict, layout: NetworkLayout) -> np.ndarray:
    kind = spec["kind"]
    if kind == "basis":
        digits = spec.get("digits")
        if digits is None or len(digits) != layout.m or any(not 0 <= d < layout.n for d in digits):
            raise ConfigError(f"initial_state.digits must be {layout.m} digits in 0..{layout.n - 1}")
        return basis_state(digits, layout.n)
    if kind == "maximally_mixed":
        return maximally_mixed(layout)
    if kind == "random":
        return random_density(layout.dim, np.random.default_rng(spec.get("seed", 0)))
    if kind == "product":
        vecs = [_amplitudes(v) for v in spec.get("vectors", [])]
        if len(vecs) != layout.m or any(v.size != layout.n for v in vecs):
            raise ConfigError(f"initial_state.vectors must hold {layout.m} vectors of length {layout.n}")
        vecs = [v / np.linalg.norm(v) for v in vecs]
        return product_state(vecs)
    rho = matrix_from_json(spec)
    try:
        return np.array(validate_state(rho, layout))
    except ValueError as exc:
        raise ConfigError(f"initial_state: {exc}") from exc


def _dt(cfg, gen: GeneratorHandle) -> float:
    return cfg["dt"] if "dt" in cfg else default_step(gen.stability_rate(), cfg["T"])


def load_config(args) -> tuple[str, dict]:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.preset:
        cfg = get_preset(args.preset)
    elif args.config:
        text = Path(args.config).read_text()
        try:
            cfg = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
        if isinstance(cfg, dict) and "preset" in cfg:
            overrides = {k: v for k, v in cfg.items() if k != "preset"}
            cfg = {**get_preset(cfg["preset"]), **overrides}
    else:
        raise ConfigError("a --config or --preset is required")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    command = args.command
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    for key, flag in (("seed", args.seed), ("dt", args.dt), ("T", args.T), ("threads", args.threads)):
        if flag is not None:
            cfg[key] = flag
    try:
        jsonschema.validate(cfg, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from exc
    return command, cfg


# --- commands ------------------------------------------------------------------

def cmd_symmetrize(cfg) -> tuple[dict, dict[str, str]]:
    layout = _layout(cfg)
    u = _u_spec(cfg, layout)
    gen = unitary_generator(u)
    rho0 = _initial_state(cfg["initial_state"], layout)
    closure = generates_full_group(u.perms, layout.m)
    active = [t.perm for t in u.terms if t.schedule.sup > 0]
    active_closure = generates_full_group(active, layout.m)
    traj = evolve(gen, rho0, cfg["T"], _dt(cfg, gen), stride=cfg.get("snapshot_stride", 1))
    summary = {
        "command": "symmetrize",
        "layout": layout.to_json(),
        "generates_full_group": closure.generates,
        "closure_size": closure.closure_size,
        "active_generates_full_group": active_closure.generates,
        "converged": traj.converged_time is not None,
        "time_to_eps": traj.converged_time,
        "eps": config.TOL.conv,
        "final_V": float(traj.V[-1]),
        "final_dist_to_symm": float(traj.dist_to_symm[-1]),
        "max_trace_dev": float(traj.trace_dev.max()),
        "min_eig": float(traj.min_eig.min()),
        "warnings": [],
    }
    if not active_closure.generates:
        summary["warnings"].append(
            f"active permutations generate a subgroup of order {active_closure.closure_size}; "
            "convergence to the symmetrized state is not expected"
        )
    if "window" in cfg and u.is_pairwise():
        rep = check_persistent_connectivity(u, cfg["window"], cfg.get("alpha_min", 0.0), cfg.get("horizon", cfg["T"]))
        summary["connectivity"] = _connectivity_json(rep)
        if not rep.passed:
            summary["warnings"].append("persistent-connectivity condition fails")
    files = {
        "trajectory.csv": qio.trajectory_csv(traj),
        "final_state.json": qio.to_json(matrix_to_json(traj.final)),
    }
    if "state_stride" in cfg:
        files["states.json"] = qio.state_snapshots_json(traj, cfg["state_stride"])
    return summary, files


def _weights(cfg, m: int) -> np.ndarray:
    w = cfg.get("initial_weights", "delta_identity")
    if w == "delta_identity":
        return delta_identity(m)
    if w == "uniform":
        return uniform(m)
    return np.asarray(w, dtype=float)


def cmd_lift(cfg) -> tuple[dict, dict[str, str]]:
    layout = _layout(cfg)
    u = _u_spec(cfg, layout)
    lam = 2 * u.sup_rate_sum()
    dt = cfg["dt"] if "dt" in cfg else default_step(lam, cfg["T"])
    traj = evolve_lifted(u, _weights(cfg, layout.m), cfg["T"], dt, stride=cfg.get("snapshot_stride", 1))
    summary = {
        "command": "lift",
        "layout": layout.to_json(),
        "final_D": float(traj.D[-1]),
        "final_min_p": float(traj.min_p[-1]),
        "final_max_p": float(traj.max_p[-1]),
        "D_monotone": bool(np.all(np.diff(traj.D) <= 1e-9)),
        "min_p_monotone": bool(np.all(np.diff(traj.min_p) >= -1e-9)),
        "uniform_deviation": float(np.abs(traj.weights[-1] - 1 / traj.weights.shape[1]).max()),
    }
    if "initial_state" in cfg:
        rho0 = _initial_state(cfg["initial_state"], layout)
        direct = evolve(unitary_generator(u), rho0, cfg["T"], dt, stride=cfg.get("snapshot_stride", 1))
        summary["lift_equivalence_max_dev"] = max(
            float(np.linalg.norm(reconstruct_state(w, rho0, layout) - r)) for w, r in zip(traj.weights, direct.states)
        )
    files = {"lifted.csv": qio.lifted_csv(traj)}
    if "weights_stride" in cfg:
        files["weights.json"] = qio.weights_snapshots_json(traj, cfg["weights_stride"])
    return summary, files


def cmd_prepare(cfg) -> tuple[dict, dict[str, str]]:
    layout = _layout(cfg)
    u = _u_spec(cfg, layout)
    psi = _amplitudes(cfg["local"]["target_state"])
    if psi.size != layout.n:
        raise ConfigError(f"local.target_state must have {layout.n} amplitudes")
    psi = psi / np.linalg.norm(psi)
    j = cfg["local"]["j"]
    if j > layout.m:
        raise ConfigError(f"local.j = {j} outside 1..{layout.m}")
    rho0 = _initial_state(cfg.get("initial_state", {"kind": "maximally_mixed"}), layout)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = prepare_network_state(layout, psi, j, u, rho0, cfg["T"], cfg.get("dt"), cfg.get("snapshot_stride", 1))
    summary = {
        "command": "prepare",
        "layout": layout.to_json(),
        "generates_full_group": res.generates_full_group,
        "final_fidelity": float(res.fidelity[-1]),
        "max_trace_dev": float(res.trajectory.trace_dev.max()),
        "min_eig": float(res.trajectory.min_eig.min()),
        "warnings": [str(w.message) for w in caught],
    }
    fid_rows = ({"t": t, "fidelity": f} for t, f in zip(res.trajectory.times, res.fidelity))
    files = {
        "trajectory.csv": qio.trajectory_csv(res.trajectory),
        "fidelity.csv": qio.rows_to_csv(fid_rows, ["t", "fidelity"]),
        "final_state.json": qio.to_json(matrix_to_json(res.trajectory.final)),
    }
    return summary, files


def cmd_estimate(cfg) -> tuple[dict, dict[str, str]]:
    m, p, mode = cfg["m"], cfg["p"], cfg["mode"]
    if p > m:
        raise ConfigError(f"p = {p} exceeds m = {m}")
    seed = cfg.get("seed", 0)
    trials = cfg.get("trials", 1)
    report = run_estimation_protocol(m, p, mode, seed, trials, cfg.get("threads", 1), cfg.get("slow_T"))
    out = report.to_json()
    if mode == "exact-quantum" and cfg.get("prepare_first"):
        # fill state prepared by the stubborn-subsystem protocol instead of set directly
        layout = NetworkLayout.path(m, 2)
        res = prepare_network_state(layout, np.array([0, 1]), 1, UnitaryNoiseSpec.pairwise(layout), T=cfg.get("T", 100.0), stride=10**9)
        law = readout_distribution(symmetrize(protocol_state(m, p, res.trajectory.final), layout), p, layout)
        out["prepared_fill_fidelity"] = float(res.fidelity[-1])
        out["prepared_readout"] = law.tolist()
        out["prepared_pmf_max_abs_dev"] = float(np.abs(law - pmf_vector(m, p)).max())
    summary = {"command": "estimate", **{k: out[k] for k in ("m", "p", "mode", "trials", "paper_variance", "mhat_inv_relerr_var", "K_mean", "expected_K", "pmf_max_abs_dev", "undefined_count")}}
    trial_rows = (
        {"trial": o.trial, "K_hat": o.K_hat, "m_hat": o.m_hat} for o in report.outcomes()
    )
    files = {"report.json": qio.to_json(out), "trials.csv": qio.rows_to_csv(trial_rows, ["trial", "K_hat", "m_hat"])}
    return summary, files


def _connectivity_json(rep) -> dict:
    return {
        "passed": rep.passed,
        "windows_checked": rep.windows_checked,
        "failing_window": rep.failing_window,
        "components": rep.components,
    }


def cmd_check(cfg) -> tuple[dict, dict[str, str]]:
    layout = _layout(cfg)
    u = _u_spec(cfg, layout)
    closure = generates_full_group(u.perms, layout.m)
    locality = validate_quasi_local(u, seed=cfg.get("seed", 0))
    summary = {
        "command": "check",
        "layout": layout.to_json(),
        "generates_full_group": closure.generates,
        "closure_size": closure.closure_size,
        "quasi_local": [{"term": r.term, "passed": r.passed, "residual": r.residual} for r in locality],
    }
    if "window" in cfg:
        if not u.is_pairwise():
            raise ConfigError("connectivity check needs pairwise-swap terms")
        rep = check_persistent_connectivity(u, cfg["window"], cfg.get("alpha_min", 0.0), cfg.get("horizon", cfg["window"]))
        summary["connectivity"] = _connectivity_json(rep)
    samples = cfg.get("fixed_point_samples", 20)
    if samples and layout.m <= 6:
        rng = np.random.default_rng(cfg.get("seed", 0))
        c = sum(t.schedule.sup for t in u.terms)
        agree = 0
        for i in range(samples):
            x = random_hermitian(layout.dim, rng)
            if i % 2:
                x = symmetrize(x, layout)
            fixed = commutant_residual(u, x) <= config.TOL.commutant
            small = np.linalg.norm(_sup_generator(u, x)) <= max(c, 1.0) * 1e-10
            agree += fixed == small
        summary["fixed_point_checks"] = samples
        summary["fixed_point_agreements"] = agree
    return summary, {}


def _sup_generator(u: UnitaryNoiseSpec, x):
    # generator with every term at its peak rate: fixed points are the commutant of all terms
    out = np.zeros_like(x, dtype=complex)
    for t in u.terms:
        out += t.schedule.sup * apply_unitary_generator(UnitaryNoiseSpec(u.layout, (t,), strict=False), x)
    return out


# --- validate ------------------------------------------------------------------

def cmd_validate(path: Path) -> tuple[bool, list[str]]:
    """Re-ingest the CSVs of a finished run and re-check their invariants."""
    path = Path(path)
    if not path.is_dir():
        raise ConfigError(f"{path} is not an output directory")
    summary_file = path / "summary.json"
    if not summary_file.exists():
        raise ConfigError(f"{path} has no summary.json")
    summary = json.loads(summary_file.read_text())
    msgs: list[str] = []
    ok = True

    def check(cond: bool, what: str):
        nonlocal ok
        ok &= bool(cond)
        msgs.append(f"{'PASS' if cond else 'FAIL'} {what}")

    traj_csv = path / "trajectory.csv"
    if traj_csv.exists():
        d = qio.read_csv(traj_csv)
        check(np.all(np.diff(d["t"]) > 0), "trajectory times strictly increasing")
        check(d["trace_dev"].max() < 1e-9, "trace deviation < 1e-9")
        check(d["min_eig"].min() > -1e-8, "min eigenvalue > -1e-8")
        if summary.get("command") == "symmetrize":
            check(np.all(np.diff(d["V"]) <= 1e-9), "V non-increasing")
            check(np.all(d["dVdt"] <= 1e-12), "dV/dt <= 0")
    lifted = path / "lifted.csv"
    if lifted.exists():
        d = qio.read_csv(lifted)
        check(np.all(np.diff(d["D"]) <= 1e-9), "D non-increasing")
        check(np.all(np.diff(d["min_p"]) >= -1e-9), "min weight non-decreasing")
        check(d["min_p"].min() >= -1e-12, "weights nonnegative")
    trials = path / "trials.csv"
    if trials.exists():
        d = qio.read_csv(trials)
        report = json.loads((path / "report.json").read_text())
        k = d["K_hat"].astype(int)
        hist = np.bincount(k, minlength=report["p"] + 1)[: report["p"] + 1]
        check(hist.tolist() == report["K_histogram"], "trial log matches K histogram")
        check(np.all((k >= 0) & (k <= report["p"])), "0 <= K_hat <= p")
    if not msgs:
        raise ConfigError(f"{path} holds no recognised CSV outputs")
    return ok, msgs


COMMANDS = {
    "symmetrize": cmd_symmetrize,
    "lift": cmd_lift,
    "prepare": cmd_prepare,
    "estimate": cmd_estimate,
    "check": cmd_check,
}


def _summary_text(summary: dict) -> str:
    lines = [f"[{summary['command']}]"]
    for k, v in summary.items():
        if k in ("command", "layout"):
            continue
        if isinstance(v, float) and not math.isnan(v):
            v = f"{v:.6g}"
        lines.append(f"  {k}: {v}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsymm", description="Dissipative symmetrization of quantum networks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*COMMANDS, "validate"):
        p = sub.add_parser(name)
        if name == "validate":
            p.add_argument("path", help="output directory of a previous run")
            continue
        p.add_argument("--config", type=str, help="JSON experiment file")
        p.add_argument("--preset", type=str, help="shipped experiment name")
        p.add_argument("--out", type=str, default=None, help="output directory (QSYMM_OUT wins)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, help="worker threads for sampling")
        p.add_argument("--dt", type=float, help="RK4 step")
        p.add_argument("--T", type=float, help="final time")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            ok, msgs = cmd_validate(Path(args.path))
            print("\n".join(msgs))
            return EXIT_OK if ok else EXIT_BREACH
        command, cfg = load_config(args)
        out_dir = os.environ.get("QSYMM_OUT") or args.out or cfg.get("output_dir") or f"qsymm-{command}"
        if "tolerances" in cfg:
            # process-wide; one experiment per invocation
            config.TOL = config.TOL.with_overrides(**cfg["tolerances"])
        summary, files = COMMANDS[command](cfg)
        files["summary.json"] = qio.to_json(summary)
        qio.write_outputs(out_dir, files)
        print(_summary_text(summary))
        print(f"wrote {len(files)} files to {out_dir}")
        return EXIT_OK
    except (ConfigError, StepTooLarge, KeyError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantBreach as exc:
        print(f"numerical invariant breach: {exc}", file=sys.stderr)
        return EXIT_BREACH
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
