"""Shipped experiment configs, one per documented scenario."""

import copy

_PATH3 = {"m": 3, "n": 2, "neighborhoods": [[1, 2], [2, 3]]}

_ALTERNATING_TERMS = [
    {"perm": [2, 1, 3], "schedule": {"breakpoints": [1.0], "values": [1.0, 0.0], "period": 2.0}, "neighborhood": 0},
    {"perm": [1, 3, 2], "schedule": {"breakpoints": [1.0], "values": [0.0, 1.0], "period": 2.0}, "neighborhood": 1},
]

_BROKEN_TERMS = [
    {"perm": [2, 1, 3], "schedule": {"values": [1.0]}, "neighborhood": 0},
    {"perm": [1, 3, 2], "schedule": {"values": [0.0]}, "neighborhood": 1},
]

PRESETS = {
    "two-qubit-swap": {
        "command": "symmetrize",
        "layout": {"m": 2, "n": 2, "neighborhoods": [[1, 2]]},
        "initial_state": {"kind": "basis", "digits": [0, 1]},
        "T": 20.0,
        "dt": 0.05,
        "snapshot_stride": 10,
    },
    "path3-symmetrize": {
        "command": "symmetrize",
        "layout": _PATH3,
        "initial_state": {"kind": "random", "seed": 0},
        "T": 10.0,
        "dt": 0.025,
        "snapshot_stride": 10,
    },
    "disconnected": {
        "command": "symmetrize",
        "layout": {"m": 4, "n": 2, "neighborhoods": [[1, 2], [3, 4]]},
        "initial_state": {"kind": "basis", "digits": [0, 0, 1, 1]},
        "T": 20.0,
        "dt": 0.025,
        "snapshot_stride": 20,
    },
    "alternating": {
        "command": "symmetrize",
        "layout": _PATH3,
        "terms": _ALTERNATING_TERMS,
        "initial_state": {"kind": "basis", "digits": [0, 0, 1]},
        "T": 40.0,
        "dt": 0.025,
        "snapshot_stride": 40,
        "window": 2.0,
        "alpha_min": 0.5,
        "horizon": 40.0,
    },
    "broken-connectivity": {
        "command": "symmetrize",
        "layout": _PATH3,
        "terms": _BROKEN_TERMS,
        "initial_state": {"kind": "basis", "digits": [0, 0, 1]},
        "T": 40.0,
        "dt": 0.025,
        "snapshot_stride": 40,
        "window": 2.0,
        "alpha_min": 0.5,
        "horizon": 40.0,
    },
    "path3-lift": {
        "command": "lift",
        "layout": _PATH3,
        "initial_weights": "delta_identity",
        "initial_state": {"kind": "random", "seed": 0},
        "T": 10.0,
        "dt": 0.025,
        "snapshot_stride": 10,
    },
    "prepare-two-qubit": {
        "command": "prepare",
        "layout": {"m": 2, "n": 2, "neighborhoods": [[1, 2]]},
        "local": {"j": 1, "target_state": [1, 0]},
        "initial_state": {"kind": "basis", "digits": [1, 1]},
        "T": 50.0,
        "snapshot_stride": 50,
    },
    "prepare-path3": {
        "command": "prepare",
        "layout": _PATH3,
        "local": {"j": 1, "target_state": [1, 0]},
        "initial_state": {"kind": "maximally_mixed"},
        "T": 100.0,
        "snapshot_stride": 100,
    },
    "estimate-exact": {"command": "estimate", "m": 4, "p": 2, "mode": "exact-quantum", "trials": 1000, "seed": 7},
    "estimate-mc": {"command": "estimate", "m": 100, "p": 10, "mode": "hypergeometric-mc", "trials": 100000, "seed": 7},
    "check-alternating": {
        "command": "check",
        "layout": _PATH3,
        "terms": _ALTERNATING_TERMS,
        "window": 2.0,
        "alpha_min": 0.5,
        "horizon": 40.0,
    },
    "check-broken": {
        "command": "check",
        "layout": _PATH3,
        "terms": _BROKEN_TERMS,
        "window": 2.0,
        "alpha_min": 0.5,
        "horizon": 40.0,
    },
}


def get_preset(name: str) -> dict:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return copy.deepcopy(PRESETS[name])
