"""Canonical on-disk formats: CSV tables and checkpoint snapshots.

Floats are rendered with repr(), the shortest representation that
round-trips through float() exactly, so rewriting a file from re-read
values is byte-identical.  All files use '\n' line endings.
"""

from __future__ import annotations

import json
import os
import shutil
from pathlib import Path

import numpy as np

from .errors import SnapshotError
from .network import NetworkParams, NetworkState, StateTrace

SNAPSHOT_FILES = ("w_recurrent.csv", "w_input.csv", "bias.csv", "manifest.json")
SNAPSHOT_FORMAT = 1


def format_value(v) -> str:
    """Canonical text for one CSV cell."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def append_csv(path, header, rows):
    """Append rows, creating the file (with header) on first use."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists()
    with open(path, "a", newline="") as fh:
        if fresh and header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_csv(path, with_header=True):
    """(header, rows-of-strings); malformed trailing bytes are dropped."""
    with open(path, newline="") as fh:
        text = fh.read()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    elif lines:
        lines.pop()          # torn final line with no newline
    header = lines.pop(0).split(",") if (with_header and lines) else None
    return header, [ln.split(",") for ln in lines]


def write_matrix_csv(path, a):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    write_csv(path, None,
              ([repr(float(v)) for v in row] for row in a))


def read_matrix_csv(path):
    _, rows = read_csv(path, with_header=False)
    if not rows:
        raise SnapshotError(f"{path} is empty")
    return np.array([[float(v) for v in row] for row in rows])


def write_trace_csv(path, trace: StateTrace):
    """Columnar trace export: header t,u,x_0001..x_N, one row per step.

    The t column indexes the state (so row s carries t_start + s + 1, the
    time of the state that input u produced).
    """
    n = trace.states.shape[1]
    header = ["t", "u"] + [f"x_{i:04d}" for i in range(1, n + 1)]
    rows = ((trace.t_start + s + 1, int(trace.inputs[s]),
             *(int(v) for v in trace.states[s]))
            for s in range(len(trace)))
    write_csv(path, header, rows)


def read_trace_csv(path) -> StateTrace:
    header, rows = read_csv(path)
    if not header or header[:2] != ["t", "u"]:
        raise SnapshotError(f"{path} is not a trace file")
    if not rows:
        raise SnapshotError(f"{path} has no rows")
    inputs = np.array([int(r[1]) for r in rows], dtype=np.uint8)
    states = np.array([[int(v) for v in r[2:]] for r in rows], dtype=np.uint8)
    t_start = int(rows[0][0]) - 1
    return StateTrace(inputs=inputs, states=states, t_start=t_start)


def save_snapshot(directory, params: NetworkParams, state: NetworkState,
                  manifest_extra: dict = None):
    """Write a complete checkpoint; manifest.json lands last as the marker.

    An existing snapshot at the same path is replaced wholesale.
    """
    directory = Path(directory)
    tmp = directory.with_name(directory.name + ".tmp")
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    write_matrix_csv(tmp / "w_recurrent.csv", params.w_recurrent)
    write_matrix_csv(tmp / "w_input.csv", params.w_input[:, None])
    write_matrix_csv(tmp / "bias.csv", params.bias[:, None])
    manifest = {
        "format_version": SNAPSHOT_FORMAT,
        "n_neurons": params.n_neurons,
        "p_max": params.p_max,
        "p_bar": [float(v) for v in params.p_bar],
        "input_rate": params.input_rate,
        "epsilon": params.epsilon,
        "state_x": [int(v) for v in state.x],
        "state_t": int(state.t),
    }
    if manifest_extra:
        manifest.update(manifest_extra)
    with open(tmp / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if directory.exists():
        shutil.rmtree(directory)
    os.replace(tmp, directory)


def load_snapshot(directory):
    """(params, state, manifest) from a snapshot directory."""
    directory = Path(directory)
    for name in SNAPSHOT_FILES:
        if not (directory / name).exists():
            raise SnapshotError(f"snapshot {directory} is missing {name}")
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    if manifest.get("format_version") != SNAPSHOT_FORMAT:
        raise SnapshotError(f"unsupported snapshot format in {directory}")
    n = int(manifest["n_neurons"])
    w = read_matrix_csv(directory / "w_recurrent.csv")
    w_in = read_matrix_csv(directory / "w_input.csv")[:, 0]
    bias = read_matrix_csv(directory / "bias.csv")[:, 0]
    if w.shape != (n, n) or w_in.shape != (n,) or bias.shape != (n,):
        raise SnapshotError(
            f"snapshot {directory} arrays do not match n_neurons={n}")
    params = NetworkParams(
        w_recurrent=w, w_input=w_in, bias=bias,
        p_max=float(manifest["p_max"]),
        p_bar=np.array(manifest["p_bar"], dtype=float),
        input_rate=float(manifest["input_rate"]),
        epsilon=float(manifest["epsilon"]),
    )
    x = np.array(manifest["state_x"], dtype=np.uint8)
    if x.shape != (n,):
        raise SnapshotError(f"snapshot {directory} state does not match n_neurons")
    state = NetworkState(x=x, t=int(manifest["state_t"]))
    return params, state, manifest
