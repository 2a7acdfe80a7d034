"""Structural and information summaries of a trained network.

Variable numbering follows the trace convention: 0 is the input line,
1..N are the units.  A connection record (src, dst) means src -> dst.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .network import NetworkParams, StateTrace

log = logging.getLogger(__name__)

TOP_K_DEFAULT = 50


@dataclass
class ConnectionRecord:
    src: int
    dst: int
    weight: float
    abs_rank: int     # 1 = largest magnitude


@dataclass
class WeightSummary:
    block: int
    mean_abs_internal_top: float   # mean |w| over the top_k strongest recurrent
    mean_abs_input: float          # mean |w| over all input weights
    mean_abs_internal_all: float
    top_k: int


def top_connections(params: NetworkParams, k: int = TOP_K_DEFAULT):
    """The k strongest connections (recurrent and input pooled) by |weight|.

    Ties break lexicographically on (src, dst) so the ordering is total.
    """
    n = params.n_neurons
    total = n * n + n
    if not (1 <= k <= total):
        raise ConfigurationError(f"k must lie in [1, {total}]")
    entries = []
    for i in range(n):
        entries.append((-abs(params.w_input[i]), 0, i + 1, params.w_input[i]))
    for i in range(n):
        for j in range(n):
            entries.append((-abs(params.w_recurrent[i, j]), j + 1, i + 1,
                            params.w_recurrent[i, j]))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    return [ConnectionRecord(src=src, dst=dst, weight=w, abs_rank=r + 1)
            for r, (_, src, dst, w) in enumerate(entries[:k])]


def weight_summary(params: NetworkParams, block: int = 0,
                   top_k: int = TOP_K_DEFAULT) -> WeightSummary:
    """Mean magnitude of the strongest recurrent weights vs input weights.

    Networks with fewer than top_k recurrent entries are summarised over
    all of them (flagged in the log, not an error).
    """
    flat = np.abs(params.w_recurrent).ravel()
    if flat.shape[0] < top_k:
        log.warning("only %d recurrent weights, top-%d uses all of them",
                    flat.shape[0], top_k)
        strongest = flat
    else:
        strongest = np.sort(flat)[-top_k:]
    return WeightSummary(
        block=block,
        mean_abs_internal_top=float(strongest.mean()),
        mean_abs_input=float(np.abs(params.w_input).mean()),
        mean_abs_internal_all=float(flat.mean()),
        top_k=min(top_k, flat.shape[0]),
    )


def neuron_input_mi(trace: StateTrace) -> np.ndarray:
    """Plug-in MI (nats) between each unit and the input one step back.

    Row s of a trace holds the state produced by input s, so the pairs
    (states[s, i], inputs[s]) realise (x_i(t), u(t-1)) over the whole
    trace with no offset.
    """
    t = len(trace)
    if t < 2:
        raise ConfigurationError("trace too short for an MI estimate")
    u = trace.inputs.astype(float)
    x = trace.states.astype(float)
    n11 = u @ x / t
    px = x.mean(axis=0)
    pu = u.mean()
    mi = np.zeros(x.shape[1])
    for (xu, xx), joint in (((1, 1), n11),
                            ((1, 0), pu - n11),
                            ((0, 1), px - n11),
                            ((0, 0), 1.0 - pu - px + n11)):
        marg = (pu if xu else 1.0 - pu) * (px if xx else 1.0 - px)
        mask = joint > 0.0
        mi[mask] += joint[mask] * np.log(joint[mask] / marg[mask])
    return np.clip(mi, 0.0, None)
