"""Numerical Markov-chain analysis: stationary distributions, multichain
limiting distributions, ordinary-lumpability residuals, and class sums.

Everything uses dense direct solves; the models here stay well below a few
thousand states, where determinism beats sparse machinery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ssltl.errors import ModelError
from ssltl.graph import bsccs as bscc_decomposition

STATIONARY_RESIDUAL_TOL = 1e-10
MASS_TOL = 1e-9


@dataclass(frozen=True)
class Partition:
    """Partition of a state set; ``of`` maps state -> class id, ``classes``
    maps class id -> member set."""

    classes: Mapping
    of: Mapping

    @staticmethod
    def from_assignment(of: Mapping) -> "Partition":
        classes: dict = {}
        for s, c in of.items():
            classes.setdefault(c, set()).add(s)
        return Partition(classes={c: frozenset(v) for c, v in classes.items()},
                         of=dict(of))


def product_state_partition(states) -> Partition:
    """The canonical partition of product states into classes [s] that share
    the model component."""
    return Partition.from_assignment({sq: sq[0] for sq in states})


def _kernel(chain, states=None):
    states = list(chain.states) if states is None else list(states)
    idx = {s: i for i, s in enumerate(states)}
    t = np.zeros((len(states), len(states)))
    for s in states:
        for s2, p in chain.rows[s].items():
            if s2 in idx:
                t[idx[s], idx[s2]] = p
    return states, idx, t


def stationary(chain) -> dict:
    """Unique stationary distribution of an irreducible chain: solve x T = x,
    sum(x) = 1 by dense LU with the normalization row replacing one equation.
    """
    states, _, t = _kernel(chain)
    n = len(states)
    a = t.T - np.eye(n)
    a[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        x = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ModelError(f"singular stationary system: {exc}") from exc
    residual = np.max(np.abs(x @ t - x))
    if residual > STATIONARY_RESIDUAL_TOL or np.any(x < -1e-9):
        raise ModelError(
            f"stationary solve residual {residual:g}; chain is likely not "
            "irreducible")
    return {s: float(x[i]) for i, s in enumerate(states)}


def limiting_distribution(chain, beta: Optional[Mapping] = None) -> dict:
    """Cesaro limit of beta T^n: absorption probability into each BSCC times
    that BSCC's stationary distribution; transient states carry 0.

    ``beta`` defaults to a point mass at the chain's initial state.
    """
    if beta is None:
        beta = {chain.initial: 1.0}
    dec = bscc_decomposition(chain)
    transient = [s for s in chain.states if s in dec.transient]
    t_idx = {s: i for i, s in enumerate(transient)}
    k = len(dec.bsccs)

    # Absorption probabilities h[t][j]: from transient t into BSCC j.
    h = np.zeros((len(transient), k))
    if transient:
        z = np.zeros((len(transient), len(transient)))
        w = np.zeros((len(transient), k))
        for s in transient:
            for s2, p in chain.rows[s].items():
                if s2 in t_idx:
                    z[t_idx[s], t_idx[s2]] += p
                else:
                    j = dec.bscc_of(s2)
                    w[t_idx[s], j] += p
        try:
            h = np.linalg.solve(np.eye(len(transient)) - z, w)
        except np.linalg.LinAlgError as exc:
            raise ModelError(
                f"singular transient absorption system: {exc}") from exc

    weight = np.zeros(k)
    for s, mass in beta.items():
        if mass == 0.0:
            continue
        if s in t_idx:
            weight += mass * h[t_idx[s]]
        else:
            j = dec.bscc_of(s)
            if j is None:
                raise ModelError(f"beta places mass on unknown state {s!r}")
            weight[j] += mass

    out = {s: 0.0 for s in chain.states}
    for j, b in enumerate(dec.bsccs):
        if weight[j] <= 0.0:
            continue
        sub = _Restriction(chain, b)
        pi = stationary(sub)
        for s, p in pi.items():
            out[s] = float(weight[j] * p)
    total = sum(out.values())
    if abs(total - 1.0) > MASS_TOL:
        raise ModelError(f"limiting distribution mass {total!r} != 1")
    return out


class _Restriction:
    """A chain restricted to a closed state subset."""

    def __init__(self, chain, subset):
        self.states = tuple(s for s in chain.states if s in subset)
        self.rows = {s: {t: p for t, p in chain.rows[s].items() if t in subset}
                     for s in self.states}
        self.initial = self.states[0]


def check_lumpable(chain, p: Partition) -> float:
    """Max over classes and member pairs (alpha, beta) of the sup-norm of
    (e_alpha - e_beta) T V; 0 (up to 1e-12) iff ordinarily lumpable."""
    states, idx, t = _kernel(chain)
    class_ids = sorted(p.classes, key=str)
    col = {c: j for j, c in enumerate(class_ids)}
    v = np.zeros((len(states), len(class_ids)))
    for s in states:
        v[idx[s], col[p.of[s]]] = 1.0
    tv = t @ v
    worst = 0.0
    for c in class_ids:
        members = [s for s in states if p.of[s] == c]
        for i in range(1, len(members)):
            diff = np.max(np.abs(tv[idx[members[0]]] - tv[idx[members[i]]]))
            worst = max(worst, float(diff))
    return worst


def lump_distribution(dist: Mapping, p: Partition) -> dict:
    """Class mass = sum of member masses."""
    out = {c: 0.0 for c in p.classes}
    for s, mass in dist.items():
        out[p.of[s]] += mass
    return out
