"""Strongly-connected-component and end-component analysis.

Chains are any objects exposing ``states`` (ordered), ``rows`` (state ->
{successor: probability}) and ``initial``.  Product MDPs come from
``ssltl.product``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from ssltl.hoa import Dra


def strongly_connected_components(states: Sequence, succ: Mapping) -> list:
    """Tarjan's algorithm, iterative.  Returns SCCs as lists of states in
    reverse topological order (successors before predecessors)."""
    index = {}
    lowlink = {}
    on_stack = set()
    stack = []
    sccs = []
    counter = [0]

    for root in states:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    advanced = True
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)
    return sccs


@dataclass(frozen=True)
class BsccDecomposition:
    bsccs: tuple            # tuple of frozensets
    transient: frozenset
    reachable_bsccs: tuple  # indices into bsccs reachable from the initial state

    def bscc_of(self, state):
        for i, b in enumerate(self.bsccs):
            if state in b:
                return i
        return None


def _chain_succ(chain) -> dict:
    return {s: [t for t, p in chain.rows[s].items() if p > 0.0]
            for s in chain.states}


def bsccs(chain) -> BsccDecomposition:
    """Bottom SCCs (closed SCCs), transient states, and reachability of each
    BSCC from the chain's initial state."""
    succ = _chain_succ(chain)
    comps = strongly_connected_components(chain.states, succ)
    bottoms = []
    transient = set()
    for comp in comps:
        comp_set = frozenset(comp)
        closed = all(t in comp_set for s in comp for t in succ[s])
        if closed:
            bottoms.append(comp_set)
        else:
            transient.update(comp)
    # Stable order: by smallest position of a member in chain.states.
    pos = {s: i for i, s in enumerate(chain.states)}
    bottoms.sort(key=lambda b: min(pos[s] for s in b))

    reached = set()
    frontier = [chain.initial]
    seen = {chain.initial}
    while frontier:
        s = frontier.pop()
        reached.add(s)
        for t in succ.get(s, ()):
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    reachable = tuple(i for i, b in enumerate(bottoms) if b & reached)
    return BsccDecomposition(bsccs=tuple(bottoms), transient=frozenset(transient),
                             reachable_bsccs=reachable)


# ---------------------------------------------------------------------------
# End components of a product MDP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mec:
    """Maximal end component: a state set plus the retained action map.  The
    sub-MDP is strongly connected and every retained action keeps all successor
    mass inside the state set."""

    states: frozenset
    actions: Mapping


def mec_decomposition(product) -> list:
    """Iterative SCC refinement: repeatedly drop actions leaving their SCC and
    states with no actions left, until a fixpoint."""
    states = set(product.states)
    actions = {sq: list(product.enabled_actions(sq)) for sq in product.states}

    while True:
        succ = {
            sq: sorted({t for a in actions[sq]
                        for t, p in product.trans[(sq, a)].items()
                        if p > 0.0 and t in states},
                       key=lambda x: product.state_pos[x])
            for sq in states
        }
        ordered = [sq for sq in product.states if sq in states]
        comps = strongly_connected_components(ordered, succ)
        comp_of = {}
        for i, comp in enumerate(comps):
            for sq in comp:
                comp_of[sq] = i

        changed = False
        for sq in list(states):
            kept = []
            for a in actions[sq]:
                targets = [t for t, p in product.trans[(sq, a)].items() if p > 0.0]
                if all(t in states and comp_of.get(t) == comp_of[sq]
                       for t in targets):
                    kept.append(a)
                else:
                    changed = True
            actions[sq] = kept
            if not kept:
                states.discard(sq)
                changed = True
        if not changed:
            break

    # Surviving SCCs with at least one action per state are the MECs.  A
    # singleton only counts with a self-loop action (guaranteed: its action
    # set is non-empty and every retained action stays inside the component).
    succ = {
        sq: sorted({t for a in actions[sq]
                    for t, p in product.trans[(sq, a)].items() if p > 0.0},
                   key=lambda x: product.state_pos[x])
        for sq in states
    }
    ordered = [sq for sq in product.states if sq in states]
    comps = strongly_connected_components(ordered, succ)
    mecs = []
    for comp in comps:
        comp_set = frozenset(comp)
        mecs.append(Mec(states=comp_set,
                        actions={sq: tuple(actions[sq]) for sq in comp}))
    mecs.sort(key=lambda m: min(product.state_pos[sq] for sq in m.states))
    return mecs


@dataclass(frozen=True)
class Amec:
    mec: Mec
    witnessed_pairs: tuple


def accepting_mecs(mecs: Iterable[Mec], d: Dra) -> list:
    """Filter MECs by the Rabin pair condition: no intersection with S x Fin_i
    and a non-empty intersection with S x Inf_i for some pair i."""
    out = []
    for mec in mecs:
        qs = {q for (_, q) in mec.states}
        witnesses = tuple(i for i, (fin, inf) in enumerate(d.pairs)
                          if not (qs & fin) and (qs & inf))
        if witnesses:
            out.append(Amec(mec=mec, witnessed_pairs=witnesses))
    return out


def bscc_accepting(bscc: Iterable, d: Dra) -> bool:
    """True iff some Rabin pair accepts: the BSCC misses S x Fin_i and meets
    S x Inf_i."""
    qs = {q for (_, q) in bscc}
    return any(not (qs & fin) and (qs & inf) for fin, inf in d.pairs)
