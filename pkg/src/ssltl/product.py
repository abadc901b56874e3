"""Product construction: model x automaton MDP, policy-induced chains, and
aggregation of product chains back to model-state chains."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ssltl.errors import LumpabilityError, ModelError, PolicyError
from ssltl.hoa import Dra, dra_step
from ssltl.model import Lmc, Lmdp

LUMP_ROW_TOL = 1e-12


@dataclass(frozen=True)
class ProductLmdp:
    """Reachable fragment of the synchronized product.  States are (s, q)
    pairs; the automaton tracks q' = delta(q, L(s')) on every transition."""

    model: Lmdp
    dra: Dra
    states: tuple
    initial: tuple
    trans: Mapping     # ((s, q), a) -> {(s', q'): p}
    edges: tuple       # ((s, q), (s', q')) pairs with positive mass, sorted
    state_pos: Mapping = field(repr=False, default_factory=dict)

    def enabled_actions(self, sq) -> tuple:
        return self.model.enabled[sq[0]]


def build_product(m: Lmdp, d: Dra) -> ProductLmdp:
    """Materialize only the states reachable from (s0, delta(q0, L(s0)))."""
    q_init = dra_step(d, d.initial, m.letter(m.initial, d.alphabet))
    initial = (m.initial, q_init)

    trans: dict = {}
    seen = {initial}
    frontier = [initial]
    edge_set = set()
    while frontier:
        s, q = frontier.pop()
        for a in m.enabled[s]:
            row: dict = {}
            for s2, p in m.trans[(s, a)].items():
                if p <= 0.0:
                    continue
                q2 = dra_step(d, q, m.letter(s2, d.alphabet))
                row[(s2, q2)] = row.get((s2, q2), 0.0) + p
                edge_set.add(((s, q), (s2, q2)))
                if (s2, q2) not in seen:
                    seen.add((s2, q2))
                    frontier.append((s2, q2))
            trans[((s, q), a)] = row

    s_pos = {s: i for i, s in enumerate(m.states)}
    q_pos = {q: i for i, q in enumerate(d.nodes)}
    states = tuple(sorted(seen, key=lambda sq: (s_pos[sq[0]], q_pos[sq[1]])))
    state_pos = {sq: i for i, sq in enumerate(states)}
    edges = tuple(sorted(edge_set,
                         key=lambda e: (state_pos[e[0]], state_pos[e[1]])))
    return ProductLmdp(model=m, dra=d, states=states, initial=initial,
                       trans=trans, edges=edges, state_pos=state_pos)


@dataclass(frozen=True)
class ProductLmc:
    """A chain over product states; rows are row-stochastic."""

    states: tuple
    rows: Mapping
    initial: tuple
    model: Optional[Lmdp] = None


def product_chain(c: Lmc, d: Dra) -> ProductLmc:
    """Product of a labeled chain with an automaton (no actions involved)."""
    def letter(s):
        return frozenset(c.labels.get(s, frozenset())) & frozenset(d.alphabet)

    initial = (c.initial, dra_step(d, d.initial, letter(c.initial)))
    rows: dict = {}
    seen = {initial}
    frontier = [initial]
    while frontier:
        s, q = frontier.pop()
        row: dict = {}
        for s2, p in c.rows[s].items():
            if p <= 0.0:
                continue
            q2 = dra_step(d, q, letter(s2))
            row[(s2, q2)] = row.get((s2, q2), 0.0) + p
            if (s2, q2) not in seen:
                seen.add((s2, q2))
                frontier.append((s2, q2))
        rows[(s, q)] = row

    s_pos = {s: i for i, s in enumerate(c.states)}
    q_pos = {q: i for i, q in enumerate(d.nodes)}
    states = tuple(sorted(seen, key=lambda sq: (s_pos[sq[0]], q_pos[sq[1]])))
    return ProductLmc(states=states, rows=rows, initial=initial)


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Policy:
    """Deterministic map from product states to actions."""

    choice: Mapping

    def action(self, sq):
        try:
            return self.choice[sq]
        except KeyError:
            raise PolicyError(f"policy has no entry for product state {sq!r}")


def policy_to_json(pi: Policy) -> dict:
    return {"policy": [{"s": s, "q": q, "action": a}
                       for (s, q), a in sorted(pi.choice.items())]}


def policy_from_json(doc: dict) -> Policy:
    try:
        entries = doc["policy"]
        choice = {(e["s"], e["q"]): e["action"] for e in entries}
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed policy file: {exc}") from exc
    return Policy(choice=choice)


def save_policy(pi: Policy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_to_json(pi), fh, indent=2)
        fh.write("\n")


def load_policy(path) -> Policy:
    with open(path, "r", encoding="utf-8") as fh:
        return policy_from_json(json.load(fh))


def induce_chain(p: ProductLmdp, pi: Policy) -> ProductLmc:
    """Fix the policy: row(s, q) = trans((s, q), pi(s, q)), restricted to the
    states reachable under the policy."""
    rows: dict = {}
    seen = {p.initial}
    frontier = [p.initial]
    while frontier:
        sq = frontier.pop()
        a = pi.action(sq)
        if a not in p.model.enabled[sq[0]]:
            raise PolicyError(
                f"policy picks {a!r} at {sq!r}, not enabled for {sq[0]!r}")
        row = p.trans[(sq, a)]
        rows[sq] = dict(row)
        for t in row:
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    states = tuple(sq for sq in p.states if sq in seen)
    return ProductLmc(states=states, rows=rows, initial=p.initial,
                      model=p.model)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate(c: ProductLmc) -> Lmc:
    """Collapse classes [s] = {(s, q)} to an original-state chain.

    Each class row is computed from a representative by summing over target
    classes; representative-independence is asserted (all members must give
    equal rows within 1e-12), turning ordinary lumpability into a runtime
    check rather than a trusted fact.
    """
    classes: dict = {}
    for sq in c.states:
        classes.setdefault(sq[0], []).append(sq)

    if c.model is not None:
        order = [s for s in c.model.states if s in classes]
    else:
        order = sorted(classes)

    rows: dict = {}
    for s in order:
        members = classes[s]
        lumped_rows = []
        for member in members:
            lumped: dict = {}
            for (s2, _), p in c.rows[member].items():
                lumped[s2] = lumped.get(s2, 0.0) + p
            lumped_rows.append(lumped)
        base = lumped_rows[0]
        for other, member in zip(lumped_rows[1:], members[1:]):
            keys = set(base) | set(other)
            for k in keys:
                if abs(base.get(k, 0.0) - other.get(k, 0.0)) > LUMP_ROW_TOL:
                    raise LumpabilityError(
                        f"class [{s}] rows differ between representatives "
                        f"{members[0]!r} and {member!r} at target {k!r}: "
                        f"{base.get(k, 0.0)!r} vs {other.get(k, 0.0)!r}")
        rows[s] = base

    labels = {}
    ap = ()
    if c.model is not None:
        labels = {s: c.model.labels.get(s, frozenset()) for s in order}
        ap = c.model.ap
    return Lmc(states=tuple(order), rows=rows, initial=c.initial[0],
               labels=labels, ap=ap)
