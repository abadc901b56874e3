"""Independent verification oracle: given (model, automaton, spec, policy),
decide whether the induced original chain is a unichain meeting every
steady-state interval with all long-run behavior accepting; plus an
exhaustive synthesizer for tiny instances.

This module never touches the optimization layer; it re-derives everything
from the chain itself, so it can act as ground truth for solver results.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ssltl.chain import limiting_distribution, lump_distribution, \
    product_state_partition
from ssltl.errors import EnumerationLimitError
from ssltl.graph import bscc_accepting, bsccs
from ssltl.hoa import Dra
from ssltl.model import Lmdp, SsLtlSpec, labeled_subset
from ssltl.product import Policy, ProductLmdp, build_product, induce_chain

SS_BOUND_TOL = 1e-6


@dataclass(frozen=True)
class SsResult:
    formula: str
    lower: float
    upper: float
    mass: float
    ok: bool


@dataclass(frozen=True)
class VerificationReport:
    deterministic: bool
    product_bscc_sizes: tuple
    rabin_ok: tuple
    shared_state: Optional[str]
    unichain: bool
    ss_results: tuple
    product_distribution: dict
    aggregate_distribution: dict
    verdict: bool

    def to_json(self) -> dict:
        return {
            "deterministic": self.deterministic,
            "product_bsccs": {"count": len(self.product_bscc_sizes),
                              "sizes": list(self.product_bscc_sizes)},
            "rabin_ok": list(self.rabin_ok),
            "shared_state": self.shared_state,
            "unichain": self.unichain,
            "ss": [{"formula": r.formula, "lower": r.lower, "upper": r.upper,
                    "mass": r.mass, "ok": r.ok} for r in self.ss_results],
            "product_distribution": [
                {"s": s, "q": q, "p": p}
                for (s, q), p in sorted(self.product_distribution.items())],
            "aggregate_distribution": [
                {"s": s, "p": p}
                for s, p in sorted(self.aggregate_distribution.items())],
            "verdict": self.verdict,
        }


def verify_policy(m: Lmdp, d: Dra, spec: SsLtlSpec, pi: Policy,
                  product: Optional[ProductLmdp] = None) -> VerificationReport:
    """Induce the product chain, decompose its BSCCs, check Rabin acceptance
    of every reachable BSCC, the shared-original-state condition (which makes
    the aggregated chain a unichain), and each steady-state interval on the
    lumped limiting distribution."""
    p = product if product is not None else build_product(m, d)
    chain = induce_chain(p, pi)
    dec = bsccs(chain)

    # induce_chain restricts to policy-reachable states, so every BSCC here
    # is reachable; absorption into their union has probability one.
    rabin_ok = tuple(bscc_accepting(b, d) for b in dec.bsccs)

    shared_state = None
    for s in m.states:
        if all(any(sq[0] == s for sq in b) for b in dec.bsccs):
            shared_state = s
            break
    unichain = shared_state is not None

    dist = limiting_distribution(chain)
    lumped_full = lump_distribution(dist, product_state_partition(chain.states))
    aggregate = {s: lumped_full.get(s, 0.0) for s in m.states}

    ss_results = []
    for interval in spec.ss:
        member = labeled_subset(m, interval.formula)
        mass = sum(aggregate[s] for s in member)
        ok = (interval.lower - SS_BOUND_TOL <= mass
              <= interval.upper + SS_BOUND_TOL)
        ss_results.append(SsResult(formula=interval.source,
                                   lower=interval.lower,
                                   upper=interval.upper, mass=mass, ok=ok))

    verdict = (all(rabin_ok) and unichain
               and all(r.ok for r in ss_results))
    return VerificationReport(
        deterministic=True,
        product_bscc_sizes=tuple(len(b) for b in dec.bsccs),
        rabin_ok=rabin_ok,
        shared_state=shared_state,
        unichain=unichain,
        ss_results=tuple(ss_results),
        product_distribution=dist,
        aggregate_distribution=aggregate,
        verdict=verdict)


def brute_force_synth(m: Lmdp, d: Dra, spec: SsLtlSpec,
                      max_states: int = 12,
                      max_actions: int = 3) -> Optional[Policy]:
    """Exhaustive search over deterministic product policies.

    Enumerates assignments over policy-reachable states only (states never
    reached under the partial choice cannot influence the verdict), in action
    order at each decision point, visiting decision states in product order;
    unreached states are completed with their first enabled action.  The
    first verifying policy under this deterministic schedule is returned.
    """
    p = build_product(m, d)
    if len(p.states) > max_states:
        raise EnumerationLimitError(
            f"{len(p.states)} reachable product states exceed the "
            f"enumeration bound {max_states}")
    if any(len(m.enabled[s]) > max_actions for s in m.states):
        raise EnumerationLimitError(
            f"an action set exceeds the enumeration bound {max_actions}")

    order = {sq: i for i, sq in enumerate(p.states)}

    def closure(choice):
        """Reachable set under the partial assignment; returns (frontier
        state needing a decision, reachable set)."""
        seen = {p.initial}
        stack = [p.initial]
        pending = None
        while stack:
            sq = stack.pop()
            a = choice.get(sq)
            if a is None:
                if pending is None or order[sq] < order[pending]:
                    pending = sq
                continue
            for t, prob in p.trans[(sq, a)].items():
                if prob > 0.0 and t not in seen:
                    seen.add(t)
                    stack.append(t)
        return pending, seen

    choice: dict = {}

    def search() -> Optional[Policy]:
        pending, _ = closure(choice)
        if pending is None:
            full = dict(choice)
            for sq in p.states:
                if sq not in full:
                    full[sq] = m.enabled[sq[0]][0]
            pi = Policy(choice=full)
            report = verify_policy(m, d, spec, pi, product=p)
            return pi if report.verdict else None
        for a in m.enabled[pending[0]]:
            choice[pending] = a
            found = search()
            if found is not None:
                return found
            del choice[pending]
        return None

    return search()
