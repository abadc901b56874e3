"""Shared test utilities: an LTL-on-lasso-word evaluator used as the oracle
for automaton fixtures, random model/chain/automaton generators, and small
simulation helpers.

The LTL evaluator is independent of the package: it works directly on
ultimately-periodic words by least-fixpoint iteration, so it can vouch for
the shipped HOA files.
"""

from __future__ import annotations

import numpy as np

from ssltl.hoa import Dra, letters_of
from ssltl.model import Lmc, Lmdp, validate_lmc, validate_lmdp


# ---------------------------------------------------------------------------
# LTL on lasso words
# ---------------------------------------------------------------------------
# Formulas are nested tuples:
#   ("true",), ("ap", name), ("not", f), ("and", f, g), ("or", f, g),
#   ("X", f), ("U", f, g), ("F", f), ("G", f)

def ltl_holds(formula, prefix, loop):
    """Truth of ``formula`` at position 0 of the word prefix . loop^omega.

    Positions 0..len(prefix)+len(loop)-1 with the successor of the last
    position wrapping to len(prefix).  U is evaluated as a least fixpoint of
    its one-step unfolding, which converges within N sweeps on the lasso.
    """
    word = list(prefix) + list(loop)
    n = len(word)
    assert len(loop) >= 1

    def succ(i):
        return i + 1 if i + 1 < n else len(prefix)

    def ev(f):
        op = f[0]
        if op == "true":
            return [True] * n
        if op == "ap":
            return [f[1] in word[i] for i in range(n)]
        if op == "not":
            sub = ev(f[1])
            return [not v for v in sub]
        if op == "and":
            a, b = ev(f[1]), ev(f[2])
            return [x and y for x, y in zip(a, b)]
        if op == "or":
            a, b = ev(f[1]), ev(f[2])
            return [x or y for x, y in zip(a, b)]
        if op == "X":
            sub = ev(f[1])
            return [sub[succ(i)] for i in range(n)]
        if op == "F":
            return ev(("U", ("true",), f[1]))
        if op == "G":
            return ev(("not", ("U", ("true",), ("not", f[1]))))
        if op == "U":
            a, b = ev(f[1]), ev(f[2])
            vals = [False] * n
            for _ in range(n + 1):
                changed = False
                for i in reversed(range(n)):
                    nv = b[i] or (a[i] and vals[succ(i)])
                    if nv != vals[i]:
                        vals[i] = nv
                        changed = True
                if not changed:
                    break
            return vals
        raise ValueError(f"unknown operator {op!r}")

    return ev(formula)[0]


def dra_accepts(d: Dra, prefix, loop):
    """Exact acceptance of the lasso word by the automaton: run until the
    (loop position, node) pair repeats, collect the recurring node set."""
    def step(q, letter):
        return d.delta[(q, frozenset(letter) & frozenset(d.alphabet))]

    q = d.initial
    for letter in prefix:
        q = step(q, letter)
    seen = {}
    trace = []
    pos = 0
    while (pos, q) not in seen:
        seen[(pos, q)] = len(trace)
        trace.append(q)
        q = step(q, loop[pos])
        pos = (pos + 1) % len(loop)
    cycle = set(trace[seen[(pos, q)]:])
    return any(not (cycle & fin) and (cycle & inf) for fin, inf in d.pairs)


def random_lasso(rng, ap, max_prefix=5, max_loop=5):
    letters = letters_of(ap)
    prefix = [letters[rng.integers(0, len(letters))]
              for _ in range(int(rng.integers(0, max_prefix + 1)))]
    loop = [letters[rng.integers(0, len(letters))]
            for _ in range(int(rng.integers(1, max_loop + 1)))]
    return prefix, loop


# ---------------------------------------------------------------------------
# Random structures
# ---------------------------------------------------------------------------

def random_irreducible_lmc(rng, n_states, ap=("p", "r")) -> Lmc:
    """Strictly positive kernel, hence irreducible."""
    states = tuple(f"s{i}" for i in range(n_states))
    rows = {}
    for s in states:
        raw = rng.random(n_states) + 0.05
        raw /= raw.sum()
        rows[s] = {states[j]: float(raw[j]) for j in range(n_states)}
    labels = {s: frozenset(p for p in ap if rng.random() < 0.5) for s in states}
    return validate_lmc(Lmc(states=states, rows=rows, initial=states[0],
                            labels=labels, ap=tuple(ap)))


def random_dra(rng, n_nodes, ap=("p", "r"), n_pairs=1) -> Dra:
    nodes = tuple(f"q{i}" for i in range(n_nodes))
    delta = {}
    for q in nodes:
        for letter in letters_of(ap):
            delta[(q, letter)] = nodes[int(rng.integers(0, n_nodes))]
    pairs = []
    for _ in range(n_pairs):
        fin = frozenset(q for q in nodes if rng.random() < 0.25)
        inf = frozenset(q for q in nodes if rng.random() < 0.5)
        if not inf:
            inf = frozenset([nodes[int(rng.integers(0, n_nodes))]])
        pairs.append((fin, inf))
    return Dra(nodes=nodes, initial=nodes[0], alphabet=tuple(ap), delta=delta,
               pairs=tuple(pairs))


def random_lmdp(rng, n_states, n_actions, ap=("p",), det_prob=0.5) -> Lmdp:
    """Small random MDP mixing deterministic and dense rows."""
    states = tuple(f"s{i}" for i in range(n_states))
    actions = tuple(f"a{i}" for i in range(n_actions))
    trans = {}
    for s in states:
        for a in actions:
            if rng.random() < det_prob:
                target = states[int(rng.integers(0, n_states))]
                trans[(s, a)] = {target: 1.0}
            else:
                raw = rng.random(n_states) + 0.05
                raw /= raw.sum()
                trans[(s, a)] = {states[j]: float(raw[j])
                                 for j in range(n_states)}
    labels = {s: frozenset(p for p in ap if rng.random() < 0.5)
              for s in states}
    reward = {}
    for (s, a), row in trans.items():
        r = float(rng.integers(0, 2))
        if r:
            for s2 in row:
                reward[(s, a, s2)] = r
    m = Lmdp(states=states, actions=actions,
             enabled={s: actions for s in states}, trans=trans, reward=reward,
             ap=tuple(ap), labels=labels, initial=states[0])
    return validate_lmdp(m)


def random_multichain(rng, max_states=20) -> Lmc:
    """A chain with 1-3 self-loop-heavy BSCCs plus transient states feeding
    them; self loops keep every BSCC aperiodic, so tail-averaged power
    iteration converges geometrically."""
    k = int(rng.integers(1, 4))
    sizes = [int(rng.integers(1, 4)) for _ in range(k)]
    n_trans = int(rng.integers(1, max(2, max_states - sum(sizes))))
    n = sum(sizes) + n_trans
    states = tuple(f"s{i}" for i in range(n))
    rows = {}
    start = 0
    bscc_members = []
    for size in sizes:
        members = states[start:start + size]
        bscc_members.append(members)
        for s in members:
            raw = rng.random(size) + 0.2
            raw[members.index(s)] += 1.0  # self-loop weight
            raw /= raw.sum()
            rows[s] = {members[j]: float(raw[j]) for j in range(size)}
        start += size
    transient = states[start:]
    for i, s in enumerate(transient):
        # Mass onto later transient states and all BSCCs, never closing a
        # transient cycle with probability 1.
        targets = list(transient[i + 1:]) + [m[0] for m in bscc_members]
        raw = rng.random(len(targets)) + 0.05
        raw /= raw.sum()
        rows[s] = {targets[j]: float(raw[j]) for j in range(len(targets))}
    initial = transient[0] if len(transient) else states[0]
    return validate_lmc(Lmc(states=states, rows=rows, initial=initial))


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def power_iteration_limit(chain, beta=None, burn_in=2000, window=200):
    """Tail-averaged power iteration: average of beta T^n over the last
    ``window`` steps before ``burn_in``.  Exact for aperiodic BSCCs up to
    geometric mixing error; the window also averages out short periods."""
    states = list(chain.states)
    idx = {s: i for i, s in enumerate(states)}
    t = np.zeros((len(states), len(states)))
    for s in states:
        for s2, p in chain.rows[s].items():
            t[idx[s], idx[s2]] = p
    x = np.zeros(len(states))
    if beta is None:
        x[idx[chain.initial]] = 1.0
    else:
        for s, mass in beta.items():
            x[idx[s]] = mass
    acc = np.zeros_like(x)
    for step in range(burn_in):
        x = x @ t
        if step >= burn_in - window:
            acc += x
    acc /= window
    return {s: float(acc[idx[s]]) for s in states}


def simulate_steps(chain, n_steps, rng, key_order=None):
    """Sample a trajectory; successors are ordered by ``key_order`` (defaults
    to the chain's state order) so that two chains with corresponding rows
    produce corresponding paths from equal uniform draws."""
    if key_order is None:
        key_order = {s: i for i, s in enumerate(chain.states)}
    path = [chain.initial]
    cur = chain.initial
    for _ in range(n_steps):
        row = sorted(chain.rows[cur].items(), key=lambda kv: key_order[kv[0]])
        u = rng.random()
        total = 0.0
        nxt = row[-1][0]
        for s2, p in row:
            total += p
            if u < total:
                nxt = s2
                break
        path.append(nxt)
        cur = nxt
    return path


# ---------------------------------------------------------------------------
# Reconstructed fixtures
# ---------------------------------------------------------------------------

def mirrored_bscc_fixture():
    """A 9-state product-shaped chain with two identical 4-state BSCCs and a
    transient start splitting mass 1/2 each way, together with the 3-state
    chain it aggregates to.

    Within each BSCC the copies of s1 carry stationary mass 1/3 and the
    copies of s2 carry 1/6, so the limiting distribution from the transient
    start is 1/6 per (s1, .) state and 1/12 per (s2, .) state, and the class
    sums give (0, 2/3, 1/3).
    """
    from ssltl.product import ProductLmc

    half = 0.5
    t0 = ("s0", "q0")
    rows = {
        t0: {("s1", "q0"): half, ("s1", "q2"): half},
        # first BSCC over automaton nodes q0, q1
        ("s1", "q0"): {("s1", "q1"): half, ("s2", "q0"): half},
        ("s1", "q1"): {("s1", "q0"): half, ("s2", "q1"): half},
        ("s2", "q0"): {("s1", "q1"): 1.0},
        ("s2", "q1"): {("s1", "q0"): 1.0},
        # second BSCC over automaton nodes q2, q3
        ("s1", "q2"): {("s1", "q3"): half, ("s2", "q2"): half},
        ("s1", "q3"): {("s1", "q2"): half, ("s2", "q3"): half},
        ("s2", "q2"): {("s1", "q3"): 1.0},
        ("s2", "q3"): {("s1", "q2"): 1.0},
    }
    states = (t0,
              ("s1", "q0"), ("s1", "q1"), ("s1", "q2"), ("s1", "q3"),
              ("s2", "q0"), ("s2", "q1"), ("s2", "q2"), ("s2", "q3"))
    product = ProductLmc(states=states, rows=rows, initial=t0)

    original = Lmc(
        states=("s0", "s1", "s2"),
        rows={"s0": {"s1": 1.0},
              "s1": {"s1": 0.5, "s2": 0.5},
              "s2": {"s1": 1.0}},
        initial="s0")
    return product, original


def six_state_until_lmdp() -> Lmdp:
    """Six-state deterministic LMDP with labels b on s1/s2 and a on s3/s4;
    paired with the (F a) U b automaton its product has a unique accepting
    MEC, and the policy s0->a2, s3->a1, s4->a2, s2->a3 is trapped in it."""
    states = tuple(f"s{i}" for i in range(6))
    actions = ("a1", "a2", "a3")
    det = {
        "s0": {"a1": "s1", "a2": "s3", "a3": "s0"},
        "s1": {"a1": "s2", "a2": "s0", "a3": "s1"},
        "s2": {"a1": "s1", "a2": "s0", "a3": "s2"},
        "s3": {"a1": "s4", "a2": "s0", "a3": "s3"},
        "s4": {"a1": "s3", "a2": "s2", "a3": "s4"},
        "s5": {"a1": "s5", "a2": "s5", "a3": "s5"},
    }
    trans = {(s, a): {t: 1.0} for s, row in det.items() for a, t in row.items()}
    labels = {"s0": frozenset(), "s1": frozenset(["b"]), "s2": frozenset(["b"]),
              "s3": frozenset(["a"]), "s4": frozenset(["a"]),
              "s5": frozenset()}
    return validate_lmdp(Lmdp(
        states=states, actions=actions,
        enabled={s: actions for s in states}, trans=trans, reward={},
        ap=("a", "b"), labels=labels, initial="s0"))
