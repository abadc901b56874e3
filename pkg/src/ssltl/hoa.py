"""HOA v1 ingestion for deterministic, complete, state-based Rabin automata.

Supported subset: explicit edge labels (Boolean formulas over AP indices),
``acc-name: Rabin k`` or an acceptance formula of the shape
``(Fin(0) & Inf(1)) | (Fin(2) & Inf(3)) | ...``.  Transition-based acceptance
and implicit edges are rejected.  Alphabets are small here (at most 2^4
letters in every shipped automaton), so transition functions are expanded to
explicit letters rather than kept symbolic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping

from ssltl.errors import HoaError


@dataclass(frozen=True)
class Dra:
    """Deterministic complete Rabin automaton.

    ``delta`` is total over nodes x letters (letters are frozensets of AP
    names); ``pairs`` holds (fin, inf) node sets: a run accepts for pair i iff
    it visits fin_i finitely often and inf_i infinitely often.
    """

    nodes: tuple
    initial: str
    alphabet: tuple
    delta: Mapping[tuple, str]
    pairs: tuple

    def letters(self):
        """All 2^|AP| letters in a fixed order (subset bitmask over ap order)."""
        return letters_of(self.alphabet)

    def inf_union(self) -> frozenset:
        out = frozenset()
        for _, inf in self.pairs:
            out |= inf
        return out


def letters_of(alphabet: Iterable[str]):
    alphabet = tuple(alphabet)
    out = []
    for mask in range(1 << len(alphabet)):
        out.append(frozenset(alphabet[i] for i in range(len(alphabet))
                             if mask >> i & 1))
    return tuple(out)


def dra_step(d: Dra, q: str, letter: Iterable[str]) -> str:
    """The unique successor of ``q`` on ``letter`` (restricted to the
    automaton's alphabet; foreign propositions read as false)."""
    key = frozenset(letter) & frozenset(d.alphabet)
    return d.delta[(q, key)]


# ---------------------------------------------------------------------------
# Edge-label formulas over AP indices
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"\s*(\d+|[tf]|[!&|()])")


def _parse_label_expr(text: str):
    """Parse a HOA label expression into a closure letter -> bool, where the
    letter is a set of AP indices."""
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise HoaError(f"bad label expression {text!r}")
        tokens.append(m.group(1))
        pos = m.end()
    tokens.append(None)

    idx = [0]

    def peek():
        return tokens[idx[0]]

    def take():
        tok = tokens[idx[0]]
        idx[0] += 1
        return tok

    def parse_or():
        node = parse_and()
        while peek() == "|":
            take()
            rhs = parse_and()
            lhs = node
            node = (lambda l, a=lhs, b=rhs: a(l) or b(l))
        return node

    def parse_and():
        node = parse_unary()
        while peek() == "&":
            take()
            rhs = parse_unary()
            lhs = node
            node = (lambda l, a=lhs, b=rhs: a(l) and b(l))
        return node

    def parse_unary():
        tok = take()
        if tok == "!":
            inner = parse_unary()
            return lambda l, f=inner: not f(l)
        if tok == "(":
            inner = parse_or()
            if take() != ")":
                raise HoaError(f"unbalanced parenthesis in label {text!r}")
            return inner
        if tok == "t":
            return lambda l: True
        if tok == "f":
            return lambda l: False
        if tok is not None and tok.isdigit():
            return lambda l, i=int(tok): i in l
        raise HoaError(f"unexpected token {tok!r} in label {text!r}")

    fn = parse_or()
    if peek() is not None:
        raise HoaError(f"trailing tokens in label {text!r}")
    return fn


# ---------------------------------------------------------------------------
# Acceptance condition
# ---------------------------------------------------------------------------

_ACC_ATOM_RE = re.compile(r"(Fin|Inf)\s*\(\s*(\d+)\s*\)")


def _parse_rabin_acceptance(formula: str, n_sets: int) -> int:
    """Validate a Rabin-shaped acceptance formula and return the pair count.

    Expected shape: disjunction over i of (Fin(2i) & Inf(2i+1)).
    """
    disjuncts = [d.strip() for d in formula.split("|")]
    pairs = []
    for d in disjuncts:
        atoms = _ACC_ATOM_RE.findall(d)
        stripped = _ACC_ATOM_RE.sub("", d)
        if stripped.strip(" ()&") != "":
            raise HoaError(f"unsupported acceptance shape: {formula!r}")
        if len(atoms) != 2:
            raise HoaError(f"unsupported acceptance shape: {formula!r}")
        kinds = {a[0]: int(a[1]) for a in atoms}
        if set(kinds) != {"Fin", "Inf"}:
            raise HoaError(f"unsupported acceptance shape: {formula!r}")
        pairs.append((kinds["Fin"], kinds["Inf"]))
    for i, (fin, inf) in enumerate(pairs):
        if fin != 2 * i or inf != 2 * i + 1:
            raise HoaError(
                f"acceptance sets must be numbered Fin(2i) & Inf(2i+1): {formula!r}")
    if n_sets != 2 * len(pairs):
        raise HoaError(
            f"acceptance declares {n_sets} sets but formula uses {2 * len(pairs)}")
    return len(pairs)


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

_STATE_RE = re.compile(r"State:\s*(\d+)\s*(?:\"[^\"]*\"\s*)?(?:\{([\d\s]*)\})?\s*$")
_EDGE_RE = re.compile(r"\[(.*)\]\s*(\d+)\s*(\{[\d\s]*\})?\s*$")


def parse_hoa(text: str) -> Dra:
    header: dict = {}
    lines = [ln.strip() for ln in text.splitlines()]
    body_at = None
    for i, ln in enumerate(lines):
        if ln == "--BODY--":
            body_at = i
            break
        if not ln or ln.startswith("/*"):
            continue
        if ":" in ln:
            key, _, val = ln.partition(":")
            header.setdefault(key.strip(), val.strip())
    if body_at is None:
        raise HoaError("missing --BODY-- marker")

    if header.get("HOA") != "v1":
        raise HoaError(f"unsupported HOA version {header.get('HOA')!r}")
    try:
        n_states = int(header["States"])
        start = int(header["Start"])
    except (KeyError, ValueError) as exc:
        raise HoaError(f"missing or bad States/Start header: {exc}") from exc

    ap_line = header.get("AP")
    if ap_line is None:
        raise HoaError("missing AP header")
    ap_parts = ap_line.split(None, 1)
    n_ap = int(ap_parts[0])
    ap = tuple(re.findall(r'"([^"]*)"', ap_parts[1] if len(ap_parts) > 1 else ""))
    if len(ap) != n_ap:
        raise HoaError(f"AP header declares {n_ap} names, found {len(ap)}")

    acc_line = header.get("Acceptance")
    if acc_line is None:
        raise HoaError("missing Acceptance header")
    acc_parts = acc_line.split(None, 1)
    n_sets = int(acc_parts[0])
    n_pairs = _parse_rabin_acceptance(
        acc_parts[1] if len(acc_parts) > 1 else "", n_sets)
    acc_name = header.get("acc-name")
    if acc_name is not None:
        fields = acc_name.split()
        if fields[0] != "Rabin" or int(fields[1]) != n_pairs:
            raise HoaError(f"acc-name {acc_name!r} does not match Rabin {n_pairs}")
    if n_pairs == 0:
        raise HoaError("automaton has no acceptance pairs")

    # Body: State: headers with membership sets, then labeled edges.
    membership: dict = {i: frozenset() for i in range(n_states)}
    edges: dict = {i: [] for i in range(n_states)}
    current = None
    for ln in lines[body_at + 1:]:
        if not ln or ln.startswith("/*"):
            continue
        if ln == "--END--":
            break
        if ln.startswith("State:"):
            m = _STATE_RE.match(ln)
            if not m:
                raise HoaError(f"cannot parse state header {ln!r}")
            current = int(m.group(1))
            if current >= n_states:
                raise HoaError(f"state {current} out of declared range")
            sets = frozenset(int(x) for x in (m.group(2) or "").split())
            membership[current] = sets
            continue
        m = _EDGE_RE.match(ln)
        if m:
            if current is None:
                raise HoaError(f"edge {ln!r} before any State: header")
            if m.group(3) is not None:
                raise HoaError(
                    f"transition-based acceptance on edge {ln!r} is unsupported")
            edges[current].append((m.group(1), int(m.group(2))))
            continue
        raise HoaError(f"cannot parse body line {ln!r} "
                       "(implicit edges are unsupported)")

    for bad in (i for i in range(n_states) if any(t >= n_states
                                                  for _, t in edges[i])):
        raise HoaError(f"state {bad} has an edge to an undeclared state")

    # Expand edge labels to concrete letters; enforce determinism/completeness.
    nodes = tuple(f"q{i}" for i in range(n_states))
    all_letters = letters_of(ap)
    index_letters = [frozenset(i for i, name in enumerate(ap) if name in letter)
                     for letter in all_letters]
    delta: dict = {}
    for i in range(n_states):
        compiled = [(_parse_label_expr(expr), tgt) for expr, tgt in edges[i]]
        for letter, idx_letter in zip(all_letters, index_letters):
            targets = [tgt for fn, tgt in compiled if fn(idx_letter)]
            if len(targets) > 1:
                raise HoaError(
                    f"state {i} has {len(targets)} edges for letter "
                    f"{sorted(letter)} (non-deterministic)")
            if not targets:
                raise HoaError(
                    f"state {i} has no edge for letter {sorted(letter)} "
                    "(incomplete)")
            delta[(nodes[i], letter)] = nodes[targets[0]]

    pairs = []
    for k in range(n_pairs):
        fin = frozenset(nodes[i] for i in range(n_states)
                        if 2 * k in membership[i])
        inf = frozenset(nodes[i] for i in range(n_states)
                        if 2 * k + 1 in membership[i])
        pairs.append((fin, inf))

    return Dra(nodes=nodes, initial=nodes[start], alphabet=ap, delta=delta,
               pairs=tuple(pairs))


def load_hoa(path) -> Dra:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_hoa(fh.read())


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def to_hoa(d: Dra) -> str:
    """Serialize with one explicit edge per letter; parse(to_hoa(d)) is
    isomorphic to d under the identity node mapping."""
    n = len(d.nodes)
    node_index = {q: i for i, q in enumerate(d.nodes)}
    out = ["HOA: v1", f"States: {n}", f"Start: {node_index[d.initial]}"]
    ap_names = " ".join(f'"{p}"' for p in d.alphabet)
    out.append(f"AP: {len(d.alphabet)}" + (f" {ap_names}" if ap_names else ""))
    out.append(f"acc-name: Rabin {len(d.pairs)}")
    formula = " | ".join(f"(Fin({2 * k}) & Inf({2 * k + 1}))"
                         for k in range(len(d.pairs)))
    if len(d.pairs) == 1:
        formula = f"Fin(0) & Inf(1)"
    out.append(f"Acceptance: {2 * len(d.pairs)} {formula}")
    out.append("--BODY--")
    letters = d.letters()
    for q in d.nodes:
        sets = []
        for k, (fin, inf) in enumerate(d.pairs):
            if q in fin:
                sets.append(2 * k)
            if q in inf:
                sets.append(2 * k + 1)
        suffix = (" {" + " ".join(str(x) for x in sorted(sets)) + "}") if sets else ""
        out.append(f"State: {node_index[q]}{suffix}")
        for letter in letters:
            if not d.alphabet:
                expr = "t"
            else:
                expr = " & ".join(
                    ("" if d.alphabet[i] in letter else "!") + str(i)
                    for i in range(len(d.alphabet)))
            out.append(f"[{expr}] {node_index[d.delta[(q, letter)]]}")
    out.append("--END--")
    return "\n".join(out) + "\n"


def save_hoa(d: Dra, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_hoa(d))
