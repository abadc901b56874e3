"""Mixed-integer program over the product MDP: occupation measures, policy
binaries, reachability flows, and the accepting-component indicator system;
LP-file export, external-solver driving, and policy extraction.

Solver interaction is file-based: the program is written in CPLEX LP format
and handed to whatever command template is configured (``{lp}`` and ``{sol}``
placeholders), never a linked library.  Solution files in either a generic
``name value`` layout or the index-prefixed column layout written by CBC are
understood.
"""

from __future__ import annotations

import os
import shlex
import shutil
import subprocess
import sys
import tempfile
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ssltl.errors import NoAcceptingStructureError, PolicyError, SolverError
from ssltl.model import SsLtlSpec, labeled_subset
from ssltl.product import Policy, ProductLmdp

FEASIBILITY_TOL = 1e-6
POLICY_IDENTITY_TOL = 1e-6
MASS_FLOOR = 1e-8
INTEGRALITY_WARN_BAND = 1e-6


@dataclass(frozen=True)
class IlpConfig:
    """Program knobs.

    ``epsilon`` is the strict-decrease increment of the flow constraints; the
    default shrinks with the product size because the unit of flow injected at
    the initial state must cover one epsilon per flagged state, so a fixed
    epsilon would artificially forbid long reachable chains.  ``acc_eps``
    relaxes the strict positivity of the acceptance-mass constraint, which is
    not expressible in a MILP.
    """

    epsilon: Optional[float] = None
    acc_eps: float = 1e-4
    flow_ratio: float = 2.0
    objective: str = "expected_reward"

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.acc_eps <= 0:
            raise ValueError("acc_eps must be positive")
        if self.flow_ratio < 1:
            raise ValueError("flow_ratio must be >= 1")
        if self.objective not in ("expected_reward", "feasibility"):
            raise ValueError(f"unknown objective {self.objective!r}")

    def resolve_epsilon(self, n_product_states: int) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return min(1e-4, 1.0 / (4.0 * max(1, n_product_states)))


@dataclass(frozen=True)
class IlpVar:
    name: str
    lb: float
    ub: float
    binary: bool


@dataclass(frozen=True)
class IlpRow:
    name: str
    terms: tuple          # ((coef, varname), ...)
    sense: str            # "<=", ">=", "="
    rhs: float


@dataclass(frozen=True)
class IlpModel:
    variables: tuple
    objective: tuple      # ((coef, varname), ...)
    rows: tuple
    product: ProductLmdp
    amecs: tuple
    spec: SsLtlSpec
    cfg: IlpConfig
    epsilon: float
    var_index: Mapping = field(repr=False, default_factory=dict)

    def binaries(self):
        return [v.name for v in self.variables if v.binary]


# ---------------------------------------------------------------------------
# Variable naming: indices are positions in the model/automaton orderings.
# ---------------------------------------------------------------------------

class _Names:
    def __init__(self, p: ProductLmdp):
        self.s_pos = {s: i for i, s in enumerate(p.model.states)}
        self.q_pos = {q: i for i, q in enumerate(p.dra.nodes)}
        self.a_pos = {a: i for i, a in enumerate(p.model.actions)}

    def x(self, sq, a):
        return f"x_{self.s_pos[sq[0]]}_{self.q_pos[sq[1]]}_{self.a_pos[a]}"

    def pi(self, sq, a):
        return f"pi_{self.s_pos[sq[0]]}_{self.q_pos[sq[1]]}_{self.a_pos[a]}"

    def f(self, edge):
        (s, q), (s2, q2) = edge
        return (f"f_{self.s_pos[s]}_{self.q_pos[q]}"
                f"_{self.s_pos[s2]}_{self.q_pos[q2]}")

    def isq(self, sq):
        return f"isq_{self.s_pos[sq[0]]}_{self.q_pos[sq[1]]}"

    def i_s(self, s):
        return f"is_{self.s_pos[s]}"

    def ik(self, k):
        return f"ik_{k}"

    def iks(self, k, s):
        return f"iks_{k}_{self.s_pos[s]}"


def build_program(p: ProductLmdp, amecs, spec: SsLtlSpec,
                  cfg: Optional[IlpConfig] = None,
                  allow_no_amecs: bool = False) -> IlpModel:
    """Assemble the full variable/constraint system.

    Raises NoAcceptingStructureError when the accepting-MEC list is empty
    (no accepting behavior exists) unless ``allow_no_amecs`` is set, in which
    case the component-indicator rows that would divide by the number of
    accepting components are omitted.
    """
    cfg = cfg or IlpConfig()
    amecs = tuple(amecs)
    if not amecs and not allow_no_amecs:
        raise NoAcceptingStructureError(
            "product has no accepting maximal end component")

    m = p.model
    d = p.dra
    names = _Names(p)
    eps = cfg.resolve_epsilon(len(p.states))

    sa_pairs = [(sq, a) for sq in p.states for a in m.enabled[sq[0]]]
    in_edges: dict = {sq: [] for sq in p.states}
    out_edges: dict = {sq: [] for sq in p.states}
    for edge in p.edges:
        out_edges[edge[0]].append(edge)
        in_edges[edge[1]].append(edge)

    variables = []
    for sq, a in sa_pairs:
        variables.append(IlpVar(names.x(sq, a), 0.0, 1.0, False))
    for edge in p.edges:
        variables.append(IlpVar(names.f(edge), 0.0, 1.0, False))
    for sq, a in sa_pairs:
        variables.append(IlpVar(names.pi(sq, a), 0.0, 1.0, True))
    for sq in p.states:
        variables.append(IlpVar(names.isq(sq), 0.0, 1.0, True))
    for s in m.states:
        variables.append(IlpVar(names.i_s(s), 0.0, 1.0, True))
    for k in range(len(amecs)):
        variables.append(IlpVar(names.ik(k), 0.0, 1.0, True))
    for k in range(len(amecs)):
        for s in m.states:
            variables.append(IlpVar(names.iks(k, s), 0.0, 1.0, True))

    objective = []
    if cfg.objective == "expected_reward":
        for sq, a in sa_pairs:
            s = sq[0]
            coef = sum(prob * m.reward_value(s, a, s2)
                       for s2, prob in m.trans[(s, a)].items())
            if coef != 0.0:
                objective.append((coef, names.x(sq, a)))

    rows = []

    # (i) occupation balance: inflow of measure equals outflow, per state.
    inflow: dict = {tgt: {} for tgt in p.states}
    for sq, a in sa_pairs:
        name = names.x(sq, a)
        for tgt, prob in p.trans[(sq, a)].items():
            if prob:
                acc = inflow[tgt]
                acc[name] = acc.get(name, 0.0) + prob
    for j, tgt in enumerate(p.states):
        acc = inflow[tgt]
        for a in m.enabled[tgt[0]]:
            name = names.x(tgt, a)
            acc[name] = acc.get(name, 0.0) - 1.0
        terms = tuple((c, v) for v, c in acc.items() if c != 0.0)
        rows.append(IlpRow(f"c_i_{j}", terms, "=", 0.0))

    # (ii) normalization
    rows.append(IlpRow("c_ii_0",
                       tuple((1.0, names.x(sq, a)) for sq, a in sa_pairs),
                       "=", 1.0))

    # (iii) positive measure forces the action: x <= pi
    for j, (sq, a) in enumerate(sa_pairs):
        rows.append(IlpRow(f"c_iii_{j}",
                           ((1.0, names.x(sq, a)), (-1.0, names.pi(sq, a))),
                           "<=", 0.0))

    # (iv) the policy is a point distribution per product state
    for j, sq in enumerate(p.states):
        rows.append(IlpRow(
            f"c_iv_{j}",
            tuple((1.0, names.pi(sq, a)) for a in m.enabled[sq[0]]),
            "=", 1.0))

    # (v) flow capacity: f_e <= sum_a T(e|a) pi_a
    for j, edge in enumerate(p.edges):
        sq, tgt = edge
        terms = [(1.0, names.f(edge))]
        for a in m.enabled[sq[0]]:
            prob = p.trans[(sq, a)].get(tgt, 0.0)
            if prob:
                terms.append((-prob, names.pi(sq, a)))
        rows.append(IlpRow(f"c_v_{j}", tuple(terms), "<=", 0.0))

    # (vi) strict decrease: inflow >= outflow + eps * isq, all but the root
    j = 0
    for sq in p.states:
        if sq == p.initial:
            continue
        terms = [(1.0, names.f(e)) for e in in_edges[sq]]
        terms += [(-1.0, names.f(e)) for e in out_edges[sq]]
        terms.append((-eps, names.isq(sq)))
        rows.append(IlpRow(f"c_vi_{j}", _merge(terms), ">=", 0.0))
        j += 1

    # (vii) incoming flow forces the visit flag
    for j, sq in enumerate(p.states):
        terms = [(1.0, names.f(e)) for e in in_edges[sq]]
        terms.append((-1.0, names.isq(sq)))
        rows.append(IlpRow(f"c_vii_{j}", _merge(terms), "<=", 0.0))

    # (viii) outgoing >= incoming / flow_ratio
    inv = 1.0 / cfg.flow_ratio
    for j, sq in enumerate(p.states):
        terms = [(1.0, names.f(e)) for e in out_edges[sq]]
        terms += [(-inv, names.f(e)) for e in in_edges[sq]]
        rows.append(IlpRow(f"c_viii_{j}", _merge(terms), ">=", 0.0))

    # (ix) no measure on unflagged states
    for j, sq in enumerate(p.states):
        terms = [(1.0, names.x(sq, a)) for a in m.enabled[sq[0]]]
        terms.append((-1.0, names.isq(sq)))
        rows.append(IlpRow(f"c_ix_{j}", tuple(terms), "<=", 0.0))

    # (x) steady-state intervals, one lower and one upper row per operator
    j = 0
    for interval in spec.ss:
        member = labeled_subset(m, interval.formula)
        terms = tuple((1.0, names.x(sq, a)) for sq, a in sa_pairs
                      if sq[0] in member)
        if not terms:
            # no product copy of any member state: pin an explicit zero
            terms = ((0.0, names.x(*sa_pairs[0])),)
        rows.append(IlpRow(f"c_x_{j}", terms, ">=", interval.lower))
        rows.append(IlpRow(f"c_x_{j + 1}", terms, "<=", interval.upper))
        j += 2

    # (xi) accepting mass: strict positivity relaxed to >= acc_eps
    inf_union = d.inf_union()
    terms = tuple((1.0, names.x(sq, a)) for sq, a in sa_pairs
                  if sq[1] in inf_union)
    if not terms:
        terms = ((0.0, names.x(*sa_pairs[0])),)
    rows.append(IlpRow("c_xi_0", terms, ">=", cfg.acc_eps))

    # (xii) component carries measure -> component flag
    for k, amec in enumerate(amecs):
        terms = [(1.0, names.x(sq, a)) for sq in sorted(
            amec.mec.states, key=lambda t: p.state_pos[t])
            for a in m.enabled[sq[0]]]
        terms.append((-1.0, names.ik(k)))
        rows.append(IlpRow(f"c_xii_{k}", tuple(terms), "<=", 0.0))

    # (xiii)/(xiv) per-state component membership flags
    j = 0
    for k, amec in enumerate(amecs):
        copies: dict = {}
        for sq in sorted(amec.mec.states, key=lambda t: p.state_pos[t]):
            copies.setdefault(sq[0], []).append(sq)
        for s in m.states:
            terms = [(1.0, names.iks(k, s))]
            terms += [(-1.0, names.isq(sq)) for sq in copies.get(s, ())]
            rows.append(IlpRow(f"c_xiii_{j}", tuple(terms), "<=", 0.0))
            j += 1
    j = 0
    n_nodes = len(d.nodes)
    for k, amec in enumerate(amecs):
        copies = {}
        for sq in sorted(amec.mec.states, key=lambda t: p.state_pos[t]):
            copies.setdefault(sq[0], []).append(sq)
        for s in m.states:
            terms = [(1.0 / n_nodes, names.isq(sq))
                     for sq in copies.get(s, ())]
            terms.append((-1.0, names.iks(k, s)))
            rows.append(IlpRow(f"c_xiv_{j}", tuple(terms), "<=", 0.0))
            j += 1

    # (xv) shared-state coupling: is - 1 <= sum_k (iks - ik) / |AMEC|
    if amecs:
        inv_k = 1.0 / len(amecs)
        for j, s in enumerate(m.states):
            terms = [(1.0, names.i_s(s))]
            for k in range(len(amecs)):
                terms.append((-inv_k, names.iks(k, s)))
                terms.append((inv_k, names.ik(k)))
            rows.append(IlpRow(f"c_xv_{j}", tuple(terms), "<=", 1.0))

    # (xvi) some shared state exists
    rows.append(IlpRow("c_xvi_0",
                       tuple((1.0, names.i_s(s)) for s in m.states),
                       ">=", 1.0))

    variables = tuple(variables)
    return IlpModel(variables=variables, objective=tuple(objective),
                    rows=tuple(rows), product=p, amecs=amecs, spec=spec,
                    cfg=cfg, epsilon=eps,
                    var_index={v.name: i for i, v in enumerate(variables)})


def _merge(terms):
    acc: dict = {}
    order = []
    for coef, name in terms:
        if name not in acc:
            acc[name] = 0.0
            order.append(name)
        acc[name] += coef
    return tuple((acc[n], n) for n in order if acc[n] != 0.0)


# ---------------------------------------------------------------------------
# LP-file export
# ---------------------------------------------------------------------------

def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _expr(terms) -> str:
    if not terms:
        return "0"
    parts = []
    for i, (coef, name) in enumerate(terms):
        mag = _num(abs(coef))
        if i == 0:
            parts.append(f"-{mag} {name}" if coef < 0 else f"{mag} {name}")
        else:
            parts.append(f"{'-' if coef < 0 else '+'} {mag} {name}")
    return " ".join(parts)


def export_lp(model: IlpModel) -> str:
    anchor = model.variables[0].name  # for rows whose terms all cancelled
    out = ["Maximize"]
    out.append(f" obj: {_expr(model.objective)}")
    out.append("Subject To")
    for row in model.rows:
        expr = _expr(row.terms) if row.terms else f"0 {anchor}"
        out.append(f" {row.name}: {expr} {row.sense} {_num(row.rhs)}")
    out.append("Bounds")
    for v in model.variables:
        if not v.binary:
            out.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    out.append("Binary")
    for v in model.variables:
        if v.binary:
            out.append(f" {v.name}")
    out.append("End")
    return "\n".join(out) + "\n"


def write_lp(model: IlpModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(export_lp(model))


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    """External command template with {lp} and {sol} placeholders."""

    command: str
    timeout: Optional[float] = None


def default_solver_command(solve_time_limit: float = 60.0) -> str:
    """Resolve the solver template: the SSLTL_SOLVER_CMD environment variable
    wins, then a ``highs`` or ``cbc`` binary on PATH, then the bundled
    LP-file backend (which gets an in-solver time budget so plateau instances
    return their incumbent instead of hanging)."""
    env = os.environ.get("SSLTL_SOLVER_CMD")
    if env:
        return env
    if shutil.which("highs"):
        return "highs --solution_file {sol} {lp}"
    if shutil.which("cbc"):
        return "cbc {lp} solve printingOptions all solution {sol}"
    return (f"{sys.executable} -m ssltl.milp_shim {{lp}} {{sol}} "
            f"--time-limit {solve_time_limit:g}")


@dataclass(frozen=True)
class Solution:
    status: str                      # optimal | feasible | infeasible | error
    values: Mapping
    objective: Optional[float]
    solver_output: str = ""

    def value(self, name: str) -> float:
        return self.values.get(name, 0.0)


def parse_solution_text(text: str, varnames) -> tuple:
    """Extract variable assignments from either ``name value`` lines or the
    CBC index-prefixed column layout; returns (values, status_hint)."""
    varnames = set(varnames)
    values: dict = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        tokens = line.replace("**", " ").split()
        if len(tokens) >= 2 and tokens[0] in varnames:
            try:
                values[tokens[0]] = float(tokens[1])
                continue
            except ValueError:
                pass
        if len(tokens) >= 3 and tokens[1] in varnames:
            try:
                int(tokens[0])
                values[tokens[1]] = float(tokens[2])
                continue
            except ValueError:
                pass
    low = text.lower()
    if "infeasible" in low:
        hint = "infeasible"
    elif "unbounded" in low:
        hint = "error"
    elif "optimal" in low:
        hint = "optimal"
    elif "feasible" in low or "stopped" in low or "time limit" in low:
        hint = "feasible"
    else:
        hint = ""
    return values, hint


def solve(model: IlpModel, solver: Optional[SolverConfig] = None,
          keep_files: Optional[str] = None) -> Solution:
    """Write the LP, run the external solver command, parse the solution.

    ``keep_files`` names a directory to keep lp/sol artifacts in; otherwise a
    fresh temporary directory is used and removed.
    """
    if solver is None:
        solver = SolverConfig(command=default_solver_command())

    tmpdir = None
    if keep_files is None:
        tmpdir = tempfile.mkdtemp(prefix="ssltl_")
        workdir = tmpdir
    else:
        os.makedirs(keep_files, exist_ok=True)
        workdir = keep_files
    lp_path = os.path.join(workdir, "model.lp")
    sol_path = os.path.join(workdir, "model.sol")
    write_lp(model, lp_path)

    cmd = solver.command.format(lp=lp_path, sol=sol_path)
    try:
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  text=True, timeout=solver.timeout)
        except FileNotFoundError as exc:
            raise SolverError(f"cannot launch solver: {cmd!r}: {exc}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SolverError(
                f"solver timed out after {solver.timeout}s: {cmd!r}") from exc

        output = (proc.stdout or "") + "\n" + (proc.stderr or "")
        sol_text = ""
        if os.path.exists(sol_path):
            with open(sol_path, "r", encoding="utf-8",
                      errors="replace") as fh:
                sol_text = fh.read()
    finally:
        if tmpdir is not None:
            shutil.rmtree(tmpdir, ignore_errors=True)

    values, hint = parse_solution_text(sol_text, model.var_index)
    if not hint:
        _, hint = parse_solution_text(output, model.var_index)

    if hint == "infeasible":
        return Solution(status="infeasible", values={}, objective=None,
                        solver_output=output)
    if not values:
        if proc.returncode != 0:
            raise SolverError(
                f"solver failed (exit {proc.returncode}) and wrote no "
                f"solution: {output[-2000:]}")
        raise SolverError(f"unparseable solver output: {sol_text[-2000:]!r}")

    status = hint or "feasible"
    objective = sum(coef * values.get(name, 0.0)
                    for coef, name in model.objective)
    return Solution(status=status, values=values, objective=objective,
                    solver_output=output)


# ---------------------------------------------------------------------------
# Policy extraction and solution checking
# ---------------------------------------------------------------------------

def extract_policy(sol: Solution, p: ProductLmdp) -> Policy:
    """Read the policy binaries: the unique action with value > 0.5 at every
    reachable product state.  Where the occupation mass exceeds MASS_FLOOR the
    stationary-policy identity |x - pi * sum_a x| <= 1e-6 is asserted."""
    if sol.status not in ("optimal", "feasible"):
        raise PolicyError(f"cannot extract a policy from status {sol.status!r}")
    names = _Names(p)
    choice = {}
    for sq in p.states:
        acts = p.model.enabled[sq[0]]
        winners = [a for a in acts if sol.value(names.pi(sq, a)) > 0.5]
        if len(winners) != 1:
            raise PolicyError(
                f"no unique policy binary above 0.5 at {sq!r} "
                f"(values {[sol.value(names.pi(sq, a)) for a in acts]})")
        a_star = winners[0]
        slack = 1.0 - sol.value(names.pi(sq, a_star))
        if slack > INTEGRALITY_WARN_BAND:
            warnings.warn(
                f"integrality slack {slack:g} on {names.pi(sq, a_star)}",
                stacklevel=2)
        choice[sq] = a_star

        total = sum(sol.value(names.x(sq, a)) for a in acts)
        if total >= MASS_FLOOR:
            for a in acts:
                indicator = 1.0 if a == a_star else 0.0
                resid = abs(sol.value(names.x(sq, a)) - indicator * total)
                if resid > POLICY_IDENTITY_TOL:
                    raise PolicyError(
                        f"occupation/policy identity violated at {sq!r}, "
                        f"action {a!r}: residual {resid:g}")
    return Policy(choice=choice)


def policy_identity_residual(sol: Solution, p: ProductLmdp, pi: Policy,
                             states) -> float:
    """Max over the given product states and their actions of
    |x_sqa - [a == pi(sq)] * sum_a x_sqa| from the solver assignment."""
    names = _Names(p)
    worst = 0.0
    for sq in states:
        acts = p.model.enabled[sq[0]]
        total = sum(sol.value(names.x(sq, a)) for a in acts)
        for a in acts:
            indicator = 1.0 if pi.choice.get(sq) == a else 0.0
            worst = max(worst,
                        abs(sol.value(names.x(sq, a)) - indicator * total))
    return worst


def check_solution(model: IlpModel, sol: Solution,
                   tol: float = FEASIBILITY_TOL) -> float:
    """Re-evaluate every constraint row; returns the maximum violation."""
    worst = 0.0
    for row in model.rows:
        val = sum(coef * sol.value(name) for coef, name in row.terms)
        if row.sense == "<=":
            viol = val - row.rhs
        elif row.sense == ">=":
            viol = row.rhs - val
        else:
            viol = abs(val - row.rhs)
        worst = max(worst, viol)
    for v in model.variables:
        worst = max(worst, v.lb - sol.value(v.name),
                    sol.value(v.name) - v.ub)
    return worst


def fix_policy(model: IlpModel, pi: Policy) -> IlpModel:
    """Pin the policy binaries to a given deterministic policy (used to ask
    the solver for a feasibility certificate of a known policy)."""
    names = _Names(model.product)
    extra = []
    j = 0
    for sq in model.product.states:
        for a in model.product.model.enabled[sq[0]]:
            want = 1.0 if pi.choice.get(sq) == a else 0.0
            extra.append(IlpRow(f"c_fix_{j}",
                                ((1.0, names.pi(sq, a)),), "=", want))
            j += 1
    return IlpModel(variables=model.variables, objective=model.objective,
                    rows=model.rows + tuple(extra), product=model.product,
                    amecs=model.amecs, spec=model.spec, cfg=model.cfg,
                    epsilon=model.epsilon, var_index=model.var_index)
