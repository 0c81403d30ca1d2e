"""Decision procedures with verified countermodel output.

Three engines and a dispatcher:

* ``s42_sat``   -- rooted S4.2 satisfiability by type elimination; supports
  global side conditions and rigid (world-independent) variables.
* ``pf_sat``    -- two-level search for the bimodal logic: the outer level
  walks truth assignments to the box-p subformulas, the inner level realises
  each assignment as an S4.2 cluster via ``s42_sat``.
* ``gl_sat``    -- the degenerate one-relation variant used for GL.
* ``decide``    -- maps each supported logic onto one of the engines, via the
  conjunction-of-instances reductions where applicable.

Emitted countermodels are re-verified against the kripke primitives before a
verdict leaves this module.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .formula import (
    And, Bot, BoxF, BoxP, Formula, FormulaSet, Imp, Not, Or, Top, Var,
    boxp_bodies, conjoin, dagger, fresh_box_names, is_lf, is_lp,
    phi_set, print_formula, psi_set, subformulas, variables,
)
from .kripke import (
    Frame, Model, check_frame, clusters, eval_formula,
)


class LogicId(Enum):
    GL = "gl"
    S42 = "s4.2"
    S = "s"
    PF = "pf"
    PFOMEGA = "pfomega"
    GLTRIV = "gltriv"

    @classmethod
    def from_string(cls, name: str) -> "LogicId":
        key = name.strip().lower()
        aliases = {
            "gl": cls.GL,
            "s4.2": cls.S42,
            "s42": cls.S42,
            "s": cls.S,
            "pf": cls.PF,
            "pfw": cls.PFOMEGA,
            "pfomega": cls.PFOMEGA,
            "gltriv": cls.GLTRIV,
        }
        if key not in aliases:
            raise ValueError("unknown logic %r" % name)
        return aliases[key]


@dataclass(frozen=True)
class SolverBudget:
    max_memo_entries: int = 1_000_000
    max_type_bits: int = 20          # cap on the per-cluster type space
    wall_seconds: float | None = 300.0


class BudgetExceeded(RuntimeError):
    pass


class _Clock:
    def __init__(self, budget: SolverBudget):
        self.budget = budget
        self.start = time.monotonic()

    def check(self, entries: int = 0) -> None:
        if entries > self.budget.max_memo_entries:
            raise BudgetExceeded("memo table exceeds %d entries"
                                 % self.budget.max_memo_entries)
        wall = self.budget.wall_seconds
        if wall is not None and time.monotonic() - self.start > wall:
            raise BudgetExceeded("wall clock limit of %.1fs exceeded" % wall)


@dataclass(frozen=True)
class Assignment:
    """Claimed truth values for the box-p subformula bodies of the goal."""

    domain: tuple[Formula, ...]
    bits: int

    def true_set(self) -> FormulaSet:
        return FormulaSet(c for i, c in enumerate(self.domain)
                          if (self.bits >> i) & 1)


@dataclass(frozen=True)
class ClusterObligation:
    """What one cluster of the witness tree must realise."""

    assignment: Assignment
    globals_: tuple[Formula, ...]    # hold at every world of the cluster
    local_goals: tuple[Formula, ...]  # hold at the cluster's root


@dataclass(frozen=True)
class Verdict:
    logic: LogicId
    formula: Formula
    status: str                       # "valid" | "invalid" | "budget"
    model: Model | None = None
    world: int | None = None
    certificate_ok: bool | None = None
    # The formula the countermodel actually refutes; differs from ``formula``
    # for the reduction-based logics (PF^omega and S).
    refuted: Formula | None = None

    def to_json(self) -> dict:
        from .kripke import model_to_json
        out: dict = {
            "logic": self.logic.value,
            "formula": print_formula(self.formula),
            "verdict": self.status,
        }
        if self.status == "invalid":
            assert self.model is not None and self.world is not None
            out["countermodel"] = model_to_json(self.model)
            out["world"] = self.world
            out["certificate_ok"] = bool(self.certificate_ok)
            if self.refuted is not None and self.refuted != self.formula:
                out["refuted_formula"] = print_formula(self.refuted)
        return out


# ---------------------------------------------------------------------------
# S4.2 cluster engine

def s42_sat(
    goal: Formula,
    globals_: Iterable[Formula] = (),
    rigid: Mapping[str, bool] | None = None,
    budget: SolverBudget | None = None,
    _clock: _Clock | None = None,
) -> tuple[Model, int] | None:
    """Rooted S4.2 satisfiability for the box-f fragment.

    Searches for a finite reflexive, transitive, upward-directed model with a
    root r such that r satisfies ``goal``, every world satisfies every member
    of ``globals_``, and every identifier in ``rigid`` keeps its mapped truth
    value at every world.  Returns ``(model, root)`` or ``None``.

    Method: propositional types over the subformula closure, with the box-f
    subformulas as free type bits constrained by reflexivity.  A finite
    rooted directed preorder always has a final cluster seen by every world,
    so candidate final clusters are the groups of types sharing a box-set;
    for each internally coherent candidate we eliminate types whose unwitnessed
    diamonds cannot reach a surviving superset group.
    """
    budget = budget or SolverBudget()
    clock = _clock or _Clock(budget)
    clock.check()
    rigid = dict(rigid or {})
    problem = [goal, *globals_]
    for fm in problem:
        if not is_lf(fm):
            raise ValueError("box-f fragment expected, got %s" % fm)

    cl = FormulaSet(x for fm in problem for x in subformulas(fm))
    boxes = [b for b in cl if isinstance(b, BoxF)]
    box_index = {b: i for i, b in enumerate(boxes)}
    occurring = sorted({v for fm in problem for v in variables(fm)})
    free = [v for v in occurring if v not in rigid]
    free_index = {v: i for i, v in enumerate(free)}
    nf, nb = len(free), len(boxes)
    if nf + nb > budget.max_type_bits:
        raise BudgetExceeded("cluster type space needs 2^%d > 2^%d entries"
                             % (nf + nb, budget.max_type_bits))
    total = 1 << (nf + nb)
    idx = np.arange(total, dtype=np.int64)

    cache: dict[Formula, np.ndarray] = {}

    def tt(fm: Formula) -> np.ndarray:
        if fm in cache:
            return cache[fm]
        if isinstance(fm, Var):
            if fm.name in free_index:
                out = ((idx >> free_index[fm.name]) & 1).astype(bool)
            else:
                out = np.full(total, bool(rigid[fm.name]))
        elif isinstance(fm, Top):
            out = np.full(total, True)
        elif isinstance(fm, Bot):
            out = np.full(total, False)
        elif isinstance(fm, Not):
            out = ~tt(fm.sub)
        elif isinstance(fm, And):
            out = tt(fm.left) & tt(fm.right)
        elif isinstance(fm, Or):
            out = tt(fm.left) | tt(fm.right)
        elif isinstance(fm, Imp):
            out = ~tt(fm.left) | tt(fm.right)
        else:  # BoxF: a free type bit, not computed from the body
            out = ((idx >> (nf + box_index[fm])) & 1).astype(bool)
        cache[fm] = out
        return out

    coherent = np.full(total, True)
    for g in problem[1:]:
        coherent &= tt(g)
    for b in boxes:
        coherent &= ~tt(b) | tt(b.sub)   # reflexivity: [f]B -> B inside a type

    raw = np.flatnonzero(coherent)
    if raw.size == 0:
        return None
    boxmask = raw >> nf
    goal_true = tt(goal)[raw]
    sub_false = [(~tt(b.sub))[raw] for b in boxes]

    uniq, first_pos, group_ids = np.unique(boxmask, return_index=True,
                                           return_inverse=True)
    g_count = len(uniq)
    supmat = (uniq[:, None] & uniq[None, :]) == uniq[:, None]  # [h,k]: h subset k
    has_false = np.zeros((max(nb, 1), g_count), dtype=bool)
    for i in range(nb):
        hits = np.bincount(group_ids[sub_false[i]], minlength=g_count)
        has_false[i] = hits > 0
    has_goal = np.bincount(group_ids[goal_true], minlength=g_count) > 0

    bit_of = (uniq[:, None] >> np.arange(max(nb, 1))[None, :]) & 1  # (G, nb)
    missing = ~bit_of.astype(bool)
    valid_final = np.all(~missing[:, :nb] | has_false[:nb].T, axis=1) \
        if nb else np.full(g_count, True)

    for gidx in range(g_count):
        if not valid_final[gidx]:
            continue
        clock.check()
        live = supmat[:, gidx].copy()
        changed = True
        while changed:
            changed = False
            for h in np.flatnonzero(live):
                for i in range(nb):
                    if missing[h, i] and not np.any(live & supmat[h] & has_false[i]):
                        live[h] = False
                        changed = True
                        break
        if not live[gidx]:
            continue  # cannot happen: the final cluster witnesses itself
        ok_pos = goal_true & live[group_ids]
        hits = np.flatnonzero(ok_pos)
        if hits.size == 0:
            continue
        tg = int(hits[0])
        return _s42_build(
            tg, gidx, raw, boxmask, group_ids, first_pos, sub_false,
            live, supmat, missing, free, rigid, nf, goal, list(problem[1:]),
        )
    return None


def _s42_build(tg, gidx, raw, boxmask, group_ids, first_pos, sub_false,
               live, supmat, missing, free, rigid, nf, goal, globals_):
    """Witness closure from the goal type, anchored in the final cluster."""
    order: list[int] = [tg]
    seen = {tg}
    if group_ids[tg] != gidx:
        anchor = int(first_pos[gidx])
        order.append(anchor)
        seen.add(anchor)
    qi = 0
    while qi < len(order):
        p = order[qi]
        qi += 1
        g = int(group_ids[p])
        for i in range(len(sub_false)):
            if not missing[g, i]:
                continue
            if sub_false[i][p]:
                continue  # reflexive self-witness
            cand = sub_false[i] & live[group_ids] & supmat[g][group_ids]
            w = int(np.flatnonzero(cand)[0])
            if w not in seen:
                seen.add(w)
                order.append(w)

    world_of = {p: w for w, p in enumerate(order)}
    n = len(order)
    rel_f = frozenset(
        (world_of[p], world_of[q])
        for p in order for q in order
        if (boxmask[p] & boxmask[q]) == boxmask[p]
    )
    val = []
    rigid_true = frozenset(v for v, b in rigid.items() if b)
    for p in order:
        bits = int(raw[p])
        val.append(frozenset(v for j, v in enumerate(free) if (bits >> j) & 1)
                   | rigid_true)
    model = Model(Frame(n, frozenset(), rel_f), tuple(val))
    root = world_of[tg]

    assert eval_formula(model, root, goal), "s42 engine produced a bad root"
    for g in globals_:
        assert all(eval_formula(model, w, g) for w in range(n)), \
            "s42 engine violated a global side condition"
    return model, root


# ---------------------------------------------------------------------------
# Two-level engine for the bimodal logic

@dataclass
class _PfNode:
    assignment: Assignment
    model: Model
    root: int
    children: dict[int, "_PfNode"]


def pf_sat(goal: Formula, budget: SolverBudget | None = None) -> tuple[Model, int] | None:
    """Search for a finite rooted nice model of ``goal`` whose designated
    world is a rel_f-root element of the rel_p-root cluster.

    Outer level: truth assignments to the box-p bodies P of the goal.  An
    assignment v with obligations O and local goals L is realisable iff the
    cluster problem (L daggered at the root, O daggered globally, proxy
    variables rigidly frozen to v) is S4.2-satisfiable AND for every body C
    claimed false there is a realisable successor assignment that gains
    ``[p]C``, owes the bodies claimed true by v, and contains a world
    falsifying the dagger of C.  True-sets grow strictly along successors,
    which bounds the recursion and yields converse well-foundedness for free.
    """
    budget = budget or SolverBudget()
    clock = _Clock(budget)
    bodies = list(boxp_bodies(goal))
    k = len(bodies)
    if k > 16:
        raise BudgetExceeded("%d distinct box-p bodies" % k)
    fresh = fresh_box_names(goal)
    qname = [fresh[c] for c in bodies]
    dag_body = [dagger(c, fresh) for c in bodies]
    dag_goal = dagger(goal, fresh)
    full = (1 << k) - 1

    memo: dict[tuple[int, int, int], _PfNode | None] = {}

    def realize(bits: int, obits: int, gained: int) -> _PfNode | None:
        key = (bits, obits, gained)
        if key in memo:
            return memo[key]
        clock.check(len(memo))
        assignment = Assignment(tuple(bodies), bits)
        ob = ClusterObligation(
            assignment,
            globals_=tuple(dag_body[i] for i in range(k) if (obits >> i) & 1),
            local_goals=(dag_goal,) if gained < 0 else (Not(BoxF(dag_body[gained])),),
        )
        rigid = {qname[i]: bool((bits >> i) & 1) for i in range(k)}
        res = s42_sat(conjoin(ob.local_goals), ob.globals_, rigid,
                      budget=budget, _clock=clock)
        node: _PfNode | None = None
        if res is not None:
            model, root = res
            children: dict[int, _PfNode] = {}
            ok = True
            for i in range(k):
                if (bits >> i) & 1:
                    continue
                need = bits | (1 << i)
                child = None
                v2 = need
                while True:
                    child = realize(v2, bits, i)
                    if child is not None:
                        break
                    if v2 == full:
                        break
                    v2 = (v2 + 1) | need
                if child is None:
                    ok = False
                    break
                children[i] = child
            if ok:
                node = _PfNode(assignment, model, root, children)
        memo[key] = node
        return node

    for v in range(1 << k):
        node = realize(v, 0, -1)
        if node is not None:
            return _assemble_pf(node, goal, set(qname))
    return None


def _assemble_pf(node: _PfNode, goal: Formula, qnames: set[str]) -> tuple[Model, int]:
    rel_p: set[tuple[int, int]] = set()
    rel_f: set[tuple[int, int]] = set()
    vals: list[frozenset[str]] = []

    def place(nd: _PfNode) -> list[int]:
        base = len(vals)
        fr = nd.model.frame
        for w in range(fr.worlds):
            vals.append(frozenset(v for v in nd.model.valuation[w]
                                  if v not in qnames))
        for a, b in fr.rel_f:
            rel_f.add((base + a, base + b))
        own = list(range(base, base + fr.worlds))
        desc: list[int] = []
        for i in sorted(nd.children):
            desc += place(nd.children[i])
        for u in own:
            for v in desc:
                rel_p.add((u, v))
        return own + desc

    place(node)
    model = Model(Frame(len(vals), frozenset(rel_p), frozenset(rel_f)), tuple(vals))
    root = node.root  # root cluster is placed first, so no offset
    rep = check_frame(model.frame)
    assert rep.is_rooted_nice, "assembled witness is not a rooted nice frame"
    assert eval_formula(model, root, goal), "assembled witness fails the goal"
    return model, root


# ---------------------------------------------------------------------------
# GL engine (single-relation, one world per "cluster")

@dataclass
class _GlNode:
    bits: int
    true_vars: frozenset[str]
    children: dict[int, "_GlNode"]


def gl_sat(goal: Formula, budget: SolverBudget | None = None) -> tuple[Model, int] | None:
    """Root-satisfiability of a box-f-free formula over finite rooted frames
    with a transitive, conversely well-founded relation.

    Same assignment recursion as ``pf_sat`` with every cluster collapsed to a
    single world, so the inner solver degenerates to a propositional search.
    """
    if not is_lp(goal):
        raise ValueError("box-p fragment expected, got %s" % goal)
    budget = budget or SolverBudget()
    clock = _Clock(budget)
    bodies = list(boxp_bodies(goal))
    k = len(bodies)
    if k > 16:
        raise BudgetExceeded("%d distinct box-p bodies" % k)
    body_index = {c: i for i, c in enumerate(bodies)}
    vs = sorted(variables(goal))
    var_index = {v: i for i, v in enumerate(vs)}
    full = (1 << k) - 1

    def holds(fm: Formula, vmask: int, bits: int) -> bool:
        if isinstance(fm, Var):
            return bool((vmask >> var_index[fm.name]) & 1)
        if isinstance(fm, Top):
            return True
        if isinstance(fm, Bot):
            return False
        if isinstance(fm, Not):
            return not holds(fm.sub, vmask, bits)
        if isinstance(fm, And):
            return holds(fm.left, vmask, bits) and holds(fm.right, vmask, bits)
        if isinstance(fm, Or):
            return holds(fm.left, vmask, bits) or holds(fm.right, vmask, bits)
        if isinstance(fm, Imp):
            return (not holds(fm.left, vmask, bits)) or holds(fm.right, vmask, bits)
        assert isinstance(fm, BoxP)
        return bool((bits >> body_index[fm.sub]) & 1)

    memo: dict[tuple[int, int, int], _GlNode | None] = {}

    def realize(bits: int, obits: int, gained: int) -> _GlNode | None:
        key = (bits, obits, gained)
        if key in memo:
            return memo[key]
        clock.check(len(memo))
        targets = [goal if gained < 0 else Not(bodies[gained])]
        targets += [bodies[i] for i in range(k) if (obits >> i) & 1]
        found = None
        for vmask in range(1 << len(vs)):
            if all(holds(t, vmask, bits) for t in targets):
                found = vmask
                break
        node: _GlNode | None = None
        if found is not None:
            children: dict[int, _GlNode] = {}
            ok = True
            for i in range(k):
                if (bits >> i) & 1:
                    continue
                need = bits | (1 << i)
                child = None
                v2 = need
                while True:
                    child = realize(v2, bits, i)
                    if child is not None:
                        break
                    if v2 == full:
                        break
                    v2 = (v2 + 1) | need
                if child is None:
                    ok = False
                    break
                children[i] = child
            if ok:
                node = _GlNode(
                    bits,
                    frozenset(v for v in vs if (found >> var_index[v]) & 1),
                    children,
                )
        memo[key] = node
        return node

    for v in range(1 << k):
        node = realize(v, 0, -1)
        if node is not None:
            return _assemble_gl(node, goal)
    return None


def _assemble_gl(node: _GlNode, goal: Formula) -> tuple[Model, int]:
    rel_p: set[tuple[int, int]] = set()
    vals: list[frozenset[str]] = []

    def place(nd: _GlNode) -> list[int]:
        me = len(vals)
        vals.append(nd.true_vars)
        desc: list[int] = []
        for i in sorted(nd.children):
            desc += place(nd.children[i])
        for v in desc:
            rel_p.add((me, v))
        return [me] + desc

    place(node)
    n = len(vals)
    rel_f = frozenset((w, w) for w in range(n))
    model = Model(Frame(n, frozenset(rel_p), rel_f), tuple(vals))
    rep = check_frame(model.frame)
    assert rep.p_transitive and rep.p_conversely_wellfounded
    assert rep.is_rooted_nice  # identity rel_f keeps the frame nice
    assert eval_formula(model, 0, goal), "assembled witness fails the goal"
    return model, 0


# ---------------------------------------------------------------------------
# Reductions

def reduce_pfomega(a: Formula) -> Formula:
    """Conjunction of the [p]B -> [f]B instances over a, implying a."""
    return Imp(conjoin(phi_set(a)), a)


def reduce_s(a: Formula) -> Formula:
    """Conjunction of the [p]B -> B instances over a, implying a."""
    return Imp(conjoin(psi_set(a)), a)


def erase_boxf(a: Formula) -> Formula:
    """Homomorphic map deleting every [f]."""
    if isinstance(a, BoxF):
        return erase_boxf(a.sub)
    if isinstance(a, Not):
        return Not(erase_boxf(a.sub))
    if isinstance(a, BoxP):
        return BoxP(erase_boxf(a.sub))
    if isinstance(a, And):
        return And(erase_boxf(a.left), erase_boxf(a.right))
    if isinstance(a, Or):
        return Or(erase_boxf(a.left), erase_boxf(a.right))
    if isinstance(a, Imp):
        return Imp(erase_boxf(a.left), erase_boxf(a.right))
    return a


# ---------------------------------------------------------------------------
# Verdicts

def verify_certificate(logic: LogicId, refuted: Formula, model: Model,
                       world: int) -> bool:
    """Independent re-check of an Invalid verdict: the frame satisfies the
    logic's conditions, the world sits at the designated root position, and
    the refuted formula is false there."""
    try:
        if eval_formula(model, world, refuted):
            return False
    except ValueError:
        return False
    rep = check_frame(model.frame)
    cd = clusters(model.frame)
    fr = model.frame

    if logic in (LogicId.PF, LogicId.PFOMEGA):
        if not rep.is_rooted_nice:
            return False
        qp = cd.quotient_p
        if qp is None:
            return False
        count = len(cd.clusters)
        root_clusters = [
            i for i in range(count)
            if all((i, j) in qp for j in range(count) if j != i)
        ]
        c = cd.cluster_of[world]
        if c not in root_clusters:
            return False
        return all((world, y) in fr.rel_f for y in cd.clusters[c])

    if logic in (LogicId.GL, LogicId.S, LogicId.GLTRIV):
        if not (rep.p_transitive and rep.p_conversely_wellfounded):
            return False
        if logic is LogicId.GLTRIV:
            identity = frozenset((w, w) for w in range(fr.worlds))
            if fr.rel_f != identity:
                return False
        return all((world, x) in fr.rel_p
                   for x in range(fr.worlds) if x != world)

    assert logic is LogicId.S42
    if not (rep.f_reflexive and rep.f_transitive and rep.f_directed):
        return False
    return all((world, x) in fr.rel_f for x in range(fr.worlds))


def decide(logic: LogicId, a: Formula,
           budget: SolverBudget | None = None) -> Verdict:
    """Validity in the given logic; Invalid verdicts carry a countermodel
    checked by the independent model checker."""
    budget = budget or SolverBudget()
    try:
        if logic is LogicId.PF:
            res = pf_sat(Not(a), budget=budget)
        elif logic is LogicId.S42:
            if not is_lf(a):
                raise ValueError("S4.2 expects a box-f formula: %s" % a)
            res = s42_sat(Not(a), budget=budget)
        elif logic is LogicId.GL:
            if not is_lp(a):
                raise ValueError("GL expects a box-p formula: %s" % a)
            res = gl_sat(Not(a), budget=budget)
        elif logic is LogicId.PFOMEGA:
            reduced = reduce_pfomega(a)
            inner = decide(LogicId.PF, reduced, budget)
            return Verdict(logic, a, inner.status, inner.model, inner.world,
                           inner.certificate_ok, reduced if inner.status == "invalid" else None)
        elif logic is LogicId.S:
            if not is_lp(a):
                raise ValueError("S expects a box-p formula: %s" % a)
            reduced = reduce_s(a)
            inner = decide(LogicId.GL, reduced, budget)
            return Verdict(logic, a, inner.status, inner.model, inner.world,
                           inner.certificate_ok, reduced if inner.status == "invalid" else None)
        else:
            assert logic is LogicId.GLTRIV
            erased = erase_boxf(a)
            inner = decide(LogicId.GL, erased, budget)
            if inner.status != "invalid":
                return Verdict(logic, a, inner.status)
            # the identity rel_f makes [f] transparent, so the GL model
            # refutes the original formula directly
            cert = verify_certificate(logic, a, inner.model, inner.world)
            return Verdict(logic, a, "invalid", inner.model, inner.world,
                           cert, a)
    except BudgetExceeded:
        return Verdict(logic, a, "budget")

    if res is None:
        return Verdict(logic, a, "valid")
    model, world = res
    cert = verify_certificate(logic, a, model, world)
    return Verdict(logic, a, "invalid", model, world, cert, a)
