"""Box-p conjunctive normal form.

A clause has the shape ``[p]D0 | ... | [p]Dk-1 | <p>E | F`` with F free of
``[p]``; a formula is in box-p CNF when it is a conjunction of clauses.  The
converter is total, preserves the box-p nesting degree exactly, and produces
an equivalent formula over the bimodal logic: box-f distributes over box-p
and diamond-p disjuncts, so it can always be pushed onto the F part.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .formula import (
    And, BOT, Bot, BoxF, BoxP, Formula, Imp, Not, Or, TOP, Top,
    diamond_p, is_lf,
)


def _neg(b: Formula) -> Formula:
    if isinstance(b, Not):
        return b.sub
    if isinstance(b, Top):
        return BOT
    if isinstance(b, Bot):
        return TOP
    return Not(b)


def _or_lf(x: Formula, y: Formula) -> Formula:
    # unit/absorption simplification; safe here because both sides are
    # degree-0 box-f formulas
    if isinstance(x, Bot):
        return y
    if isinstance(y, Bot):
        return x
    if isinstance(x, Top) or isinstance(y, Top):
        return TOP
    return Or(x, y)


@dataclass(frozen=True)
class PCnfClause:
    boxp_disjuncts: tuple[Formula, ...]
    diamondp_disjunct: Formula | None
    lf_part: Formula  # Bot encodes an absent F

    def formula(self) -> Formula:
        parts: list[Formula] = [BoxP(d) for d in self.boxp_disjuncts]
        if self.diamondp_disjunct is not None:
            parts.append(diamond_p(self.diamondp_disjunct))
        if not parts or not isinstance(self.lf_part, Bot):
            parts.append(self.lf_part)
        out = parts[-1]
        for p in reversed(parts[:-1]):
            out = Or(p, out)
        return out


def _merge(a: PCnfClause, b: PCnfClause) -> PCnfClause:
    ds = list(a.boxp_disjuncts)
    for d in b.boxp_disjuncts:
        if d not in ds:
            ds.append(d)
    if a.diamondp_disjunct is None:
        dia = b.diamondp_disjunct
    elif b.diamondp_disjunct is None:
        dia = a.diamondp_disjunct
    else:
        # <p>E | <p>E'  ==  <p>(E | E'); plain Or keeps the degree intact
        dia = Or(a.diamondp_disjunct, b.diamondp_disjunct)
    return PCnfClause(tuple(ds), dia, _or_lf(a.lf_part, b.lf_part))


def _negation_units(c: PCnfClause) -> list[PCnfClause]:
    """Unit clauses whose conjunction is the negation of ``c``.

    The F literal is kept even when it is a constant: dropping it could lower
    the box-p degree of the final conjunction, which must match the input
    exactly.
    """
    units: list[PCnfClause] = []
    for d in c.boxp_disjuncts:
        units.append(PCnfClause((), _neg(d), BOT))
    if c.diamondp_disjunct is not None:
        units.append(PCnfClause((_neg(c.diamondp_disjunct),), None, BOT))
    units.append(PCnfClause((), None, _neg(c.lf_part)))
    return units


def _cnf(a: Formula) -> list[PCnfClause]:
    if is_lf(a):
        return [PCnfClause((), None, a)]
    if isinstance(a, BoxP):
        return [PCnfClause((a.sub,), None, BOT)]
    if isinstance(a, And):
        return _dedupe(_cnf(a.left) + _cnf(a.right))
    if isinstance(a, Or):
        left, right = _cnf(a.left), _cnf(a.right)
        return _dedupe([_merge(x, y) for x in left for y in right])
    if isinstance(a, Imp):
        return _cnf(Or(Not(a.left), a.right))
    if isinstance(a, Not):
        unit_lists = [_negation_units(c) for c in _cnf(a.sub)]
        out = [_merge_many(choice) for choice in product(*unit_lists)]
        return _dedupe(out)
    assert isinstance(a, BoxF)
    return _dedupe([
        PCnfClause(c.boxp_disjuncts, c.diamondp_disjunct, BoxF(c.lf_part))
        for c in _cnf(a.sub)
    ])


def _merge_many(cs: tuple[PCnfClause, ...]) -> PCnfClause:
    out = cs[0]
    for c in cs[1:]:
        out = _merge(out, c)
    return out


def _dedupe(cs: list[PCnfClause]) -> list[PCnfClause]:
    return list(dict.fromkeys(cs))


def to_boxp_cnf(a: Formula) -> Formula:
    """Equivalent box-p CNF with the same box-p nesting degree.

    Worst-case exponential in the input size, like every distribution-based
    CNF; no fresh variables are introduced, which keeps the output a genuine
    equivalent of the input.
    """
    clauses = _cnf(a)
    parts = [c.formula() for c in clauses]
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def _and_spine(a: Formula) -> list[Formula]:
    if isinstance(a, And):
        return _and_spine(a.left) + _and_spine(a.right)
    return [a]


def _or_spine(a: Formula) -> list[Formula]:
    if isinstance(a, Or):
        return _or_spine(a.left) + _or_spine(a.right)
    return [a]


def is_boxp_cnf(a: Formula) -> bool:
    """Recognize conjunctions of clauses; a unit conjunction counts, as do
    clauses without box-p or diamond-p disjuncts (then the clause is just F)."""
    for conj in _and_spine(a):
        dia = 0
        for d in _or_spine(conj):
            if isinstance(d, BoxP):
                continue
            if (isinstance(d, Not) and isinstance(d.sub, BoxP)
                    and isinstance(d.sub.sub, Not)):
                dia += 1
                continue
            if not is_lf(d):
                return False
        if dia > 1:
            return False
    return True
