"""ASTs, concrete syntax and syntactic measures for the bimodal box language.

Two unary modalities: ``[p]`` (provability-style) and ``[f]`` (forcing-style).
Diamonds are parser sugar: ``<p>A`` stands for ``~[p]~A`` and ``<f>A`` for
``~[f]~A``.  Formulas are immutable and compared structurally, so they can be
shared freely and used as dict keys.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping


@dataclass(frozen=True)
class Formula:
    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True)
class Var(Formula):
    name: str


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bot(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Imp(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class BoxP(Formula):
    sub: Formula


@dataclass(frozen=True)
class BoxF(Formula):
    sub: Formula


TOP = Top()
BOT = Bot()


def diamond_p(a: Formula) -> Formula:
    return Not(BoxP(Not(a)))


def diamond_f(a: Formula) -> Formula:
    return Not(BoxF(Not(a)))


def iff(a: Formula, b: Formula) -> Formula:
    """Biconditional, spelled out as a conjunction of implications."""
    return And(Imp(a, b), Imp(b, a))


_TAG = {Var: 0, Top: 1, Bot: 2, Not: 3, And: 4, Or: 5, Imp: 6, BoxP: 7, BoxF: 8}


def sort_key(a: Formula):
    """Total order on ASTs: constructor tag first, then children lexicographically.

    The order is arbitrary but fixed; it makes every FormulaSet iteration and
    hence every solver run reproducible.
    """
    t = _TAG[type(a)]
    if isinstance(a, Var):
        return (t, a.name)
    if isinstance(a, (Top, Bot)):
        return (t,)
    if isinstance(a, (Not, BoxP, BoxF)):
        return (t, sort_key(a.sub))
    return (t, sort_key(a.left), sort_key(a.right))


class FormulaSet:
    """Duplicate-free formula collection iterated in canonical AST order."""

    __slots__ = ("_items", "_set")

    def __init__(self, items: Iterable[Formula] = ()):
        uniq = frozenset(items)
        self._items: tuple[Formula, ...] = tuple(sorted(uniq, key=sort_key))
        self._set = uniq

    def __iter__(self) -> Iterator[Formula]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __contains__(self, f: object) -> bool:
        return f in self._set

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FormulaSet):
            return NotImplemented
        return self._set == other._set

    def __hash__(self) -> int:
        return hash(self._set)

    def __or__(self, other: "FormulaSet | Iterable[Formula]") -> "FormulaSet":
        return FormulaSet(list(self._items) + list(other))

    def __repr__(self) -> str:
        return "FormulaSet([%s])" % ", ".join(str(f) for f in self._items)


class Language(Enum):
    LP = "lp"    # no [f] occurs
    LF = "lf"    # no [p] occurs
    LPF = "lpf"  # unrestricted


def is_lp(a: Formula) -> bool:
    """True when no box-f occurs in ``a``."""
    if isinstance(a, BoxF):
        return False
    if isinstance(a, (Not, BoxP)):
        return is_lp(a.sub)
    if isinstance(a, (And, Or, Imp)):
        return is_lp(a.left) and is_lp(a.right)
    return True


def is_lf(a: Formula) -> bool:
    """True when no box-p occurs in ``a``."""
    if isinstance(a, BoxP):
        return False
    if isinstance(a, (Not, BoxF)):
        return is_lf(a.sub)
    if isinstance(a, (And, Or, Imp)):
        return is_lf(a.left) and is_lf(a.right)
    return True


def language_of(a: Formula) -> Language:
    """General language tag; purely propositional formulas report LP.

    Use :func:`is_lp`/:func:`is_lf` for the individual membership tests.
    """
    if is_lp(a):
        return Language.LP
    if is_lf(a):
        return Language.LF
    return Language.LPF


def variables(a: Formula) -> set[str]:
    out: set[str] = set()
    stack = [a]
    while stack:
        f = stack.pop()
        if isinstance(f, Var):
            out.add(f.name)
        elif isinstance(f, (Not, BoxP, BoxF)):
            stack.append(f.sub)
        elif isinstance(f, (And, Or, Imp)):
            stack.append(f.left)
            stack.append(f.right)
    return out


def formula_size(a: Formula) -> int:
    """Number of AST nodes."""
    if isinstance(a, (Var, Top, Bot)):
        return 1
    if isinstance(a, (Not, BoxP, BoxF)):
        return 1 + formula_size(a.sub)
    return 1 + formula_size(a.left) + formula_size(a.right)


def subformulas(a: Formula) -> FormulaSet:
    """All subformulas of ``a``, including ``a`` itself."""
    acc: set[Formula] = set()
    stack = [a]
    while stack:
        f = stack.pop()
        if f in acc:
            continue
        acc.add(f)
        if isinstance(f, (Not, BoxP, BoxF)):
            stack.append(f.sub)
        elif isinstance(f, (And, Or, Imp)):
            stack.append(f.left)
            stack.append(f.right)
    return FormulaSet(acc)


def pseudo_negate(b: Formula) -> Formula:
    """Strip one leading negation if present, otherwise negate."""
    return b.sub if isinstance(b, Not) else Not(b)


def closure(a: Formula) -> FormulaSet:
    """Subformulas of ``a``, their pseudo-negations, and for every box-p
    subformula ``[p]B`` the companions ``[f]B`` and ``~[f]B``."""
    sub = subformulas(a)
    extra: list[Formula] = [pseudo_negate(b) for b in sub]
    for b in sub:
        if isinstance(b, BoxP):
            extra.append(BoxF(b.sub))
            extra.append(Not(BoxF(b.sub)))
    return sub | extra


def boxp_bodies(a: Formula) -> FormulaSet:
    """Bodies of the distinct box-p subformulas of ``a``, canonically ordered."""
    return FormulaSet(s.sub for s in subformulas(a) if isinstance(s, BoxP))


def phi_set(a: Formula) -> FormulaSet:
    """One implication ``[p]B -> [f]B`` per box-p subformula of ``a``."""
    return FormulaSet(Imp(BoxP(c), BoxF(c)) for c in boxp_bodies(a))


def psi_set(a: Formula) -> FormulaSet:
    """One reflection implication ``[p]B -> B`` per box-p subformula of ``a``.

    Only defined on the box-f-free fragment.
    """
    if not is_lp(a):
        raise ValueError("psi_set expects a formula without [f]: %s" % a)
    return FormulaSet(Imp(BoxP(c), c) for c in boxp_bodies(a))


def modal_degree(a: Formula) -> int:
    """Maximal nesting depth of [p]; [f] and the connectives do not count."""
    if isinstance(a, (Var, Top, Bot)):
        return 0
    if isinstance(a, BoxP):
        return modal_degree(a.sub) + 1
    if isinstance(a, (Not, BoxF)):
        return modal_degree(a.sub)
    return max(modal_degree(a.left), modal_degree(a.right))


def dagger(a: Formula, fresh: Mapping[Formula, str]) -> Formula:
    """Replace every maximal box-p subformula ``[p]C`` by the variable
    ``fresh[C]``, commuting with the connectives and with ``[f]``.

    ``fresh`` must assign a distinct identifier, unused in ``a``, to every
    box-p body of ``a``.  The result contains no ``[p]``.
    """
    bodies = boxp_bodies(a)
    missing = [c for c in bodies if c not in fresh]
    if missing:
        raise ValueError("fresh map misses box-p bodies: %s"
                         % ", ".join(str(c) for c in missing))
    used = [fresh[c] for c in bodies]
    if len(set(used)) != len(used):
        raise ValueError("fresh identifiers must be pairwise distinct")
    clash = set(used) & variables(a)
    if clash:
        raise ValueError("fresh identifiers collide with variables: %s"
                         % ", ".join(sorted(clash)))

    def rec(f: Formula) -> Formula:
        if isinstance(f, BoxP):
            return Var(fresh[f.sub])
        if isinstance(f, Not):
            return Not(rec(f.sub))
        if isinstance(f, BoxF):
            return BoxF(rec(f.sub))
        if isinstance(f, And):
            return And(rec(f.left), rec(f.right))
        if isinstance(f, Or):
            return Or(rec(f.left), rec(f.right))
        if isinstance(f, Imp):
            return Imp(rec(f.left), rec(f.right))
        return f

    return rec(a)


def fresh_box_names(a: Formula, prefix: str = "q") -> dict[Formula, str]:
    """Deterministic collision-free identifiers for the box-p bodies of ``a``."""
    taken = variables(a)
    names: dict[Formula, str] = {}
    for i, body in enumerate(boxp_bodies(a)):
        name = "%s%d" % (prefix, i)
        while name in taken:
            name += "_"
        names[body] = name
        taken.add(name)
    return names


def conjoin(formulas: Iterable[Formula]) -> Formula:
    """Right-associated conjunction in canonical order; empty yields T."""
    items = list(FormulaSet(formulas))
    if not items:
        return TOP
    out = items[-1]
    for f in reversed(items[:-1]):
        out = And(f, out)
    return out


# ---------------------------------------------------------------------------
# Concrete syntax


class ParseError(ValueError):
    """Syntax error carrying the byte offset and the expected-token set."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = " (expected %s)" % ", ".join(expected) if expected else ""
        super().__init__("%s at offset %d%s" % (message, offset, detail))


_IDENT_RE = re.compile(r"[a-z][a-z0-9_]*")
_FIXED = ("->", "[p]", "[f]", "<p>", "<f>")
_ATOM_EXPECTED = ("~", "[p]", "[f]", "<p>", "<f>", "T", "F", "identifier", "(")


def _tokenize(text: str) -> list[tuple[str, int, str]]:
    toks: list[tuple[str, int, str]] = []
    i = 0
    while i < len(text):
        c = text[i]
        if c.isspace():
            i += 1
            continue
        for lit in _FIXED:
            if text.startswith(lit, i):
                toks.append((lit, i, lit))
                i += len(lit)
                break
        else:
            if c in "&|~()":
                toks.append((c, i, c))
                i += 1
            elif c in "TF":
                toks.append((c, i, c))
                i += 1
            else:
                m = _IDENT_RE.match(text, i)
                if m is None:
                    raise ParseError("unexpected character %r" % c, i, _ATOM_EXPECTED)
                toks.append(("ident", i, m.group()))
                i = m.end()
    toks.append(("eof", len(text), ""))
    return toks


class _Parser:
    def __init__(self, toks: list[tuple[str, int, str]]):
        self.toks = toks
        self.i = 0

    def peek(self) -> tuple[str, int, str]:
        return self.toks[self.i]

    def take(self) -> tuple[str, int, str]:
        t = self.toks[self.i]
        self.i += 1
        return t

    def imp(self) -> Formula:
        left = self.disj()
        if self.peek()[0] == "->":
            self.take()
            return Imp(left, self.imp())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek()[0] == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.unary()
        while self.peek()[0] == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind = self.peek()[0]
        if kind == "~":
            self.take()
            return Not(self.unary())
        if kind == "[p]":
            self.take()
            return BoxP(self.unary())
        if kind == "[f]":
            self.take()
            return BoxF(self.unary())
        if kind == "<p>":
            self.take()
            return Not(BoxP(Not(self.unary())))
        if kind == "<f>":
            self.take()
            return Not(BoxF(Not(self.unary())))
        return self.atom()

    def atom(self) -> Formula:
        kind, offset, value = self.peek()
        if kind == "T":
            self.take()
            return TOP
        if kind == "F":
            self.take()
            return BOT
        if kind == "ident":
            self.take()
            return Var(value)
        if kind == "(":
            self.take()
            f = self.imp()
            k2, off2, _ = self.peek()
            if k2 != ")":
                raise ParseError("unclosed parenthesis", off2, (")",))
            self.take()
            return f
        raise ParseError("expected a formula", offset, _ATOM_EXPECTED)


def parse(text: str) -> Formula:
    """Parse concrete syntax into an AST; diamonds expand at parse time."""
    p = _Parser(_tokenize(text))
    f = p.imp()
    kind, offset, _ = p.peek()
    if kind != "eof":
        raise ParseError("trailing input", offset, ("&", "|", "->", "end of input"))
    return f


def print_formula(a: Formula) -> str:
    """Canonical concrete syntax: binary connectives fully parenthesised,
    diamond sugar re-introduced (it always shortens the output)."""
    if isinstance(a, Var):
        return a.name
    if isinstance(a, Top):
        return "T"
    if isinstance(a, Bot):
        return "F"
    if isinstance(a, Not):
        s = a.sub
        if isinstance(s, BoxP) and isinstance(s.sub, Not):
            return "<p>" + print_formula(s.sub.sub)
        if isinstance(s, BoxF) and isinstance(s.sub, Not):
            return "<f>" + print_formula(s.sub.sub)
        return "~" + print_formula(s)
    if isinstance(a, BoxP):
        return "[p]" + print_formula(a.sub)
    if isinstance(a, BoxF):
        return "[f]" + print_formula(a.sub)
    op = {And: "&", Or: "|", Imp: "->"}[type(a)]
    return "(%s %s %s)" % (print_formula(a.left), op, print_formula(a.right))
