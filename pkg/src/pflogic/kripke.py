"""Finite two-relation Kripke frames and models.

``rel_p`` interprets ``[p]`` and ``rel_f`` interprets ``[f]``.  Frames carry
no structural constraints at construction time; every logic-specific
condition is a predicate computed by :func:`check_frame`, never assumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

from .bittables import first_false_index, holds_everywhere, truth_tables
from .formula import (
    And, Bot, BoxF, BoxP, Formula, Imp, Not, Or, Top, Var,
    variables,
)

Pair = tuple[int, int]


def _normalize_rel(rel: Iterable[Pair], worlds: int, name: str) -> frozenset[Pair]:
    pairs = frozenset((int(i), int(j)) for i, j in rel)
    for i, j in pairs:
        if not (0 <= i < worlds and 0 <= j < worlds):
            raise ValueError("%s pair (%d, %d) outside worlds 0..%d" % (name, i, j, worlds - 1))
    return pairs


@dataclass(frozen=True)
class Frame:
    worlds: int
    rel_p: frozenset[Pair] = frozenset()
    rel_f: frozenset[Pair] = frozenset()

    def __post_init__(self) -> None:
        if self.worlds < 1:
            raise ValueError("a frame needs at least one world")
        object.__setattr__(self, "rel_p", _normalize_rel(self.rel_p, self.worlds, "rel_p"))
        object.__setattr__(self, "rel_f", _normalize_rel(self.rel_f, self.worlds, "rel_f"))

    def succ_p(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.worlds)]
        for i, j in sorted(self.rel_p):
            out[i].append(j)
        return out

    def succ_f(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.worlds)]
        for i, j in sorted(self.rel_f):
            out[i].append(j)
        return out


@dataclass(frozen=True)
class Model:
    frame: Frame
    valuation: tuple[frozenset[str], ...] = ()

    def __post_init__(self) -> None:
        v = self.valuation
        if isinstance(v, Mapping):
            val = tuple(frozenset(v.get(w, ())) for w in range(self.frame.worlds))
        else:
            seq = [frozenset(x) for x in v]
            if len(seq) > self.frame.worlds:
                raise ValueError("valuation longer than the world count")
            seq += [frozenset()] * (self.frame.worlds - len(seq))
            val = tuple(seq)
        object.__setattr__(self, "valuation", val)


def eval_formula(m: Model, w: int, a: Formula) -> bool:
    """Standard Kripke truth at world ``w``; [p] quantifies over rel_p
    successors, [f] over rel_f successors."""
    if not (0 <= w < m.frame.worlds):
        raise ValueError("unknown world %r" % (w,))
    succ_p = m.frame.succ_p()
    succ_f = m.frame.succ_f()
    memo: dict[tuple[int, Formula], bool] = {}

    def rec(x: int, f: Formula) -> bool:
        key = (x, f)
        if key in memo:
            return memo[key]
        if isinstance(f, Var):
            out = f.name in m.valuation[x]
        elif isinstance(f, Top):
            out = True
        elif isinstance(f, Bot):
            out = False
        elif isinstance(f, Not):
            out = not rec(x, f.sub)
        elif isinstance(f, And):
            out = rec(x, f.left) and rec(x, f.right)
        elif isinstance(f, Or):
            out = rec(x, f.left) or rec(x, f.right)
        elif isinstance(f, Imp):
            out = (not rec(x, f.left)) or rec(x, f.right)
        elif isinstance(f, BoxP):
            out = all(rec(y, f.sub) for y in succ_p[x])
        else:
            out = all(rec(y, f.sub) for y in succ_f[x])
        memo[key] = out
        return out

    return rec(w, a)


def valid_in_model(m: Model, a: Formula) -> bool:
    return all(eval_formula(m, w, a) for w in range(m.frame.worlds))


@dataclass(frozen=True)
class ClusterDecomposition:
    cluster_of: tuple[int, ...]
    clusters: tuple[frozenset[int], ...]
    # Present only when rel_p factors through the clusters (all-or-nothing
    # blocks); None otherwise.
    quotient_p: frozenset[Pair] | None


def clusters(f: Frame) -> ClusterDecomposition:
    """Partition by the transitive closure of the symmetric closure of rel_f.

    Clusters are numbered by their smallest world.  The quotient of rel_p is
    reported only when rel_p is uniform between every pair of clusters, which
    niceness guarantees on PF-frames.
    """
    parent = list(range(f.worlds))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in f.rel_f:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    reps = sorted({find(w) for w in range(f.worlds)})
    index = {r: c for c, r in enumerate(reps)}
    cluster_of = tuple(index[find(w)] for w in range(f.worlds))
    members: list[set[int]] = [set() for _ in reps]
    for w in range(f.worlds):
        members[cluster_of[w]].add(w)
    cluster_sets = tuple(frozenset(ms) for ms in members)

    quotient: set[Pair] = set()
    well_defined = True
    rel_p = f.rel_p
    for ci, a in enumerate(cluster_sets):
        for cj, b in enumerate(cluster_sets):
            hits = sum(1 for x in a for y in b if (x, y) in rel_p)
            if hits == len(a) * len(b):
                quotient.add((ci, cj))
            elif hits != 0:
                well_defined = False
    return ClusterDecomposition(
        cluster_of, cluster_sets, frozenset(quotient) if well_defined else None
    )


@dataclass(frozen=True)
class FrameReport:
    p_transitive: bool
    p_conversely_wellfounded: bool
    f_reflexive: bool
    f_transitive: bool
    f_directed: bool
    fc1: bool
    fc2: bool
    fc3: bool
    nice: bool
    is_pf_frame: bool
    is_rooted_nice: bool
    is_pba_clusters: bool


def _adj(pairs: frozenset[Pair], n: int) -> list[list[bool]]:
    m = [[False] * n for _ in range(n)]
    for i, j in pairs:
        m[i][j] = True
    return m


def _transitive(m: list[list[bool]], n: int) -> bool:
    return all(
        not (m[i][j] and m[j][k]) or m[i][k]
        for i in range(n) for j in range(n) for k in range(n)
    )


def _acyclic(m: list[list[bool]], n: int) -> bool:
    # converse well-foundedness on a finite carrier = no cycle
    closure = [row[:] for row in m]
    for k in range(n):
        for i in range(n):
            if closure[i][k]:
                row_k = closure[k]
                row_i = closure[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    return not any(closure[i][i] for i in range(n))


def check_frame(f: Frame) -> FrameReport:
    """Each condition computed by direct quantification over the worlds."""
    n = f.worlds
    P = _adj(f.rel_p, n)
    F = _adj(f.rel_f, n)
    rng = range(n)

    p_transitive = _transitive(P, n)
    p_cwf = _acyclic(P, n)
    f_reflexive = all(F[x][x] for x in rng)
    f_transitive = _transitive(F, n)
    f_directed = all(
        not (F[x][y] and F[x][z]) or any(F[y][u] and F[z][u] for u in rng)
        for x in rng for y in rng for z in rng
    )
    fc1 = all(not (F[x][y] and P[y][z]) or P[x][z]
              for x in rng for y in rng for z in rng)
    fc2 = all(not (F[x][y] and P[x][z]) or P[y][z]
              for x in rng for y in rng for z in rng)
    fc3 = all(not (P[x][y] and F[y][z]) or P[x][z]
              for x in rng for y in rng for z in rng)
    nice = all(not (P[x][z] and F[y][z]) or P[x][y]
               for x in rng for y in rng for z in rng)
    is_pf = (p_transitive and p_cwf and f_reflexive and f_transitive
             and f_directed and fc1 and fc2 and fc3)

    cd = clusters(f)
    clusters_rooted = all(
        any(all(F[x][y] for y in c) for x in c) for c in cd.clusters
    )
    root_cluster = False
    if cd.quotient_p is not None:
        k = len(cd.clusters)
        root_cluster = any(
            all((i, j) in cd.quotient_p for j in range(k) if j != i)
            for i in range(k)
        )
    is_rooted_nice = is_pf and nice and root_cluster and clusters_rooted
    is_pba = all(_cluster_is_pba(sorted(c), F) for c in cd.clusters)

    return FrameReport(
        p_transitive=p_transitive,
        p_conversely_wellfounded=p_cwf,
        f_reflexive=f_reflexive,
        f_transitive=f_transitive,
        f_directed=f_directed,
        fc1=fc1,
        fc2=fc2,
        fc3=fc3,
        nice=nice,
        is_pf_frame=is_pf,
        is_rooted_nice=is_rooted_nice,
        is_pba_clusters=is_pba,
    )


def _cluster_is_pba(ws: list[int], F: list[list[bool]]) -> bool:
    """Is the cluster, under rel_f, a pre-Boolean algebra?

    Requires the restriction to be reflexive, transitive and directed, and
    its quotient by mutual accessibility to be order-isomorphic to the
    inclusion order on the power set of its atoms.
    """
    if not all(F[x][x] for x in ws):
        return False
    if not all(not (F[x][y] and F[y][z]) or F[x][z]
               for x in ws for y in ws for z in ws):
        return False
    if not all(
        not (F[x][y] and F[x][z]) or any(F[y][u] and F[z][u] for u in ws)
        for x in ws for y in ws for z in ws
    ):
        return False

    # quotient by x ~ y iff x <= y <= x
    block_of: dict[int, int] = {}
    reps: list[int] = []
    for x in ws:
        for r in reps:
            if F[x][r] and F[r][x]:
                block_of[x] = block_of[r]
                break
        else:
            block_of[x] = len(reps)
            reps.append(x)
    k = len(reps)
    le = [[F[reps[i]][reps[j]] for j in range(k)] for i in range(k)]

    bottoms = [i for i in range(k) if all(le[i][j] for j in range(k))]
    if len(bottoms) != 1:
        return False
    bot = bottoms[0]
    atoms = [
        i for i in range(k)
        if i != bot and all(not le[j][i] or j in (i, bot) for j in range(k))
    ]
    if k != 1 << len(atoms):
        return False
    atomset = [frozenset(a for a in atoms if le[a][i]) for i in range(k)]
    if len(set(atomset)) != k:
        return False
    return all(
        le[i][j] == (atomset[i] <= atomset[j])
        for i in range(k) for j in range(k)
    )


def is_rooted_nice_pba(f: Frame) -> bool:
    """Nice PF-frame with a root cluster, per-cluster roots, and
    pre-Boolean-algebra clusters."""
    rep = check_frame(f)
    return rep.is_rooted_nice and rep.is_pba_clusters


def frame_validates(f: Frame, a: Formula, max_bits: int = 24) -> bool:
    """True iff ``a`` holds at every world under every valuation of its
    variables.  Guarded by ``vars * worlds <= max_bits``."""
    vs = sorted(variables(a))
    nbits = len(vs) * f.worlds
    if nbits > max_bits:
        raise ValueError("valuation space 2^%d exceeds the guard 2^%d" % (nbits, max_bits))
    tables = truth_tables(a, f.worlds, f.succ_p(), f.succ_f(),
                          {v: i for i, v in enumerate(vs)}, nbits)
    return holds_everywhere(tables, nbits)


def falsifying_valuation(f: Frame, a: Formula, roots: list[int],
                         max_bits: int = 24) -> tuple[Model, int] | None:
    """First (valuation, root) in canonical order that falsifies ``a`` at one
    of the given worlds; None when ``a`` holds at all of them everywhere."""
    vs = sorted(variables(a))
    nbits = len(vs) * f.worlds
    if nbits > max_bits:
        raise ValueError("valuation space 2^%d exceeds the guard 2^%d" % (nbits, max_bits))
    tables = truth_tables(a, f.worlds, f.succ_p(), f.succ_f(),
                          {v: i for i, v in enumerate(vs)}, nbits)
    best: tuple[int, int] | None = None
    for r in roots:
        idx = first_false_index(tables[r], nbits)
        if idx is not None and (best is None or idx < best[0]):
            best = (idx, r)
    if best is None:
        return None
    idx, r = best
    val = [
        frozenset(v for i, v in enumerate(vs) if (idx >> (i * f.worlds + w)) & 1)
        for w in range(f.worlds)
    ]
    return Model(f, tuple(val)), r


# ---------------------------------------------------------------------------
# Serialization

def model_to_json(m: Model) -> dict:
    return {
        "worlds": m.frame.worlds,
        "rel_p": sorted([i, j] for i, j in m.frame.rel_p),
        "rel_f": sorted([i, j] for i, j in m.frame.rel_f),
        "valuation": {str(w): sorted(m.valuation[w]) for w in range(m.frame.worlds)},
    }


def model_from_json(data: dict) -> Model:
    frame = Frame(
        worlds=int(data["worlds"]),
        rel_p=frozenset((int(i), int(j)) for i, j in data.get("rel_p", [])),
        rel_f=frozenset((int(i), int(j)) for i, j in data.get("rel_f", [])),
    )
    raw = data.get("valuation", {})
    return Model(frame, {int(w): frozenset(vs) for w, vs in raw.items()})


def load_model(path: str) -> Model:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(json.load(fh))


def to_dot(m: Model) -> str:
    """Graphviz export: rel_p solid, rel_f dashed, valuations as labels."""
    lines = ["digraph model {"]
    for w in range(m.frame.worlds):
        label = "w%d" % w
        if m.valuation[w]:
            label += "\\n{%s}" % ",".join(sorted(m.valuation[w]))
        lines.append('  %d [label="%s"];' % (w, label))
    for i, j in sorted(m.frame.rel_p):
        lines.append("  %d -> %d [style=solid];" % (i, j))
    for i, j in sorted(m.frame.rel_f):
        lines.append("  %d -> %d [style=dashed];" % (i, j))
    lines.append("}")
    return "\n".join(lines)
