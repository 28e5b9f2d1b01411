"""Exact solvers: enumeration, the assignment reduction, and the tree recursion.

``reduction_solve`` turns an ``n x m`` many-to-one problem into an ``n x n``
linear assignment problem. Columns ``0..m-1`` are the B vertices themselves;
the ``n - m`` surplus columns each cost ``min_b w[a, b]`` for row ``a``.
Every B vertex then receives a distinct A partner, and the rows landing in
surplus columns go to their cheapest B vertex.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import BipartiteInstance, ManyToOneMatching

__all__ = [
    "BRUTE_FORCE_MAX_N",
    "BRUTE_FORCE_MAX_M",
    "CapExceeded",
    "brute_force",
    "hungarian",
    "reduction_cost_matrix",
    "reduction_solve",
    "Infeasible",
    "INFEASIBLE",
    "LabeledTree",
    "TreeDpValue",
    "tree_dp",
    "tree_dp_all",
    "tree_enumerate",
]

BRUTE_FORCE_MAX_N = 9
BRUTE_FORCE_MAX_M = 5


class CapExceeded(ValueError):
    """Instance too large for exhaustive enumeration."""


def brute_force(inst: BipartiteInstance, max_n: int = BRUTE_FORCE_MAX_N,
                max_m: int = BRUTE_FORCE_MAX_M):
    """Enumerate all ``m**n`` maps and keep the cheapest onto one.

    Among equal-cost optima the lexicographically smallest assignment wins,
    which is what a strict ``<`` over ``itertools.product`` order gives.
    """
    n, m = inst.n, inst.m
    if n > max_n or m > max_m:
        raise CapExceeded(f"brute force capped at n<={max_n}, m<={max_m}; got {n}x{m}")
    w = inst.weights
    best_cost, best = np.inf, None
    rows = range(n)
    for assign in itertools.product(range(m), repeat=n):
        if len(set(assign)) != m:
            continue
        cost = sum(w[a, assign[a]] for a in rows)
        if cost < best_cost:
            best_cost, best = cost, assign
    M = ManyToOneMatching(np.array(best, dtype=np.int64), m)
    return M, float(best_cost)


@numba.njit(cache=True)
def _hungarian(c):
    # shortest augmenting path with potentials; rows <= cols, 1-based internally
    n, m = c.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, np.int64)
    way = np.zeros(m + 1, np.int64)
    minv = np.empty(m + 1)
    used = np.empty(m + 1, np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            ui0 = u[i0]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    col = np.empty(n, np.int64)
    for j in range(1, m + 1):
        if p[j] != 0:
            col[p[j] - 1] = j - 1
    return col


def hungarian(cost) -> np.ndarray:
    """Solve the linear assignment problem on a dense ``r x c`` matrix, ``r <= c``.

    Returns the column assigned to each row. O(r^2 c).
    """
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] > c.shape[1]:
        raise ValueError("need a 2-d cost matrix with rows <= columns")
    if c.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return _hungarian(c)


def reduction_cost_matrix(inst: BipartiteInstance) -> np.ndarray:
    """The ``n x n`` assignment matrix: real columns then surplus columns."""
    n, m = inst.n, inst.m
    w = inst.weights
    C = np.empty((n, n))
    C[:, :m] = w
    C[:, m:] = w.min(axis=1)[:, None]
    return C


def reduction_solve(inst: BipartiteInstance, backend: str = "scipy"):
    """Optimal many-to-one matching via the assignment reduction.

    ``backend`` picks the assignment solver: ``"scipy"`` (compiled
    ``linear_sum_assignment``) or ``"native"`` (:func:`hungarian`).
    """
    n, m = inst.n, inst.m
    if not 1 <= m <= n:
        raise ValueError("need n >= m >= 1")
    C = reduction_cost_matrix(inst)
    if backend == "scipy":
        _, col = linear_sum_assignment(C)
    elif backend == "native":
        col = hungarian(C)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    cheapest = np.argmin(inst.weights, axis=1)
    assign = np.where(col < m, col, cheapest)
    M = ManyToOneMatching(assign, m)
    cost = float(inst.weights[np.arange(n), assign].sum())
    return M, cost


# --------------------------------------------------------------------------
# tree dynamic program


class Infeasible:
    """Absorbing +infinity for tree costs; never confused with a float."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFEASIBLE"

    def __reduce__(self):
        return (Infeasible, ())


INFEASIBLE = Infeasible()


def _add(x, y):
    if x is INFEASIBLE or y is INFEASIBLE:
        return INFEASIBLE
    return x + y


def _min(*xs):
    finite = [x for x in xs if x is not INFEASIBLE]
    return min(finite) if finite else INFEASIBLE


@dataclass
class LabeledTree:
    """Rooted tree with labels ``'o'``/``'m'`` and edge lengths to the parent.

    Vertex 0 is the root (``parent[0] == -1``) and ``edge_len[0]`` is unused.
    """

    parent: Sequence[int]
    label: Sequence[str]
    edge_len: Sequence[float]

    def __post_init__(self):
        self.parent = [int(p) for p in self.parent]
        self.label = list(self.label)
        self.edge_len = [float(x) for x in self.edge_len]
        n = len(self.parent)
        if n == 0:
            raise ValueError("empty tree")
        if not (len(self.label) == len(self.edge_len) == n):
            raise ValueError("parent/label/edge_len lengths differ")
        if self.parent[0] != -1:
            raise ValueError("vertex 0 must be the root")
        for v in range(1, n):
            p = self.parent[v]
            if not 0 <= p < v:
                raise ValueError("parents must precede children")
            if self.label[v] == self.label[p]:
                raise ValueError(f"edge {p}-{v} joins two {self.label[v]!r} vertices")
            if self.edge_len[v] < 0:
                raise ValueError("negative edge length")
        if any(lab not in ("o", "m") for lab in self.label):
            raise ValueError("labels must be 'o' or 'm'")

    def __len__(self):
        return len(self.parent)

    def children(self) -> list[list[int]]:
        ch = [[] for _ in self.parent]
        for v in range(1, len(self.parent)):
            ch[self.parent[v]].append(v)
        return ch

    def edges(self) -> list[tuple[int, int]]:
        return [(self.parent[v], v) for v in range(1, len(self.parent))]

    def diameter(self) -> int:
        ch = self.children()
        depth = [0] * len(self)
        best = 0
        for v in reversed(range(len(self))):
            hs = sorted((depth[c] + 1 for c in ch[v]), reverse=True)
            if hs:
                depth[v] = hs[0]
                best = max(best, hs[0] + (hs[1] if len(hs) > 1 else 0))
        return best


@dataclass(frozen=True)
class TreeDpValue:
    c_with: float | Infeasible
    c_without: float | Infeasible

    @property
    def difference(self):
        """``C(T) - C(T minus root)`` as a float, with signed infinities when one side fails."""
        if self.c_with is INFEASIBLE and self.c_without is INFEASIBLE:
            return INFEASIBLE
        if self.c_with is INFEASIBLE:
            return np.inf
        if self.c_without is INFEASIBLE:
            return -np.inf
        return self.c_with - self.c_without


def _node_value(label, children_vals, lens):
    c_without = 0.0
    for cv in children_vals:
        c_without = _add(c_without, cv.c_with)
    if not children_vals:
        return TreeDpValue(INFEASIBLE, 0.0)
    if label == "o":
        options = []
        for i, (cv, ln) in enumerate(zip(children_vals, lens)):
            rest = 0.0
            for j, other in enumerate(children_vals):
                if j != i:
                    rest = _add(rest, other.c_with)
            options.append(_add(_add(ln, _min(cv.c_with, cv.c_without)), rest))
        return TreeDpValue(_min(*options), c_without)
    # m-labeled: choose a nonempty child set I matched to the root
    total = 0.0
    free_terms = []
    forced = False
    for cv, ln in zip(children_vals, lens):
        take = _add(ln, cv.c_without)  # child in I
        leave = cv.c_with  # child not in I
        if take is INFEASIBLE and leave is INFEASIBLE:
            return TreeDpValue(INFEASIBLE, c_without)
        if leave is INFEASIBLE:
            total += take
            forced = True
        elif take is INFEASIBLE:
            total += leave
        else:
            total += leave
            free_terms.append(take - leave)
    negatives = [t for t in free_terms if t < 0]
    if negatives:
        total += sum(negatives)
    elif not forced:
        if not free_terms:
            return TreeDpValue(INFEASIBLE, c_without)
        total += min(free_terms)
    return TreeDpValue(total, c_without)


def tree_dp_all(tree: LabeledTree) -> list[TreeDpValue]:
    """Postorder values ``(C(T_v), C(T_v minus v))`` for every vertex v."""
    ch = tree.children()
    vals: list[TreeDpValue | None] = [None] * len(tree)
    for v in reversed(range(len(tree))):
        kids = ch[v]
        vals[v] = _node_value(
            tree.label[v], [vals[c] for c in kids], [tree.edge_len[c] for c in kids]
        )
    return vals


def tree_dp(tree: LabeledTree) -> TreeDpValue:
    """Minimum many-to-one matching cost on the tree, with and without the root."""
    return tree_dp_all(tree)[0]


def tree_enumerate(tree: LabeledTree, drop_root: bool = False):
    """Exhaustive optimum over all edge subsets (small trees only).

    Returns ``(cost, edges)``, or ``(INFEASIBLE, None)``. With ``drop_root``
    the root and its edges are removed first.
    """
    edges = tree.edges()
    nv = len(tree)
    if drop_root:
        edges = [e for e in edges if e[0] != 0]
    if len(edges) > 20:
        raise CapExceeded("too many edges to enumerate")
    active = range(1, nv) if drop_root else range(nv)
    best, best_set = INFEASIBLE, None
    for mask in range(1 << len(edges)):
        deg = [0] * nv
        cost = 0.0
        chosen = []
        for i, (p, c) in enumerate(edges):
            if mask >> i & 1:
                deg[p] += 1
                deg[c] += 1
                cost += tree.edge_len[c]
                chosen.append((p, c))
        ok = all(
            (deg[v] == 1) if tree.label[v] == "o" else (deg[v] >= 1) for v in active
        )
        if ok and (best is INFEASIBLE or cost < best):
            best, best_set = cost, chosen
    return best, best_set
