"""Min-sum belief propagation for many-to-one matching on a bipartite graph.

Messages live on two planes. ``x_ab[a, b]`` is what A-vertex ``a`` sends to
B-vertex ``b``; ``x_ba[b, a]`` is what ``b`` sends to ``a``. Starting from
zero, one synchronous step computes

    x_ab[a, b] <- min_{u != b} (w[a, u] - x_ba[u, a])
    x_ba[b, a] <- min_{u != a} (w[u, b] - x_ab[u, b])^+

Absent edges may be encoded as ``+inf`` weights, which lets the dense update
run on any bipartite graph (trees in particular).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .graph import BipartiteInstance, ManyToOneMatching

__all__ = [
    "MessageState",
    "DecisionMap",
    "BpDiagnostics",
    "init_state",
    "bp_step",
    "bp_decide",
    "decision_edges",
    "bp_repair",
    "bp_solve",
]


def _weights(inst) -> np.ndarray:
    if isinstance(inst, BipartiteInstance):
        return inst.weights
    w = np.asarray(inst, dtype=np.float64)
    if w.ndim != 2:
        raise ValueError("weights must be a 2-d matrix")
    return w


@dataclass
class MessageState:
    k: int
    x_ab: np.ndarray  # n x m
    x_ba: np.ndarray  # m x n


def init_state(inst) -> MessageState:
    n, m = _weights(inst).shape
    return MessageState(0, np.zeros((n, m)), np.zeros((m, n)))


def _exclusive_min(V: np.ndarray) -> np.ndarray:
    """``out[i, j] = min_{l != j} V[i, l]`` via the row minimum and runner-up."""
    n, m = V.shape
    rows = np.arange(n)
    idx = np.argmin(V, axis=1)
    first = V[rows, idx]
    if m > 1:
        masked = V.copy()
        masked[rows, idx] = np.inf
        second = masked.min(axis=1)
    else:
        second = np.full(n, np.inf)
    out = np.repeat(first[:, None], m, axis=1)
    out[rows, idx] = second
    return out


def bp_step(inst, state: MessageState) -> MessageState:
    """One synchronous update; reads iterate k, returns iterate k+1."""
    w = _weights(inst)
    if state.x_ab.shape != w.shape or state.x_ba.shape != w.T.shape:
        raise ValueError("message planes do not match the instance")
    with np.errstate(invalid="ignore"):
        new_ab = _exclusive_min(w - state.x_ba.T)
        new_ba = _exclusive_min(np.maximum(w - state.x_ab, 0.0).T)
    return MessageState(state.k + 1, new_ab, new_ba)


@dataclass
class DecisionMap:
    a_choice: np.ndarray
    b_choice: list[np.ndarray]

    def uncovered(self) -> np.ndarray:
        """B vertices not chosen by any A vertex."""
        m = len(self.b_choice)
        return np.flatnonzero(np.bincount(self.a_choice, minlength=m) == 0)


def bp_decide(inst, state: MessageState) -> DecisionMap:
    """Each A vertex picks its argmin partner; each B vertex its argmin set."""
    w = _weights(inst)
    with np.errstate(invalid="ignore"):
        a_choice = np.argmin(w - state.x_ba.T, axis=1)
        D = w - state.x_ab
    b_choice = []
    for b in range(w.shape[1]):
        col = D[:, b]
        neg = np.flatnonzero(col < 0)
        if neg.size:
            b_choice.append(neg)
        else:
            if np.all(np.isnan(col)):
                raise FloatingPointError(f"B vertex {b} has no well-defined choice")
            b_choice.append(np.array([np.nanargmin(col)]))
    return DecisionMap(a_choice=a_choice, b_choice=b_choice)


def decision_edges(d: DecisionMap) -> set[tuple[int, int]]:
    """The edge set chosen by either endpoint, as ``(a, b)`` pairs."""
    edges = {(a, int(b)) for a, b in enumerate(d.a_choice)}
    for b, us in enumerate(d.b_choice):
        edges.update((int(u), b) for u in us)
    return edges


def bp_repair(inst, d: DecisionMap) -> tuple[ManyToOneMatching, int]:
    """Patch the A-side decisions into an onto assignment.

    Uncovered B vertices are served greedily: repeatedly take the cheapest
    edge from a surplus A vertex (one whose partner has degree >= 2) to an
    uncovered B vertex. Returns the matching and the number of moves.
    """
    w = _weights(inst)
    n, m = w.shape
    assign = np.array(d.a_choice, dtype=np.int64)
    deg = np.bincount(assign, minlength=m)
    uncovered = np.flatnonzero(deg == 0)
    moves = 0
    while uncovered.size:
        surplus = np.flatnonzero(deg[assign] >= 2)
        if not surplus.size:
            raise AssertionError("repair stalled: no surplus A vertex left")
        sub = w[np.ix_(surplus, uncovered)]
        i, j = np.unravel_index(np.argmin(sub), sub.shape)
        a, b = surplus[i], uncovered[j]
        deg[assign[a]] -= 1
        assign[a] = b
        deg[b] += 1
        uncovered = np.delete(uncovered, j)
        moves += 1
    M = ManyToOneMatching(assign, m)
    if M.bdegree.min() < 1:
        raise AssertionError("repair did not reach a feasible matching")
    return M, moves


@dataclass
class BpDiagnostics:
    sup_delta_ab: list[float] = field(default_factory=list)
    sup_delta_ba: list[float] = field(default_factory=list)
    uncovered: list[int] = field(default_factory=list)
    repaired: int = 0
    state: MessageState | None = None
    decision: DecisionMap | None = None

    def rows(self):
        for k, (dab, dba, unc) in enumerate(
            zip(self.sup_delta_ab, self.sup_delta_ba, self.uncovered), start=1
        ):
            yield k, dab, dba, unc

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["k", "sup_norm_delta_ab", "sup_norm_delta_ba", "uncovered_count"])
        for row in self.rows():
            wr.writerow([row[0], repr(row[1]), repr(row[2]), row[3]])
        return buf.getvalue()


def _sup_change(new, old) -> float:
    with np.errstate(invalid="ignore"):
        d = np.abs(new - old)
    d[new == old] = 0.0
    return float(d.max()) if d.size else 0.0


def bp_solve(inst, k_max: int, state: MessageState | None = None):
    """Run ``k_max`` steps, decide, repair.

    Returns ``(matching, cost, diagnostics)``; the diagnostics also hold the
    final messages and decision map.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    w = _weights(inst)
    state = init_state(w) if state is None else state
    diag = BpDiagnostics()
    m = w.shape[1]
    for _ in range(k_max):
        new = bp_step(w, state)
        diag.sup_delta_ab.append(_sup_change(new.x_ab, state.x_ab))
        diag.sup_delta_ba.append(_sup_change(new.x_ba, state.x_ba))
        with np.errstate(invalid="ignore"):
            a_choice = np.argmin(w - new.x_ba.T, axis=1)
        diag.uncovered.append(int(np.count_nonzero(np.bincount(a_choice, minlength=m) == 0)))
        state = new
    d = bp_decide(w, state)
    M, moves = bp_repair(w, d)
    diag.repaired = moves
    diag.state = state
    diag.decision = d
    cost = float(w[np.arange(w.shape[0]), M.assign].sum())
    return M, cost, diag
