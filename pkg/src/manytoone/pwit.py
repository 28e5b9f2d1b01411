"""Truncated Poisson weighted infinite trees and BP on them.

Every vertex keeps the first ``P`` points of its own rate-1 Poisson process
as child edge lengths, multiplied by ``alpha`` when the vertex is labeled
``o``. Labels alternate with depth. The tree is a complete ``P``-ary tree
stored level by level: the children of node ``j`` at depth ``d`` are nodes
``j*P .. j*P + P - 1`` at depth ``d + 1``.

Each level is drawn from its own seed-derived stream, so a deeper tree
with the same seed shares every level of a shallower one bit for bit, and
levels can be generated in any order. Within a level the first points of
all processes are drawn before the gaps; the first points of level ``D+1``
are therefore available without the rest of that level, which is what the
iteration-1 messages of the deepest vertices need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import MASK64

__all__ = [
    "DEFAULT_NODE_CAP",
    "PwitTooLarge",
    "TruncatedPwit",
    "RootMessages",
    "sample_pwit",
    "pwit_bp",
    "pwit_bp_lazy",
    "pooled_root_messages",
]

DEFAULT_NODE_CAP = 20_000_000


class PwitTooLarge(MemoryError):
    pass


def _other(label: str) -> str:
    return "m" if label == "o" else "o"


def _label_at(root_label: str, depth: int) -> str:
    return root_label if depth % 2 == 0 else _other(root_label)


def _stream(seed: int, key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed & MASK64, spawn_key=(key,))
    return np.random.Generator(np.random.Philox(ss))


def _root_label(seed: int, alpha: float) -> str:
    return "o" if _stream(seed, 0).random() < alpha / (1.0 + alpha) else "m"


def _level(seed: int, depth: int, root_label: str, alpha: float, P: int,
           first_only: bool = False) -> np.ndarray:
    """Edge lengths from depth ``depth-1`` to ``depth``; shape ``(P**(depth-1), P)``."""
    parents = P ** (depth - 1)
    rng = _stream(seed, depth)
    first = rng.standard_exponential(parents)
    scale = alpha if _label_at(root_label, depth - 1) == "o" else 1.0
    if first_only:
        return (scale * first)[:, None]
    gaps = rng.standard_exponential((parents, P - 1))
    pts = np.cumsum(np.column_stack([first, gaps]), axis=1)
    return scale * pts


def _check_size(P: int, D: int, cap: int):
    nodes = sum(P ** d for d in range(D + 1))
    if nodes > cap:
        raise PwitTooLarge(f"P={P}, D={D} needs {nodes:.3g} nodes; cap is {cap:.3g}")


@dataclass
class TruncatedPwit:
    alpha: float
    depth: int
    branching: int
    root_label: str
    lengths: list[np.ndarray]  # lengths[d-1]: (P**(d-1), P) edges into depth d
    leaf_first: np.ndarray  # first child edge of each depth-D vertex
    seed: int = 0

    def label(self, depth: int) -> str:
        return _label_at(self.root_label, depth)

    @property
    def n_nodes(self) -> int:
        return sum(self.branching ** d for d in range(self.depth + 1))


def sample_pwit(alpha: float, D: int, P: int, seed: int,
                root_label: str | None = None,
                node_cap: int = DEFAULT_NODE_CAP) -> TruncatedPwit:
    """Materialize a depth-``D``, branching-``P`` truncated PWIT.

    The root label is drawn from the mixture ``(alpha/(1+alpha), 1/(1+alpha))``
    unless ``root_label`` fixes it.
    """
    if D < 1 or P < 8:
        raise ValueError("need D >= 1 and P >= 8")
    _check_size(P, D, node_cap)
    rl = _root_label(seed, alpha) if root_label is None else root_label
    if rl not in ("o", "m"):
        raise ValueError("root_label must be 'o' or 'm'")
    lengths = [_level(seed, d, rl, alpha, P) for d in range(1, D + 1)]
    leaf_first = _level(seed, D + 1, rl, alpha, P, first_only=True)[:, 0]
    return TruncatedPwit(alpha, D, P, rl, lengths, leaf_first, seed)


@dataclass
class RootMessages:
    """Iteration-k messages sent to the root by each of its children."""

    child_label: str
    k: int
    values: np.ndarray


def _combine(label: str, lengths: np.ndarray, msgs: np.ndarray) -> np.ndarray:
    # lengths, msgs: (parents, P); one message per parent toward its own parent
    terms = lengths - msgs
    if label == "m":
        terms = np.maximum(terms, 0.0)
    return terms.min(axis=1)


def pwit_bp(tree: TruncatedPwit, k: int) -> RootMessages:
    """Run ``k`` synchronous BP iterations from zero and read the root's inbox.

    Only vertices at depth ``<= k`` contribute, plus the first child edge of
    those at depth ``k``; all of it lies inside the tree when ``k <= D``.
    """
    if not 1 <= k <= tree.depth:
        raise ValueError(f"k must be in [1, D={tree.depth}] to avoid boundary effects")
    P = tree.branching
    # iteration-1 messages of depth-k vertices: the first point of each process
    if k == tree.depth:
        msgs = tree.leaf_first.copy()
    else:
        msgs = tree.lengths[k][:, 0].copy()
    for d in range(k - 1, 0, -1):
        msgs = _combine(tree.label(d), tree.lengths[d], msgs.reshape(-1, P))
    return RootMessages(tree.label(1), k, msgs)


def pwit_bp_lazy(alpha: float, k: int, P: int, seed: int,
                 root_label: str | None = None,
                 node_cap: int = DEFAULT_NODE_CAP) -> RootMessages:
    """Same result as ``pwit_bp(sample_pwit(alpha, D, P, seed), k)`` for any ``D >= k``.

    Levels are generated bottom-up, so only two are resident at a time.
    """
    if k < 1 or P < 8:
        raise ValueError("need k >= 1 and P >= 8")
    if P ** k > node_cap:
        raise PwitTooLarge(f"P={P}, k={k} needs {P ** k:.3g} vertices at the deepest level")
    rl = _root_label(seed, alpha) if root_label is None else root_label
    msgs = _level(seed, k + 1, rl, alpha, P, first_only=True)[:, 0]
    for d in range(k - 1, 0, -1):
        lengths = _level(seed, d + 1, rl, alpha, P)
        msgs = _combine(_label_at(rl, d), lengths, msgs.reshape(-1, P))
    return RootMessages(_label_at(rl, 1), k, msgs)


def pooled_root_messages(alpha: float, k: int, P: int, trees: int, seed: int,
                         root_label: str | None = None,
                         node_cap: int = DEFAULT_NODE_CAP) -> dict[str, np.ndarray]:
    """Pool root-incoming messages over independent trees, keyed by child label."""
    from .graph import mix_seed

    pooled: dict[str, list[np.ndarray]] = {"o": [], "m": []}
    for t in range(trees):
        rm = pwit_bp_lazy(alpha, k, P, mix_seed(seed ^ t), root_label, node_cap)
        pooled[rm.child_label].append(rm.values)
    return {lab: (np.concatenate(v) if v else np.empty(0)) for lab, v in pooled.items()}
