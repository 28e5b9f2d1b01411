"""Shared builders for tests: random labeled trees and their padded matrices."""

import numpy as np

from manytoone.exact import INFEASIBLE, LabeledTree, tree_dp


def random_tree(rng, n_vertices, root_label=None):
    parent = [-1]
    label = [root_label or ("o" if rng.random() < 0.5 else "m")]
    edge_len = [0.0]
    for v in range(1, n_vertices):
        p = int(rng.integers(0, v))
        parent.append(p)
        label.append("m" if label[p] == "o" else "o")
        edge_len.append(float(rng.exponential(1.0)))
    return LabeledTree(parent, label, edge_len)


def random_feasible_tree(rng, max_vertices, min_vertices=2):
    """Resample until a many-to-one matching of the whole tree exists."""
    while True:
        t = random_tree(rng, int(rng.integers(min_vertices, max_vertices + 1)))
        if tree_dp(t).c_with is not INFEASIBLE:
            return t


def tree_matrix(tree):
    """Rows are o-vertices, columns m-vertices; absent edges weigh +inf.

    Returns ``(W, row_of, col_of)`` with vertex-to-index maps.
    """
    o = [v for v in range(len(tree)) if tree.label[v] == "o"]
    m = [v for v in range(len(tree)) if tree.label[v] == "m"]
    row_of = {v: i for i, v in enumerate(o)}
    col_of = {v: j for j, v in enumerate(m)}
    W = np.full((len(o), len(m)), np.inf)
    for p, c in tree.edges():
        a, b = (p, c) if tree.label[p] == "o" else (c, p)
        W[row_of[a], col_of[b]] = tree.edge_len[c]
    return W, row_of, col_of
