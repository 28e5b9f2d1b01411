"""End-to-end acceptance checks, one test per criterion at its stated tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from helpers import random_feasible_tree, tree_matrix
from manytoone.bp import bp_solve, decision_edges
from manytoone.exact import brute_force, reduction_solve, tree_dp
from manytoone.experiment import trial_seed
from manytoone.graph import BipartiteInstance, gen_instance, is_feasible
from manytoone.pwit import PwitTooLarge, pooled_root_messages
from manytoone.rde import c_star, c_star_integral, constants, endogeny, ks_to_F, ks_to_G, popdyn


def test_criterion_01_reduction_equals_brute_force(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, feasible = 0.0, True
    count = 0
    for _ in range(250):
        m = int(rng.integers(1, 5))
        n = int(rng.integers(m, 8))
        inst = BipartiteInstance.from_weights(rng.exponential(size=(n, m)))
        Mb, cb = brute_force(inst)
        Mr, cr = reduction_solve(inst)
        worst = max(worst, abs(cb - cr))
        feasible &= is_feasible(inst, Mb) and is_feasible(inst, Mr)
        count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and feasible and elapsed < 10
    report(1, ok, f"{count} instances, max |diff| = {worst:.2e}, feasible = {feasible}, "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_02_closed_form_equals_integral(report):
    t0 = time.perf_counter()
    diffs = {a: abs(c_star(a) - c_star_integral(a)) for a in (1.5, 2.0, 3.0, 5.0)}
    elapsed = time.perf_counter() - t0
    ok = max(diffs.values()) < 1e-8 and elapsed < 30
    report(2, ok, "max |closed - integral| = "
                  f"{max(diffs.values()):.2e} over alpha in {{1.5, 2, 3, 5}}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_alpha_to_one(report):
    v = c_star(1 + 1e-6)
    gap = abs(v - math.pi ** 2 / 6)
    ok = gap < 1e-3
    report(3, ok, f"c_star(1+1e-6) = {v:.10f}, |gap to pi^2/6| = {gap:.2e}")
    assert ok


N_DESK, TRIALS_DESK, SEED_DESK = 2000, 20, 20240601


@pytest.fixture(scope="module")
def desk_runs():
    """Exact, BP(k=10) and BP(k=50) costs on the same 20 instances at n = 2000."""
    exact, bp10, bp50 = [], [], []
    t0 = time.perf_counter()
    for t in range(TRIALS_DESK):
        inst = gen_instance(N_DESK, 2.0, trial_seed(SEED_DESK, t))
        M, c = reduction_solve(inst)
        assert is_feasible(inst, M)
        exact.append(c / N_DESK)
        M10, c10, d10 = bp_solve(inst, 10)
        # continue the same message iterates from k = 10 to k = 50
        M50, c50, _ = bp_solve(inst, 40, state=d10.state)
        assert is_feasible(inst, M10) and is_feasible(inst, M50)
        bp10.append(c10 / N_DESK)
        bp50.append(c50 / N_DESK)
    return np.array(exact), np.array(bp10), np.array(bp50), time.perf_counter() - t0


def test_criterion_04_mean_cost_near_limit(report, desk_runs):
    exact, _, _, elapsed = desk_runs
    target = c_star(2.0)
    mean = exact.mean()
    se = exact.std(ddof=1) / math.sqrt(exact.size)
    ok = abs(mean - target) <= 0.05
    report(4, ok, f"n={N_DESK}, {TRIALS_DESK} trials: mean cost/n = {mean:.4f} "
                  f"(stderr {se:.4f}), c_star(2) = {target:.4f}, |gap| = {abs(mean - target):.4f}; "
                  f"exact + BP sweep took {elapsed:.0f} s")
    assert ok


def test_criterion_05_bp_near_exact(report, desk_runs):
    exact, bp10, bp50, _ = desk_runs
    gap10 = bp10.mean() / exact.mean() - 1
    gap50 = bp50.mean() / exact.mean() - 1
    ok = abs(gap50) <= 0.02 and gap50 <= gap10
    report(5, ok, f"relative gap BP vs exact: k=10 {gap10:.2e}, k=50 {gap50:.2e}")
    assert ok


def test_criterion_06_tree_exactness(report):
    rng = np.random.default_rng(606)
    big = 1e9
    bad_cost = bad_consistency = 0
    for _ in range(100):
        tree = random_feasible_tree(rng, 40)
        W, _, _ = tree_matrix(tree)
        k = max(tree.diameter(), 1)
        M, cost, diag = bp_solve(W, k)
        if abs(cost - tree_dp(tree).c_with) > 1e-9:
            bad_cost += 1
        padded = BipartiteInstance.from_weights(np.where(np.isfinite(W), W, big))
        Mopt, _ = reduction_solve(padded)
        opt = {(a, int(b)) for a, b in enumerate(Mopt.assign)}
        st = diag.state
        for a, b in zip(*np.nonzero(np.isfinite(W))):
            consistent = W[a, b] < st.x_ab[a, b] + st.x_ba[b, a]
            if consistent != ((int(a), int(b)) in opt):
                bad_consistency += 1
        if decision_edges(diag.decision) != opt:
            bad_consistency += 1
    ok = bad_cost == 0 and bad_consistency == 0
    report(6, ok, f"100 trees: cost mismatches {bad_cost}, biconditional violations {bad_consistency}")
    assert ok


def test_criterion_07_population_dynamics(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    from_G = [ks for g, ks in popdyn(2.0, 10, N=100_000, P=64, init="G", rng=rng)]
    from_exp = [ks for g, ks in popdyn(2.0, 30, N=100_000, P=64, init="exp", rng=rng)]
    elapsed = time.perf_counter() - t0
    ok = max(from_G) < 0.01 and from_exp[-1] < 0.02 and elapsed < 60
    report(7, ok, f"G start: max KS over 10 steps = {max(from_G):.4f}; Exp(1) start: "
                  f"KS after 30 steps = {from_exp[-1]:.4f}; {elapsed:.0f} s")
    assert ok


ENDOGENY_FRACTION = 0.05  # frozen after the calibration run recorded in the ledger


def test_criterion_08_endogeny(report):
    N = 100_000
    hist, se = endogeny(2.0, 40, N=N, P=64, rng=np.random.default_rng(808), with_stderr=True)
    hist, se = np.array(hist), np.array(se)
    # an increase counts only if it exceeds two standard errors of the difference
    noise = 2 * np.hypot(se[1:], se[:-1])
    increases = np.flatnonzero(hist[1:] - hist[:-1] > noise)
    ok = increases.size == 0 and hist[40] < ENDOGENY_FRACTION * hist[0]
    report(8, ok, f"delta_0 = {hist[0]:.3f}, delta_40 = {hist[40]:.2e} "
                  f"(ratio {hist[40] / hist[0]:.2e}), 2-sigma increases: {increases.size}")
    assert ok


def test_criterion_09_pwit_marginals(report):
    D, P, TREES = 8, 32, 10_000
    c = constants(2.0)
    t0 = time.perf_counter()
    try:
        ks = {}
        # deepest first: the size guard fires before any shallow work is spent
        for k in (8, 6, 4, 2):
            pooled = pooled_root_messages(2.0, k, P, TREES, seed=909)
            ks[k] = (ks_to_F(c, pooled["o"]), ks_to_G(c, pooled["m"]))
    except PwitTooLarge as exc:
        report(9, False, f"D={D}, P={P}, {TREES} trees not computable: {exc} "
                         "(see the decisions ledger for the cost analysis)")
        pytest.fail(f"truncated tree too large: {exc}")
    elapsed = time.perf_counter() - t0
    seq_F = [ks[k][0] for k in (2, 4, 6, 8)]
    seq_G = [ks[k][1] for k in (2, 4, 6, 8)]
    ok = (max(ks[8]) < 0.03 and all(np.diff(seq_F) < 0) and all(np.diff(seq_G) < 0)
          and elapsed < 120)
    report(9, ok, f"KS to F by k: {seq_F}; KS to G by k: {seq_G}; {elapsed:.0f} s")
    assert ok


def test_criterion_10_functional_identities(report):
    from scipy import integrate

    worst_id = worst_int = worst_g0 = 0.0
    for alpha in (1.5, 2.0, 3.0, 5.0):
        cst = constants(alpha)
        t = np.linspace(0.0, 50.0, 1000)
        worst_id = max(worst_id, float(np.max(np.abs(alpha * cst.F(-t) + cst.G(t) - alpha))))
        lo, _ = integrate.quad(cst.f, -np.inf, 0.0, epsabs=1e-13)
        hi, _ = integrate.quad(cst.f, 0.0, np.inf, epsabs=1e-13)
        worst_int = max(worst_int, abs(lo + hi - 1))
        worst_g0 = max(worst_g0, abs(cst.G(0.0) - (alpha - cst.w_o)))
    ok = worst_id < 1e-12 and worst_int < 1e-8 and worst_g0 < 1e-10
    report(10, ok, f"identity {worst_id:.1e}, |int f - 1| {worst_int:.1e}, "
                   f"|G(0) - (alpha - w_o)| {worst_g0:.1e}")
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
