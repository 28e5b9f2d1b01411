import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manytoone.graph import (
    BipartiteInstance,
    ManyToOneMatching,
    RngStream,
    dump_instance,
    gen_instance,
    is_feasible,
    load_instance,
    many_side_size,
    matching_cost,
    mix_seed,
)


def test_small_shape_and_positive_weights():
    inst = gen_instance(4, 2.0, seed=7)
    assert (inst.n, inst.m) == (4, 2)
    assert inst.weights.shape == (4, 2)
    assert np.all(inst.weights > 0)


def test_ceiling_on_odd_n():
    assert gen_instance(5, 2.0, seed=1).m == 3


@given(n=st.integers(1, 10_000), alpha=st.floats(1.0001, 50.0))
def test_ceiling_exact(n, alpha):
    from fractions import Fraction

    m = many_side_size(n, alpha)
    # integer-only oracle: smallest m with m * alpha >= n
    a = Fraction(alpha)
    assert m * a >= n and (m - 1) * a < n


def test_exact_boundary_even_n():
    assert many_side_size(1000, 2.0) == 500
    assert many_side_size(1001, 2.0) == 501
    assert many_side_size(10, 2.5) == 4


def test_sample_mean_near_n():
    inst = gen_instance(10_000, 2.0, seed=3)
    assert abs(inst.weights.mean() / 1e4 - 1) < 0.03


def test_deterministic_per_seed():
    a = gen_instance(50, 1.7, seed=11)
    b = gen_instance(50, 1.7, seed=11)
    c = gen_instance(50, 1.7, seed=12)
    assert np.array_equal(a.weights, b.weights)
    assert not np.array_equal(a.weights, c.weights)


def test_streams_are_distinct():
    x = RngStream(5, 0).generator().random(8)
    y = RngStream(5, 1).generator().random(8)
    assert not np.array_equal(x, y)


@pytest.mark.parametrize("alpha", [1.0, 0.5, -2.0])
def test_rejects_alpha_at_most_one(alpha):
    with pytest.raises(ValueError):
        gen_instance(10, alpha, seed=0)


def test_instance_is_immutable():
    inst = gen_instance(6, 2.0, seed=0)
    with pytest.raises(ValueError):
        inst.weights[0, 0] = 1.0


def test_invalid_instances_rejected():
    with pytest.raises(ValueError):
        BipartiteInstance.from_weights([[1.0, -1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        BipartiteInstance.from_weights([[np.inf]])
    with pytest.raises(ValueError):
        BipartiteInstance.from_weights([[1.0, 2.0, 3.0]])  # m > n


def test_cost_all_zero():
    inst = BipartiteInstance.from_weights(np.zeros((3, 2)))
    assert matching_cost(inst, ManyToOneMatching([0, 1, 1], 2)) == 0


def test_cost_forced():
    inst = BipartiteInstance.from_weights([[3.0], [4.0]])
    assert matching_cost(inst, ManyToOneMatching([0, 0], 1)) == 7


def test_cost_matches_loop_oracle():
    inst = gen_instance(40, 3.0, seed=5)
    rng = np.random.default_rng(0)
    assign = rng.integers(0, inst.m, size=inst.n)
    total = 0.0
    for a in range(inst.n):
        total += inst.weights[a][assign[a]]
    assert matching_cost(inst, ManyToOneMatching(assign, inst.m)) == pytest.approx(total, rel=1e-14)


def test_cost_linear_in_weights():
    inst = gen_instance(30, 2.0, seed=2)
    M = ManyToOneMatching(np.arange(30) % inst.m, inst.m)
    scaled = BipartiteInstance.from_weights(4.5 * inst.weights, alpha=2.0)
    assert matching_cost(scaled, M) == pytest.approx(4.5 * matching_cost(inst, M), rel=1e-13)


def test_cost_dimension_mismatch():
    inst = gen_instance(4, 2.0, seed=0)
    with pytest.raises(ValueError):
        matching_cost(inst, ManyToOneMatching([0, 1, 0], 2))
    with pytest.raises(ValueError):
        is_feasible(inst, ManyToOneMatching([0, 1, 0, 2], 3))


@pytest.mark.parametrize(
    "assign,m,expected",
    [([0, 0], 2, False), ([0, 1], 2, True), ([1, 1, 0], 2, True)],
)
def test_feasibility_examples(assign, m, expected):
    inst = BipartiteInstance.from_weights(np.ones((len(assign), m)))
    assert is_feasible(inst, ManyToOneMatching(assign, m)) is expected


@settings(max_examples=200)
@given(st.data())
def test_feasibility_matches_set_oracle(data):
    m = data.draw(st.integers(1, 6))
    n = data.draw(st.integers(m, 10))
    assign = data.draw(st.lists(st.integers(0, m - 1), min_size=n, max_size=n))
    inst = BipartiteInstance.from_weights(np.ones((n, m)))
    M = ManyToOneMatching(assign, m)
    assert is_feasible(inst, M) == (set(assign) == set(range(m)))
    assert list(M.bdegree) == [assign.count(b) for b in range(m)]


def test_dump_load_roundtrip(tmp_path):
    inst = gen_instance(9, 2.5, seed=2**63 + 17)
    p = tmp_path / "inst.txt"
    dump_instance(inst, p)
    back = load_instance(p)
    assert (back.n, back.m, back.alpha, back.seed) == (inst.n, inst.m, inst.alpha, inst.seed)
    assert np.array_equal(back.weights, inst.weights)
    assert p.read_text().splitlines()[0] == f"9 4 2.5 {2**63 + 17}"


def test_mix_seed_is_64bit_and_spreads():
    vals = {mix_seed(i) for i in range(1000)}
    assert len(vals) == 1000
    assert all(0 <= v < 2**64 for v in vals)
