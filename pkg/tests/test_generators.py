import math

import numpy as np
import pytest

from multispread import generate
from multispread.errors import ValidationError
from multispread.generators import generate_edges, geometric_radius


def test_er_p0_is_empty():
    assert generate("erdos_renyi", 10, seed=1, p=0.0).n_arcs == 0


def test_er_p1_is_complete():
    assert generate("erdos_renyi", 12, seed=1, p=1.0).n_arcs == 12 * 11


def test_complete_arc_count():
    assert generate("complete", 5).n_arcs == 20


def test_er_edge_count_within_three_sigma():
    n, p = 1000, 0.2
    pairs = math.comb(n, 2)
    mean, sigma = pairs * p, math.sqrt(pairs * p * (1 - p))
    assert mean == 99_900 and abs(sigma - 282.7) < 0.1
    for seed in range(3):
        edges = generate("er", n, seed=seed, p=p).n_arcs // 2
        assert abs(edges - mean) <= 3 * sigma


def test_er_pairs_are_distinct_and_uniform():
    src, dst = generate_edges("er", 40, seed=5, p=0.5)
    assert np.all(src != dst)
    keys = np.minimum(src, dst) * 40 + np.maximum(src, dst)
    assert np.unique(keys).size == keys.size
    # each of the 780 possible pairs is an independent coin flip: low-index pairs are not favored
    lo = np.maximum(src, dst) < 20
    assert abs(lo.sum() / src.size - 190 / 780) < 0.08


def test_geometric_target_degree():
    g = generate("geometric", 10_000, seed=0, target_degree=11)
    assert abs(g.mean_degree - 11) / 11 < 0.10


def test_geometric_radius_solves_expected_degree():
    r = geometric_radius(10_000, 11)
    k = 9_999 * (math.pi * r**2 - 8 * r**3 / 3 + r**4 / 2)
    assert k == pytest.approx(11, rel=1e-9)


def test_geometric_needs_one_parameter():
    with pytest.raises(ValidationError):
        generate("geometric", 10)
    with pytest.raises(ValidationError):
        generate("geometric", 10, radius=0.1, target_degree=3)


@pytest.mark.parametrize("kind,params", [
    ("erdos_renyi", {"p": 0.1}),
    ("geometric", {"radius": 0.2}),
    ("barabasi_albert", {"m": 2}),
    ("watts_strogatz", {"k": 4, "p_rewire": 0.1}),
    ("complete", {}),
])
def test_generators_are_deterministic_and_undirected(kind, params):
    a = generate(kind, 60, seed=11, **params)
    b = generate(kind, 60, seed=11, **params)
    assert a.digest() == b.digest()
    assert a.is_symmetric()
    assert np.all(a.out_w == 1.0)
    if kind != "complete":
        assert generate(kind, 60, seed=12, **params).digest() != a.digest()


def test_barabasi_albert_edge_count():
    # m edges per node after the m-node seed
    assert generate("ba", 100, seed=0, m=3).n_arcs // 2 == 3 * (100 - 3)


@pytest.mark.parametrize("kind,params", [
    ("erdos_renyi", {"p": 1.5}),
    ("erdos_renyi", {"p": -0.1}),
    ("barabasi_albert", {"m": 0}),
    ("watts_strogatz", {"k": 4, "p_rewire": 2.0}),
    ("nonsense", {}),
])
def test_invalid_parameters(kind, params):
    with pytest.raises(ValidationError):
        generate(kind, 10, **params)


def test_n_must_be_positive():
    with pytest.raises(ValidationError):
        generate("complete", 0)
