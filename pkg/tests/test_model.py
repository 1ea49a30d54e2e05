import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multispread import (
    ModelSchema, compile_model, competitive_sis, dtmc_to_ctmc_rate, load_model_config, preset, seir, sir, sis,
    validate,
)
from multispread.errors import CompileError, ConfigError, DomainError, ValidationError
from multispread.model import EdgeMechanism

from conftest import net, path, star

# -ln(0.99) and -ln(0.5)/2 evaluated with 40-digit decimal arithmetic
NEG_LN_099 = 0.01005033585350144118354885755854770608552
HALF_LN_2 = 0.3465735902799726547086160607290882840378


def test_sis_is_valid():
    report = validate(sis(0.3, 0.1))
    assert report.ok and bool(report)


def test_nonzero_diagonal_reported():
    s = sis(0.3, 0.1)
    rates = s.node_rates.copy()
    rates[0, 0] = 0.1
    report = validate(ModelSchema(s.state_names, rates, s.layers))
    assert not report
    assert any("nonzero diagonal" in v for v in report.violations)


def test_inducer_out_of_range_reported():
    s = sis(0.3, 0.1)
    bad = EdgeMechanism("contact", 2, s.layers[0].rates)
    report = validate(ModelSchema(s.state_names, s.node_rates, (bad,)))
    assert any("inducer out of range" in v for v in report.violations)


def test_report_is_exhaustive():
    rates = np.array([[0.5, -1.0, 0], [0, 0, 0], [0, 0, 0]])
    schema = ModelSchema(["A", "A", "B"], rates, (EdgeMechanism("x", 7, np.full((3, 3), np.nan)),))
    text = " | ".join(validate(schema).violations)
    for needle in ("duplicate state names", "negative rate", "nonzero diagonal", "inducer out of range", "non-finite"):
        assert needle in text
    with pytest.raises(ValidationError):
        validate(schema).raise_if_invalid()


def test_too_few_states():
    assert not validate(ModelSchema(["S"], [[0.0]]))


def test_compile_matches_layer_count():
    m = compile_model(sir(0.005, 0.01), net(path(3)))
    assert m.n_states == 3 and m.n_layers == 1 and m.n_nodes == 3
    with pytest.raises(CompileError):
        compile_model(sir(0.005, 0.01), net(path(3), path(3)))


def test_compile_rejects_invalid_schema():
    s = sis(1, 1)
    with pytest.raises(ValidationError):
        compile_model(ModelSchema(s.state_names, -s.node_rates, s.layers), net(path(2)))


def test_competitive_sis_relevance_sets():
    m = compile_model(competitive_sis([1.0, 1.0], 1.0), net(path(3), path(3)))
    s = m.schema.state_index
    assert m.susceptible_states == (frozenset({s("S")}), frozenset({s("S")}))
    assert m.relevant_states == (frozenset({s("S"), s("I1")}), frozenset({s("S"), s("I2")}))
    assert set().union(*m.relevant_states) == {0, 1, 2}


def test_relevance_sets_match_matrices():
    m = compile_model(seir(0.2, 0.5, 0.1), net(star(3)))
    rows = {i for i in range(4) if m.edge_rates[0, i].any()}
    cols = {j for j in range(4) if m.edge_rates[0, :, j].any()}
    assert m.susceptible_states[0] == rows == {0}
    assert m.relevant_states[0] == rows | cols == {0, 1}
    np.testing.assert_array_equal(m.has_exit, [True, True, True, False])


def test_sir_preset_values():
    s = sir(beta=0.005, delta=0.01)
    i = s.state_index
    assert s.state_names == ("S", "I", "R")
    assert s.node_rates[i("I"), i("R")] == 0.01
    assert s.layers[0].rates[i("S"), i("I")] == 0.005
    assert s.layers[0].inducer == i("I")
    assert s.node_rates.sum() == 0.01 and s.layers[0].rates.sum() == 0.005


def test_competitive_sis_preset_shape():
    s = competitive_sis([1, 1], 1)
    assert s.n_states == 3 and s.n_layers == 2
    assert [e.inducer for e in s.layers] == [1, 2]
    for k, e in enumerate(s.layers):
        assert e.rates[0, k + 1] == 1 and e.rates.sum() == 1
    np.testing.assert_array_equal(s.node_rates[:, 0], [0, 1, 1])


def test_seir_transition_kinds():
    s = seir(0.3, 0.2, 0.1)
    S, E, I, R = (s.state_index(x) for x in "SEIR")
    assert s.layers[0].rates[S, E] == 0.3 and s.layers[0].inducer == I
    assert s.node_rates[E, I] == 0.2 and s.node_rates[I, R] == 0.1
    assert np.count_nonzero(s.node_rates) == 2 and np.count_nonzero(s.layers[0].rates) == 1


def test_preset_by_name():
    assert preset("sis", beta=1, delta=2).digest() == sis(1, 2).digest()
    with pytest.raises(ValidationError):
        preset("xyz")


@pytest.mark.parametrize("factory", [lambda: sis(-1, 1), lambda: sir(1, float("nan")),
                                     lambda: seir(1, -2, 1), lambda: competitive_sis([1, -1], 1)])
def test_presets_reject_negative_rates(factory):
    with pytest.raises(ValidationError):
        factory()


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=6), st.floats(0, 1e3), st.floats(0, 1e3))
def test_presets_always_valid(betas, a, b):
    for s in (sis(a, b), sir(a, b), seir(a, b, a), competitive_sis(betas, b)):
        assert validate(s).ok


def test_dtmc_conversion_examples():
    assert dtmc_to_ctmc_rate(0.0, 1.0) == 0.0
    assert dtmc_to_ctmc_rate(0.01, 1.0) == pytest.approx(NEG_LN_099, rel=1e-15)
    assert dtmc_to_ctmc_rate(0.5, 2.0) == pytest.approx(HALF_LN_2, rel=1e-15)


@pytest.mark.parametrize("p,dt", [(1.0, 1.0), (-0.1, 1.0), (1.5, 1.0), (0.5, 0.0), (0.5, -1.0)])
def test_dtmc_domain(p, dt):
    with pytest.raises(DomainError):
        dtmc_to_ctmc_rate(p, dt)


@settings(max_examples=200)
@given(st.floats(1e-12, 0.999999), st.floats(1e-3, 1e3))
def test_dtmc_round_trip(p, dt):
    rate = dtmc_to_ctmc_rate(p, dt)
    assert -math.expm1(-rate * dt) == pytest.approx(p, rel=1e-12)


@given(st.floats(0, 0.99), st.floats(0, 0.99))
def test_dtmc_monotone(p, q):
    if p < q:
        assert dtmc_to_ctmc_rate(p) < dtmc_to_ctmc_rate(q)


# -- config files --------------------------------------------------------------

CONFIG = """
n_nodes = 5
states = ["S", "I", "R"]
node_transitions = [{from = "I", to = "R", rate = 0.1}]

[[layers]]
name = "home"
inducer = "I"
network = "a.txt"
edge_transitions = [{from = "S", to = "I", rate = 0.5}]

[[layers]]
name = "work"
inducer = "I"
network = "b.txt"
directed = true
edge_transitions = [{from = "S", to = "I", rate = 0.2}]
"""


def test_load_model_config(tmp_text):
    tmp_text("0 1\n1 2\n", "a.txt")
    tmp_text("2 3 4.0\n", "b.txt")
    schema, network = load_model_config(tmp_text(CONFIG, "model.toml"))
    assert schema.state_names == ("S", "I", "R")
    assert [e.name for e in schema.layers] == ["home", "work"]
    assert network.n_nodes == 5 and network.n_layers == 2
    assert network[0].n_arcs == 4
    assert network[1].out_neighbors(2) == [(3, 4.0)] and network[1].out_neighbors(3) == []
    compile_model(schema, network)


def test_config_errors(tmp_text):
    with pytest.raises(ConfigError, match="does not exist"):
        load_model_config(tmp_text(CONFIG, "model.toml"))
    with pytest.raises(ConfigError):
        load_model_config(tmp_text("states = [", "broken.toml"))
    with pytest.raises(ConfigError):
        load_model_config(tmp_text('states = ["S", "I"]\n[[layers]]\nname = "x"\n', "noinducer.toml"))
