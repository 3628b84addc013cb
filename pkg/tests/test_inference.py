import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import FRIENDS, MISSION
from programs import positive_program, single_variable_program
from promis.errors import CapacityError, CycleError, GroundingError, InvalidArgumentError
from promis.hplp import parse
from promis.hplp.ast import Atom, Const, ProbFact
from promis.inference import (
    InferenceMode,
    World,
    compile_program,
    continuous_probability,
    enumerate_worlds,
    eval_logic,
    ground,
    query,
)
from promis.inference.engine import EXACT, MONTE_CARLO

# Frozen oracle: P(0 < B + 2*O*D) with B~N(90,5), O~N(-0.2,0.1), D~N(300,1),
# by 2-d quadrature of Phi((90 + 2*o*d)/5) against the (o, d) density.
CAN_RETURN_ORACLE = 0.309154
PHI_2 = 0.5 * (1 + math.erf(2 / math.sqrt(2)))


def test_ground_friends():
    g = ground(parse(FRIENDS))
    assert len(g.choices) == 2
    names = sorted(g.atoms[c.atoms[0]].predicate for c in g.choices)
    assert all(n.startswith("__aux") for n in names)
    assert g.query == Atom("operates_drone", (Const("jonas"),))
    assert not g.variables


def test_ground_location_drops_other_locations():
    text = "0.8::over(x3, park).\n0.1::over(x4, park).\nlandscape(X) :- over(X, park).\n"
    g = ground(parse(text), location="x3")
    assert len(g.choices) == 1 and g.choices[0].probs == (0.8,)
    assert len([r for r in g.rules if r.head == g.query_index]) == 1
    assert Atom("over", (Const("x4"), Const("park"))) not in g.atoms


def test_cycle_rejected():
    with pytest.raises(CycleError) as info:
        ground(parse("a :- b.\nb :- a.\n"), Atom("a"))
    assert "a" in str(info.value) and "b" in str(info.value)


def test_unbound_variable_in_comparison():
    with pytest.raises(GroundingError):
        ground(parse("d ~ normal(0, 1).\nq :- d < Y.\n"), Atom("q"))


def test_unknown_random_variable():
    with pytest.raises(GroundingError):
        ground(parse("q :- nothing < 3.\n"), Atom("q"))


def worlds_of(text, goal="q"):
    return list(enumerate_worlds(ground(parse(text), Atom(goal))))


def test_worlds_two_bernoulli():
    ws = worlds_of("0.9::a.\n0.2::b.\nq :- a, b.\n")
    assert [w.weight for w in ws] == pytest.approx([0.18, 0.72, 0.02, 0.08], abs=1e-15)


def test_worlds_annotated_disjunction():
    ws = worlds_of("1/10::fog; 9/10::clear.\nq :- fog.\nq :- clear.\n")
    assert [w.weight for w in ws] == pytest.approx([0.1, 0.9])


def test_worlds_leftover_mass():
    ws = worlds_of("0.3::a; 0.3::b.\nq :- a.\nq :- b.\n")
    assert [w.weight for w in ws] == pytest.approx([0.3, 0.3, 0.4])


def test_capacity_limit():
    text = "".join(f"0.5::a{i}.\n" for i in range(6)) + "q :- " + ", ".join(f"a{i}" for i in range(6)) + ".\n"
    g = ground(parse(text), Atom("q"))
    with pytest.raises(CapacityError, match="6"):
        list(enumerate_worlds(g, limit=5))
    with pytest.raises(CapacityError):
        query(parse(text), Atom("q"), limit=5)


def test_eval_logic_friends():
    g = ground(parse(FRIENDS))
    assert eval_logic(g, World((0, 0), 0.18), {})
    assert not eval_logic(g, World((1, 0), 0.72), {})
    assert not eval_logic(g, World((0, 1), 0.02), {})


def test_eval_logic_arithmetic():
    text = (
        "initial_charge ~ normal(90, 5).\ndischarge ~ normal(-0.2, 0.1).\nd ~ normal(100, 1).\n"
        "q :- B is initial_charge, O is discharge, D is d, 0 < B + (2 * O * D).\n"
    )
    g = ground(parse(text), Atom("q"))
    values = {"initial_charge": 90, "discharge": -0.2, "d": 100}
    assert eval_logic(g, World((), 1.0), values)
    assert not eval_logic(g, World((), 1.0), dict(values, d=300))


def test_continuous_probability_examples():
    g = ground(parse("d ~ normal(20, 0.5).\nq :- d < 21.\n"), Atom("q"))
    assert continuous_probability(g, World((), 1.0)) == pytest.approx(PHI_2, abs=1e-6)
    g = ground(parse("d ~ normal(20, 0).\nq :- d < 21.\n"), Atom("q"))
    assert continuous_probability(g, World((), 1.0)) == 1.0
    with pytest.raises(InvalidArgumentError):
        InferenceMode("monte-carlo", 0)


def test_product_of_gaussians_uses_sampling():
    text = (
        "b ~ normal(90, 5).\no ~ normal(-0.2, 0.1).\nd ~ normal(300, 1).\n"
        "q :- B is b, O is o, D is d, 0 < B + (2 * O * D).\n"
    )
    m = 100_000
    r = query(parse(text), Atom("q"), mode=InferenceMode("auto", m, 3))
    assert r.method == MONTE_CARLO and r.samples == m
    band = 3 * math.sqrt(CAN_RETURN_ORACLE * (1 - CAN_RETURN_ORACLE) / m)
    assert abs(r.probability - CAN_RETURN_ORACLE) < band


def test_query_examples():
    r = query(parse(FRIENDS))
    assert r.probability == pytest.approx(0.18, abs=1e-12) and r.method == EXACT
    assert r.diagnostics == {"worlds": 4, "continuous_variables": 0}
    assert query(parse("ok.\nlandscape(X) :- ok.\n"), location="x0").probability == 1.0
    assert query(parse("landscape(X) :- missing(X).\n"), location="x0").probability == 0.0


def test_exact_mode_refuses_nonlinear():
    text = "a ~ normal(0, 1).\nb ~ normal(0, 1).\nq :- a * b > 0.\n"
    with pytest.raises(Exception):
        query(parse(text), Atom("q"), mode=InferenceMode("exact"))
    r = query(parse(text), Atom("q"))
    assert r.method == MONTE_CARLO and r.probability == pytest.approx(0.5, abs=0.02)


def test_shared_variable_forces_sampling():
    text = "a ~ normal(0, 1).\nq :- a > -1, a < 1.\n"
    r = query(parse(text), Atom("q"), mode=InferenceMode("auto", 200_000, 1))
    assert r.method == MONTE_CARLO
    assert r.probability == pytest.approx(2 * 0.8413447460685429 - 1, abs=0.005)


def test_monte_carlo_deterministic():
    text = MISSION + "distance(x5, operator) ~ normal(300, 20).\ndistance(x5, primary) ~ normal(5, 2).\n0.5::over(x5, park).\n"
    mode = InferenceMode("monte-carlo", 5000, 11)
    a = query(parse(text), location="x5", mode=mode)
    b = query(parse(text), location="x5", mode=mode)
    assert a == b and 0.0 <= a.probability <= 1.0
    c = query(parse(text), location="x5", mode=InferenceMode("monte-carlo", 5000, 12))
    assert c.probability != a.probability


def test_mission_point_mass_distance_runs_exact():
    text = MISSION + "distance(x0, operator) ~ normal(100, 0).\ndistance(x0, primary) ~ normal(50, 3).\n0.9::over(x0, park).\n"
    r = query(parse(text), location="x0")
    assert r.method == EXACT
    # can_return reduces to B + 200*O > 0, a Normal with mean 50 and variance 25 + 400;
    # vlos holds surely, weight < 25 is 230 deviations away and permit is over(x0, park)
    phi = lambda z: 0.5 * (1 + math.erf(z / math.sqrt(2)))
    expected = 0.9 * phi(50 / math.sqrt(425)) * phi(230)
    assert r.probability == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_exact_agrees_with_sampling(seed):
    program = parse(single_variable_program(seed))
    exact = query(program, mode=InferenceMode("exact"))
    mc = query(program, mode=InferenceMode("monte-carlo", 100_000, seed))
    assert exact.method == EXACT
    assert abs(exact.probability - mc.probability) < 0.01


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_partition_of_unity(seed):
    for text in (single_variable_program(seed), positive_program(seed)):
        g = ground(parse(text))
        assert abs(sum(w.weight for w in enumerate_worlds(g)) - 1.0) < 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 1.0), st.integers(0, 20))
def test_monotone_in_positive_facts(seed, bump, which):
    program = parse(positive_program(seed))
    facts = [i for i, c in enumerate(program.clauses) if isinstance(c, ProbFact)]
    k = facts[which % len(facts)]
    old = program.clauses[k]
    raised = ProbFact(old.p + (1 - old.p) * bump, old.atom)
    program2 = type(program)(program.clauses[:k] + (raised,) + program.clauses[k + 1 :])
    assert query(program2).probability >= query(program).probability - 1e-12


def test_common_random_numbers_keep_probability_valid():
    text = "0.5::a.\nx ~ normal(0, 1).\ny ~ normal(0, 1).\nq :- a, x * y > 0.\nq :- x * y < 0.\n"
    g = ground(parse(text), Atom("q"))
    compiled = compile_program(g)
    p, exact = compiled.evaluate(loc_keys=[0], mode=InferenceMode("monte-carlo", 1000, 0))
    assert not exact[0] and 0 <= p[0] <= 1
