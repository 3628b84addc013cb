"""Random program generators used by the inference and acceptance tests."""

import random


def _prob(rng):
    return round(rng.uniform(0.05, 0.95), 3)


def single_variable_program(seed: int) -> str:
    """A ``landscape`` program where every comparison reads its own variable.

    Mixes probabilistic facts, an annotated disjunction, a probabilistic rule
    and a disjunctive body so that the discrete and continuous parts interact.
    Every comparison is linear in one Normal variable, so the exact path
    applies.
    """
    rng = random.Random(seed)
    lines = []
    n_vars = rng.randint(1, 4)
    params = []
    for v in range(n_vars):
        params.append((round(rng.uniform(-5, 5), 3), round(rng.uniform(0.2, 3), 3)))
        lines.append(f"v{v} ~ normal({params[v][0]}, {params[v][1]}).")
    n_facts = rng.randint(1, 3)
    for f in range(n_facts):
        lines.append(f"{_prob(rng)}::f{f}.")
    p1 = _prob(rng) / 2
    lines.append(f"{p1}::sunny; {round(rng.uniform(0, 1 - p1), 3)}::cloudy.")

    def comparison(v):
        scale = rng.choice([1, 2, -1, 0.5])
        shift = round(rng.uniform(-3, 3), 2)
        op = rng.choice(["<", ">"])
        mean, std = params[v]
        # keep the threshold within a couple of deviations so the CDF is not saturated
        bound = round(scale * mean + shift + rng.uniform(-2, 2) * abs(scale) * std, 2)
        return f"{scale} * v{v} + {shift} {op} {bound}"

    vars_left = list(range(n_vars))
    rng.shuffle(vars_left)
    conjunctions = []
    for _ in range(rng.randint(1, 3)):
        lits = [rng.choice([f"f{f}" for f in range(n_facts)] + ["sunny", "cloudy", "ok"])]
        if vars_left:
            lits.append(comparison(vars_left.pop()))
        conjunctions.append(", ".join(lits))
    while vars_left:
        conjunctions[-1] += ", " + comparison(vars_left.pop())
    lines.append(f"{_prob(rng)}::ok :- f0.")
    lines.append("landscape(X) :- " + "; ".join(conjunctions) + ".")
    lines.append("query(landscape(x0)).")
    return "\n".join(lines) + "\n"


def positive_program(seed: int) -> str:
    """Discrete program whose probabilistic facts only occur positively."""
    rng = random.Random(seed)
    n = rng.randint(2, 6)
    lines = [f"{_prob(rng)}::e{i}." for i in range(n)]
    for r in range(rng.randint(1, 4)):
        body = ", ".join(rng.sample([f"e{i}" for i in range(n)], rng.randint(1, min(3, n))))
        lines.append(f"goal :- {body}.")
    p1 = _prob(rng)
    lines.append(f"{p1}::bonus; {round((1 - p1) * rng.random(), 3)}::other.")
    lines.append("goal :- bonus, e0.")
    lines.append("query(goal).")
    return "\n".join(lines) + "\n"
