"""Program corpus shared by the test modules."""

FRIENDS = """
0.9::operates_drone(X) :- person(X), owns_drone(X).


0.2::owns_drone(X) :- friend(X, Y), owns_drone(Y).


person(justus).
person(jonas).
owns_drone(justus).
friend(jonas, justus).


query(operates_drone(jonas)).
"""

RELATION_FACTS = """
distance(x0, building) ~ normal(20, 0.5).
distance(x1, building) ~ normal(19, 0.4).
...
0.9::over(x0, primary).
0.8::over(x1, primary).
...
"""

CHANGE_FACTS = """
0.0::change(x0).
0.7::change(x1).
...
"""

MISSION = """
initial_charge ~ normal(90, 5).
discharge ~ normal(-0.2, 0.1).
weight ~ normal(2.0, 0.1).


1/10::fog; 9/10::clear.
vlos(X) :- fog, distance(X, operator) < 250;
    clear, distance(X, operator) < 500.


can_return(X) :- B is initial_charge,
    O is discharge, D is distance(X, operator),
    0 < B + (2 * O * D).


permit(X) :- over(X, park);
    distance(X, primary) < 10.


landscape(X) :- vlos(X), weight < 25,
    permit(X), can_return(X).
"""

CORPUS = {
    "friends": FRIENDS,
    "relation_facts": RELATION_FACTS,
    "change_facts": CHANGE_FACTS,
    "mission": MISSION,
}
