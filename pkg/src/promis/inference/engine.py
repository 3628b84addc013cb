"""Query probabilities by enumerating discrete worlds.

A ground program is compiled once into a boolean truth table ``T`` with one
row per discrete world and one column per joint outcome of the comparison
literals (bit ``j`` of the column index is comparison ``j``). The query
probability is then

    P = sum_w weight(w) * sum_code T[w, code] * P(code)

where ``P(code)`` is either a product of Gaussian CDF terms (exact path, when
comparisons are linear and touch disjoint sets of random variables) or an
empirical frequency from seeded Monte Carlo samples shared by all worlds.

Evaluation is vectorised over many locations that share one compiled table;
only elementwise operations and row-wise cumulative sums are used, so a
location's result does not depend on which other locations it was batched
with.
"""

from __future__ import annotations

import re
import zlib
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from promis.errors import CapacityError, InferenceError, InvalidArgumentError
from promis.hplp.ast import Atom, Program
from promis.hplp.printer import format_atom
from promis.inference.grounding import GroundProgram, ground

DEFAULT_LIMIT = 24
DEFAULT_SAMPLES = 10_000
_MASK64 = (1 << 64) - 1
_CHUNK_ELEMENTS = 1 << 21
_LOCATION = re.compile(r"x(\d+)\Z")

EXACT = "exact-cdf"
MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class InferenceMode:
    """``auto`` picks the exact path whenever it applies."""

    kind: str = "auto"
    samples: int = DEFAULT_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("auto", "exact", "monte-carlo"):
            raise InvalidArgumentError(f"unknown inference mode {self.kind!r}")
        if int(self.samples) != self.samples or self.samples < 1:
            raise InvalidArgumentError("Monte Carlo sample count must be a positive integer")
        object.__setattr__(self, "samples", int(self.samples))


@dataclass(frozen=True)
class World:
    assignment: tuple[int, ...]  # chosen category per choice
    weight: float


@dataclass(frozen=True)
class QueryResult:
    probability: float
    method: str
    samples: int | None = None
    seed: int | None = None
    worlds: int = 1
    variables: int = 0

    @property
    def diagnostics(self) -> dict:
        return {"worlds": self.worlds, "continuous_variables": self.variables}


def location_key(constant: str | None) -> int:
    """Monte Carlo stream key of a location constant: ``i`` for ``x<i>``."""
    if constant is None:
        return 0
    m = _LOCATION.match(constant)
    if m:
        return int(m.group(1))
    return zlib.crc32(constant.encode("utf-8"))


def enumerate_worlds(g: GroundProgram, limit: int = DEFAULT_LIMIT) -> Iterator[World]:
    """All discrete worlds with non-zero weight.

    The first choice varies slowest; category order is alternatives first,
    then "none".
    """
    if len(g.choices) > limit:
        raise CapacityError(len(g.choices), limit)
    probs = [c.category_probs() for c in g.choices]
    for assignment in np.ndindex(*[len(p) for p in probs]):
        weight = 1.0
        for p, k in zip(probs, assignment):
            weight *= p[k]
        if weight > 0:
            yield World(tuple(int(k) for k in assignment), weight)


# -- linear forms over random variables


def _linear(expr, means: np.ndarray, random: np.ndarray):
    """``(const, {var: coef})`` with arrays over locations, or ``None`` if nonlinear.

    Variables with ``random[v]`` false are point masses and fold into the
    constant.
    """
    tag = expr[0]
    n = means.shape[0]
    if tag == "num":
        return np.full(n, expr[1]), {}
    if tag == "rv":
        v = expr[1]
        if random[v]:
            return np.zeros(n), {v: np.ones(n)}
        return means[:, v].copy(), {}
    if tag == "neg":
        inner = _linear(expr[1], means, random)
        if inner is None:
            return None
        return -inner[0], {v: -c for v, c in inner[1].items()}
    a = _linear(expr[1], means, random)
    b = _linear(expr[2], means, random)
    if a is None or b is None:
        return None
    if tag == "*":
        if a[1] and b[1]:
            return None
        if b[1]:
            a, b = b, a
        return a[0] * b[0], {v: c * b[0] for v, c in a[1].items()}
    sign = 1.0 if tag == "+" else -1.0
    coefs = dict(a[1])
    for v, c in b[1].items():
        coefs[v] = coefs[v] + sign * c if v in coefs else sign * c
    return a[0] + sign * b[0], coefs


def _evaluate(expr, values: Sequence):
    tag = expr[0]
    if tag == "num":
        return expr[1]
    if tag == "rv":
        return values[expr[1]]
    if tag == "neg":
        return -_evaluate(expr[1], values)
    a = _evaluate(expr[1], values)
    b = _evaluate(expr[2], values)
    return a + b if tag == "+" else a - b if tag == "-" else a * b


def _holds(left, op, right):
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    if op == "=<":
        return left <= right
    return left >= right


def _rowsum(x: np.ndarray) -> np.ndarray:
    """Sum over the last axis in a fixed sequential order."""
    if x.shape[-1] == 0:
        return np.zeros(x.shape[:-1])
    return np.cumsum(x, axis=-1)[..., -1]


@dataclass
class CompiledProgram:
    """Truth table of a ground program plus its default parameters."""

    ground: GroundProgram
    radices: tuple[int, ...]
    categories: np.ndarray  # (worlds, choices) chosen category
    table: np.ndarray  # (worlds, 2**comparisons) bool
    comparisons: tuple = ()
    _linear_cache: dict = field(default_factory=dict, repr=False)

    @property
    def world_count(self) -> int:
        return self.table.shape[0]

    @property
    def variable_count(self) -> int:
        return len(self.ground.variables)

    def default_parameters(self):
        g = self.ground
        probs = [np.array([c.category_probs()]) for c in g.choices]
        means = np.array([[v.mean for v in g.variables]]).reshape(1, -1)
        stds = np.array([[v.std for v in g.variables]]).reshape(1, -1)
        return probs, means, stds

    def world_weights(self, probs: Sequence[np.ndarray]) -> np.ndarray:
        """(locations, worlds) products of chosen category probabilities."""
        n = probs[0].shape[0] if probs else 1
        weights = np.ones((n, self.world_count))
        for c, p in enumerate(probs):
            weights = weights * p[:, self.categories[:, c]]
        return weights

    # -- structural tests
    def exact_plan(self, random: np.ndarray) -> bool:
        """Whether the exact path applies for this pattern of non-degenerate variables."""
        key = random.tobytes()
        if key not in self._linear_cache:
            ok = True
            used: set[int] = set()
            probe = np.zeros((1, len(random)))
            for cmp in self.comparisons:
                form = _linear(("-", cmp.left, cmp.right), probe, random)
                if form is None:
                    ok = False
                    break
                vs = set(form[1])
                if vs & used:
                    ok = False
                    break
                used |= vs
            self._linear_cache[key] = ok
        return self._linear_cache[key]

    # -- evaluation
    def comparison_probabilities(self, means: np.ndarray, stds: np.ndarray, random: np.ndarray) -> np.ndarray:
        """(locations, comparisons) probability that each comparison holds."""
        n = means.shape[0]
        out = np.empty((n, len(self.comparisons)))
        for j, cmp in enumerate(self.comparisons):
            const, coefs = _linear(("-", cmp.left, cmp.right), means, random)
            m = const
            s2 = np.zeros(n)
            for v in sorted(coefs):
                m = m + coefs[v] * means[:, v]
                s2 = s2 + (coefs[v] * stds[:, v]) ** 2
            s = np.sqrt(s2)
            degenerate = s == 0
            safe = np.where(degenerate, 1.0, s)
            if cmp.op in ("<", "=<"):
                q = ndtr(-m / safe)
            else:
                q = ndtr(m / safe)
            q = np.where(degenerate, _holds(m, cmp.op, 0.0), q)
            out[:, j] = q
        return out

    def code_probabilities(self, q: np.ndarray) -> np.ndarray:
        k = q.shape[1]
        codes = np.arange(1 << k)
        pc = np.ones((q.shape[0], 1 << k))
        for j in range(k):
            bit = ((codes >> j) & 1).astype(bool)
            pc = pc * np.where(bit, q[:, j : j + 1], 1.0 - q[:, j : j + 1])
        return pc

    def exact_conditionals(self, means, stds, random) -> np.ndarray:
        """(locations, worlds) probability of the query given each world."""
        pc = self.code_probabilities(self.comparison_probabilities(means, stds, random))
        n, w, k = pc.shape[0], self.world_count, pc.shape[1]
        out = np.empty((n, w))
        step = max(1, _CHUNK_ELEMENTS // max(1, w * k))
        for lo in range(0, n, step):
            block = pc[lo : lo + step]
            out[lo : lo + step] = _rowsum(np.where(self.table[None], block[:, None, :], 0.0))
        return out

    def sample_conditionals(self, means, stds, loc_keys, samples: int, seed: int) -> np.ndarray:
        """Monte Carlo estimate of the per-world conditionals, one location at a time.

        Sample ``m`` of variable ``v`` at a location comes from a Philox
        stream keyed by ``(seed, location)`` with counter word 2 set to ``v``;
        it does not depend on the sample count or on other locations.
        """
        n = means.shape[0]
        k = len(self.comparisons)
        table = self.table.astype(np.int64)
        out = np.empty((n, self.world_count))
        codes = np.empty(samples, dtype=np.int64)
        for l in range(n):
            values = []
            for v in range(means.shape[1]):
                if stds[l, v] > 0:
                    bitgen = np.random.Philox(
                        counter=np.array([0, 0, v, 0], dtype=np.uint64),
                        key=np.array([seed & _MASK64, int(loc_keys[l]) & _MASK64], dtype=np.uint64),
                    )
                    z = np.random.Generator(bitgen).standard_normal(samples)
                    values.append(means[l, v] + stds[l, v] * z)
                else:
                    values.append(means[l, v])
            codes[:] = 0
            for j, cmp in enumerate(self.comparisons):
                hit = _holds(_evaluate(cmp.left, values), cmp.op, _evaluate(cmp.right, values))
                codes += np.broadcast_to(hit, (samples,)).astype(np.int64) << j
            counts = np.bincount(codes, minlength=1 << k)
            out[l] = (table @ counts) / samples
        return out

    def evaluate(
        self,
        probs: Sequence[np.ndarray] | None = None,
        means: np.ndarray | None = None,
        stds: np.ndarray | None = None,
        loc_keys: Sequence[int] | None = None,
        mode: InferenceMode = InferenceMode(),
    ) -> tuple[np.ndarray, np.ndarray]:
        """Query probability per location.

        Args:
            probs: Per choice, ``(L, categories)`` probabilities.
            means, stds: ``(L, variables)`` Normal parameters.
            loc_keys: Monte Carlo stream key per location.
            mode: Exact, sampling or automatic choice per location.

        Returns:
            ``(probability, exact)``; ``exact[l]`` tells which path served
            location ``l``.
        """
        if probs is None:
            probs, means, stds = self.default_parameters()
        n = means.shape[0]
        if loc_keys is None:
            loc_keys = np.zeros(n, dtype=np.int64)
        loc_keys = np.asarray(loc_keys, dtype=np.int64)
        weights = self.world_weights(probs)
        if weights.shape[0] != n:
            weights = np.broadcast_to(weights, (n, self.world_count))
        cond = np.empty((n, self.world_count))
        exact = np.zeros(n, dtype=bool)
        random = stds > 0
        patterns, inverse = np.unique(random, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        for gi, pattern in enumerate(patterns):
            rows = np.flatnonzero(inverse == gi)
            use_exact = mode.kind != "monte-carlo" and self.exact_plan(pattern)
            if mode.kind == "exact" and not use_exact:
                raise InferenceError(
                    "exact inference needs linear comparisons over disjoint random variables"
                )
            if use_exact:
                cond[rows] = self.exact_conditionals(means[rows], stds[rows], pattern)
                exact[rows] = True
            else:
                cond[rows] = self.sample_conditionals(means[rows], stds[rows], loc_keys[rows], mode.samples, mode.seed)
        p = _rowsum(weights * cond)
        return np.clip(p, 0.0, 1.0), exact

    # -- single world helpers
    def world_index(self, world: World) -> int:
        index = 0
        for radix, k in zip(self.radices, world.assignment):
            index = index * radix + k
        return index

    def truth(self, world: World, values: Sequence[float]) -> bool:
        code = 0
        for j, cmp in enumerate(self.comparisons):
            if _holds(_evaluate(cmp.left, values), cmp.op, _evaluate(cmp.right, values)):
                code |= 1 << j
        return bool(self.table[self.world_index(world), code])


def compile_program(g: GroundProgram, limit: int = DEFAULT_LIMIT) -> CompiledProgram:
    """Build the (worlds x comparison outcomes) truth table of the query.

    The enumeration limit applies to choice points plus comparison literals,
    since both multiply the table size.
    """
    cached = g._cache.get(("compiled", limit))
    if cached is not None:
        return cached
    kc = len(g.comparisons)
    count = len(g.choices) + kc
    radices = tuple(c.categories for c in g.choices)
    if count > limit or int(np.prod(radices, dtype=np.float64)) * (1 << kc) > (1 << limit):
        raise CapacityError(count, limit)
    n_worlds = int(np.prod(radices, dtype=np.int64)) if radices else 1
    categories = (
        np.array(list(np.ndindex(*radices)), dtype=np.int64).reshape(n_worlds, len(radices))
        if radices
        else np.zeros((1, 0), dtype=np.int64)
    )
    codes = np.arange(1 << kc)
    cmp_bits = [((codes >> j) & 1).astype(bool)[None, :] for j in range(kc)]

    by_head: dict[int, list] = {}
    for rule in g.rules:
        by_head.setdefault(rule.head, []).append(rule.body)
    values: dict[int, np.ndarray] = {}
    false = np.zeros((1, 1), dtype=bool)
    for atom in g.order:
        value = false
        for body in by_head.get(atom, ()):
            conj = np.ones((1, 1), dtype=bool)
            for lit in body:
                if lit[0] == "atom":
                    conj = conj & values[lit[1]]
                elif lit[0] == "choice":
                    conj = conj & (categories[:, lit[1]] == lit[2])[:, None]
                else:
                    conj = conj & cmp_bits[lit[1]]
            value = value | conj
        values[atom] = value
    query_value = values.get(g.query_index, false)
    table = np.ascontiguousarray(np.broadcast_to(query_value, (n_worlds, 1 << kc)))
    compiled = CompiledProgram(g, radices, categories, table, g.comparisons)
    g._cache[("compiled", limit)] = compiled
    return compiled


def eval_logic(g: GroundProgram, world: World, continuous_values: Mapping) -> bool:
    """Truth of the query in ``world`` with the random variables fixed.

    ``continuous_values`` maps variable names (``distance(x0, operator)``),
    atoms or indices to numbers.
    """
    compiled = compile_program(g)
    values = []
    for i, v in enumerate(g.variables):
        for key in (v.name, v.atom, i):
            if key in continuous_values:
                values.append(float(continuous_values[key]))
                break
        else:
            raise InvalidArgumentError(f"no value for random variable {v.name}")
    return compiled.truth(world, values)


def continuous_probability(g: GroundProgram, world: World, mode: InferenceMode = InferenceMode(), location: str | None = None) -> float:
    """Probability of the query given the discrete choices of ``world``."""
    compiled = compile_program(g)
    _, means, stds = compiled.default_parameters()
    random = stds[0] > 0
    w = compiled.world_index(world)
    use_exact = mode.kind != "monte-carlo" and compiled.exact_plan(random)
    if mode.kind == "exact" and not use_exact:
        raise InferenceError("exact inference needs linear comparisons over disjoint random variables")
    if use_exact:
        cond = compiled.exact_conditionals(means, stds, random)
    else:
        cond = compiled.sample_conditionals(means, stds, [location_key(location)], mode.samples, mode.seed)
    return float(np.clip(cond[0, w], 0.0, 1.0))


def query(
    program: Program,
    query_atom: Atom | None = None,
    location: str | None = None,
    mode: InferenceMode | None = None,
    limit: int = DEFAULT_LIMIT,
) -> QueryResult:
    """Probability of ``query_atom`` (or the program's query) at ``location``.

    ``location`` is substituted for the query's variables; it also keys the
    Monte Carlo streams so that locations sample independently.
    """
    mode = mode or InferenceMode()
    g = ground(program, query_atom, location)
    compiled = compile_program(g, limit)
    if location is None and g.query.args:
        location = next((a.name for a in g.query.args if hasattr(a, "name")), None)
    p, exact = compiled.evaluate(loc_keys=[location_key(location)], mode=mode)
    if exact[0]:
        return QueryResult(float(p[0]), EXACT, worlds=compiled.world_count, variables=compiled.variable_count)
    return QueryResult(
        float(p[0]), MONTE_CARLO, mode.samples, mode.seed, compiled.world_count, compiled.variable_count
    )


