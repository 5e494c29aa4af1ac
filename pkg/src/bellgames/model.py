"""Bell scenarios, behaviors, and the four inequality families.

Outcomes are stored as integers 0..d-1; for binary scenarios the +1/-1 view
maps outcome 0 to +1 and outcome 1 to -1.  Correlator tables are plain
ndarrays of shape ``settings_per_party`` holding E(x_1, ..., x_n).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

TABLE_ENTRY_CAP = 10**6

# Sentinel setting index for a party that does not measure in a correlator term.
ABSENT = -1


class ScenarioMismatchError(ValueError):
    """Raised when an inequality and a behavior disagree on the scenario."""


class InequalityParseError(ValueError):
    """Raised on malformed inequality text, with a line number in the message."""


@dataclass(frozen=True)
class BellScenario:
    n_parties: int
    settings_per_party: tuple[int, ...]
    outcomes_per_party: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "settings_per_party", tuple(int(m) for m in self.settings_per_party))
        object.__setattr__(self, "outcomes_per_party", tuple(int(d) for d in self.outcomes_per_party))
        if self.n_parties < 1:
            raise ValueError("scenario needs at least one party")
        if len(self.settings_per_party) != self.n_parties:
            raise ValueError("settings_per_party length must equal n_parties")
        if len(self.outcomes_per_party) != self.n_parties:
            raise ValueError("outcomes_per_party length must equal n_parties")
        if any(m < 1 for m in self.settings_per_party):
            raise ValueError("every party needs at least one setting")
        if any(d < 2 for d in self.outcomes_per_party):
            raise ValueError("every party needs at least two outcomes")
        if self.table_entries() > TABLE_ENTRY_CAP:
            raise ValueError(
                f"dense table would need {self.table_entries()} entries "
                f"(cap {TABLE_ENTRY_CAP})"
            )

    def table_entries(self) -> int:
        return math.prod(self.settings_per_party) * math.prod(self.outcomes_per_party)

    def table_shape(self) -> tuple[int, ...]:
        return self.settings_per_party + self.outcomes_per_party

    def strategy_count(self) -> int:
        """Number of deterministic product strategies d_j ** m_j over parties."""
        return math.prod(d**m for d, m in zip(self.outcomes_per_party, self.settings_per_party))

    def is_binary(self) -> bool:
        return all(d == 2 for d in self.outcomes_per_party)

    def setting_tuples(self):
        return itertools.product(*(range(m) for m in self.settings_per_party))

    def outcome_tuples(self):
        return itertools.product(*(range(d) for d in self.outcomes_per_party))


@dataclass(frozen=True)
class Behavior:
    """Conditional probability table P(outcomes | settings)."""

    scenario: BellScenario
    table: np.ndarray

    def __post_init__(self):
        table = np.array(self.table, dtype=float)
        if table.shape != self.scenario.table_shape():
            raise ValueError(
                f"behavior table shape {table.shape} does not match scenario "
                f"{self.scenario.table_shape()}"
            )
        if table.min() < -1e-12:
            raise ValueError(f"behavior has a negative probability: {table.min()!r}")
        sums = table.reshape(self.scenario.settings_per_party + (-1,)).sum(axis=-1)
        if np.max(np.abs(sums - 1.0)) > 1e-10:
            raise ValueError("behavior rows must each sum to 1")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    def prob(self, settings: tuple[int, ...], outcomes: tuple[int, ...]) -> float:
        return float(self.table[tuple(settings) + tuple(outcomes)])

    def is_no_signaling(self, tol: float = 1e-9) -> bool:
        """Check that each party's marginals do not depend on the others' settings."""
        n = self.scenario.n_parties
        for j in range(n):
            # marginal of party j's outcome given all settings
            out_axes = tuple(n + k for k in range(n) if k != j)
            marg = self.table.sum(axis=out_axes)  # settings + outcome_j
            # must be constant along every other party's setting axis
            for k in range(n):
                if k == j:
                    continue
                ref = marg.take(0, axis=k)
                for s in range(1, self.scenario.settings_per_party[k]):
                    if np.max(np.abs(marg.take(s, axis=k) - ref)) > tol:
                        return False
        return True


def deterministic_behavior(scenario: BellScenario, assignments) -> Behavior:
    """The local deterministic behavior given per-party setting->outcome tables.

    ``assignments[j][x]`` is party j's outcome at setting x.
    """
    table = np.zeros(scenario.table_shape())
    for s in scenario.setting_tuples():
        r = tuple(assignments[j][s[j]] for j in range(scenario.n_parties))
        table[s + r] = 1.0
    return Behavior(scenario, table)


def random_behavior(scenario: BellScenario, rng: np.random.Generator) -> Behavior:
    """A behavior with independent Dirichlet-uniform rows (signaling allowed)."""
    n_out = math.prod(scenario.outcomes_per_party)
    rows = rng.dirichlet(np.ones(n_out), size=math.prod(scenario.settings_per_party))
    return Behavior(scenario, rows.reshape(scenario.table_shape()))


def mix_behaviors(b1: Behavior, b2: Behavior, lam: float) -> Behavior:
    if b1.scenario != b2.scenario:
        raise ScenarioMismatchError("cannot mix behaviors from different scenarios")
    return Behavior(b1.scenario, lam * b1.table + (1.0 - lam) * b2.table)


def outcome_signs(scenario: BellScenario) -> np.ndarray:
    """Product of +1/-1 outcome values over parties, indexed by outcome tuple."""
    if not scenario.is_binary():
        raise ValueError("the +1/-1 view requires binary outcomes")
    signs = np.ones(scenario.outcomes_per_party)
    for r in scenario.outcome_tuples():
        signs[r] = math.prod(1 - 2 * rj for rj in r)
    return signs


def behavior_to_correlators(behavior: Behavior) -> np.ndarray:
    """Full correlator table E(x) = sum_r prod_j(+1/-1 of r_j) P(r|x)."""
    scenario = behavior.scenario
    signs = outcome_signs(scenario)
    n_settings = math.prod(scenario.settings_per_party)
    flat = behavior.table.reshape(n_settings, -1) @ signs.reshape(-1)
    return flat.reshape(scenario.settings_per_party)


# ---------------------------------------------------------------------------
# Inequality families


@dataclass(frozen=True)
class LinearInequality:
    """sum a_{s,r} P(r|s) <= bound, with a dense coefficient tensor."""

    scenario: BellScenario
    coeffs: np.ndarray  # shape = settings + outcomes
    bound: float
    normalized: bool = False
    affine_record: tuple[float, float] = (1.0, 0.0)  # normalized = alpha*orig + beta

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != self.scenario.table_shape():
            raise ValueError(
                f"coefficient shape {coeffs.shape} does not match scenario "
                f"{self.scenario.table_shape()}"
            )
        if self.normalized:
            if coeffs.min() < 0.0:
                raise ValueError("normalized inequality has a negative coefficient")
            if abs(coeffs.sum() - 1.0) > 1e-12:
                raise ValueError("normalized coefficients must sum to 1")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        alpha, beta = self.affine_record
        if alpha <= 0.0:
            raise ValueError("affine record scale must be positive")

    def original_lhs(self, normalized_lhs: float) -> float:
        alpha, beta = self.affine_record
        return (normalized_lhs - beta) / alpha


@dataclass(frozen=True)
class CorrelatorInequality:
    """sum_x g_x E(x) <= bound over full or partial setting tuples.

    Terms are a mapping from setting tuples to coefficients; a slot may hold
    ``ABSENT`` for a party that does not measure in that term.
    """

    scenario: BellScenario
    terms: dict[tuple[int, ...], float]
    bound: float

    def __post_init__(self):
        if not self.scenario.is_binary():
            raise ValueError("correlator inequalities require binary outcomes")
        clean = {}
        for key, g in self.terms.items():
            key = tuple(int(x) for x in key)
            if len(key) != self.scenario.n_parties:
                raise ValueError(f"term {key} has wrong arity")
            for j, x in enumerate(key):
                if x != ABSENT and not 0 <= x < self.scenario.settings_per_party[j]:
                    raise ValueError(f"term {key}: setting {x} out of range for party {j}")
            if all(x == ABSENT for x in key):
                raise ValueError("a term must involve at least one party")
            if g != 0.0:
                clean[key] = float(g)
        if not clean:
            raise ValueError("inequality needs at least one nonzero coefficient")
        object.__setattr__(self, "terms", clean)

    def has_absent_slots(self) -> bool:
        return any(ABSENT in key for key in self.terms)


@dataclass(frozen=True)
class QuadraticInequality:
    """(sum g E)^2 + (sum h E)^2 <= bound, g and h with entries in {-1, 0, +1}."""

    scenario: BellScenario
    g: np.ndarray  # shape = settings_per_party
    h: np.ndarray
    bound: float

    def __post_init__(self):
        if not self.scenario.is_binary():
            raise ValueError("quadratic inequalities require binary outcomes")
        g = np.array(self.g, dtype=float)
        h = np.array(self.h, dtype=float)
        shape = self.scenario.settings_per_party
        if g.shape != shape or h.shape != shape:
            raise ValueError(f"g/h must have shape {shape}")
        for name, t in (("g", g), ("h", h)):
            if not np.all(np.isin(t, (-1.0, 0.0, 1.0))):
                raise ValueError(f"{name} entries must lie in {{-1, 0, +1}}")
        ng, nh = int(np.abs(g).sum()), int(np.abs(h).sum())
        if ng != nh or ng == 0:
            raise ValueError(f"g and h must have equal nonzero support, got {ng} and {nh}")
        g.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", h)

    @property
    def support(self) -> int:
        return int(np.abs(self.g).sum())


@dataclass(frozen=True)
class PolynomialInequality:
    """sum_k c_k prod_i P(i)^{k_i} <= bound over indexed probabilities P(i).

    ``indices[i]`` names the (settings, outcomes) pair behind P(i);
    ``monomials`` lists (coefficient, exponent vector) pairs.
    """

    scenario: BellScenario
    indices: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]
    monomials: tuple[tuple[float, tuple[int, ...]], ...]
    bound: float
    normalized: bool = False

    def __post_init__(self):
        indices = tuple(
            (tuple(int(x) for x in s), tuple(int(r) for r in o)) for s, o in self.indices
        )
        for s, o in indices:
            if len(s) != self.scenario.n_parties or len(o) != self.scenario.n_parties:
                raise ValueError(f"index ({s}, {o}) has wrong arity")
        monomials = tuple((float(c), tuple(int(k) for k in ks)) for c, ks in self.monomials)
        for c, ks in monomials:
            if len(ks) != len(indices):
                raise ValueError("exponent vector length must match the index set")
            if any(k < 0 for k in ks):
                raise ValueError("exponents must be nonnegative integers")
        if self.normalized:
            total = sum(c for c, _ in monomials)
            if any(c < 0 for c, _ in monomials) or abs(total - 1.0) > 1e-12:
                raise ValueError("normalized monomial coefficients must be >= 0 and sum to 1")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "monomials", monomials)


# ---------------------------------------------------------------------------
# Evaluation


def evaluate_linear(ineq: LinearInequality, behavior: Behavior) -> float:
    if ineq.scenario != behavior.scenario:
        raise ScenarioMismatchError("inequality and behavior scenarios differ")
    return float(np.sum(ineq.coeffs * behavior.table))


def evaluate_correlator(ineq: CorrelatorInequality, correlators: np.ndarray) -> float:
    """sum g_x E(x) against a full correlator table (no absent slots)."""
    if ineq.has_absent_slots():
        raise ValueError("inequality has absent-party slots; augment it first")
    e = np.asarray(correlators, dtype=float)
    if e.shape != ineq.scenario.settings_per_party:
        raise ScenarioMismatchError(
            f"correlator table shape {e.shape} does not match scenario "
            f"{ineq.scenario.settings_per_party}"
        )
    return float(sum(g * e[key] for key, g in ineq.terms.items()))


def evaluate_quadratic(ineq: QuadraticInequality, correlators: np.ndarray) -> tuple[float, bool]:
    e = np.asarray(correlators, dtype=float)
    if e.shape != ineq.scenario.settings_per_party:
        raise ScenarioMismatchError(
            f"correlator table shape {e.shape} does not match scenario "
            f"{ineq.scenario.settings_per_party}"
        )
    lhs = float(np.sum(ineq.g * e)) ** 2 + float(np.sum(ineq.h * e)) ** 2
    return lhs, lhs > ineq.bound


def evaluate_polynomial(ineq: PolynomialInequality, behavior: Behavior) -> float:
    if ineq.scenario != behavior.scenario:
        raise ScenarioMismatchError("inequality and behavior scenarios differ")
    probs = [behavior.prob(s, o) for s, o in ineq.indices]
    total = 0.0
    for c, ks in ineq.monomials:
        term = c
        for p, k in zip(probs, ks):
            if k:
                term *= p**k
        total += term
    return total


def correlator_to_linear(ineq: CorrelatorInequality) -> LinearInequality:
    """Expand sum g E into probability coefficients a_{x,r} = g_x prod(+1/-1 of r)."""
    if ineq.has_absent_slots():
        raise ValueError("inequality has absent-party slots; augment it first")
    scenario = ineq.scenario
    signs = outcome_signs(scenario)
    coeffs = np.zeros(scenario.table_shape())
    for key, g in ineq.terms.items():
        coeffs[key] += g * signs
    return LinearInequality(scenario, coeffs, ineq.bound)


# ---------------------------------------------------------------------------
# Canonical CHSH objects

CHSH_SCENARIO = BellScenario(2, (2, 2), (2, 2))


def chsh_correlator_inequality() -> CorrelatorInequality:
    """E(00) + E(01) + E(10) - E(11) <= 2."""
    terms = {(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): -1.0}
    return CorrelatorInequality(CHSH_SCENARIO, terms, 2.0)


def chsh_win_table() -> np.ndarray:
    """Indicator V[x, y, a, b] of a XOR b == x AND y."""
    v = np.zeros((2, 2, 2, 2))
    for x, y, a, b in itertools.product(range(2), repeat=4):
        v[x, y, a, b] = 1.0 if (a ^ b) == (x & y) else 0.0
    return v


def chsh_probability_inequality() -> LinearInequality:
    """The CHSH predicate averaged over uniform questions: value <= 3/4 classically."""
    coeffs = 0.25 * chsh_win_table()
    return LinearInequality(CHSH_SCENARIO, coeffs, 0.75)


# ---------------------------------------------------------------------------
# Text format
#
# Line-oriented; blank lines and `#` comments ignored.  Header lines:
#
#   family: linear | correlator | quadratic
#   parties: n
#   settings: m_1 ... m_n
#   outcomes: d_1 ... d_n
#   bound: B
#
# Term lines follow the headers, one term per line:
#
#   linear:      coeff  s_1 ... s_n  r_1 ... r_n
#   correlator:  coeff  s_1 ... s_n          (slots may be `_` for absent)
#   quadratic:   g|h  coeff  s_1 ... s_n     (coeff in {-1, 1})

_FAMILIES = ("linear", "correlator", "quadratic")


def _parse_int(tok: str, lineno: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise InequalityParseError(f"line {lineno}: {what} {tok!r} is not an integer") from None


def _parse_float(tok: str, lineno: int, what: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise InequalityParseError(f"line {lineno}: {what} {tok!r} is not a number") from None


def parse_inequality(text: str):
    """Parse the line-oriented inequality format.

    Returns a LinearInequality, CorrelatorInequality or QuadraticInequality.
    Raises InequalityParseError with a line number on malformed input.
    """
    headers: dict[str, tuple[int, str]] = {}
    terms: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" in line and not terms:
            key, _, value = line.partition(":")
            headers[key.strip().lower()] = (lineno, value.strip())
        else:
            terms.append((lineno, line.split()))

    for key in ("family", "parties", "settings", "outcomes", "bound"):
        if key not in headers:
            raise InequalityParseError(f"missing header line {key!r}")
    lineno, family = headers["family"]
    family = family.lower()
    if family not in _FAMILIES:
        raise InequalityParseError(f"line {lineno}: unknown family {family!r}")
    lineno, value = headers["parties"]
    n = _parse_int(value, lineno, "party count")
    lineno, value = headers["settings"]
    toks = value.split()
    if len(toks) != n:
        raise InequalityParseError(f"line {lineno}: expected {n} settings counts, got {len(toks)}")
    settings = tuple(_parse_int(t, lineno, "settings count") for t in toks)
    lineno, value = headers["outcomes"]
    toks = value.split()
    if len(toks) != n:
        raise InequalityParseError(f"line {lineno}: expected {n} outcome counts, got {len(toks)}")
    outcomes = tuple(_parse_int(t, lineno, "outcome count") for t in toks)
    lineno, value = headers["bound"]
    bound = _parse_float(value, lineno, "bound")

    try:
        scenario = BellScenario(n, settings, outcomes)
    except ValueError as exc:
        raise InequalityParseError(str(exc)) from None

    if not terms:
        raise InequalityParseError("no term lines found")

    if family == "linear":
        coeffs = np.zeros(scenario.table_shape())
        for lineno, toks in terms:
            if len(toks) != 1 + 2 * n:
                raise InequalityParseError(
                    f"line {lineno}: linear term needs 1 + {2 * n} fields, got {len(toks)}"
                )
            c = _parse_float(toks[0], lineno, "coefficient")
            s = tuple(_parse_int(t, lineno, "setting") for t in toks[1 : 1 + n])
            r = tuple(_parse_int(t, lineno, "outcome") for t in toks[1 + n :])
            for j in range(n):
                if not 0 <= s[j] < settings[j]:
                    raise InequalityParseError(f"line {lineno}: setting {s[j]} out of range")
                if not 0 <= r[j] < outcomes[j]:
                    raise InequalityParseError(f"line {lineno}: outcome {r[j]} out of range")
            coeffs[s + r] += c
        try:
            return LinearInequality(scenario, coeffs, bound)
        except ValueError as exc:
            raise InequalityParseError(str(exc)) from None

    if family == "correlator":
        term_map: dict[tuple[int, ...], float] = {}
        for lineno, toks in terms:
            if len(toks) != 1 + n:
                raise InequalityParseError(
                    f"line {lineno}: correlator term needs 1 + {n} fields, got {len(toks)}"
                )
            c = _parse_float(toks[0], lineno, "coefficient")
            key = []
            for j, t in enumerate(toks[1:]):
                if t == "_":
                    key.append(ABSENT)
                    continue
                x = _parse_int(t, lineno, "setting")
                if not 0 <= x < settings[j]:
                    raise InequalityParseError(f"line {lineno}: setting {x} out of range")
                key.append(x)
            key = tuple(key)
            term_map[key] = term_map.get(key, 0.0) + c
        try:
            return CorrelatorInequality(scenario, term_map, bound)
        except ValueError as exc:
            raise InequalityParseError(str(exc)) from None

    # quadratic
    g = np.zeros(scenario.settings_per_party)
    h = np.zeros(scenario.settings_per_party)
    for lineno, toks in terms:
        if len(toks) != 2 + n:
            raise InequalityParseError(
                f"line {lineno}: quadratic term needs 2 + {n} fields, got {len(toks)}"
            )
        branch = toks[0].lower()
        if branch not in ("g", "h"):
            raise InequalityParseError(f"line {lineno}: branch must be 'g' or 'h', got {toks[0]!r}")
        c = _parse_float(toks[1], lineno, "coefficient")
        if c not in (-1.0, 1.0):
            raise InequalityParseError(f"line {lineno}: quadratic coefficients must be -1 or 1")
        s = tuple(_parse_int(t, lineno, "setting") for t in toks[2:])
        for j in range(n):
            if not 0 <= s[j] < settings[j]:
                raise InequalityParseError(f"line {lineno}: setting {s[j]} out of range")
        (g if branch == "g" else h)[s] = c
    try:
        return QuadraticInequality(scenario, g, h, bound)
    except ValueError as exc:
        raise InequalityParseError(str(exc)) from None


def format_inequality(ineq) -> str:
    """Serialize an inequality back to the text format."""
    sc = ineq.scenario
    lines = []
    if isinstance(ineq, LinearInequality):
        lines.append("family: linear")
    elif isinstance(ineq, CorrelatorInequality):
        lines.append("family: correlator")
    elif isinstance(ineq, QuadraticInequality):
        lines.append("family: quadratic")
    else:
        raise TypeError(f"cannot format {type(ineq).__name__}")
    lines.append(f"parties: {sc.n_parties}")
    lines.append("settings: " + " ".join(str(m) for m in sc.settings_per_party))
    lines.append("outcomes: " + " ".join(str(d) for d in sc.outcomes_per_party))
    lines.append(f"bound: {ineq.bound!r}")
    if isinstance(ineq, LinearInequality):
        for s in sc.setting_tuples():
            for r in sc.outcome_tuples():
                c = ineq.coeffs[s + r]
                if c != 0.0:
                    lines.append(f"{c!r} " + " ".join(map(str, s + r)))
    elif isinstance(ineq, CorrelatorInequality):
        for key, c in sorted(ineq.terms.items()):
            slots = " ".join("_" if x == ABSENT else str(x) for x in key)
            lines.append(f"{c!r} {slots}")
    else:
        for name, t in (("g", ineq.g), ("h", ineq.h)):
            for s in sc.setting_tuples():
                if t[s] != 0.0:
                    lines.append(f"{name} {int(t[s])} " + " ".join(map(str, s)))
    return "\n".join(lines) + "\n"
