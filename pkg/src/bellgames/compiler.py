"""Compile inequalities into referee'd games and communication problems.

A compiled game keeps the exact value correspondence: for every behavior the
winning probability of the game equals the normalized left-hand side of the
source inequality, so violation questions translate verbatim into game-value
questions.  The referee is probabilistic: instead of drawing a hidden target
answer and checking equality it accepts answer o to question s with
probability V(o|s), which has the same expected value and makes the game
value a deterministic function of the behavior.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .model import (
    ABSENT,
    Behavior,
    BellScenario,
    CorrelatorInequality,
    LinearInequality,
    PolynomialInequality,
    QuadraticInequality,
    chsh_win_table,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class GameSpec:
    """Question distribution pi(s) plus acceptance table V(o|s)."""

    questions_per_player: tuple[int, ...]
    answers_per_player: tuple[int, ...]
    pi: np.ndarray  # shape = questions_per_player
    acceptance: np.ndarray  # shape = questions + answers
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        q = tuple(int(m) for m in self.questions_per_player)
        a = tuple(int(d) for d in self.answers_per_player)
        object.__setattr__(self, "questions_per_player", q)
        object.__setattr__(self, "answers_per_player", a)
        pi = np.array(self.pi, dtype=float)
        acc = np.array(self.acceptance, dtype=float)
        if pi.shape != q:
            raise ValueError(f"pi shape {pi.shape} does not match questions {q}")
        if acc.shape != q + a:
            raise ValueError(f"acceptance shape {acc.shape} does not match {q + a}")
        if pi.min() < 0.0 or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("question distribution must be nonnegative and sum to 1")
        if acc.min() < -1e-12 or acc.max() > 1.0 + 1e-12:
            raise ValueError("acceptance probabilities must lie in [0, 1]")
        pi.setflags(write=False)
        acc.setflags(write=False)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "acceptance", np.clip(acc, 0.0, 1.0))

    @property
    def n_players(self) -> int:
        return len(self.questions_per_player)

    def scenario(self) -> BellScenario:
        return BellScenario(self.n_players, self.questions_per_player, self.answers_per_player)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "game",
            "questions_per_player": list(self.questions_per_player),
            "answers_per_player": list(self.answers_per_player),
            "pi": self.pi.tolist(),
            "acceptance": self.acceptance.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GameSpec":
        if data.get("kind") != "game":
            raise ValueError(f"expected kind 'game', got {data.get('kind')!r}")
        return cls(
            tuple(data["questions_per_player"]),
            tuple(data["answers_per_player"]),
            np.array(data["pi"], dtype=float),
            np.array(data["acceptance"], dtype=float),
            dict(data.get("provenance", {})),
        )


def win_probability(game: GameSpec, behavior: Behavior) -> float:
    """Expected acceptance of a behavior: sum_s pi(s) sum_o V(o|s) P(o|s)."""
    if behavior.scenario.table_shape() != game.pi.shape + game.acceptance.shape[len(game.pi.shape):]:
        raise ValueError("behavior shape does not match the game")
    n_q = len(game.questions_per_player)
    pi = game.pi.reshape(game.pi.shape + (1,) * n_q)
    return float(np.sum(pi * game.acceptance * behavior.table))


def chsh_game() -> GameSpec:
    """The standard CHSH game: uniform questions, accept iff a XOR b = x AND y."""
    pi = np.full((2, 2), 0.25)
    return GameSpec((2, 2), (2, 2), pi, chsh_win_table(), provenance={"name": "chsh"})


# ---------------------------------------------------------------------------
# Linear inequalities


def normalize_linear(ineq: LinearInequality) -> LinearInequality:
    """Rewrite so all coefficients are nonnegative and sum to 1.

    Negative terms are eliminated through the complement identity
    P(r|s) = 1 - sum of the other outcomes' probabilities, which shifts a
    constant into the bound; the affine record (alpha, beta) satisfies
    normalized_lhs = alpha * original_lhs + beta on every behavior, so
    violation status is preserved.
    """
    coeffs = np.array(ineq.coeffs, dtype=float)
    if not np.any(coeffs):
        raise ValueError("cannot normalize an all-zero inequality")
    settings_shape = ineq.scenario.settings_per_party
    n_settings = math.prod(settings_shape)
    flat = coeffs.reshape(n_settings, -1)
    negative_sums = np.where(flat < 0.0, flat, 0.0).sum(axis=1)
    flat = flat - negative_sums[:, None]
    shift = float(negative_sums.sum())
    total = float(flat.sum())
    if total <= 0.0:
        raise ValueError("cannot normalize an all-zero inequality")
    alpha = 1.0 / total
    beta = -shift / total
    alpha0, beta0 = ineq.affine_record
    record = (alpha * alpha0, alpha * beta0 + beta)
    return LinearInequality(
        ineq.scenario,
        (flat / total).reshape(coeffs.shape),
        alpha * ineq.bound + beta,
        normalized=True,
        affine_record=record,
    )


def compile_linear(ineq: LinearInequality) -> GameSpec:
    """Compile a normalized inequality into a game with the same value.

    Questions are drawn with pi(s) = sum_r a_{s,r}; the referee accepts
    answer o with probability a_{s,o} / pi(s).  For every behavior the
    winning probability equals sum a_{s,r} P(r|s) exactly.
    """
    if not ineq.normalized:
        raise ValueError("compile_linear requires a normalized inequality")
    scenario = ineq.scenario
    n = scenario.n_parties
    pi = ineq.coeffs.sum(axis=tuple(range(n, 2 * n)))
    with np.errstate(divide="ignore", invalid="ignore"):
        acceptance = np.where(
            pi.reshape(pi.shape + (1,) * n) > 0.0,
            ineq.coeffs / np.where(pi == 0.0, 1.0, pi).reshape(pi.shape + (1,) * n),
            0.0,
        )
    provenance = {
        "source": "linear",
        "bound": ineq.bound,
        "affine_record": list(ineq.affine_record),
    }
    return GameSpec(
        scenario.settings_per_party, scenario.outcomes_per_party, pi, acceptance, provenance
    )


# ---------------------------------------------------------------------------
# Correlator inequalities with absent parties


def augment_absent_settings(ineq: CorrelatorInequality) -> CorrelatorInequality:
    """Give every party an extra no-measurement setting with fixed outcome +1.

    Terms that skipped a party are rewritten onto the new setting; the
    inequality's value and classical bound are unchanged.  A no-op when no
    term has an absent slot.
    """
    if not ineq.has_absent_slots():
        return ineq
    old = ineq.scenario
    new_scenario = BellScenario(
        old.n_parties,
        tuple(m + 1 for m in old.settings_per_party),
        old.outcomes_per_party,
    )
    dummy = old.settings_per_party  # per party, the appended last index
    terms = {}
    for key, g in ineq.terms.items():
        new_key = tuple(dummy[j] if x == ABSENT else x for j, x in enumerate(key))
        terms[new_key] = terms.get(new_key, 0.0) + g
    return CorrelatorInequality(new_scenario, terms, ineq.bound)


def extend_behavior_with_passive_setting(behavior: Behavior) -> Behavior:
    """Append the no-measurement setting to every party of a behavior.

    A party using its passive setting outputs 0 (+1) with certainty while the
    other parties follow the marginal of the original behavior; marginals are
    taken at setting 0 of the passive parties, which is unambiguous for
    no-signaling behaviors and a fixed convention otherwise.
    """
    old = behavior.scenario
    n = old.n_parties
    new_scenario = BellScenario(
        n, tuple(m + 1 for m in old.settings_per_party), old.outcomes_per_party
    )
    table = np.zeros(new_scenario.table_shape())
    for s in new_scenario.setting_tuples():
        passive = [j for j in range(n) if s[j] == old.settings_per_party[j]]
        base_s = tuple(0 if j in passive else s[j] for j in range(n))
        block = behavior.table[base_s]
        if passive:
            block = block.sum(axis=tuple(passive), keepdims=True)
            # place all mass on outcome 0 of each passive party
            expanded = np.zeros(old.outcomes_per_party)
            idx = tuple(
                slice(0, 1) if j in passive else slice(None) for j in range(n)
            )
            expanded[idx] = block
            block = expanded
        table[s] = block
    return Behavior(new_scenario, table)


def correlator_classical_bound(ineq: CorrelatorInequality) -> float:
    """Exact deterministic maximum of sum g E, enumerating +1/-1 assignments.

    Terms with absent slots contribute the product over present parties only,
    so this serves as the pre-augmentation oracle as well.
    """
    scenario = ineq.scenario
    best = -math.inf
    per_party = [
        list(itertools.product((1, -1), repeat=m)) for m in scenario.settings_per_party
    ]
    for assignment in itertools.product(*per_party):
        lhs = 0.0
        for key, g in ineq.terms.items():
            prod = 1.0
            for j, x in enumerate(key):
                if x != ABSENT:
                    prod *= assignment[j][x]
            lhs += g * prod
        best = max(best, lhs)
    return best


# ---------------------------------------------------------------------------
# Polynomial inequalities -> multi-round games


@dataclass(frozen=True)
class MultiRoundGameSpec:
    """A mixture of round plans: trial i is 'ask s_i, accept exactly r_i'.

    A play draws one monomial with probability c, then runs its plan of
    independent rounds against the same behavior; the expected success equals
    sum_k c_k prod_i P(i)^{k_i}.
    """

    base_games: tuple[GameSpec, ...]
    monomial_probs: tuple[float, ...]
    round_plans: tuple[tuple[int, ...], ...]
    round_count_dist: dict[int, float]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.monomial_probs) != len(self.round_plans):
            raise ValueError("one round plan per monomial is required")
        if abs(sum(self.monomial_probs) - 1.0) > 1e-12:
            raise ValueError("monomial probabilities must sum to 1")
        if abs(sum(self.round_count_dist.values()) - 1.0) > 1e-12:
            raise ValueError("round-count distribution must sum to 1")


def compile_polynomial(ineq: PolynomialInequality) -> MultiRoundGameSpec:
    """Compile a normalized polynomial inequality into repeated-trial games."""
    if not ineq.normalized:
        raise ValueError("compile_polynomial requires normalized coefficients")
    scenario = ineq.scenario
    base_games = []
    for s, r in ineq.indices:
        pi = np.zeros(scenario.settings_per_party)
        pi[s] = 1.0
        acceptance = np.zeros(scenario.table_shape())
        acceptance[s + r] = 1.0
        base_games.append(
            GameSpec(
                scenario.settings_per_party,
                scenario.outcomes_per_party,
                pi,
                acceptance,
                provenance={"source": "polynomial-trial", "settings": list(s), "outcomes": list(r)},
            )
        )
    probs = []
    plans = []
    round_counts: dict[int, float] = {}
    for c, ks in ineq.monomials:
        probs.append(c)
        plan = tuple(i for i, k in enumerate(ks) for _ in range(k))
        plans.append(plan)
        round_counts[len(plan)] = round_counts.get(len(plan), 0.0) + c
    return MultiRoundGameSpec(
        tuple(base_games),
        tuple(probs),
        tuple(plans),
        round_counts,
        provenance={"source": "polynomial", "bound": ineq.bound},
    )


# ---------------------------------------------------------------------------
# Quadratic inequalities -> two-branch communication problems


@dataclass(frozen=True)
class CcpSpec:
    """Two-branch distributed computation compiled from a quadratic inequality.

    A selector z picks the first or second branch with probability z_prob for
    the first.  On a branch, setting tuples are drawn from that branch's
    distribution, each party also receives an independent uniform +1/-1 value
    y_j, and the target is (prod_j y_j) times the branch's sign at the drawn
    settings.  Each party may send ``bit_budget`` bits toward the answering
    party (0 bits makes the problem a referee'd game).
    """

    question_alphabets: tuple[int, ...]
    branch_distributions: tuple[np.ndarray, np.ndarray]
    branch_signs: tuple[np.ndarray, np.ndarray]
    z_prob: float
    bit_budget: int = 0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bit_budget < 0:
            raise ValueError("bit budget must be nonnegative")
        if not 0.0 <= self.z_prob <= 1.0:
            raise ValueError("selector probability must lie in [0, 1]")
        dists = []
        for q in self.branch_distributions:
            q = np.array(q, dtype=float)
            if q.shape != tuple(self.question_alphabets):
                raise ValueError("branch distribution shape mismatch")
            if q.min() < 0.0 or abs(q.sum() - 1.0) > 1e-12:
                raise ValueError("branch distributions must be normalized")
            q.setflags(write=False)
            dists.append(q)
        signs = []
        for s in self.branch_signs:
            s = np.array(s, dtype=float)
            if s.shape != tuple(self.question_alphabets):
                raise ValueError("branch sign shape mismatch")
            s.setflags(write=False)
            signs.append(s)
        object.__setattr__(self, "branch_distributions", tuple(dists))
        object.__setattr__(self, "branch_signs", tuple(signs))

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "ccp",
            "question_alphabets": list(self.question_alphabets),
            "branch_distributions": [q.tolist() for q in self.branch_distributions],
            "branch_signs": [s.tolist() for s in self.branch_signs],
            "z_prob": self.z_prob,
            "bit_budget": self.bit_budget,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CcpSpec":
        if data.get("kind") != "ccp":
            raise ValueError(f"expected kind 'ccp', got {data.get('kind')!r}")
        return cls(
            tuple(data["question_alphabets"]),
            tuple(np.array(q, dtype=float) for q in data["branch_distributions"]),
            tuple(np.array(s, dtype=float) for s in data["branch_signs"]),
            float(data["z_prob"]),
            int(data.get("bit_budget", 0)),
            dict(data.get("provenance", {})),
        )


def quadratic_point(ineq: QuadraticInequality, correlators) -> tuple[float, float, bool]:
    """Map a correlator table to branch success probabilities (P_g, P_h).

    P_g = 1/2 + (sum g E) / (2N); the point is inside the satisfaction disc
    iff (P_g - 1/2)^2 + (P_h - 1/2)^2 <= bound / (4 N^2), which is the same
    statement as the quadratic inequality itself.
    """
    e = np.asarray(correlators, dtype=float)
    if e.shape != ineq.scenario.settings_per_party:
        raise ValueError(
            f"correlator table shape {e.shape} does not match "
            f"{ineq.scenario.settings_per_party}"
        )
    n = ineq.support
    p_g = 0.5 + float(np.sum(ineq.g * e)) / (2.0 * n)
    p_h = 0.5 + float(np.sum(ineq.h * e)) / (2.0 * n)
    radius_sq = ineq.bound / (4.0 * n * n)
    inside = (p_g - 0.5) ** 2 + (p_h - 0.5) ** 2 <= radius_sq
    return p_g, p_h, inside


def branch_success(ineq: QuadraticInequality, correlators, branch: int) -> float:
    """Success probability of playing one branch against a correlator table.

    Parties output y_j times their +1/-1 outcome; the product matches the
    target (prod y) S[coeff] with probability (1 + S E)/2 per setting tuple,
    averaged over the branch's |coeff|/N question distribution.
    """
    e = np.asarray(correlators, dtype=float)
    coeff = (ineq.g, ineq.h)[branch]
    n = ineq.support
    weights = np.abs(coeff) / n
    signs = np.sign(coeff)
    return float(np.sum(weights * (1.0 + signs * e) / 2.0))


def compile_quadratic(ineq: QuadraticInequality, violation_point: tuple[float, float]) -> CcpSpec:
    """Compile a quadratic inequality into the two-branch selector problem.

    ``violation_point`` is the (P_g, P_h) pair to certify; it must lie outside
    the satisfaction disc.  The selector picks the g-branch with probability
    p1 / (p1 + p2).
    """
    p1, p2 = float(violation_point[0]), float(violation_point[1])
    n = ineq.support
    radius_sq = ineq.bound / (4.0 * n * n)
    if (p1 - 0.5) ** 2 + (p2 - 0.5) ** 2 <= radius_sq:
        raise ValueError(
            f"point ({p1}, {p2}) lies inside the satisfaction disc; no violation to certify"
        )
    if p1 + p2 <= 0.0:
        raise ValueError("violation point must have p1 + p2 > 0")
    q_g = np.abs(ineq.g) / n
    q_h = np.abs(ineq.h) / n
    return CcpSpec(
        ineq.scenario.settings_per_party,
        (q_g, q_h),
        (np.sign(ineq.g), np.sign(ineq.h)),
        z_prob=p1 / (p1 + p2),
        bit_budget=0,
        provenance={
            "source": "quadratic",
            "bound": ineq.bound,
            "support": n,
            "violation_point": [p1, p2],
        },
    )
