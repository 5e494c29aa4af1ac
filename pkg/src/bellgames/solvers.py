"""Game values under each resource model.

Exact methods: deterministic enumeration, zero-sum solving for shared
randomness against adversarial questions, and an LP over outcome-assignment
atoms for the nonlocal-hidden-variable adversary.  Quantum values come from
seesaw coordinate ascent over Bloch vectors (a lower bound, locally optimal);
Monte Carlo estimates any strategy with binomial error bars.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .compiler import CcpSpec, GameSpec, MultiRoundGameSpec
from .model import Behavior, BellScenario
from .quantum import BlochVector, MeasurementFrame, TwoQubitState, sample_sign_pairs
from .simplex import solve_lp, solve_zero_sum

DEFAULT_ENUMERATION_CAP = 10**8

VALUE_METHODS = ("enumeration", "zero-sum", "seesaw", "lp", "monte-carlo", "analytic")


class EnumerationCapError(RuntimeError):
    """Raised when an exact enumeration would exceed the configured cap."""


@dataclass(frozen=True)
class DeterministicStrategy:
    """Per-player answer tables: assignments[j][x] is player j's answer at question x."""

    assignments: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "assignments", tuple(tuple(int(a) for a in row) for row in self.assignments)
        )

    def answers(self, questions: tuple[int, ...]) -> tuple[int, ...]:
        return tuple(self.assignments[j][q] for j, q in enumerate(questions))


@dataclass(frozen=True)
class QuantumStrategy:
    """A shared two-qubit state with one measurement direction per question.

    ``relabel[j][x] == 1`` flips player j's outcome bit at question x; the
    default convention maps outcome +1 to answer 0.
    """

    state: TwoQubitState
    frame: MeasurementFrame
    relabel: tuple[tuple[int, ...], ...] | None = None

    def relabel_bit(self, player: int, question: int) -> int:
        if self.relabel is None:
            return 0
        return self.relabel[player][question]


@dataclass(frozen=True)
class ValueReport:
    value: float
    method: str
    certificate: object = None
    stderr: float = 0.0
    samples: int = 0
    iterations: int = 0

    def __post_init__(self):
        if self.method not in VALUE_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.stderr < 0.0:
            raise ValueError("stderr must be nonnegative")

    def to_json_dict(self) -> dict:
        cert = self.certificate
        if isinstance(cert, DeterministicStrategy):
            cert = {"type": "deterministic", "assignments": [list(r) for r in cert.assignments]}
        elif isinstance(cert, QuantumStrategy):
            cert = {
                "type": "quantum",
                "state": cert.state.label or "custom",
                "frame": [[v.as_array().tolist() for v in party] for party in cert.frame.vectors],
            }
        elif isinstance(cert, np.ndarray):
            cert = cert.tolist()
        elif isinstance(cert, dict):
            cert = {
                str(k): (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in cert.items()
            }
        return {
            "value": self.value,
            "method": self.method,
            "stderr": self.stderr,
            "samples": self.samples,
            "iterations": self.iterations,
            "certificate": cert,
        }


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 20
    tol: float = 1e-9
    max_rounds: int = 500
    seed: int = 0
    threads: int = 1


# ---------------------------------------------------------------------------
# Exact classical value by enumeration


def _player_tables(n_questions: int, n_answers: int):
    return list(itertools.product(range(n_answers), repeat=n_questions))


def _chunked(seq, n_chunks):
    size = max(1, math.ceil(len(seq) / n_chunks))
    return [seq[i : i + size] for i in range(0, len(seq), size)]


def classical_value(
    game: GameSpec, cap: int = DEFAULT_ENUMERATION_CAP, threads: int = 1
) -> ValueReport:
    """Exact maximum over deterministic product strategies.

    Raises EnumerationCapError (naming the strategy count) when the product
    of per-player table counts exceeds ``cap``.
    """
    counts = [
        d**m for d, m in zip(game.answers_per_player, game.questions_per_player)
    ]
    total = math.prod(counts)
    if total > cap:
        raise EnumerationCapError(
            f"enumeration needs {total} strategy evaluations, cap is {cap}"
        )

    questions = list(itertools.product(*(range(m) for m in game.questions_per_player)))
    weights = np.array([game.pi[s] for s in questions])
    tables = [
        _player_tables(m, d)
        for m, d in zip(game.questions_per_player, game.answers_per_player)
    ]

    def evaluate(assignment) -> float:
        value = 0.0
        for w, s in zip(weights, questions):
            if w == 0.0:
                continue
            o = tuple(assignment[j][s[j]] for j in range(game.n_players))
            value += w * game.acceptance[s + o]
        return value

    def scan(first_tables):
        best = (-1.0, None)
        for first in first_tables:
            for rest in itertools.product(*tables[1:]):
                assignment = (first,) + rest
                v = evaluate(assignment)
                if v > best[0] + 1e-15:
                    best = (v, assignment)
        return best

    if threads > 1 and len(tables[0]) > 1:
        chunks = _chunked(tables[0], threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(scan, chunks))
        # Deterministic reduction: chunks are in index order, strict improvement only.
        best = (-1.0, None)
        for v, a in results:
            if v > best[0] + 1e-15:
                best = (v, a)
    else:
        best = scan(tables[0])

    value, assignment = best
    return ValueReport(
        value=float(value),
        method="enumeration",
        certificate=DeterministicStrategy(assignment),
        iterations=total,
    )


def strategy_payoff_matrix(game: GameSpec, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    """Rows: deterministic product strategies (lexicographic); columns: questions."""
    counts = [d**m for d, m in zip(game.answers_per_player, game.questions_per_player)]
    total = math.prod(counts)
    questions = list(itertools.product(*(range(m) for m in game.questions_per_player)))
    if total * len(questions) > cap:
        raise EnumerationCapError(
            f"payoff matrix needs {total * len(questions)} entries, cap is {cap}"
        )
    tables = [
        _player_tables(m, d)
        for m, d in zip(game.questions_per_player, game.answers_per_player)
    ]
    payoff = np.empty((total, len(questions)))
    for row, assignment in enumerate(itertools.product(*tables)):
        for col, s in enumerate(questions):
            o = tuple(assignment[j][s[j]] for j in range(game.n_players))
            payoff[row, col] = game.acceptance[s + o]
    return payoff


def shared_randomness_value(
    game_or_payoff,
    adversarial_inputs: bool = False,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ValueReport:
    """Value with a shared random string.

    Against the fixed question distribution, mixing cannot beat the best pure
    strategy, so the non-adversarial value equals ``classical_value``.  With
    adversarial questions the value is that of the zero-sum matrix game
    between team strategies (rows) and question tuples (columns); a raw
    payoff matrix may be passed directly in place of a game.
    """
    if isinstance(game_or_payoff, GameSpec):
        if not adversarial_inputs:
            return classical_value(game_or_payoff, cap=cap)
        payoff = strategy_payoff_matrix(game_or_payoff, cap=cap)
    else:
        if not adversarial_inputs:
            raise ValueError("a raw payoff matrix has no question distribution; "
                             "only the adversarial value is defined")
        payoff = np.asarray(game_or_payoff, dtype=float)
    value, row_mix, col_mix = solve_zero_sum(payoff)
    return ValueReport(
        value=float(value),
        method="zero-sum",
        certificate={"row_mixture": row_mix, "column_mixture": col_mix},
    )


# ---------------------------------------------------------------------------
# Quantum value: seesaw over Bloch vectors


def _acceptance_moments(game: GameSpec):
    """Per-question sums of V against outcome signs: total, alpha, beta, alpha*beta."""
    acc = game.acceptance
    signs = np.array([1.0, -1.0])
    s0 = acc.sum(axis=(-2, -1))
    sa = np.einsum("...ab,a->...", acc, signs)
    sb = np.einsum("...ab,b->...", acc, signs)
    sab = np.einsum("...ab,a,b->...", acc, signs, signs)
    return s0, sa, sb, sab


def _seesaw_value(game, u, v, t, a_vecs, b_vecs, moments):
    s0, sa, sb, sab = moments
    e = a_vecs @ t @ b_vecs.T  # E[x, y]
    ma = a_vecs @ u
    mb = b_vecs @ v
    cell = s0 + sa * ma[:, None] + sb * mb[None, :] + sab * e
    return float(np.sum(game.pi * cell) / 4.0)


def _random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    vecs = rng.normal(size=(n, 3))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def quantum_value_two_qubit(
    game: GameSpec, state: TwoQubitState, config: OptimizerConfig = OptimizerConfig()
) -> ValueReport:
    """Locally optimal quantum value via alternating closed-form best responses.

    Requires two players with binary answers.  Each party's best response at
    a question is the unit vector along the gradient of the win probability,
    which is linear in that vector once the other party is fixed; multi-start
    makes the local optimum reliable at this scale.
    """
    if game.n_players != 2 or game.answers_per_player != (2, 2):
        raise ValueError("seesaw supports two players with binary answers only")
    m_a, m_b = game.questions_per_player
    u, v = state.bloch_marginals()
    t = state.correlation_matrix()
    moments = _acceptance_moments(game)
    s0, sa, sb, sab = moments
    pi = game.pi

    def run_restart(restart_seed) -> tuple[float, np.ndarray, np.ndarray, int]:
        rng = np.random.default_rng(restart_seed)
        a_vecs = _random_unit_vectors(rng, m_a)
        b_vecs = _random_unit_vectors(rng, m_b)
        value = _seesaw_value(game, u, v, t, a_vecs, b_vecs, moments)
        rounds = 0
        for rounds in range(1, config.max_rounds + 1):
            # Alice best response per question x
            for x in range(m_a):
                g = (pi[x] * sa[x]).sum() * u + t @ ((pi[x] * sab[x]) @ b_vecs)
                norm = np.linalg.norm(g)
                if norm > 1e-15:
                    a_vecs[x] = g / norm
            # Bob best response per question y
            for y in range(m_b):
                g = (pi[:, y] * sb[:, y]).sum() * v + t.T @ ((pi[:, y] * sab[:, y]) @ a_vecs)
                norm = np.linalg.norm(g)
                if norm > 1e-15:
                    b_vecs[y] = g / norm
            new_value = _seesaw_value(game, u, v, t, a_vecs, b_vecs, moments)
            if new_value - value < config.tol:
                value = max(value, new_value)
                break
            value = new_value
        return value, a_vecs.copy(), b_vecs.copy(), rounds

    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(run_restart, seeds))
    else:
        results = [run_restart(s) for s in seeds]

    best_idx = 0
    for i in range(1, len(results)):
        if results[i][0] > results[best_idx][0] + 1e-15:
            best_idx = i
    value, a_vecs, b_vecs, _ = results[best_idx]
    frame = MeasurementFrame(
        (
            tuple(BlochVector.from_array(a) for a in a_vecs),
            tuple(BlochVector.from_array(b) for b in b_vecs),
        )
    )
    return ValueReport(
        value=value,
        method="seesaw",
        certificate=QuantumStrategy(state, frame),
        iterations=sum(r[3] for r in results),
    )


# ---------------------------------------------------------------------------
# Nonlocal-hidden-variable adversary, exact LP

NHV_ATOMS = list(itertools.product(range(2), repeat=8))
_SETTING_PAIRS = [(0, 0), (0, 1), (1, 0), (1, 1)]


def nhv_adversarial_value(
    correlators,
    predicate,
    marginal_a: float = 0.0,
    marginal_b: float = 0.0,
) -> ValueReport:
    """Exact worst case against an adversary who knows the outcome assignment.

    A hidden atom fixes both parties' outcomes for each of the four setting
    pairs (2^8 atoms); the adversary sees the atom and picks the setting pair
    minimizing the success predicate.  The LP minimizes the expected best
    case over distributions on atoms that reproduce all four correlators and
    the per-setting marginals (zero for the unbiased states used here).

    Raises LpInfeasibleError when the correlator constraints admit no atom
    distribution, which signals a non-physical input table.
    """
    e = np.asarray(correlators, dtype=float)
    s = np.asarray(predicate, dtype=float)
    if e.shape != (2, 2) or s.shape != (2, 2, 2, 2):
        raise ValueError("expected a 2x2 correlator table and a 2x2x2x2 predicate")

    n_atoms = len(NHV_ATOMS)
    cost = np.empty(n_atoms)
    rows = []
    rhs = []
    rows.append(np.ones(n_atoms))
    rhs.append(1.0)
    atom_bits = np.array(NHV_ATOMS)  # columns: ia00 ib00 ia01 ib01 ia10 ib10 ia11 ib11
    alphas = 1.0 - 2.0 * atom_bits[:, 0::2]  # per atom, per setting pair
    betas = 1.0 - 2.0 * atom_bits[:, 1::2]
    for k, (x, y) in enumerate(_SETTING_PAIRS):
        rows.append(alphas[:, k] * betas[:, k])
        rhs.append(float(e[x, y]))
    for k in range(4):
        rows.append(alphas[:, k])
        rhs.append(marginal_a)
        rows.append(betas[:, k])
        rhs.append(marginal_b)
    for i, atom in enumerate(NHV_ATOMS):
        cost[i] = min(
            s[x, y, atom[2 * k], atom[2 * k + 1]] for k, (x, y) in enumerate(_SETTING_PAIRS)
        )

    value, q = solve_lp(cost, np.array(rows), np.array(rhs))
    support = {NHV_ATOMS[i]: float(q[i]) for i in np.nonzero(q > 1e-12)[0]}
    return ValueReport(value=float(value), method="lp", certificate=support)


# ---------------------------------------------------------------------------
# Monte Carlo harness


def _sample_behavior_outcomes(behavior: Behavior, flat_settings, rng):
    """Outcome flat-indices for each sample, grouped by setting row."""
    scenario = behavior.scenario
    n_rows = math.prod(scenario.settings_per_party)
    rows = behavior.table.reshape(n_rows, -1)
    outcomes = np.empty(len(flat_settings), dtype=np.int64)
    for row_idx in np.unique(flat_settings):
        mask = flat_settings == row_idx
        outcomes[mask] = rng.choice(rows.shape[1], size=int(mask.sum()), p=rows[row_idx])
    return outcomes


def monte_carlo_value(
    game: GameSpec, strategy, n: int, seed: int
) -> ValueReport:
    """Unbiased estimate of a strategy's winning probability on a game.

    ``strategy`` may be a DeterministicStrategy, a QuantumStrategy (two
    players, binary answers) or a Behavior sampled per question.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    n_questions = math.prod(game.questions_per_player)
    flat_q = rng.choice(n_questions, size=n, p=game.pi.reshape(-1))
    q_tuples = np.array(
        np.unravel_index(flat_q, game.questions_per_player)
    ).T  # (n, players)

    if isinstance(strategy, DeterministicStrategy):
        answers = np.stack(
            [np.asarray(strategy.assignments[j])[q_tuples[:, j]] for j in range(game.n_players)],
            axis=1,
        )
    elif isinstance(strategy, QuantumStrategy):
        if game.n_players != 2 or game.answers_per_player != (2, 2):
            raise ValueError("quantum strategies need two players with binary answers")
        a_vecs = np.array([vec.as_array() for vec in strategy.frame.vectors[0]])
        b_vecs = np.array([vec.as_array() for vec in strategy.frame.vectors[1]])
        u, v = strategy.state.bloch_marginals()
        t = strategy.state.correlation_matrix()
        e_table = a_vecs @ t @ b_vecs.T
        ma_table = a_vecs @ u
        mb_table = b_vecs @ v
        xq, yq = q_tuples[:, 0], q_tuples[:, 1]
        alpha, beta = sample_sign_pairs(
            e_table[xq, yq], rng, ma=ma_table[xq], mb=mb_table[yq]
        )
        bits_a = (1 - alpha) // 2
        bits_b = (1 - beta) // 2
        if strategy.relabel is not None:
            flips_a = np.array(strategy.relabel[0])[xq]
            flips_b = np.array(strategy.relabel[1])[yq]
            bits_a = bits_a ^ flips_a
            bits_b = bits_b ^ flips_b
        answers = np.stack([bits_a, bits_b], axis=1)
    elif isinstance(strategy, Behavior):
        flat_o = _sample_behavior_outcomes(strategy, flat_q, rng)
        answers = np.array(np.unravel_index(flat_o, game.answers_per_player)).T
    else:
        raise TypeError(f"unsupported strategy type {type(strategy).__name__}")

    accept_prob = game.acceptance[
        tuple(q_tuples[:, j] for j in range(game.n_players))
        + tuple(answers[:, j] for j in range(game.n_players))
    ]
    wins = rng.random(n) < accept_prob
    estimate = float(wins.mean())
    stderr = math.sqrt(estimate * (1.0 - estimate) / n)
    return ValueReport(
        value=estimate, method="monte-carlo", stderr=stderr, samples=n
    )


def monte_carlo_multiround(
    spec: MultiRoundGameSpec, behavior: Behavior, n: int, seed: int
) -> ValueReport:
    """Play the repeated-trial game against a fixed behavior, rounds independent."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    monomials = rng.choice(len(spec.monomial_probs), size=n, p=np.array(spec.monomial_probs))
    scenario_shape = behavior.scenario.settings_per_party
    n_rows = math.prod(scenario_shape)
    rows = behavior.table.reshape(n_rows, -1)
    wins = np.zeros(n, dtype=bool)
    for mono_idx in np.unique(monomials):
        mask = monomials == mono_idx
        count = int(mask.sum())
        ok = np.ones(count, dtype=bool)
        for trial_idx in spec.round_plans[mono_idx]:
            base = spec.base_games[trial_idx]
            s = tuple(base.provenance["settings"])
            r = tuple(base.provenance["outcomes"])
            row_idx = np.ravel_multi_index(s, scenario_shape)
            target = np.ravel_multi_index(r, behavior.scenario.outcomes_per_party)
            draws = rng.choice(rows.shape[1], size=count, p=rows[row_idx])
            ok &= draws == target
        wins[mask] = ok
    estimate = float(wins.mean())
    stderr = math.sqrt(estimate * (1.0 - estimate) / n)
    return ValueReport(value=estimate, method="monte-carlo", stderr=stderr, samples=n)


def monte_carlo_ccp(
    spec: CcpSpec, behavior: Behavior, n: int, seed: int
) -> ValueReport:
    """Play the two-branch selector problem against a behavior.

    Per sample: draw the branch, the setting tuple, uniform +1/-1 values y_j
    and outcomes from the behavior; each party reports y_j times its outcome
    and the team succeeds when the product of reports hits the target.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    n_parties = len(spec.question_alphabets)
    branch = (rng.random(n) >= spec.z_prob).astype(np.int64)  # 0 = first branch
    shape = tuple(spec.question_alphabets)
    n_rows = math.prod(shape)
    flat_settings = np.empty(n, dtype=np.int64)
    for br in (0, 1):
        mask = branch == br
        if mask.any():
            flat_settings[mask] = rng.choice(
                n_rows, size=int(mask.sum()), p=spec.branch_distributions[br].reshape(-1)
            )
    flat_outcomes = _sample_behavior_outcomes(behavior, flat_settings, rng)
    outcome_tuples = np.array(
        np.unravel_index(flat_outcomes, behavior.scenario.outcomes_per_party)
    ).T
    outcome_signs = (1 - 2 * outcome_tuples).prod(axis=1)
    y = rng.choice((-1, 1), size=(n, n_parties))
    sign_rows = np.stack([s.reshape(-1) for s in spec.branch_signs])
    reports = y.prod(axis=1) * outcome_signs
    targets = y.prod(axis=1) * sign_rows[branch, flat_settings]
    wins = reports == targets
    estimate = float(wins.mean())
    stderr = math.sqrt(estimate * (1.0 - estimate) / n)
    return ValueReport(value=estimate, method="monte-carlo", stderr=stderr, samples=n)


# ---------------------------------------------------------------------------
# Quantum strategy -> behavior bridge


def behavior_of_quantum_strategy(strategy: QuantumStrategy) -> Behavior:
    """The conditional probability table generated by a two-party strategy."""
    frame = strategy.frame
    if frame.n_parties != 2:
        raise ValueError("only two-party strategies produce behaviors here")
    m_a, m_b = frame.settings_per_party()
    u, v = strategy.state.bloch_marginals()
    t = strategy.state.correlation_matrix()
    table = np.empty((m_a, m_b, 2, 2))
    for x, a_vec in enumerate(frame.vectors[0]):
        for y, b_vec in enumerate(frame.vectors[1]):
            a = a_vec.as_array()
            b = b_vec.as_array()
            e = float(a @ t @ b)
            ma = float(u @ a)
            mb = float(v @ b)
            for ia, alpha in enumerate((1.0, -1.0)):
                for ib, beta in enumerate((1.0, -1.0)):
                    ja = ia ^ strategy.relabel_bit(0, x)
                    jb = ib ^ strategy.relabel_bit(1, y)
                    table[x, y, ja, jb] = (1.0 + alpha * ma + beta * mb + alpha * beta * e) / 4.0
    scenario = BellScenario(2, (m_a, m_b), (2, 2))
    return Behavior(scenario, table)
