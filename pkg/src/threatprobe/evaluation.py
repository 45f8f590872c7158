"""Stress-test harness: unmodeled adversaries, batch metrics, parameter sweeps.

Two test opponents never seen in training: a handcrafted deceptive
threshold policy, and a soft-Q adversary trained against the frozen agent
with full access to the agent's belief. Batches of episodes reduce to an
accumulated loss, a true-positive rate (mean final belief on hostile
episodes), and a policy uncertainty index measuring how far the observed
opponent behavior sits from the nominal adversary model.
"""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ExperimentConfig
from .env import (
    INITIAL_DISTANCE,
    NUM_ROUNDS,
    AgentAction,
    EpisodeRecord,
    Intent,
    OpponentAction,
    run_episode,
)
from .learner.nets import init_mlp
from .learner.replay import ReplayBuffer
from .learner.softq import SoftQLearner, SoftQNet, forward, soft_policy
from .learner.train import TrainingDiverged
from .opponents import (
    AdversaryParams,
    GenerativeOpponent,
    NeutralOpponent,
    adversary_mdp_reward,
    adversary_policy,
)

# SeedSequence domain tags so the same small seed integers never reuse
# streams across unrelated pipelines.
_ADV_TRAIN_DOMAIN = 0x5EED01
_EVAL_DOMAIN = 0x5EED02

WORKERS_ENV_VAR = "THREATPROBE_WORKERS"

NUM_ADVERSARY_FEATURES = 1 + len(AgentAction) + 2


# ---------------------------------------------------------------------------
# test adversaries


@dataclass(frozen=True)
class DeceptiveParams:
    """Belief threshold below which the deceiver stops pretending."""
    b_thre: float

    def __post_init__(self):
        if not 0.0 <= self.b_thre <= 0.5:
            raise ValueError(f"b_thre {self.b_thre} outside [0, 0.5]")


def deceptive_policy(b: float, a_a: AgentAction | int,
                     params: DeceptiveParams) -> OpponentAction:
    """Handcrafted deceiver: plays the suspicion-lowering reaction while the
    agent's belief is high, advances once it drops; always advances on a
    flare."""
    if a_a == AgentAction.FLARE:
        return OpponentAction.PROCEED
    return OpponentAction.STAY if b > params.b_thre else OpponentAction.PROCEED


class DeceptiveOpponent:
    """Episode adapter for the deterministic deceptive policy."""

    def __init__(self, params: DeceptiveParams):
        self.params = params

    def __call__(self, view) -> np.ndarray:
        probs = np.zeros(len(OpponentAction))
        probs[int(deceptive_policy(view.belief, view.agent_action, self.params))] = 1.0
        return probs


def adversary_features(belief: float, a_a: AgentAction | int, distance: int,
                       round_index: int) -> np.ndarray:
    """Learning-adversary network input: the agent's belief, a one-hot of the
    agent's current action, and the scaled observable state."""
    feats = np.zeros(NUM_ADVERSARY_FEATURES)
    feats[0] = belief
    feats[1 + int(a_a)] = 1.0
    feats[4] = distance / INITIAL_DISTANCE
    feats[5] = round_index / NUM_ROUNDS
    return feats


@dataclass
class LearningAdversary:
    """Soft-Q opponent trained against one frozen agent."""
    net: SoftQNet
    eta: float


class LearnedOpponent:
    """Episode adapter for a (possibly still-training) learning adversary."""

    def __init__(self, net: SoftQNet):
        self.net = net

    def __call__(self, view) -> np.ndarray:
        q = forward(self.net, adversary_features(view.belief, view.agent_action,
                                                 view.distance, view.round))
        return soft_policy(q, self.net.sigma)


def adversary_transitions(record: EpisodeRecord, eta: float):
    """Replay rows for the adversary: its reward is the negated agent reward
    plus eta times the closing bonus at the post-move distance."""
    rows = []
    d_before = INITIAL_DISTANCE
    for t, rr in enumerate(record.rounds):
        feats = adversary_features(rr.belief_before, rr.agent_action, d_before, t)
        r_adv = -rr.reward + eta * adversary_mdp_reward(INITIAL_DISTANCE, rr.distance_after)
        terminal = t + 1 == NUM_ROUNDS
        if terminal:
            nxt = np.zeros(NUM_ADVERSARY_FEATURES)
        else:
            nrr = record.rounds[t + 1]
            nxt = adversary_features(rr.belief_after, nrr.agent_action,
                                     rr.distance_after, t + 1)
        rows.append((feats, int(rr.opponent_action), r_adv, nxt, terminal))
        d_before = rr.distance_after
    return rows


def train_learning_adversary(agent_policy, eta: float, seed: int,
                             config: ExperimentConfig) -> LearningAdversary:
    """Soft-Q train an adversary against a frozen agent; deterministic given seed.

    The adversary explores with its own current stochastic policy while the
    agent plays its fixed (stochastic or deterministic) policy; the shared
    intent filter keeps running, and the adversary sees the resulting belief.
    """
    if eta < 0.0:
        raise ValueError("eta must be non-negative")
    root = np.random.SeedSequence([_ADV_TRAIN_DOMAIN, seed])
    init_ss, env_ss, batch_ss = root.spawn(3)
    rng_env = np.random.default_rng(env_ss)
    rng_batch = np.random.default_rng(batch_ss)

    sizes = [NUM_ADVERSARY_FEATURES, *config.hidden_sizes, len(OpponentAction)]
    net = SoftQNet(mlp=init_mlp(sizes, np.random.default_rng(init_ss)), sigma=config.sigma)
    learner = SoftQLearner(net, lr=config.learning_rate, tau=config.target_tau,
                           gamma=config.gamma)
    buffer = ReplayBuffer(config.buffer_capacity, NUM_ADVERSARY_FEATURES)
    opponent = LearnedOpponent(net)

    steps = 0
    while steps < config.adversary_epochs:
        record = run_episode(agent_policy, opponent, Intent.ADVERSARY, rng_env,
                             config.belief_prior)
        for row in adversary_transitions(record, eta):
            buffer.add(*row)
        if len(buffer) < config.warmup_transitions:
            continue
        for _ in range(NUM_ROUNDS):
            if steps >= config.adversary_epochs:
                break
            loss = learner.update(buffer.sample(rng_batch, config.batch_size))
            steps += 1
            if not math.isfinite(loss):
                raise TrainingDiverged(steps, loss)
    return LearningAdversary(net=net, eta=eta)


# ---------------------------------------------------------------------------
# adversary population specs


@dataclass(frozen=True)
class NeutralSpec:
    def describe(self) -> str:
        return "neutral"


@dataclass(frozen=True)
class GenerativeSpec:
    """Mixed population: intent drawn from the prior each episode, hostile
    episodes played by the (alpha, beta) family member."""
    alpha: float
    beta: float

    def describe(self) -> str:
        return f"generative:{self.alpha:g},{self.beta:g}"


@dataclass(frozen=True)
class DeceptiveSpec:
    b_thre: float

    def __post_init__(self):
        DeceptiveParams(self.b_thre)  # range check

    def describe(self) -> str:
        return "deceptive"


@dataclass(frozen=True)
class LearningSpec:
    """eta alone trains one adversary per evaluation seed; a pre-trained
    adversary is evaluated as-is."""
    eta: float | None = None
    adversary: LearningAdversary | None = None

    def describe(self) -> str:
        return "learning"

    def __post_init__(self):
        if self.eta is None and self.adversary is None:
            raise ValueError("LearningSpec needs eta or a trained adversary")
        if self.eta is not None and self.eta < 0.0:
            raise ValueError("eta must be non-negative")


AdversarySpec = NeutralSpec | GenerativeSpec | DeceptiveSpec | LearningSpec


def spec_param(spec: AdversarySpec) -> tuple[str, float]:
    if isinstance(spec, DeceptiveSpec):
        return "bthre", spec.b_thre
    if isinstance(spec, LearningSpec):
        eta = spec.eta if spec.eta is not None else spec.adversary.eta
        return "eta", eta
    return "", math.nan


def parse_adversary_spec(text: str) -> AdversarySpec:
    """Parse a command-line adversary description.

    Formats: neutral | generative:A,B | deceptive:T | learning:MODEL_PATH
    """
    from .learner.model_io import load_model

    kind, _, arg = text.partition(":")
    try:
        if kind == "neutral":
            if arg:
                raise ValueError("neutral takes no parameter")
            return NeutralSpec()
        if kind == "generative":
            alpha, beta = (float(v) for v in arg.split(","))
            AdversaryParams(alpha=alpha, beta=beta)  # range check
            return GenerativeSpec(alpha=alpha, beta=beta)
        if kind == "deceptive":
            return DeceptiveSpec(b_thre=float(arg))
        if kind == "learning":
            if not arg:
                raise ValueError("learning needs a model path")
            net, meta = load_model(arg)
            if meta.get("kind") != "learning-adversary":
                raise ValueError(f"{arg} is not a learning-adversary model")
            return LearningSpec(adversary=LearningAdversary(net=net, eta=float(meta["eta"])))
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad adversary spec {text!r}: {exc}") from exc
    raise ConfigError(f"bad adversary spec {text!r}: unknown kind {kind!r}")


# ---------------------------------------------------------------------------
# empirical policy statistics


class EmpiricalPolicyCounts:
    """Reaction counts over (distance, agent action, round) cells."""

    def __init__(self):
        self.obs = np.zeros((INITIAL_DISTANCE + 1, len(AgentAction), NUM_ROUNDS,
                             len(OpponentAction)), dtype=np.int64)

    def add(self, d: int, a_a: int, t: int, a_o: int) -> None:
        self.obs[d, a_a, t, a_o] += 1

    def add_episode(self, record: EpisodeRecord) -> None:
        d_before = INITIAL_DISTANCE
        for t, rr in enumerate(record.rounds):
            self.add(d_before, int(rr.agent_action), t, int(rr.opponent_action))
            d_before = rr.distance_after

    def merge(self, other: "EmpiricalPolicyCounts") -> None:
        self.obs += other.obs

    @property
    def visits(self) -> np.ndarray:
        """Counts per (d, a_a, t) cell regardless of reaction."""
        return self.obs.sum(axis=-1)

    @property
    def total(self) -> int:
        return int(self.obs.sum())

    @property
    def distinct(self) -> int:
        return int((self.visits > 0).sum())


def policy_uncertainty_index(counts: EmpiricalPolicyCounts, nominal) -> float:
    """Visitation-weighted KL divergence from the nominal adversary model.

    nominal(d, a_a) must return a full-support reaction distribution; the
    nominal model does not depend on the round index. Empirical cells use
    0*log(0) = 0.
    """
    total = counts.total
    if total == 0:
        raise ValueError("no observations to compare against the nominal model")
    visits = counts.visits
    distinct = counts.distinct
    u_p = 0.0
    for d, a_a, t in np.argwhere(visits > 0):
        n = visits[d, a_a, t]
        pi_hat = counts.obs[d, a_a, t] / n
        pi = np.asarray(nominal(int(d), int(a_a)), dtype=float)
        if np.any(pi <= 0.0):
            raise ValueError("nominal policy must be full-support")
        mask = pi_hat > 0.0
        kl = float(np.sum(pi_hat[mask] * np.log(pi_hat[mask] / pi[mask])))
        u_p += n / (total * distinct) * kl
    return u_p


def nominal_adversary(config: ExperimentConfig):
    params = AdversaryParams(alpha=config.nominal_alpha, beta=config.nominal_beta)

    def nominal(d: int, a_a: int) -> np.ndarray:
        return adversary_policy(d, a_a, params)

    return nominal


# ---------------------------------------------------------------------------
# batch evaluation


@dataclass(frozen=True)
class MetricsRow:
    """Aggregated statistics of one evaluated (agent, adversary) pairing."""
    agent: str
    adversary: str
    param_name: str
    param_value: float
    episodes: int
    clap_mean: float
    clap_stderr: float
    tpr_mean: float
    tpr_stderr: float
    u_p: float
    seeds: tuple[int, ...]

    def __post_init__(self):
        if self.episodes <= 0:
            raise ValueError("episodes must be positive")


@dataclass
class _ShardResult:
    claps: np.ndarray
    finals: np.ndarray
    intents: np.ndarray
    counts: EmpiricalPolicyCounts


def _shard_opponent(spec: AdversarySpec, agent_policy, seed: int,
                    config: ExperimentConfig):
    """Fixed (opponent, intent) for non-mixed specs; None for mixed."""
    if isinstance(spec, NeutralSpec):
        return NeutralOpponent(), Intent.NEUTRAL
    if isinstance(spec, DeceptiveSpec):
        return DeceptiveOpponent(DeceptiveParams(spec.b_thre)), Intent.ADVERSARY
    if isinstance(spec, LearningSpec):
        adversary = spec.adversary
        if adversary is None:
            adversary = train_learning_adversary(agent_policy, spec.eta, seed, config)
        return LearnedOpponent(adversary.net), Intent.ADVERSARY
    return None


def _eval_shard(job) -> _ShardResult:
    agent_policy, spec, n_episodes, seed, config = job
    rng = np.random.default_rng(np.random.SeedSequence([_EVAL_DOMAIN, seed]))
    fixed = _shard_opponent(spec, agent_policy, seed, config)

    claps = np.empty(n_episodes)
    finals = np.empty(n_episodes)
    intents = np.empty(n_episodes, dtype=np.int64)
    counts = EmpiricalPolicyCounts()
    for i in range(n_episodes):
        if fixed is None:
            if rng.random() < config.belief_prior:
                opponent = GenerativeOpponent(AdversaryParams(spec.alpha, spec.beta))
                intent = Intent.ADVERSARY
            else:
                opponent = NeutralOpponent()
                intent = Intent.NEUTRAL
        else:
            opponent, intent = fixed
        record = run_episode(agent_policy, opponent, intent, rng, config.belief_prior)
        claps[i] = -sum(config.gamma ** t * rr.reward
                        for t, rr in enumerate(record.rounds))
        finals[i] = record.final_belief
        intents[i] = int(record.intent)
        if record.intent == Intent.ADVERSARY:
            counts.add_episode(record)
    return _ShardResult(claps=claps, finals=finals, intents=intents, counts=counts)


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV_VAR} must be an integer, got {raw!r}") from exc
    return max(1, n)


def _map_jobs(jobs: list) -> list[_ShardResult]:
    workers = worker_count()
    if workers == 1 or len(jobs) <= 1:
        return [_eval_shard(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_eval_shard, jobs))


def _stderr(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1) / math.sqrt(len(values)))


def evaluate(agent_policy, spec: AdversarySpec, episodes: int,
             seeds, config: ExperimentConfig,
             agent_label: str = "agent") -> MetricsRow:
    """Run an episode batch and aggregate metrics.

    Episodes are split into one shard per seed with independent RNG
    streams; shards are merged in seed order, so results do not depend on
    the worker count. The loss statistic averages every episode; the
    true-positive rate averages final beliefs of hostile episodes only.
    """
    if episodes <= 0:
        raise ValueError("episodes must be positive")
    seeds = tuple(int(s) for s in seeds)
    if not seeds:
        raise ValueError("need at least one seed")

    base, extra = divmod(episodes, len(seeds))
    sizes = [base + (1 if i < extra else 0) for i in range(len(seeds))]
    jobs = [(agent_policy, spec, n, seed, config)
            for n, seed in zip(sizes, seeds) if n > 0]
    results = _map_jobs(jobs)

    claps = np.concatenate([r.claps for r in results])
    finals = np.concatenate([r.finals for r in results])
    intents = np.concatenate([r.intents for r in results])
    counts = EmpiricalPolicyCounts()
    for r in results:
        counts.merge(r.counts)

    hostile = intents == int(Intent.ADVERSARY)
    tpr_values = finals[hostile]
    if counts.total > 0:
        u_p = policy_uncertainty_index(counts, nominal_adversary(config))
    else:
        u_p = math.nan
    name, value = spec_param(spec)
    return MetricsRow(
        agent=agent_label,
        adversary=spec.describe(),
        param_name=name,
        param_value=value,
        episodes=episodes,
        clap_mean=float(claps.mean()),
        clap_stderr=_stderr(claps),
        tpr_mean=float(tpr_values.mean()) if len(tpr_values) else math.nan,
        tpr_stderr=_stderr(tpr_values) if len(tpr_values) else math.nan,
        u_p=u_p,
        seeds=seeds,
    )


def sweep(agent_policy, mode: str, agent_label: str,
          config: ExperimentConfig) -> list[MetricsRow]:
    """Evaluate the agent across one test-adversary parameter grid.

    eta mode trains config.adversary_seeds fresh adversaries per grid value
    (one per evaluation seed) and pools their episodes; bthre mode evaluates
    the closed-form deceptive policy on the same seed set.
    """
    if mode == "eta":
        grid = config.eta_grid()
        make_spec = lambda v: LearningSpec(eta=float(v))
    elif mode == "bthre":
        grid = config.bthre_grid()
        make_spec = lambda v: DeceptiveSpec(b_thre=float(v))
    else:
        raise ValueError(f"unknown sweep mode {mode!r}")
    seeds = range(config.adversary_seeds)
    rows = []
    for value in grid:
        rows.append(evaluate(agent_policy, make_spec(value), config.eval_episodes,
                             seeds, config, agent_label=agent_label))
    return rows


# ---------------------------------------------------------------------------
# metrics CSV


CSV_HEADER = ["agent", "adversary", "param_name", "param_value", "episodes",
              "clap_mean", "clap_stderr", "tpr_mean", "tpr_stderr", "u_p",
              "seed_list"]


def _csv_float(x: float) -> str:
    return "nan" if math.isnan(x) else format(x, ".17g")


def metrics_to_csv(rows: list[MetricsRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([
            r.agent, r.adversary, r.param_name, _csv_float(r.param_value),
            str(r.episodes), _csv_float(r.clap_mean), _csv_float(r.clap_stderr),
            _csv_float(r.tpr_mean), _csv_float(r.tpr_stderr), _csv_float(r.u_p),
            ";".join(str(s) for s in r.seeds),
        ])
    return buf.getvalue()


def write_metrics_csv(path, rows: list[MetricsRow]) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(metrics_to_csv(rows))


def read_metrics_csv(path) -> list[MetricsRow]:
    with open(path, "r", encoding="ascii", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty metrics CSV") from None
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        rows = []
        for record in reader:
            if len(record) != len(CSV_HEADER):
                raise ValueError(f"{path}: bad column count in row {record!r}")
            rows.append(MetricsRow(
                agent=record[0], adversary=record[1], param_name=record[2],
                param_value=float(record[3]), episodes=int(record[4]),
                clap_mean=float(record[5]), clap_stderr=float(record[6]),
                tpr_mean=float(record[7]), tpr_stderr=float(record[8]),
                u_p=float(record[9]),
                seeds=tuple(int(s) for s in record[10].split(";") if s),
            ))
    return rows
