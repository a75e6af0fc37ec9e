"""Experiment driver: tuning runs and ablations, plus the metric files they write."""
import csv
from dataclasses import asdict, dataclass, field
import io
import json
import math
import os
from pathlib import Path
import time

import numpy as np

from .agent import SacAgent, SacConfig
from .env import LIGHTGBM_SPACE, HpoEnv, HyperParamSpace, RewardConfig, compute_reward
from .errors import ConfigError, HyperSacError
from .objectives import Objective, ObjectiveSpec
from .replay import AugmentStats, MixConfig, ReplayBuffer, Transition, augment_hierarchical

# variant -> (smoothing-Q, hierarchical mixture regularization)
VARIANTS = {
    "full": (True, True),
    "sq-hpo": (True, False),
    "hmr-hpo": (False, True),
    "base": (False, False),
}
RANDOM_SEARCH = "random-search"
SEED_ENV = "HYPERSAC_SEED"
SUMMARY_HEADER = ["variant", "seed", "final_best_loss", "final_avg_reward", "evaluations"]


@dataclass
class RunConfig:
    episodes: int = 150
    horizon: int = 10
    seeds: list = field(default_factory=lambda: [0])
    variant: str = "full"
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    space: HyperParamSpace = LIGHTGBM_SPACE
    agent: SacConfig = field(default_factory=SacConfig)
    mix: MixConfig = field(default_factory=MixConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    out: str = "runs"
    state_dim: int = 8
    buffer_capacity: int = 100_000
    record_wall_clock: bool = False

    def __post_init__(self):
        if self.episodes < 1 or self.horizon < 1:
            raise ConfigError("episodes and horizon must be positive")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {list(VARIANTS)}")
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.buffer_capacity < 1:
            raise ConfigError("buffer_capacity must be positive")

    @property
    def budget(self):
        return self.episodes * self.horizon

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "seed" in data:
                data["seeds"] = [data.pop("seed")]
            if "objective" in data and not isinstance(data["objective"], ObjectiveSpec):
                obj = data["objective"]
                data["objective"] = ObjectiveSpec.parse(obj) if isinstance(obj, str) \
                    else ObjectiveSpec(**obj)
            if "space" in data and not isinstance(data["space"], HyperParamSpace):
                data["space"] = HyperParamSpace.from_list(data["space"])
            for key, kind in (("agent", SacConfig), ("mix", MixConfig), ("reward", RewardConfig)):
                if key in data and not isinstance(data[key], kind):
                    data[key] = kind(**data[key])
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["objective"] = self.objective.to_dict()
        out["space"] = self.space.to_list()
        out["agent"] = asdict(self.agent)
        out["agent"]["hidden_sizes"] = list(self.agent.hidden_sizes)
        out["mix"] = asdict(self.mix)
        out["reward"] = asdict(self.reward)
        return out

    def replace(self, **changes):
        data = {k: getattr(self, k) for k in self.__dataclass_fields__}
        data.update(changes)
        return RunConfig(**data)


def seed_override(config):
    """Apply ``HYPERSAC_SEED`` to the config when the variable is set."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return config
    try:
        seed = int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV}={raw!r} is not an integer") from None
    return config.replace(seeds=[seed])


@dataclass
class MetricsRecord:
    episode: int
    avg_reward: float
    best_loss: float
    best_lambda: list
    seconds: float


@dataclass
class RunReport:
    variant: str
    seed: int
    records: list = field(default_factory=list)
    best_lambda: list = None
    best_loss: float = math.inf
    evaluations: int = 0
    updates: int = 0
    buffer_size: int = 0
    warnings: dict = field(default_factory=dict)

    @property
    def avg_rewards(self):
        return np.array([r.avg_reward for r in self.records])

    @property
    def final_avg_reward(self):
        return self.records[-1].avg_reward if self.records else math.nan


class _BestTracker:
    def __init__(self):
        self.loss = math.inf
        self.lam = None

    def offer(self, loss, lam):
        if loss < self.loss:
            self.loss = float(loss)
            self.lam = [float(v) for v in lam]


def _streams(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def run_sac_hpo(config, seed=None, objective=None, on_step=None):
    """Tune ``config.objective`` with the configured variant; one report per call.

    ``on_step`` (optional) is called after every environment step with
    ``(episode, step, buffer)``.
    """
    seed = config.seeds[0] if seed is None else int(seed)
    use_sq, use_mix = VARIANTS[config.variant]
    init_rng, noise_rng, env_rng, buffer_rng, mix_rng = _streams(seed, 5)
    if objective is None:
        objective = Objective(config.objective, config.space, seed=seed)
    env = HpoEnv(config.space, objective, config.horizon, config.state_dim, config.reward,
                 rng=env_rng)
    agent = SacAgent.create(env.state_dim, env.action_dim, config.agent, init_rng, noise_rng)
    buffer = ReplayBuffer(config.buffer_capacity, env.state_dim, env.action_dim, buffer_rng)
    aug_stats = AugmentStats()
    smoothing = config.agent.smoothing_samples if use_sq else 1
    batch_size = config.agent.batch_size
    best = _BestTracker()
    report = RunReport(config.variant, seed)
    start = time.perf_counter()

    for episode in range(1, config.episodes + 1):
        state = env.reset().hidden.copy()
        rewards = []
        for t in range(config.horizon):
            sample = agent.act(state)
            step = env.step(sample.action)
            transition = Transition(state, sample.action, step.next_state, step.reward)
            buffer.push(transition)
            if use_mix:
                for mixed in augment_hierarchical(transition, buffer, config.mix, mix_rng,
                                                  aug_stats):
                    buffer.push(mixed)
            if len(buffer) >= batch_size:
                agent.update(buffer.sample_batch(batch_size), smoothing_samples=smoothing)
            rewards.append(step.reward)
            best.offer(step.loss, step.hyperparams)
            state = step.next_state
            if on_step is not None:
                on_step(episode, t + 1, buffer)
        report.records.append(MetricsRecord(episode, float(np.mean(rewards)), best.loss,
                                            list(best.lam), time.perf_counter() - start))

    report.best_loss, report.best_lambda = best.loss, best.lam
    report.evaluations = objective.calls
    report.updates = agent.updates
    report.buffer_size = len(buffer)
    report.warnings = {
        "action_clamps": env.clamp_warnings.count,
        "nonfinite_losses": objective.nonfinite,
        "augment_skipped": aug_stats.skipped,
        "augment_with_replacement": aug_stats.with_replacement,
    }
    return report


def run_random_search(config, seed=None, objective=None):
    """Evaluate ``episodes * horizon`` uniform draws, grouped into pseudo-episodes."""
    seed = config.seeds[0] if seed is None else int(seed)
    (rng,) = _streams(seed, 1)
    if objective is None:
        objective = Objective(config.objective, config.space, seed=seed)
    best = _BestTracker()
    report = RunReport(RANDOM_SEARCH, seed)
    start = time.perf_counter()
    for episode in range(1, config.episodes + 1):
        rewards = []
        for _ in range(config.horizon):
            lam = config.space.sample(rng)
            loss = objective(lam)
            rewards.append(compute_reward(loss, config.reward))
            best.offer(loss, lam)
        report.records.append(MetricsRecord(episode, float(np.mean(rewards)), best.loss,
                                            list(best.lam), time.perf_counter() - start))
    report.best_loss, report.best_lambda = best.loss, best.lam
    report.evaluations = objective.calls
    report.warnings = {"nonfinite_losses": objective.nonfinite}
    return report


@dataclass
class AblationReport:
    variants: list
    seeds: list
    runs: dict  # (variant, seed) -> RunReport

    def curve_rows(self):
        """One row per (variant, seed, episode)."""
        rows = []
        for variant in self.variants:
            for seed in self.seeds:
                for rec in self.runs[variant, seed].records:
                    rows.append({"variant": variant, "seed": seed, "episode": rec.episode,
                                 "avg_reward": rec.avg_reward, "best_loss": rec.best_loss})
        return rows

    def pairs(self, a, b, first=1, last=None):
        """Per-seed mean average reward over episodes [first, last] for variants a and b."""
        out = []
        for seed in self.seeds:
            ra = self.runs[a, seed].avg_rewards[first - 1:last]
            rb = self.runs[b, seed].avg_rewards[first - 1:last]
            out.append({"seed": seed, a: float(ra.mean()), b: float(rb.mean()),
                        "wins": bool(ra.mean() >= rb.mean())})
        return out

    def final_best(self, variant):
        return [self.runs[variant, s].best_loss for s in self.seeds]


def run_ablation(config, variants=None, seeds=None, include_random=False):
    """Run every variant on every seed under one objective and budget."""
    variants = list(variants or VARIANTS)
    seeds = list(seeds if seeds is not None else config.seeds)
    if len(variants) < 2:
        raise ConfigError("an ablation needs at least two variants")
    runs = {}
    for variant in variants:
        for seed in seeds:
            if variant == RANDOM_SEARCH:
                runs[variant, seed] = run_random_search(config, seed)
            else:
                runs[variant, seed] = run_sac_hpo(config.replace(variant=variant), seed)
    if include_random and RANDOM_SEARCH not in variants:
        for seed in seeds:
            runs[RANDOM_SEARCH, seed] = run_random_search(config, seed)
        variants.append(RANDOM_SEARCH)
    return AblationReport(variants, seeds, runs)


# --- output ---------------------------------------------------------------

def _jsonl(report, include_timing):
    lines = []
    for rec in report.records:
        lines.append(json.dumps({
            "episode": rec.episode,
            "avg_reward": rec.avg_reward,
            "best_loss": rec.best_loss,
            "best_lambda": rec.best_lambda,
            "seconds": rec.seconds if include_timing else None,
        }))
    return "".join(line + "\n" for line in lines)


def summary_csv(reports):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    for r in reports:
        writer.writerow([r.variant, r.seed, repr(float(r.best_loss)),
                         repr(float(r.final_avg_reward)), r.evaluations])
    return buf.getvalue()


def metrics_filename(report):
    return f"metrics_{report.variant}_seed{report.seed}.jsonl"


def emit_metrics(reports, out_dir, include_timing=False):
    """Write one JSONL file per report plus ``summary.csv``; returns the written paths.

    ``seconds`` is null unless ``include_timing``: wall-clock values would
    break byte-level reproducibility of the files.
    """
    if isinstance(reports, RunReport):
        reports = [reports]
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for r in reports:
            path = out / metrics_filename(r)
            path.write_text(_jsonl(r, include_timing), encoding="utf-8")
            paths.append(path)
        path = out / "summary.csv"
        path.write_text(summary_csv(reports), encoding="utf-8")
        paths.append(path)
    except OSError as exc:
        raise HyperSacError(f"cannot write metrics under {out}: {exc}") from exc
    return paths


def emit_ablation(ablation, out_dir, include_timing=False):
    paths = emit_metrics([ablation.runs[v, s] for v in ablation.variants for s in ablation.seeds],
                         out_dir, include_timing)
    out = Path(out_dir)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, ["variant", "seed", "episode", "avg_reward", "best_loss"],
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(ablation.curve_rows())
    (out / "curves.csv").write_text(buf.getvalue(), encoding="utf-8")
    paths.append(out / "curves.csv")
    sac = [v for v in ablation.variants if v != RANDOM_SEARCH]
    if "full" in sac and "base" in sac:
        pairs = {"early_full_vs_base": ablation.pairs("full", "base", 1, 50)}
        (out / "pairs.json").write_text(json.dumps(pairs, indent=2) + "\n", encoding="utf-8")
        paths.append(out / "pairs.json")
    return paths
