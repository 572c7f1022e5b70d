"""Planning benchmark: random-walk instances, noisy observations, success counts.

Every instance starts ``walk_length`` random moves from the goal state. Both
the initial and goal images are corrupted with the cell's noise model. A
run counts as a success when a plan is found and the decoded frames pass
the world's validator from the true initial state to the true goal.
"""
import csv
import io
import json
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import ama
from .exceptions import ConfigurationError
from .planner import SearchLimits, solve_instance
from .sae import LossVariant, StateAutoEncoder, find_constant_bits, prune
from .worlds import (
    NoiseSpec,
    all_transitions,
    apply_noise,
    enumerate_states,
    goal_state,
    random_walk,
    render,
    render_all,
    world_from_name,
)

INSTANCE_COLUMNS = ("variant", "N", "alpha", "seed", "walk_length", "noise", "instance",
                    "status", "success", "plan_length", "expansions", "generations",
                    "wall_time", "reason")


def derive_seed(base_seed, cell_id):
    """Stable per-cell seed from the base seed and a textual cell id."""
    ss = np.random.SeedSequence([int(base_seed), zlib.crc32(cell_id.encode("utf-8"))])
    return int(ss.generate_state(1)[0])


@dataclass
class TrainConfig:
    epochs: int = 200
    hidden: tuple = (400, 400)
    kl_weight: float = None
    input_noise: float = 0.3
    n_actions: int = 16
    aae_epochs: int = 300
    ad_epochs: int = 50
    ama_hidden: tuple = (256, 256)
    candidate_negatives: bool = False

    def sae_params(self):
        return {"epochs": self.epochs, "hidden": tuple(self.hidden),
                "kl_weight": self.kl_weight, "input_noise": self.input_noise}


@dataclass
class ExperimentConfig:
    world: str = "lightsout3"
    variants: list = field(default_factory=lambda: ["sae", "zsae:0.7"])
    n_latent: list = field(default_factory=lambda: [72])
    seeds: list = field(default_factory=lambda: [1])
    noise: list = field(default_factory=lambda: ["none", "gaussian:0.6", "salt_pepper:0.12"])
    walk_lengths: list = field(default_factory=lambda: [7, 14])
    instances_per_cell: int = 10
    action_model: str = "ama1"
    heuristic: str = None
    threshold: float = 0.5
    max_expansions: int = 10 ** 6
    max_seconds: float = 60.0
    base_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if isinstance(self.train, dict):
            self.train = TrainConfig(**self.train)
        for name in ("variants", "n_latent", "seeds", "noise", "walk_lengths"):
            if not list(getattr(self, name)):
                raise ConfigurationError(f"{name} must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigurationError("seeds must be distinct")
        if self.action_model not in ("ama1", "ama2"):
            raise ConfigurationError("action_model must be 'ama1' or 'ama2'")
        if self.instances_per_cell < 1:
            raise ConfigurationError("instances_per_cell must be positive")
        self.noise_specs = [NoiseSpec.parse(n) if isinstance(n, str) else n for n in self.noise]
        self.variant_specs = [LossVariant.parse(v) for v in self.variants]
        self.world_config = world_from_name(self.world)

    @property
    def search_heuristic(self):
        if self.heuristic:
            return self.heuristic
        return "blind" if self.action_model == "ama1" else "goal_count"

    @property
    def limits(self):
        return SearchLimits(self.max_expansions, self.max_seconds)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["train"] = asdict(self.train)
        out["noise"] = [str(n) for n in self.noise_specs]
        return out

    def model_cells(self):
        """(variant, N, seed) training cells in a fixed order."""
        return [(v, n, s) for v in self.variant_specs for n in self.n_latent for s in self.seeds]

    def instance_cells(self):
        return [(L, spec) for L in self.walk_lengths for spec in self.noise_specs]


@dataclass
class Instance:
    walk_length: int
    noise: str
    index: int
    init_state: np.ndarray
    goal_state: np.ndarray
    init_image: np.ndarray
    goal_image: np.ndarray


def make_instances(config):
    """Instances are shared by every model so results can be compared pairwise."""
    world = config.world_config
    goal = goal_state(world)
    out = []
    for L, spec in config.instance_cells():
        for i in range(config.instances_per_cell):
            rng = np.random.default_rng(derive_seed(config.base_seed,
                                                    f"{config.world}/{L}/{spec}/{i}"))
            init = random_walk(goal, L, world, rng)
            out.append(Instance(L, str(spec), i, init, goal,
                                apply_noise(render(init, world), spec, rng),
                                apply_noise(render(goal, world), spec, rng)))
    return out


def train_sae(config, variant, n_latent, seed):
    world = config.world_config
    X = render_all(enumerate_states(world), world)
    model = StateAutoEncoder(n_latent=n_latent, variant=variant.kind,
                             alpha=variant.alpha or 0.7,
                             warmup_fraction=variant.warmup_fraction,
                             random_state=derive_seed(seed, f"train/{variant}/{n_latent}"),
                             **config.train.sae_params())
    return model.fit(X)


def prune_constant(sae, world):
    X = render_all(enumerate_states(world), world)
    dead = find_constant_bits(sae, X)
    return prune(sae, dead, X) if dead else (sae, None)


def fit_action_models(sae, world, train, seed, threshold=0.5):
    """Action autoencoder and discriminator on the encoded full transition set."""
    enc = ama.EncodedTransitions.from_dataset(sae, all_transitions(world))
    aae = ama.aae_train(enc, train.n_actions, rng=derive_seed(seed, "aae"),
                        epochs=train.aae_epochs, hidden=tuple(train.ama_hidden))
    states = sae.transform(render_all(enumerate_states(world), world))
    negatives = ama.negative_sampling(enc, states, derive_seed(seed, "negatives"))
    if train.candidate_negatives:
        extra = ama.candidate_negatives(aae, enc)
        negatives = (np.concatenate([negatives[0], extra[0]]),
                     np.concatenate([negatives[1], extra[1]]))
    ad = ama.ad_train((enc.S, enc.T), negatives, rng=derive_seed(seed, "ad"),
                      epochs=train.ad_epochs, hidden=tuple(train.ama_hidden))
    return aae, ad, enc, negatives


def build_provider(sae, config, seed, ama2_models=None):
    """Successor provider for ``sae`` plus the (possibly pruned) SAE to search with."""
    world = config.world_config
    if config.action_model == "ama1":
        enc = ama.EncodedTransitions.from_dataset(sae, all_transitions(world))
        return sae, ama.ama1_build(enc)
    if ama2_models is not None:
        pruned, aae, ad = ama2_models
        return pruned, ama.LearnedSuccessors(aae, ad, config.threshold)
    pruned, _ = prune_constant(sae, world)
    aae, ad, _, _ = fit_action_models(pruned, world, config.train, seed, config.threshold)
    return pruned, ama.LearnedSuccessors(aae, ad, config.threshold)


def _run_one(args):
    sae, provider, inst, world, heuristic, limits = args
    res = solve_instance(sae, provider, inst.init_image, inst.goal_image, world,
                         heuristic, limits, inst.init_state, inst.goal_state)
    reason = ""
    if not res.search.solved:
        reason = res.search.status
    elif not res.success:
        reason = res.verdict.reason
    return {"status": res.search.status, "success": bool(res.success),
            "plan_length": res.search.plan.cost if res.search.solved else -1,
            "expansions": res.search.stats.expansions,
            "generations": res.search.stats.generations,
            "wall_time": round(res.search.stats.wall_time, 6), "reason": reason}


def run_instances(sae, provider, instances, config, jobs=1):
    tasks = [(sae, provider, inst, config.world_config, config.search_heuristic,
              config.limits) for inst in instances]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


@dataclass
class BenchReport:
    summary: dict
    rows: list

    def csv(self):
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=INSTANCE_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()

    def json(self):
        return json.dumps(self.summary, indent=2)

    def write(self, out_dir):
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "summary.json"), "w") as fh:
            fh.write(self.json() + "\n")
        with open(os.path.join(out_dir, "instances.csv"), "w") as fh:
            fh.write(self.csv())


def _median(values):
    return float(np.median(values)) if values else None


def compare_expansions(rows, a="sae", b="zsae"):
    """Median expansions of two variants over instances both solved.

    Pairs are matched on (N, seed, walk length, noise, instance index).
    """
    key = lambda r: (r["N"], r["seed"], r["walk_length"], r["noise"], r["instance"])
    solved = {}
    for r in rows:
        if r["success"] and r["variant"] in (a, b):
            solved.setdefault(r["variant"], {})[key(r)] = r["expansions"]
    common = sorted(set(solved.get(a, {})) & set(solved.get(b, {})))
    return {"variants": [a, b], "common_instances": len(common),
            f"median_expansions_{a}": _median([solved[a][k] for k in common]),
            f"median_expansions_{b}": _median([solved[b][k] for k in common])}


def run_bench(config, models=None, jobs=1, log=None):
    """Run every (model, instance) pair; ``models`` maps (variant str, N, seed) to an SAE.

    Missing models are trained from ``config.train``. For the learned action
    model, ``models`` may instead map the key to ``(sae, aae, ad)``.
    """
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig.from_dict(config)
    instances = make_instances(config)
    models = dict(models or {})
    rows, cells = [], []
    for variant, n_latent, seed in config.model_cells():
        key = (str(variant), n_latent, seed)
        entry = models.get(key)
        if entry is None:
            if log:
                log(f"training {key}")
            entry = train_sae(config, variant, n_latent, seed)
        ama2_models = None
        if isinstance(entry, tuple):
            ama2_models = entry
            entry = entry[0]
        sae, provider = build_provider(entry, config, seed, ama2_models)
        results = run_instances(sae, provider, instances, config, jobs)
        for inst, res in zip(instances, results):
            rows.append({"variant": variant.kind, "N": n_latent, "alpha": variant.alpha,
                         "seed": seed, "walk_length": inst.walk_length, "noise": inst.noise,
                         "instance": inst.index, **res})
        for L, spec in config.instance_cells():
            sel = [r for r, inst in zip(results, instances)
                   if inst.walk_length == L and inst.noise == str(spec)]
            cells.append({"variant": str(variant), "N": n_latent, "seed": seed,
                          "walk_length": L, "noise": str(spec), "instances": len(sel),
                          "success": sum(r["success"] for r in sel),
                          "median_expansions": _median([r["expansions"] for r in sel
                                                        if r["success"]]),
                          "mean_wall_time": float(np.mean([r["wall_time"] for r in sel]))})
    summary = {"config": config.to_dict(), "cells": cells,
               "comparison": compare_expansions(rows)}
    return BenchReport(summary, rows)
