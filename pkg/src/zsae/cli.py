"""Command-line entry point.

Exit status is 0 on success, 1 when a run completes with a failing verdict
or bad input data, and 2 on usage or configuration errors. Relative output
paths resolve against ``$ZSAE_OUTPUT_DIR`` when it is set.
"""
import argparse
import json
import os
import sys

import numpy as np

from .exceptions import ConfigurationError, ZsaeError

OUTPUT_ENV = "ZSAE_OUTPUT_DIR"


def _out(path):
    base = os.environ.get(OUTPUT_ENV)
    if base and not os.path.isabs(path):
        os.makedirs(base, exist_ok=True)
        return os.path.join(base, path)
    return path


def _ints(text):
    return [int(t) for t in text.split(",") if t]


def _strs(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _world(args):
    from .worlds import world_from_name

    return world_from_name(args.world)


def _enumeration(world):
    from .worlds import enumerate_states, render_all

    return render_all(enumerate_states(world), world)


def _emit(text, path):
    if path:
        with open(_out(path), "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path, kind=None):
    from .persistence import load_model

    model = load_model(path)
    if kind is not None and type(model).__name__ != kind:
        raise ConfigurationError(f"{path} holds a {type(model).__name__}, expected {kind}")
    return model


# --- subcommands ------------------------------------------------------------

def cmd_gen(args):
    from .worlds import all_transitions, sample_transitions, write_idx, write_pgm
    from .worlds.imageio import to_gray

    world = _world(args)
    if args.count:
        ds = sample_transitions(world, args.count, np.random.default_rng(args.seed))
    else:
        ds = all_transitions(world)
    out = _out(args.out)
    os.makedirs(out, exist_ok=True)
    write_idx(os.path.join(out, "pre.idx"), to_gray(ds.pre_images))
    write_idx(os.path.join(out, "suc.idx"), to_gray(ds.suc_images))
    with open(os.path.join(out, "states.csv"), "w") as fh:
        fh.write("pre,suc\n")
        for s, t in zip(ds.pre_states, ds.suc_states):
            fh.write(f"{''.join(map(str, s))},{''.join(map(str, t))}\n")
    for i in range(min(args.pgm, len(ds))):
        write_pgm(os.path.join(out, f"pre_{i:04d}.pgm"), ds.pre_images[i])
    print(f"wrote {len(ds)} transitions to {out}")
    return 0


def _train_one(args, variant, n_latent, seed):
    from .sae import LossVariant, StateAutoEncoder

    v = LossVariant.parse(variant)
    return StateAutoEncoder(n_latent=n_latent, variant=v.kind, alpha=v.alpha or 0.7,
                            epochs=args.epochs, kl_weight=args.kl_weight,
                            input_noise=args.input_noise, random_state=seed,
                            verbose=args.verbose)


def cmd_train(args):
    from .persistence import save_model

    world = _world(args)
    X = _enumeration(world)
    model = _train_one(args, args.variant, args.n, args.seed).fit(X)
    save_model(model, _out(args.out))
    bits = model.transform(X)
    eff = int(np.count_nonzero(bits.min(0) != bits.max(0)))
    print(f"trained {model.loss_variant} N={args.n}: effective bits {eff}, saved {args.out}")
    return 0


def cmd_train_ama2(args):
    from .bench import TrainConfig, fit_action_models
    from .persistence import save_model

    sae = _load(args.sae, "StateAutoEncoder")
    world = _world(args)
    train = TrainConfig(n_actions=args.actions, aae_epochs=args.aae_epochs,
                        ad_epochs=args.ad_epochs,
                        candidate_negatives=args.candidate_negatives)
    aae, ad, enc, (Sn, Tn) = fit_action_models(sae, world, train, args.seed)
    save_model(aae, _out(args.out_aae))
    save_model(ad, _out(args.out_ad))
    acc = float((aae.predict(enc.S, enc.T) == enc.T).mean())
    X = np.vstack([np.hstack([enc.S, enc.T]), np.hstack([Sn, Tn])])
    y = np.r_[np.ones(len(enc)), np.zeros(len(Sn))]
    print(f"AAE bit accuracy {acc:.4f}, AD accuracy {ad.score(X, y):.4f}")
    return 0


def cmd_metrics(args):
    from .metrics import report_csv, report_json, representation_report

    world = _world(args)
    X = _enumeration(world)
    models = []
    for variant in _strs(args.variants):
        for n in _ints(args.n):
            for seed in _ints(args.seeds):
                models.append(_train_one(args, variant, n, seed).fit(X))
    rows = representation_report(models, X, _strs(args.noise), args.images, args.trials,
                                 args.seed, world.name)
    _emit(report_json(rows) + "\n" if args.format == "json" else report_csv(rows), args.out)
    return 0


def _provider(args, sae, world):
    from . import ama

    if args.aae or args.ad:
        if not (args.aae and args.ad):
            raise ConfigurationError("--aae and --ad must be given together")
        return ama.LearnedSuccessors(_load(args.aae, "ActionAutoEncoder"),
                                     _load(args.ad, "ActionDiscriminator"), args.threshold)
    from .worlds import all_transitions

    return ama.ama1_build(ama.EncodedTransitions.from_dataset(sae, all_transitions(world)))


def cmd_plan(args):
    from .planner import SearchLimits, solve_instance
    from .worlds import emit_plan_strip, read_pgm

    world = _world(args)
    sae = _load(args.sae, "StateAutoEncoder")
    init, goal = read_pgm(args.init), read_pgm(args.goal)
    for name, img in (("init", init), ("goal", goal)):
        if img.shape != tuple(world.image_shape):
            print(f"error: {name} image is {img.shape}, world {world.name} expects "
                  f"{tuple(world.image_shape)}", file=sys.stderr)
            return 1
    heuristic = args.heuristic or ("goal_count" if args.aae else "blind")
    res = solve_instance(sae, _provider(args, sae, world), init, goal, world, heuristic,
                         SearchLimits(args.max_expansions, args.max_seconds))
    stats = res.search.stats
    print(f"status {res.search.status} expansions {stats.expansions} "
          f"time {stats.wall_time:.3f}s")
    if res.frames is not None:
        print(f"plan length {res.search.plan.cost}, validator: "
              f"{'ok' if res.verdict else res.verdict.reason}")
        if args.strip:
            emit_plan_strip(list(res.frames), _out(args.strip))
    return 0 if res.success else 1


def cmd_bench(args):
    from .bench import ExperimentConfig, run_bench

    data = {}
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
    if args.seed is not None:
        data["base_seed"] = args.seed
    config = ExperimentConfig.from_dict(data)
    log = (lambda m: print(m, file=sys.stderr)) if args.verbose else None
    report = run_bench(config, jobs=args.jobs, log=log)
    report.write(_out(args.out))
    for cell in report.summary["cells"]:
        print(f"{cell['variant']:>9} N={cell['N']} seed={cell['seed']} "
              f"L={cell['walk_length']:<3} {cell['noise']:<18} "
              f"{cell['success']}/{cell['instances']}")
    print(json.dumps(report.summary["comparison"]))
    return 0


def cmd_prune(args):
    from .persistence import save_model
    from .sae import find_constant_bits, prune

    sae = _load(args.sae, "StateAutoEncoder")
    X = _enumeration(_world(args))
    dead = find_constant_bits(sae, X)
    pruned, report = prune(sae, dead, X)
    save_model(pruned, _out(args.out))
    print(json.dumps({"delta_n": report.delta_n, "n_latent": pruned.n_bits_,
                      "floats_removed_prev": report.floats_removed_prev,
                      "floats_removed_next": report.floats_removed_next,
                      "total_before": report.total_before, "total_after": report.total_after}))
    return 0


def cmd_export_pddl(args):
    from . import ama
    from .worlds import all_transitions, read_pgm

    world = _world(args)
    sae = _load(args.sae, "StateAutoEncoder")
    oracle = ama.ama1_build(ama.EncodedTransitions.from_dataset(sae, all_transitions(world)))
    init = goal = None
    if args.init and args.goal:
        init, goal = sae.transform(np.stack([read_pgm(args.init), read_pgm(args.goal)]))
    export = ama.export_pddl(oracle, world.name, init, goal, args.max_bits)
    _emit(export.domain, args.out)
    if export.problem and args.problem_out:
        _emit(export.problem, args.problem_out)
    print(f"{oracle.n_nodes} states, {oracle.n_edges} actions", file=sys.stderr)
    return 0


def cmd_inspect(args):
    from .persistence import load_model

    model = load_model(args.model)
    info = {"class": type(model).__name__, "params": model.get_params()}
    nets = [n for n in ("encoder_", "decoder_", "network_") if hasattr(model, n)]
    info["layers"] = {n: [[l.out_dim, l.in_dim, l.activation] for l in getattr(model, n).layers]
                      for n in nets}
    info["n_parameters"] = sum(getattr(model, n).n_parameters() for n in nets)
    if hasattr(model, "loss_variant"):
        info["variant"] = str(model.loss_variant)
        info["n_bits"] = model.n_bits_
    print(json.dumps(info, indent=2, default=str))
    return 0


# --- parser -----------------------------------------------------------------

def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1, help="worker processes (1 = deterministic)")
    p.add_argument("--config", help="JSON file of option defaults for this subcommand")
    p.add_argument("--verbose", action="store_true")


def _training(p):
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--kl-weight", type=float, default=None)
    p.add_argument("--input-noise", type=float, default=0.3)


def build_parser():
    parser = argparse.ArgumentParser(prog="zsae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="render a transition dataset")
    _common(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--count", type=int, default=0, help="sampled pairs (0 = all transitions)")
    p.add_argument("--pgm", type=int, default=0, help="also write this many PGM previews")
    p.add_argument("--out", default="dataset")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a state autoencoder")
    _common(p)
    _training(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--variant", default="zsae:0.7")
    p.add_argument("--n", type=int, default=72)
    p.add_argument("--out", default="sae.zsnn")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("train-ama2", help="train the action autoencoder and discriminator")
    _common(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--sae", required=True)
    p.add_argument("--actions", type=int, default=16)
    p.add_argument("--aae-epochs", type=int, default=300)
    p.add_argument("--ad-epochs", type=int, default=50)
    p.add_argument("--candidate-negatives", action="store_true",
                   help="also train the discriminator against unobserved AAE proposals")
    p.add_argument("--out-aae", default="aae.zsnn")
    p.add_argument("--out-ad", default="ad.zsnn")
    p.set_defaults(func=cmd_train_ama2)

    p = sub.add_parser("metrics", help="variance / effective bits / MSE table")
    _common(p)
    _training(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--variants", default="ng,sae,zsae:0.7")
    p.add_argument("--n", default="72")
    p.add_argument("--seeds", default="1,2,3")
    p.add_argument("--noise", default="gaussian:0.3")
    p.add_argument("--images", type=int, default=100)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("plan", help="solve one image-to-image instance")
    _common(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--sae", required=True)
    p.add_argument("--aae")
    p.add_argument("--ad")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--init", required=True)
    p.add_argument("--goal", required=True)
    p.add_argument("--heuristic", choices=("blind", "goal_count"))
    p.add_argument("--max-expansions", type=int, default=10 ** 6)
    p.add_argument("--max-seconds", type=float, default=60.0)
    p.add_argument("--strip", help="write the decoded plan as a PGM strip")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("bench", help="planning benchmark over noisy random-walk instances")
    _common(p)
    p.set_defaults(seed=None)
    p.add_argument("--out", default="bench")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("prune", help="remove constant-false bits")
    _common(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--sae", required=True)
    p.add_argument("--out", default="pruned.zsnn")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("export-pddl", help="write the encoded transition graph as PDDL")
    _common(p)
    p.add_argument("--world", default="lightsout3")
    p.add_argument("--sae", required=True)
    p.add_argument("--init")
    p.add_argument("--goal")
    p.add_argument("--max-bits", type=int, default=200)
    p.add_argument("--out")
    p.add_argument("--problem-out")
    p.set_defaults(func=cmd_export_pddl)

    p = sub.add_parser("inspect", help="summarize a model file")
    _common(p)
    p.add_argument("model")
    p.set_defaults(func=cmd_inspect)
    return parser


def _apply_config(parser, argv):
    """Re-parse with ``--config`` values as defaults so explicit flags still win."""
    args = parser.parse_args(argv)
    if getattr(args, "config", None) and args.command != "bench":
        with open(args.config) as fh:
            overrides = json.load(fh)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(overrides) - known
        if unknown:
            parser.error(f"unknown keys in {args.config}: {sorted(unknown)}")
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)
    return args


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ZsaeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
