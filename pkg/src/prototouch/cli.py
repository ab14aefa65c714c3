"""Command-line entry points for every pipeline stage.

Subcommands: gen, train, eval, bench, serve. All commands accept --seed and
write seed-deterministic artifacts, so a rerun with identical flags produces
byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from prototouch import baselines, contact_sim, dataset as ds_mod, evaluate as eval_mod, live, model as model_mod
from prototouch.kinematics import chain_reach, load_chain, preset_chain
from prototouch.phri import load_rules, preset_rules


def _load_chain_arg(args):
    if getattr(args, "chain", None):
        return load_chain(args.chain)
    return preset_chain(args.robot)


def cmd_gen(args) -> int:
    chain = _load_chain_arg(args)
    overrides = {}
    if args.configs is not None:
        overrides["n_configs"] = args.configs
    if args.reps is not None:
        overrides["reps_per_point"] = args.reps
    if args.no_contact_frac is not None:
        overrides["no_contact_fraction"] = args.no_contact_frac
    if args.noise_torque is not None:
        overrides["noise_sigma_torque"] = args.noise_torque
    if args.noise_pos is not None:
        overrides["noise_sigma_position"] = args.noise_pos
    if args.fmin is not None:
        overrides["force_min"] = args.fmin
    if args.fmax is not None:
        overrides["force_max"] = args.fmax
    if args.config_spread is not None:
        overrides["config_spread"] = args.config_spread
    protocol = contact_sim.default_protocol(args.robot, seed=args.seed, **overrides)

    instance = None
    if args.perturb_scale:
        instance = contact_sim.perturb_instance(chain, args.perturb_scale, args.instance_seed)
    data = contact_sim.synthesize_dataset(chain, chain.surface_points, protocol, instance)
    ds_mod.save_dataset(data, args.out)
    meta = data.metadata
    print(
        f"wrote {args.out}: {len(data)} samples "
        f"({meta['contact_samples']} contact, {meta['no_contact_samples']} no-contact), "
        f"robot={data.robot_id} dof={data.dof} points={data.n_points} "
        f"sigma_tau={meta['protocol']['noise_sigma_torque']:.4f}"
    )
    return 0


def cmd_train(args) -> int:
    data = ds_mod.load_dataset(args.data)
    config = model_mod.TrainConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        split_ratio=args.split,
    )
    trained, history = model_mod.train(data, args.head, config)
    model_mod.save_model(trained, args.out)
    history_path = args.history or (str(args.out) + ".history.json")
    with open(history_path, "w") as fh:
        json.dump({"head": args.head, "epochs": config.epochs, "train_loss": history}, fh)
        fh.write("\n")
    print(
        f"wrote {args.out}: head={args.head} widths={trained.widths} "
        f"loss {history[0]:.5f} -> {history[-1]:.5f} (history: {history_path})"
    )
    return 0


def _parse_sweep(text):
    lo, hi, step = (float(v) for v in text.split(":"))
    if step <= 0 or hi < lo:
        raise ValueError("sweep must be lo:hi:step with step > 0")
    return tuple(np.arange(lo, hi + step / 2, step).tolist())


def cmd_eval(args) -> int:
    data = ds_mod.load_dataset(args.data)
    chain = load_chain(args.chain) if args.chain else preset_chain(data.robot_id)
    sweep = _parse_sweep(args.sweep) if args.sweep else eval_mod.DEFAULT_SWEEP_CM
    config = model_mod.TrainConfig(seed=args.seed)

    if args.cross_instance is not None:
        trained, _ = model_mod.train(data, model_mod.REGRESSION, config)
        unseen_instance = contact_sim.perturb_instance(chain, args.cross_instance, args.seed + 1)
        protocol_fields = dict(data.metadata.get("protocol", {}))
        protocol_fields.pop("seed", None)
        protocol = contact_sim.CollectionProtocol(seed=args.seed + 1, **protocol_fields)
        unseen_data = contact_sim.synthesize_dataset(chain, chain.surface_points, protocol, unseen_instance)
        _, val_seen = ds_mod.split(data, config.split_ratio, config.seed)
        _, val_unseen = ds_mod.split(unseen_data, config.split_ratio, config.seed)
        seen, unseen = eval_mod.evaluate_cross_instance(trained, chain, val_seen, val_unseen, args.epsilon)
        for tag, report in (("seen", seen), ("unseen", unseen)):
            path = f"{args.out}.{tag}.json"
            eval_mod.save_report(report, path)
            print(f"{tag}: acc@{args.epsilon:.0f}cm {report.acc*100:.1f}%  mean L2 {report.mean_l2_cm:.2f} cm -> {path}")
        return 0

    if args.all:
        reports = eval_mod.comparison_table(data, chain, config, epsilon_cm=args.epsilon)
        for method, report in reports.items():
            report.sweep = eval_mod.threshold_sweep(report.distances_cm, sweep)
            path = f"{args.out}.{method}.json"
            eval_mod.save_report(report, path)
            print(
                f"{method:20s} acc@{args.epsilon:.0f}cm {report.acc*100:5.1f}%  "
                f"mean L2 {report.mean_l2_cm:6.2f} cm -> {path}"
            )
        return 0

    if not args.model:
        print("eval needs --model or --all", file=sys.stderr)
        return 2
    trained = model_mod.load_model(args.model)
    _, val = ds_mod.split(data, config.split_ratio, config.seed)
    report = eval_mod.evaluate_model(trained, val, chain, epsilon_cm=args.epsilon, sweep_cm=sweep)
    eval_mod.save_report(report, args.out)
    print(f"{report.method}: acc@{args.epsilon:.0f}cm {report.acc*100:.1f}%  mean L2 {report.mean_l2_cm:.2f} cm -> {args.out}")
    return 0


def cmd_bench(args) -> int:
    trained = model_mod.load_model(args.model)
    result = live.bench_throughput(trained, duration_s=args.duration, seed=args.seed)
    line = json.dumps(result)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(line + "\n")
    print(line)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from prototouch.server import ServeConfig, build_app

    chain = _load_chain_arg(args)
    trained = model_mod.load_model(args.model)
    rules = load_rules(args.rules) if args.rules else preset_rules(args.robot)
    config = ServeConfig(tick_hz=args.tick_hz, seed=args.seed)
    app = build_app(chain, trained, rules, config)
    print(f"serving {args.robot} touch console on ws://{args.host}:{args.port}/ws")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prototouch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--robot", default="spotlike", choices=("spotlike", "frankalike"))
        p.add_argument("--chain", help="custom chain file (overrides --robot geometry)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=out_default)

    p = sub.add_parser("gen", help="synthesize a contact dataset")
    common(p, "dataset.ndjson")
    p.add_argument("--configs", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--no-contact-frac", type=float, dest="no_contact_frac")
    p.add_argument("--noise-torque", type=float, dest="noise_torque")
    p.add_argument("--noise-pos", type=float, dest="noise_pos")
    p.add_argument("--fmin", type=float)
    p.add_argument("--fmax", type=float)
    p.add_argument("--config-spread", type=float, dest="config_spread")
    p.add_argument("--perturb-scale", type=float, dest="perturb_scale", default=0.0)
    p.add_argument("--instance-seed", type=int, dest="instance_seed", default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a localizer on a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--head", default="regression", choices=("regression", "classification"))
    p.add_argument("--lr", type=float, default=2.5e-3)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="model.json")
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate methods on a dataset's validation split")
    p.add_argument("--data", required=True)
    p.add_argument("--model")
    p.add_argument("--all", action="store_true", help="train and score all four methods")
    p.add_argument("--chain")
    p.add_argument("--epsilon", type=float, default=12.0)
    p.add_argument("--sweep", help="threshold grid lo:hi:step in cm")
    p.add_argument("--cross-instance", type=float, dest="cross_instance",
                   help="perturbation scale for an unseen-unit comparison")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="report.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="measure single-thread inference throughput")
    p.add_argument("--model", required=True)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the live telemetry/command gateway")
    common(p, None)
    p.add_argument("--model", required=True)
    p.add_argument("--rules", help="rule file (defaults to the robot preset rules)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8741)
    p.add_argument("--tick-hz", type=float, dest="tick_hz", default=60.0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
