"""Command-line entry points.

Subcommands: gen, extract, train, eval, simulate. Global flags --config
(key=value file), --seed and --out apply to every subcommand. Exit
codes: 0 success, 1 usage error, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import classifiers, datagen, embedding, mission, reporting, simworld
from .body import NoiseModel
from .config import load_config
from .errors import DataFormatError, InvalidVariantError
from .features import extract_batch
from .filtering import FilterConfig
from .io import read_pose_stream, write_feature_matrix


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_global_flags(parser, trailing: bool = False) -> None:
    """The global trio is accepted both before and after the subcommand.

    The trailing copies default to SUPPRESS so they only touch the
    namespace when given explicitly and never clobber a leading value.
    """
    kw = {"default": argparse.SUPPRESS} if trailing else {}
    parser.add_argument("--config", help="key=value configuration file", **kw)
    parser.add_argument("--seed", type=int,
                        **(kw if trailing else {"default": 0}))
    parser.add_argument("--out", help="output directory",
                        **(kw if trailing else {"default": "."}))


def _build_parser() -> _Parser:
    p = _Parser(prog="diverid", description="Diver identification pipeline")
    _add_global_flags(p)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic labelled dataset")
    _add_global_flags(g, trailing=True)
    g.add_argument("--divers", type=int, default=4)
    g.add_argument("--swimmers", type=int, default=4)
    g.add_argument("--frames", type=int, default=2000)

    e = sub.add_parser("extract", help="pose stream -> feature matrix")
    _add_global_flags(e, trailing=True)
    e.add_argument("poses", help="pose stream file")
    e.add_argument("--features-out", default="features.txt")

    t = sub.add_parser("train", help="train embedding and classifier variants")
    _add_global_flags(t, trailing=True)
    t.add_argument("--data", required=True, help="dataset directory from gen")
    t.add_argument("--variants", default="All_NN_KNN,All_NN_SVM",
                   help="comma-separated variant names")

    v = sub.add_parser("eval", help="accuracy against frames-per-decision")
    _add_global_flags(v, trailing=True)
    v.add_argument("--data", required=True)
    v.add_argument("--models", required=True, nargs="+",
                   help="model bundle files")
    v.add_argument("--embed", help="embedding net file (for *_NN_* bundles)")
    v.add_argument("--frames", default="10,25,50,100",
                   help="comma-separated frame counts")
    v.add_argument("--plot", action="store_true",
                   help="also write a PNG if matplotlib is available")

    s = sub.add_parser("simulate", help="run seeded mission episodes")
    _add_global_flags(s, trailing=True)
    s.add_argument("--mode", choices=("offline", "online"), required=True)
    s.add_argument("--scene", required=True, help="scene description file")
    s.add_argument("--models", nargs="*", default=[],
                   help="model bundles (offline mode)")
    s.add_argument("--embed", help="embedding net file")
    s.add_argument("--frames", type=int, default=50, choices=(50, 100))
    s.add_argument("--episodes", type=int, default=16)
    s.add_argument("--target", type=int, help="target label (offline)")
    s.add_argument("--identify-with", default="All_NN_SVM")
    return p


def _load_cfg(path) -> dict:
    return load_config(path) if path else {}


def _noise_from_cfg(cfg: dict) -> NoiseModel:
    return NoiseModel(
        sigma_px=float(cfg.get("noise.sigma_px", 2.0)),
        p_corrupt=float(cfg.get("noise.p_corrupt", 0.1)),
    )


def _train_cfg_from(cfg: dict, seed: int) -> embedding.TrainConfig:
    d = embedding.TrainConfig()
    return embedding.TrainConfig(
        epochs=int(cfg.get("embed.epochs", d.epochs)),
        batch_size=int(cfg.get("embed.batch_size", d.batch_size)),
        learning_rate=float(cfg.get("embed.learning_rate", d.learning_rate)),
        margin=float(cfg.get("embed.margin", d.margin)),
        min_epochs=int(cfg.get("embed.min_epochs", d.min_epochs)),
        patience=int(cfg.get("embed.patience", d.patience)),
        rel_tol=float(cfg.get("embed.rel_tol", d.rel_tol)),
        seed=seed,
    )


def _cmd_gen(args, cfg) -> int:
    out = Path(args.out)
    pop = datagen.sample_population(args.divers, args.swimmers, seed=args.seed)
    manifest = datagen.render_dataset(
        pop, args.frames, out, noise=_noise_from_cfg(cfg), seed=args.seed)
    print(f"wrote {len(manifest['identities'])} pose streams to {out}")
    return 0


def _cmd_extract(args, cfg) -> int:
    frames = read_pose_stream(args.poses)
    feats, labels = extract_batch(frames, FilterConfig.from_mapping(cfg))
    out = Path(args.out) / args.features_out
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_feature_matrix(out, feats, labels)
    print(f"{len(frames)} frames in, {feats.shape[0]} accepted -> {out}")
    return 0


def _split_fraction(cfg: dict) -> float:
    return float(cfg.get("train.split", 0.8))


def _cmd_train(args, cfg) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = [n.strip() for n in args.variants.split(",") if n.strip()]
    if not names:
        raise UsageError("no variants given")
    variants = {}
    for name in names:
        try:
            variants[name] = classifiers.parse_variant(name)
        except InvalidVariantError as exc:
            raise UsageError(str(exc))

    x, y, pop = datagen.load_dataset_features(
        args.data, FilterConfig.from_mapping(cfg))
    if x.shape[0] == 0:
        raise DataFormatError(f"{args.data}: dataset has no accepted frames")
    kinds = datagen.kind_of_labels(pop)
    x_tr, y_tr, x_te, y_te = datagen.split(x, y, _split_fraction(cfg), args.seed)

    net = None
    if any(v.uses_embedding for v in variants.values()):
        net, result = embedding.train_embedding(
            x_tr, y_tr, _train_cfg_from(cfg, args.seed))
        embedding.save_embedding(net, out / "embed.npz")
        print(f"embedding trained: {result.epochs_run} epochs "
              f"({result.stop_reason}) -> {out / 'embed.npz'}")

    head_cfg = classifiers.HeadConfig().reseeded(args.seed)
    rows = []
    for name, variant in variants.items():
        if variant.dataset_kind == "diver":
            xt, yt = datagen.select_kind(x_tr, y_tr, kinds, "diver")
            xv, yv = datagen.select_kind(x_te, y_te, kinds, "diver")
        else:
            xt, yt, xv, yv = x_tr, y_tr, x_te, y_te
        model = classifiers.build_variant(variant, xt, yt,
                                          pretrained_embed=net, cfg=head_cfg)
        classifiers.save_bundle(model, out / f"{name}.npz")
        rows.append((name,
                     reporting.classification_accuracy(model, xt, yt),
                     reporting.classification_accuracy(model, xv, yv)))
    tsv, aligned = reporting.variant_accuracy_report(rows)
    (out / "accuracy.tsv").write_text(tsv)
    (out / "accuracy.txt").write_text(aligned)
    print(aligned, end="")
    return 0


def _load_models(paths, embed_path):
    net = embedding.load_embedding(embed_path) if embed_path else None
    models = {}
    for p in paths:
        model = classifiers.load_bundle(p, embed_net=net)
        models[model.variant.name] = model
    return models, net


def _cmd_eval(args, cfg) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    models, _ = _load_models(args.models, args.embed)
    x, y, pop = datagen.load_dataset_features(
        args.data, FilterConfig.from_mapping(cfg))
    kinds = datagen.kind_of_labels(pop)
    _, _, x_te, y_te = datagen.split(x, y, _split_fraction(cfg), args.seed)
    frame_counts = [int(f) for f in args.frames.split(",")]
    diver_only = all(m.variant.dataset_kind == "diver" for m in models.values())
    if diver_only:
        x_te, y_te = datagen.select_kind(x_te, y_te, kinds, "diver")
    results, skipped = reporting.accuracy_vs_frames(
        models, x_te, y_te, frame_counts, seed=args.seed)
    for f in skipped:
        print(f"warning: skipped frame count {f}, not enough test rows",
              file=sys.stderr)
    tsv, aligned = reporting.frames_report(results, frame_counts)
    (out / "frames.tsv").write_text(tsv)
    (out / "frames.txt").write_text(aligned)
    print(aligned, end="")
    print(reporting.text_chart(results), end="")
    if args.plot:
        _maybe_plot(results, out / "frames.png")
    return 0


def _maybe_plot(results: dict, path) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping plot", file=sys.stderr)
        return
    fig, ax = plt.subplots()
    for name, pts in sorted(results.items()):
        xs = sorted(pts)
        ax.plot(xs, [pts[f] for f in xs], marker="o", label=name)
    ax.set_xlabel("frames per decision")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _cmd_simulate(args, cfg) -> int:
    if args.mode == "offline":
        if not args.models:
            raise UsageError("offline simulation needs --models")
        if args.target is None:
            raise UsageError("offline simulation needs --target")
    elif args.embed is None:
        raise UsageError("online simulation needs --embed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    template = simworld.load_scene(args.scene)
    models = net = None
    if args.mode == "offline":
        models, net = _load_models(args.models, args.embed)
        if args.identify_with not in models:
            raise UsageError(
                f"--identify-with {args.identify_with} not among loaded bundles")
    else:
        net = embedding.load_embedding(args.embed)
    mcfg = mission.MissionConfig(
        mode=args.mode,
        frames_per_identification=args.frames,
        target=args.target if args.mode == "offline" else None,
        identify_with=args.identify_with,
    )
    logs = []
    for i in range(args.episodes):
        scene = simworld.clone_scene(template, seed=args.seed + i)
        log = mission.run_mission(scene, mcfg, models=models, embed_net=net)
        mission.write_mission_log(log, out / f"mission_{i:03d}.jsonl")
        logs.append(log)
    tsv, aligned = reporting.mission_suite_report(logs)
    (out / "missions.tsv").write_text(tsv)
    (out / "missions.txt").write_text(aligned)
    print(aligned, end="")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "extract": _cmd_extract,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "simulate": _cmd_simulate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _load_cfg(args.config)
        return _COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
