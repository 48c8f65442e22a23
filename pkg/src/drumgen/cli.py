"""Command-line entry point for data synthesis, training, evaluation and serving."""

from __future__ import annotations

import argparse
import ast
import hashlib
import json
import sys
from pathlib import Path

import numpy as np


def _comma_ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _comma_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def parse_config_file(path: str | Path) -> dict:
    """Flat key = value text; values parsed as Python literals when possible."""
    out: dict = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key = value): {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            out[key.replace("-", "_")] = ast.literal_eval(value)
        except (ValueError, SyntaxError):
            out[key.replace("-", "_")] = value
    return out


def config_hash(args: argparse.Namespace) -> str:
    blob = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    return hashlib.sha256(repr(blob).encode()).hexdigest()[:12]


def _emit_header(verb: str, args: argparse.Namespace, fingerprints: dict | None = None) -> None:
    parts = [f"drumgen {verb}", f"config_hash={config_hash(args)}"]
    if hasattr(args, "seed"):
        parts.append(f"seed={args.seed}")
    for name, fp in (fingerprints or {}).items():
        parts.append(f"{name}={fp}")
    print(" ".join(parts), file=sys.stderr)


def _dataset_from_args(args: argparse.Namespace):
    from .dataset import SyntheticSpec, load_dataset

    if getattr(args, "data", None):
        return load_dataset(args.data, split_seed=args.split_seed)
    return load_dataset(SyntheticSpec(per_class=args.per_class, seed=args.data_seed), split_seed=args.split_seed)


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset directory with kick/snare/cymbal subfolders")
    p.add_argument("--per-class", type=int, default=200, help="synthetic clips per class when --data is omitted")
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=0)


def cmd_make_data(args) -> int:
    from .dataset import save_dataset_wavs

    _emit_header("make-data", args)
    count = save_dataset_wavs(args.out, args.per_class, args.seed)
    print(f"wrote {count} WAV files under {args.out}")
    return 0


def cmd_train_classifier(args) -> int:
    from .classifier import ClassifierConfig, train_classifier

    _emit_header("train-classifier", args)
    dataset = _dataset_from_args(args)
    cfg = ClassifierConfig(
        embedding_dim=args.embedding_dim, lr=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed
    )
    clf, log = train_classifier(dataset, cfg)
    clf.save(args.out, extra={"val_accuracy": log["val_accuracy"]})
    print(f"classifier saved to {args.out} (val_accuracy={log['val_accuracy']:.3f}, fingerprint={clf.fingerprint})")
    return 0


def cmd_train_gan(args) -> int:
    from .classifier import SoftLabelClassifier
    from .training import TrainConfig, run_gan_training

    dataset = _dataset_from_args(args)
    clf = SoftLabelClassifier.load(args.classifier)
    _emit_header("train-gan", args, {"classifier": clf.fingerprint})
    cfg = TrainConfig(
        stage_steps=args.stage_steps,
        fade_steps=args.fade_steps,
        stage_batch_sizes=args.stage_batch_sizes,
        channels=args.channels,
        lr=args.lr,
        gp_weight=args.gp_weight,
        aux_weight=args.aux_weight,
        class_guidance_weight=args.class_guidance_weight,
        seed=args.seed,
        checkpoint_every=args.checkpoint_every,
        out_dir=args.out_dir,
    )
    final, _log = run_gan_training(cfg, dataset, clf, resume_from=args.resume, progress=not args.quiet)
    print(f"GAN checkpoint saved to {final}")
    return 0


def cmd_train_encoder(args) -> int:
    from .classifier import SoftLabelClassifier
    from .encoder import EncoderTrainConfig
    from .training import run_encoder_training

    dataset = _dataset_from_args(args)
    clf = SoftLabelClassifier.load(args.classifier)
    _emit_header("train-encoder", args, {"classifier": clf.fingerprint})
    cfg = EncoderTrainConfig(
        lr=args.lr,
        batch_size=args.batch_size,
        loss_alpha=args.loss_alpha,
        loss_beta=args.loss_beta,
        param_only_steps=args.param_only_steps,
        full_loss_steps=args.full_loss_steps,
        seed=args.seed,
    )
    real_clips = [clip for clip, _ in dataset.train_items]
    ckpt, log = run_encoder_training(
        args.gan, clf, real_clips, n_pairs=args.pairs, pairs_seed=args.pairs_seed, cfg=cfg,
        out_dir=args.out_dir, progress=not args.quiet,
    )
    print(f"encoder saved to {ckpt} (held-out improvement {log['improvement']:.2f}x)")
    return 0


def cmd_generate(args) -> int:
    from .gan import sample_latent
    from .navigation import SynthEngine
    from .training import load_generator

    generator, payload = load_generator(args.gan)
    _emit_header("generate", args, {"gan": payload["fingerprint"]})
    c = np.array(_comma_floats(args.c))
    if c.sum() > 0:
        c = c / c.sum()
    z = sample_latent(1, seed=args.seed)[0].double().numpy()
    engine = SynthEngine(generator)
    _clip, wav = engine.render(z, c)
    Path(args.out).write_bytes(wav)
    print(f"wrote {args.out}")
    return 0


def cmd_encode(args) -> int:
    from .audio import read_wav
    from .navigation import SynthEngine
    from .training import load_encoder, load_generator

    generator, gan_payload = load_generator(args.gan)
    enc, enc_payload = load_encoder(args.encoder)
    _emit_header("encode", args, {"gan": gan_payload["fingerprint"], "encoder": enc_payload["fingerprint"]})
    engine = SynthEngine(generator, encoder=enc)
    nav, c_hat = engine.analyze(read_wav(args.input), direction_seed=args.seed)
    result = {"z": nav.z_center.tolist(), "c": c_hat.tolist()}
    if args.out:
        Path(args.out).write_text(json.dumps(result))
        print(f"wrote {args.out}")
    else:
        print(json.dumps(result))
    return 0


def cmd_evaluate_gan(args) -> int:
    from .classifier import SoftLabelClassifier
    from .metrics import evaluate_generator
    from .training import load_generator

    dataset = _dataset_from_args(args)
    clf = SoftLabelClassifier.load(args.classifier)
    generator, payload = load_generator(args.gan)
    _emit_header("evaluate-gan", args, {"gan": payload["fingerprint"], "classifier": clf.fingerprint})
    clips = [clip for clip, _ in dataset.train_items]
    report = evaluate_generator(generator, clf, clips, n_fake=args.n_fake, seed=args.seed)
    print(report.table())
    if args.out:
        report.write_records(args.out)
        print(f"records written to {args.out}")
    return 0


def cmd_evaluate_encoder(args) -> int:
    from .gan import sample_latent
    from .metrics import evaluate_encoder, render_fakes
    from .classifier import SoftLabelClassifier
    from .training import load_encoder, load_generator

    dataset = _dataset_from_args(args)
    clf = SoftLabelClassifier.load(args.classifier)
    generator, gan_payload = load_generator(args.gan)
    enc, enc_payload = load_encoder(args.encoder)
    _emit_header(
        "evaluate-encoder", args,
        {"gan": gan_payload["fingerprint"], "encoder": enc_payload["fingerprint"], "classifier": clf.fingerprint},
    )
    rng = np.random.default_rng(args.seed)
    train_clips = [clip for clip, _ in dataset.train_items]
    import torch

    z = sample_latent(args.n_gen, seed=args.seed)
    probs = clf.predict_soft_labels_batch(train_clips)
    c = torch.from_numpy(probs[rng.integers(0, len(train_clips), size=args.n_gen)].astype(np.float32))
    sets = {
        "gen": render_fakes(generator, z, c),
        "train": [train_clips[i] for i in rng.choice(len(train_clips), size=min(args.n_gen, len(train_clips)), replace=False)],
        "test": [clip for clip, _ in dataset.val_items],
    }
    report = evaluate_encoder(enc, generator, sets)
    print(report.table())
    if args.out:
        report.write_records(args.out)
        print(f"records written to {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .classifier import SoftLabelClassifier
    from .navigation import SynthEngine
    from .service import create_app
    from .training import load_encoder, load_generator

    generator, gan_payload = load_generator(args.gan)
    encoder = None
    fingerprints = {"gan": gan_payload["fingerprint"]}
    if args.encoder:
        encoder, enc_payload = load_encoder(args.encoder)
        fingerprints["encoder"] = enc_payload["fingerprint"]
    classifier = SoftLabelClassifier.load(args.classifier) if args.classifier else None
    _emit_header("serve", args, fingerprints)
    engine = SynthEngine(generator, encoder=encoder, classifier=classifier)
    app = create_app(engine, static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drumgen", description=__doc__)
    parser.add_argument("--config", help="flat key = value config file; explicit flags override it")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("make-data", help="render a synthetic WAV corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=200)
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_make_data)

    p = sub.add_parser("train-classifier", help="train the soft-label classifier")
    _add_dataset_args(p)
    p.add_argument("--out", default="runs/classifier.ckpt")
    p.add_argument("--embedding-dim", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("train-gan", help="train the progressive conditional GAN")
    _add_dataset_args(p)
    p.add_argument("--classifier", required=True)
    p.add_argument("--out-dir", default="runs/gan")
    p.add_argument("--stage-steps", type=_comma_ints, default=(400, 400, 300, 300, 250, 200, 150))
    p.add_argument("--fade-steps", type=_comma_ints, default=(0, 200, 150, 150, 125, 100, 75))
    p.add_argument("--stage-batch-sizes", type=_comma_ints, default=(16, 16, 16, 16, 12, 8, 6))
    p.add_argument("--channels", type=_comma_ints, default=(256, 128, 128, 64, 64, 32, 32))
    p.add_argument("--lr", type=float, default=2e-4)
    p.add_argument("--gp-weight", type=float, default=10.0)
    p.add_argument("--aux-weight", type=float, default=10.0)
    p.add_argument("--class-guidance-weight", type=float, default=10.0)
    p.add_argument("--checkpoint-every", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resume", help="checkpoint to resume from")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("train-encoder", help="train the analysis encoder against a frozen GAN")
    _add_dataset_args(p)
    p.add_argument("--gan", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--out-dir", default="runs/encoder")
    p.add_argument("--pairs", type=int, default=10000)
    p.add_argument("--pairs-seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=28)
    p.add_argument("--loss-alpha", type=float, default=1.0)
    p.add_argument("--loss-beta", type=float, default=3.0)
    p.add_argument("--param-only-steps", type=int, default=1200)
    p.add_argument("--full-loss-steps", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train_encoder)

    p = sub.add_parser("generate", help="render one WAV from a latent seed and class mix")
    p.add_argument("--gan", required=True)
    p.add_argument("--c", default="1,0,0", help="class mix kick,snare,cymbal (renormalized)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="encode a WAV to (z, c)")
    p.add_argument("--gan", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("evaluate-gan", help="IS/KID/FAD report")
    _add_dataset_args(p)
    p.add_argument("--gan", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--n-fake", type=int, default=300)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate_gan)

    p = sub.add_parser("evaluate-encoder", help="MSE/LSD/SNR reconstruction report")
    _add_dataset_args(p)
    p.add_argument("--gan", required=True)
    p.add_argument("--encoder", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--n-gen", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate_encoder)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--gan", required=True)
    p.add_argument("--encoder")
    p.add_argument("--classifier")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", default="frontend/dist", help="directory of UI assets to serve at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    if "--config" in argv:
        config_path = argv[argv.index("--config") + 1]
        defaults = parse_config_file(config_path)
        for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
            action.set_defaults(**{k: v for k, v in defaults.items() if any(a.dest == k for a in action._actions)})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
