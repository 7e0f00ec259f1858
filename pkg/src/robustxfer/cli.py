"""Command-line entry point.

Commands: train, eval, sweep, augment, distance, synth, report.
Exit codes: 0 success, 2 usage or unreadable input, 3 training divergence,
4 data mismatch. All randomness funnels through --seed; every command that
writes files also writes a JSON run manifest next to its first output.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import classifier_core, crosslingual_eval, embedding_space
from . import robust_training as rt
from . import synthetic_langs as sl
from .errors import DataMismatchError, DivergenceError, ParseError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_MISMATCH = 4

_METHOD_FLAG = {"normal": "normal", "adv": "adv",
                "rs-random": "rs_random", "rs-augment": "rs_augment"}


# --- manifest -----------------------------------------------------------

def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(anchor, command: str, config: dict, seed: int,
                   inputs, outputs, started: float) -> Path:
    """Atomically write `<anchor>.manifest.json` describing one run."""
    anchor = Path(anchor)
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.monotonic() - started, 6),
    }
    target = anchor.with_name(anchor.name + ".manifest.json")
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    os.replace(tmp, target)
    return target


def _refuse_existing(path, force: bool) -> None:
    if Path(path).exists() and not force:
        raise FileExistsError(f"refusing to overwrite {path} (use --force)")


# --- SVG plot -----------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def write_line_svg(path, series: dict[str, list[tuple[float, float]]],
                   xlabel: str, ylabel: str, width: int = 640, height: int = 440) -> None:
    """Minimal static line plot: one polyline per named series, no
    timestamps or other run-dependent metadata."""
    left, right, top, bottom = 70, 20, 20, 50
    xs = [p[0] for pts in series.values() for p in pts]
    ys = [p[1] for pts in series.values() for p in pts]
    if not xs:
        raise ValueError("nothing to plot")

    def span(vals):
        lo, hi = min(vals), max(vals)
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.1
        return lo - pad, hi + pad

    x0, x1 = span(xs)
    y0, y1 = span(ys)

    def sx(x): return left + (x - x0) / (x1 - x0) * (width - left - right)
    def sy(y): return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
             f'height="{height}" viewBox="0 0 {width} {height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" '
             f'y2="{height - bottom}" stroke="black"/>',
             f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" '
             f'stroke="black"/>']
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        parts.append(f'<text x="{sx(xv):.1f}" y="{height - bottom + 18}" '
                     f'font-size="11" text-anchor="middle">{xv:.3g}</text>')
        parts.append(f'<text x="{left - 8}" y="{sy(yv):.1f}" font-size="11" '
                     f'text-anchor="end" dominant-baseline="middle">{yv:.3g}</text>')
    parts.append(f'<text x="{(left + width - right) / 2:.1f}" y="{height - 12}" '
                 f'font-size="13" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(top + height - bottom) / 2:.1f}" font-size="13" '
                 f'text-anchor="middle" transform="rotate(-90 16 '
                 f'{(top + height - bottom) / 2:.1f})">{ylabel}</text>')
    for i, name in enumerate(sorted(series)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = sorted(series[name])
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" '
                     f'points="{coords}"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" '
                         f'fill="{color}"/>')
        parts.append(f'<text x="{width - right - 6}" y="{top + 16 + 16 * i}" '
                     f'font-size="12" text-anchor="end" fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")


# --- shared flag groups ---------------------------------------------------

def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--epsilon", type=float, help="perturbation radius")
    p.add_argument("--steps", type=int, help="inner-max iterations")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float, help="SGD learning rate")
    p.add_argument("--m", type=int, help="augmented variants per example")
    p.add_argument("--p", type=float, help="per-position replacement probability")
    p.add_argument("--hidden-dims", help="comma-separated hidden layer widths")
    p.add_argument("--freeze-emb", action="store_true",
                   help="do not update the embedding table")
    p.add_argument("--max-len", type=int)


def _resolve_config(args, method: str,
                    base: rt.TrainingConfig | None = None) -> rt.TrainingConfig:
    """Config file first, then flags override."""
    cfg = base if base is not None else rt.TrainingConfig()
    if args.config:
        cfg = rt.load_config(args.config, cfg)
    kind = {"normal": "none", "adv": "adversarial",
            "rs_random": "uniform_ball", "rs_augment": "none"}[method]
    perturb = replace(cfg.perturb, kind=kind)
    if args.epsilon is not None:
        perturb = replace(perturb, epsilon=args.epsilon)
    if args.steps is not None:
        perturb = replace(perturb, steps=args.steps)
    overrides = {"method": method, "perturb": perturb, "seed": args.seed}
    for flag, name in (("epochs", "epochs"), ("batch_size", "batch_size"),
                       ("lr", "learning_rate"), ("m", "augment_m"),
                       ("p", "augment_p"), ("max_len", "max_len")):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    if args.hidden_dims is not None:
        overrides["hidden_dims"] = tuple(
            int(x) for x in args.hidden_dims.split(",") if x.strip())
    if args.freeze_emb:
        overrides["emb_trainable"] = False
    return replace(cfg, **overrides)


def _load_synonyms_or_knn(args, vocab, emb):
    if args.synonyms:
        return embedding_space.load_synonyms(args.synonyms, vocab)
    return embedding_space.build_synonyms_knn(
        emb, k=args.synonym_k, max_dist=args.synonym_max_dist, vocab=vocab)


def _cfg_dict(cfg: rt.TrainingConfig) -> dict:
    return asdict(cfg)


# --- commands -------------------------------------------------------------

def cmd_train(args) -> int:
    started = time.monotonic()
    method = _METHOD_FLAG[args.method]
    cfg = _resolve_config(args, method)
    vocab, emb = embedding_space.load_embeddings(args.emb)
    data = rt.load_dataset(args.data, vocab, n_classes=args.classes)
    syn = None
    if method == "rs_augment":
        syn = _load_synonyms_or_knn(args, vocab, emb)
    _refuse_existing(args.out, args.force)
    params = rt.train(data, cfg, emb, syn)
    classifier_core.save_checkpoint(args.out, params, vocab)
    inputs = [args.emb, args.data] + ([args.synonyms] if args.synonyms else [])
    if args.config:
        inputs.append(args.config)
    write_manifest(args.out, "train", _cfg_dict(cfg), cfg.seed,
                   inputs, [args.out], started)
    print(f"checkpoint={args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = time.monotonic()
    params, ckpt_vocab = classifier_core.load_checkpoint(args.model)
    if args.emb:
        vocab, emb = embedding_space.load_embeddings(args.emb)
    else:
        vocab, emb = ckpt_vocab, params.emb
    data = rt.load_dataset(args.data, vocab, n_classes=params.n_classes)
    spec = None
    if args.inference == "smoothed":
        eps = args.epsilon if args.epsilon is not None else 0.0
        kind = "uniform_ball" if eps > 0 else "none"
        spec = rt.PerturbationSpec(kind=kind, epsilon=eps)
    acc = crosslingual_eval.zero_shot_eval(
        params, data, emb, mode=args.inference, spec=spec,
        n_samples=args.samples, seed=args.seed, max_len=args.max_len or 64)
    print(f"accuracy={acc:.6f}")
    if args.out:
        _refuse_existing(args.out, args.force)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write("language,mode,accuracy\n")
            fh.write(f"{data.language},{args.inference},{acc:.6f}\n")
        inputs = [args.model, args.data] + ([args.emb] if args.emb else [])
        write_manifest(args.out, "eval", {"inference": args.inference,
                                          "samples": args.samples},
                       args.seed, inputs, [args.out], started)
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = time.monotonic()
    method = _METHOD_FLAG[args.method]
    cfg = _resolve_config(args, method)
    vocab, emb = embedding_space.load_embeddings(args.emb)
    train_d = rt.load_dataset(args.data, vocab, n_classes=args.classes)
    dev_d = rt.load_dataset(args.dev, vocab, n_classes=train_d.n_classes)
    syn = None
    if method == "rs_augment":
        syn = _load_synonyms_or_knn(args, vocab, emb)
    grid = [float(x) for x in args.grid.split(",") if x.strip()]
    if not grid or any(g < 0 for g in grid):
        raise ValueError(f"grid must be positive reals, got {args.grid!r}")
    _refuse_existing(args.out, args.force)
    best_eps, best_params, cells = rt.grid_search(train_d, dev_d, cfg, grid, emb, syn)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        fh.write("epsilon,dev_accuracy,error\n")
        for c in cells:
            acc = f"{c.accuracy:.6f}" if c.accuracy is not None else ""
            fh.write(f"{c.epsilon:.6g},{acc},{c.error or ''}\n")
    outputs = [args.out]
    if args.model_out:
        _refuse_existing(args.model_out, args.force)
        classifier_core.save_checkpoint(args.model_out, best_params, vocab)
        outputs.append(args.model_out)
    write_manifest(args.out, "sweep",
                   {**_cfg_dict(cfg), "grid": grid, "best_epsilon": best_eps},
                   cfg.seed, [args.emb, args.data, args.dev], outputs, started)
    print(f"best_epsilon={best_eps:.6g}")
    return EXIT_OK


def cmd_augment(args) -> int:
    started = time.monotonic()
    vocab, emb = embedding_space.load_embeddings(args.emb)
    data = rt.load_dataset(args.data, vocab, n_classes=args.classes)
    syn = _load_synonyms_or_knn(args, vocab, emb)
    from .seeding import STREAM_AUGMENT, derived_rng
    out = rt.augment_dataset(data, syn, args.m, args.p,
                             derived_rng(args.seed, STREAM_AUGMENT))
    _refuse_existing(args.out, args.force)
    rt.save_dataset(args.out, out, vocab)
    inputs = [args.emb, args.data] + ([args.synonyms] if args.synonyms else [])
    write_manifest(args.out, "augment", {"m": args.m, "p": args.p},
                   args.seed, inputs, [args.out], started)
    print(f"examples={len(out)}")
    return EXIT_OK


def cmd_distance(args) -> int:
    vocab_src, emb_src = embedding_space.load_embeddings(args.emb_src)
    vocab_tgt, emb_tgt = embedding_space.load_embeddings(args.emb_tgt)
    pairs = crosslingual_eval.load_alignments(args.pairs, vocab_src, vocab_tgt)
    if len(pairs) == 0:
        print("error: no usable aligned pairs", file=sys.stderr)
        return EXIT_MISMATCH
    if emb_src.dim != emb_tgt.dim:
        raise DataMismatchError(
            f"embedding dims differ: {emb_src.dim} vs {emb_tgt.dim}")
    dist = crosslingual_eval.language_distance(pairs, emb_src, emb_tgt)
    print(f"distance={dist:.6f}")
    return EXIT_OK


def cmd_synth(args) -> int:
    started = time.monotonic()
    task = sl.ToyTaskSpec(n_classes=args.classes, vocab_size=args.vocab_size,
                          dim=args.dim, examples_per_class=args.examples_per_class,
                          tokens_per_example=args.tokens_per_example,
                          margin=args.margin, seed=args.seed)
    etas = ([float(x) for x in args.etas.split(",") if x.strip()]
            if args.etas else list(sl.default_etas(task.margin)))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.sweep:
        cfg_base = _resolve_config(args, "normal",
                                   base=sl.sweep_training_config(task.margin))
        seeds = [int(x) for x in args.seeds.split(",") if x.strip()]
        methods = [_METHOD_FLAG[m.strip()] for m in args.methods.split(",") if m.strip()]
        grid = ([float(x) for x in args.grid.split(",") if x.strip()]
                if args.grid else None)
        rows = sl.noise_sweep(task, etas=etas, methods=methods, seeds=seeds,
                              cfg_base=cfg_base, grid=grid, noise_kind=args.noise,
                              synonym_k=args.synonym_k)
        out_csv = out_dir / "sweep.csv"
        _refuse_existing(out_csv, args.force)
        sl.write_sweep_csv(out_csv, rows)
        write_manifest(out_csv, "synth", {"task": asdict(task), "etas": etas,
                                          "methods": methods, "seeds": seeds,
                                          "grid": grid, **_cfg_dict(cfg_base)},
                       args.seed, [], [out_csv], started)
        print(f"sweep={out_csv}")
        return EXIT_OK

    vocab, emb, train_d, dev_d, test_d = sl.make_toy_task(task)
    syn = embedding_space.build_synonyms_knn(emb, k=args.synonym_k,
                                             max_dist=task.margin, vocab=vocab)
    outputs = []

    def emit(name, writer):
        path = out_dir / name
        _refuse_existing(path, args.force)
        writer(path)
        outputs.append(path)

    emit("embeddings.txt", lambda p: embedding_space.save_embeddings(p, vocab, emb))
    emit("train.tsv", lambda p: rt.save_dataset(p, train_d, vocab))
    emit("dev.tsv", lambda p: rt.save_dataset(p, dev_d, vocab))
    emit("test.tsv", lambda p: rt.save_dataset(p, test_d, vocab))
    emit("synonyms.tsv", lambda p: embedding_space.save_synonyms(p, vocab, syn))
    for j, eta in enumerate(etas):
        spec = sl.SyntheticLanguageSpec(noise_kind=args.noise, eta=eta,
                                        seed=args.seed + j, tag=f"eta{j}")
        vocab_t, emb_t, pairs = sl.derive_language(vocab, emb, spec)
        test_t = sl.translate_corpus(test_d, vocab, vocab_t)
        emit(f"emb_eta{j}.txt", lambda p, v=vocab_t, e=emb_t:
             embedding_space.save_embeddings(p, v, e))
        emit(f"test_eta{j}.tsv", lambda p, d=test_t, v=vocab_t:
             rt.save_dataset(p, d, v))
        emit(f"align_eta{j}.tsv", lambda p, pr=pairs, v=vocab_t:
             crosslingual_eval.save_alignments(p, pr, vocab, v))
    write_manifest(out_dir / "synth", "synth", {"task": asdict(task), "etas": etas},
                   args.seed, [], outputs, started)
    print(f"wrote {len(outputs)} files to {out_dir}")
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.monotonic()
    in_dir = Path(args.input)
    rows: list[sl.SweepRow] = []
    inputs = []
    for path in sorted(in_dir.glob("*.csv")):
        try:
            rows.extend(sl.read_sweep_csv(path))
            inputs.append(path)
        except ValueError:
            continue
    if not rows:
        print(f"error: no sweep CSVs found in {in_dir}", file=sys.stderr)
        return EXIT_MISMATCH
    baseline = args.baseline
    methods = sorted({r.method for r in rows})
    if baseline not in methods:
        print(f"error: baseline method {baseline!r} absent from sweep rows",
              file=sys.stderr)
        return EXIT_MISMATCH

    def lang_of(eta: float) -> str:
        return f"eta={eta:.6g}"

    etas = sorted({r.eta for r in rows})
    base_acc, base_dist = {}, {}
    for eta in etas:
        cells = [r for r in rows if r.method == baseline and r.eta == eta]
        if not cells:
            print(f"error: baseline rows missing at eta={eta}", file=sys.stderr)
            return EXIT_MISMATCH
        base_acc[lang_of(eta)] = float(np.mean([r.accuracy for r in cells]))
        base_dist[lang_of(eta)] = float(np.mean([r.distance for r in cells]))
    base_result = crosslingual_eval.TransferResult(
        model_tag=baseline, accuracy=base_acc, distance=base_dist)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trend_path = out_dir / "trend.csv"
    _refuse_existing(trend_path, args.force)
    series: dict[str, list[tuple[float, float]]] = {}
    outputs = [trend_path]
    with open(trend_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("method,language,distance,acc_baseline,acc_robust,delta\n")
        for method in methods:
            if method == baseline:
                continue
            acc = {}
            for eta in etas:
                cells = [r for r in rows if r.method == method and r.eta == eta]
                if not cells:
                    print(f"error: rows missing for {method} at eta={eta}",
                          file=sys.stderr)
                    return EXIT_MISMATCH
                acc[lang_of(eta)] = float(np.mean([r.accuracy for r in cells]))
            result = crosslingual_eval.improvement_vs_distance(
                base_result,
                crosslingual_eval.TransferResult(model_tag=method, accuracy=acc))
            for r in result.rows:
                fh.write(f"{method},{r.language},{r.distance:.6f},"
                         f"{r.acc_baseline:.6f},{r.acc_robust:.6f},{r.delta:.6f}\n")
            per_method = out_dir / f"improvement_{method}.csv"
            _refuse_existing(per_method, args.force)
            crosslingual_eval.write_improvement_csv(per_method, result)
            outputs.append(per_method)
            series[method] = [(r.distance, r.delta) for r in result.rows]
            flag = " (degenerate)" if result.degenerate else ""
            print(f"spearman[{method}]={result.spearman_rho:.6f}{flag}")
    svg_path = out_dir / "trend.svg"
    _refuse_existing(svg_path, args.force)
    write_line_svg(svg_path, series, xlabel="language distance",
                   ylabel="accuracy gain over baseline")
    outputs.append(svg_path)
    write_manifest(trend_path, "report", {"baseline": baseline}, args.seed,
                   inputs, outputs, started)
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robustxfer",
        description="Robust training and zero-shot transfer evaluation for "
                    "text classifiers over static embedding spaces.",
        epilog="Flag precedence: command-line flags override --config values, "
               "which override built-in defaults.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")

    p = sub.add_parser("train", help="train a classifier")
    p.add_argument("--data", required=True, help="training TSV")
    p.add_argument("--emb", required=True, help="embedding text file")
    p.add_argument("--method", required=True, choices=sorted(_METHOD_FLAG))
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--classes", type=int, help="number of classes (default: from data)")
    p.add_argument("--synonyms", help="synonym TSV (rs-augment)")
    p.add_argument("--synonym-k", type=int, default=10)
    p.add_argument("--synonym-max-dist", type=float, default=1e18)
    _add_training_flags(p)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--emb", help="target embedding file (default: checkpoint's)")
    p.add_argument("--inference", choices=("plain", "smoothed"), default="plain")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--epsilon", type=float, help="smoothing ball radius")
    p.add_argument("--max-len", type=int)
    p.add_argument("--out", help="optional accuracy CSV")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid-search the perturbation radius")
    p.add_argument("--data", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--method", required=True, choices=sorted(_METHOD_FLAG))
    p.add_argument("--grid", default="0.001,0.01,0.1,1.0")
    p.add_argument("--classes", type=int)
    p.add_argument("--synonyms")
    p.add_argument("--synonym-k", type=int, default=10)
    p.add_argument("--synonym-max-dist", type=float, default=1e18)
    p.add_argument("--out", required=True, help="dev-table CSV path")
    p.add_argument("--model-out", help="optionally save the winning checkpoint")
    _add_training_flags(p)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("augment", help="write a synonym-augmented dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--emb", required=True)
    p.add_argument("--synonyms")
    p.add_argument("--synonym-k", type=int, default=10)
    p.add_argument("--synonym-max-dist", type=float, default=1e18)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--classes", type=int)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("distance", help="language distance from aligned pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--emb-src", required=True)
    p.add_argument("--emb-tgt", required=True)
    common(p)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("synth", help="generate a toy task (or run the noise sweep)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--vocab-size", type=int, default=512)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--examples-per-class", type=int, default=200)
    p.add_argument("--tokens-per-example", type=int, default=4)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--etas", help="comma-separated noise levels")
    p.add_argument("--noise", choices=sl.NOISE_KINDS, default="uniform_linf")
    p.add_argument("--synonym-k", type=int, default=10)
    p.add_argument("--sweep", action="store_true",
                   help="run the full noise sweep and write sweep.csv")
    p.add_argument("--methods", default="normal,adv,rs-random,rs-augment")
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--grid", help="radius grid for both families "
                                  "(default: per-family margin multiples)")
    _add_training_flags(p)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="aggregate sweep CSVs into trend report")
    p.add_argument("--input", required=True, help="directory of sweep CSVs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--baseline", default="normal")
    common(p)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except DataMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (ParseError, FileNotFoundError, IsADirectoryError, FileExistsError,
            sl.GenerationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
