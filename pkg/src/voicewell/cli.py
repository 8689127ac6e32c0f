"""Command-line entry point: synth, extract, select, train, cv, plot."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import nullcontext
from pathlib import Path

from . import data, evaluation, pipeline, report
from .errors import VoicewellError
from .linguistic import LEXICON_FILES, LexiconSet, load_lexicons
from .model import Hyperparams, save_model, train
from .selection import DEFAULT_N_SELECT, MEASUREMENTS, select_top_n

log = logging.getLogger("voicewell")

DEFAULT_SEED = 42
SOURCE_CHOICES = evaluation.SOURCES


class UsageError(Exception):
    """Bad paths or arguments detected before any work starts."""


def _split_list(value: str, choices, label: str) -> list[str]:
    items = [v.strip() for v in value.split(",") if v.strip()]
    lookup = {c.lower(): c for c in choices}
    out = []
    for item in items:
        if item.lower() not in lookup:
            raise argparse.ArgumentTypeError(f"unknown {label} {item!r}; choose from {', '.join(choices)}")
        out.append(lookup[item.lower()])
    return out


def _measurements(value: str) -> list[str]:
    return _split_list(value, MEASUREMENTS, "measurement")


def _sources(value: str) -> list[str]:
    return _split_list(value, SOURCE_CHOICES, "source")


def _existing_file(path: Path, what: str) -> Path:
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def _lexicons(args) -> LexiconSet:
    base = Path(args.lexicons) if args.lexicons else Path(args.manifest).parent / "lexicons"
    paths = {}
    for key, name in LEXICON_FILES.items():
        override = getattr(args, f"lex_{key}", None)
        paths[key] = Path(override) if override else base / name
    for key in ("frequency", "depression", "positive", "negative"):
        _existing_file(paths[key], f"{key} lexicon")
    fillers = paths["fillers"] if paths["fillers"].is_file() else None
    return load_lexicons(paths["frequency"], paths["depression"], paths["positive"], paths["negative"], fillers)


def _load_sessions(manifest: str):
    sessions, excluded = data.load_manifest(_existing_file(Path(manifest), "manifest"))
    for e in excluded:
        log.warning("excluded %s/%d: %s", e.subject_id, e.session_index, e.reason)
    return sessions


def _hyperparams(args) -> Hyperparams:
    hp = Hyperparams()
    if getattr(args, "epochs", None):
        hp = Hyperparams(**{**hp.__dict__, "epochs": args.epochs})
    return hp


# --------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    try:
        spec = data.SynthSpec(args.subjects, args.sessions, args.seed, args.noise)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    path = data.generate_synthetic(spec, args.out, workers=data.worker_count())
    sessions, excluded = data.load_manifest(path)
    print(f"wrote {len(sessions)} sessions to {path}")
    return 0 if not excluded else 1


def cmd_extract(args) -> int:
    lex = _lexicons(args)
    sessions = _load_sessions(args.manifest)
    rep = pipeline.extract_corpus(
        sessions, lex, args.out, force=args.force, workers=data.worker_count(), fmt=args.format
    )
    print(rep.summary())
    for (subject, session), err in sorted(rep.errors.items()):
        print(f"error {subject}/{session}: {err}", file=sys.stderr)
    return 1 if rep.errors else 0


def _dataset(args, source: str) -> evaluation.Dataset:
    sessions = _load_sessions(args.manifest)
    table = pipeline.load_source(args.features, source)
    ds = evaluation.build_dataset(table, data.scores_by_key(sessions))
    missing = len(sessions) - ds.n_sessions
    if missing:
        log.warning("%d retained sessions have no %s features", missing, source)
    return ds


def cmd_select(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for source in args.source:
        ds = _dataset(args, source)
        for m in args.measurement:
            mask = select_top_n(ds.X, ds.scores[m], args.n_select, ds.names, m, source)
            mask.save(out / f"mask_{m}_{source}.json")
            print(f"{m} {source}: kept {mask.n} features")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hp = _hyperparams(args)
    for source in args.source:
        ds = _dataset(args, source)
        for m in args.measurement:
            mask = select_top_n(ds.X, ds.scores[m], args.n_select, ds.names, m, source)
            model, rep = train(mask.apply(ds.names, ds.X), ds.scores[m], hp, args.seed, mask.kept_names)
            mask.save(out / f"mask_{m}_{source}.json")
            save_model(model, out / f"model_{m}_{source}.npz")
            print(f"{m} {source}: final training mse {rep.epoch_mse[-1]:.4f}")
    return 0


def cmd_cv(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hp = _hyperparams(args)
    workers = data.worker_count()
    results = []
    with ProcessPoolExecutor(workers) if workers > 1 else nullcontext() as pool:
        map_fn = pool.map if pool is not None else map
        for source in args.source:
            ds = _dataset(args, source)
            if args.shuffle_labels:
                ds = evaluation.permute_labels(ds, args.seed + 1)
            for m in args.measurement:
                r = evaluation.cross_validate(
                    ds,
                    m,
                    source,
                    n_select=args.n_select,
                    hyperparams=hp,
                    seed=args.seed,
                    n_perm=args.n_perm,
                    fold_averaged=args.fold_averaged,
                    clip_predictions=args.clip_predictions,
                    map_fn=map_fn,
                )
                print(f"{m:6s} {source:13s} CCC {r.ccc:+.3f}{r.stars:2s} r {r.pearson:+.3f} p {r.p_value:.2e}")
                results.append(r)
    evaluation.write_results(results, out)
    for r in results:
        if r.source == pipeline.CONCATENATED:
            report.write_scatter(r.pairs, r.measurement, out / f"scatter_{r.measurement}.svg", f"CCC {r.ccc:.3f}")
    return 0


def cmd_plot(args) -> int:
    pairs = evaluation.read_predictions(_existing_file(Path(args.predictions), "predictions file"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for (m, source), pts in sorted(pairs.items()):
        if m not in args.measurement or source not in args.source:
            continue
        suffix = "" if source == pipeline.CONCATENATED else f"_{source}"
        report.write_scatter(pts, m, out / f"scatter_{m}{suffix}.svg")
        written += 1
    print(f"wrote {written} plots")
    return 0 if written else 1


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="voicewell", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic corpus with planted trait signals")
    s.add_argument("--out", required=True)
    s.add_argument("--subjects", type=int, default=30)
    s.add_argument("--sessions", type=int, default=5)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--noise", type=float, default=0.2)
    s.set_defaults(func=cmd_synth)

    def corpus_args(sp, features=True):
        sp.add_argument("--manifest", required=True)
        if features:
            sp.add_argument("--features", required=True, help="directory holding the feature caches")

    def lexicon_args(sp):
        sp.add_argument("--lexicons", help="directory with the lexicon files (default: <manifest dir>/lexicons)")
        for key in LEXICON_FILES:
            sp.add_argument(f"--{key}-lexicon", dest=f"lex_{key}", help=f"override the {key} lexicon file")

    def filter_args(sp, default_sources):
        sp.add_argument("--measurement", type=_measurements, default=list(MEASUREMENTS), help="comma-separated")
        sp.add_argument("--source", type=_sources, default=list(default_sources), help="Q1..Q7, concatenated")

    e = sub.add_parser("extract", help="compute and cache feature vectors")
    corpus_args(e, features=False)
    lexicon_args(e)
    e.add_argument("--out", required=True)
    e.add_argument("--force", action="store_true", help="ignore up-to-date session caches")
    e.add_argument("--format", choices=("csv", "npz"), default="csv")
    e.set_defaults(func=cmd_extract)

    for name, func, help_text in (
        ("select", cmd_select, "write top-n correlation masks on all sessions"),
        ("train", cmd_train, "fit one model per measurement and source on all sessions"),
    ):
        sp = sub.add_parser(name, help=help_text)
        corpus_args(sp)
        filter_args(sp, [pipeline.CONCATENATED])
        sp.add_argument("--n-select", type=int, default=DEFAULT_N_SELECT)
        sp.add_argument("--seed", type=int, default=DEFAULT_SEED)
        sp.add_argument("--out", required=True)
        if name == "train":
            sp.add_argument("--epochs", type=int)
        sp.set_defaults(func=func)

    c = sub.add_parser("cv", help="subject-independent 5-fold cross-validation")
    corpus_args(c)
    filter_args(c, SOURCE_CHOICES)
    c.add_argument("--n-select", type=int, default=DEFAULT_N_SELECT)
    c.add_argument("--seed", type=int, default=DEFAULT_SEED)
    c.add_argument("--n-perm", type=int, default=evaluation.DEFAULT_PERMUTATIONS)
    c.add_argument("--fold-averaged", action="store_true", help="report the mean of per-fold CCCs")
    c.add_argument("--clip-predictions", action="store_true", help="clip predictions to the score range")
    c.add_argument("--shuffle-labels", action="store_true", help="null control: permute scores across sessions")
    c.add_argument("--epochs", type=int)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cv)

    pl = sub.add_parser("plot", help="density scatter SVGs from a predictions file")
    pl.add_argument("--predictions", required=True)
    filter_args(pl, [pipeline.CONCATENATED])
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "n_perm", evaluation.MIN_PERMUTATIONS) < evaluation.MIN_PERMUTATIONS:
        print(f"error: --n-perm must be at least {evaluation.MIN_PERMUTATIONS}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (VoicewellError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
