"""Command-line entry point: ``eqembed <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric divergence.
Every command writes ``run-manifest.json`` into ``--out-dir`` with the
resolved configuration and a SHA-256 of every artifact it wrote.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .dataset import (
    DataFormatError,
    InsufficientCorpus,
    PairDataset,
    SplitSpec,
    build_class_dataset,
    build_pair_dataset,
    explode_class_pairs,
    expression_stats,
    make_identity_pairs,
    read_classes,
    read_expressions,
    read_pairs,
    source_expressions,
    split_dataset,
    write_classes,
    write_expressions,
    write_pairs,
)
from .embeval import (
    AnalogyQuery,
    DegenerateCovariance,
    EmbeddingIndex,
    EmptyEvaluation,
    Entry,
    IndexFormatError,
    ZeroVector,
    distance_report,
    embedding_algebra,
    emit_scatter,
    mean_score_k,
    pca_2d,
    read_index,
    write_index,
)
from .expr.prefix import PrefixParseError, parse_text, to_text
from .neural import (
    CheckpointError,
    ModelConfig,
    NonFiniteLoss,
    Seq2Seq,
    TrainConfig,
    build_vocab,
    embed,
    evaluate_generation,
    infer,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .neural.checkpoint import atomic_write_bytes
from .rewrite.oracle import DEFAULT_ORACLE
from .rewrite.rules import parse_rules

log = logging.getLogger("eqembed")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4


class UsageError(Exception):
    pass


class Run:
    """Output directory bookkeeping for one command invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out = Path(args.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}

    def path(self, name: str) -> Path:
        return self.out / name

    def record(self, path: Path) -> Path:
        digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        self.artifacts[str(Path(path).relative_to(self.out))] = digest
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.path(name)
        atomic_write_bytes(path, text.encode("utf-8"))
        return self.record(path)

    def finish(self) -> None:
        config = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func", "config", "out_dir")}
        manifest = {
            "version": __version__,
            "command": self.args.command + (f" {self.args.eval_kind}" if self.args.command == "eval" else ""),
            "seed": self.args.seed,
            "threads": self.args.threads,
            "config": config,
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        text = json.dumps(manifest, indent=2, sort_keys=False, default=str) + "\n"
        atomic_write_bytes(self.path("run-manifest.json"), text.encode("utf-8"))


def _mean_sd(pair) -> str:
    mean, sd = pair
    return f"{mean:.2f} ± {sd:.2f}"


# --- data --------------------------------------------------------------------

def cmd_gen_sources(args, run: Run) -> int:
    exprs = source_expressions(args.count, seed=args.seed, max_ops=args.max_ops, min_ops=args.min_ops)
    write_expressions([to_text(e) for e in exprs], run.path(args.output))
    run.record(run.path(args.output))
    print(f"wrote {len(exprs)} source expressions to {run.path(args.output)}")
    return EXIT_OK


def _load_sources(args):
    if args.sources:
        return [parse_text(t) for t in read_expressions(args.sources)]
    return source_expressions(args.count, seed=args.seed, max_ops=args.max_ops)


def cmd_gen_data(args, run: Run) -> int:
    rules = parse_rules(args.rules)
    sources = _load_sources(args)
    if args.classes:
        classes = build_class_dataset(sources, rules, args.max_per_source, args.seed, args.max_ops,
                                      threads=args.threads, split=args.class_split)
        write_classes(classes, run.path("classes.txt"))
        run.record(run.path("classes.txt"))
        sizes = [len(m) for m in classes.classes.values()]
        lines = [f"classes\t{len(sizes)}", f"members\t{sum(sizes)}",
                 f"class_size\t{_mean_sd((float(np.mean(sizes)), float(np.std(sizes))))}"]
        stats = expression_stats([e for _, e in classes.members()])
        lines += [f"operators\t{_mean_sd(stats['operators'])}", f"length\t{_mean_sd(stats['length'])}"]
        run.write_text("stats.txt", "\n".join(lines) + "\n")
        print("\n".join(lines))
        return EXIT_OK

    dataset = build_pair_dataset(sources, rules, args.max_per_source, args.seed, args.max_ops, threads=args.threads)
    train_set, val, test = split_dataset(dataset, SplitSpec(args.val_size, args.test_size, args.seed))
    held_val = set(val)
    val_pairs = PairDataset([(a, b) for a, b in dataset.examples if a in held_val], {"split": "validation"})
    write_pairs(train_set, run.path("train.pairs"))
    write_pairs(val_pairs, run.path("val.pairs"))
    write_expressions(val, run.path("val.txt"))
    write_expressions(test, run.path("test.txt"))
    for name in ("train.pairs", "val.pairs", "val.txt", "test.txt"):
        run.record(run.path(name))
    lines = ["split\tcount\toperators\tlength"]
    for name, texts, count in (
        ("train", [e for pair in train_set.examples for e in pair], len(train_set)),
        ("validation", val, len(val)),
        ("test", test, len(test)),
    ):
        if texts:
            st = expression_stats(texts)
            lines.append(f"{name}\t{count}\t{_mean_sd(st['operators'])}\t{_mean_sd(st['length'])}")
        else:
            lines.append(f"{name}\t{count}\t-\t-")
    run.write_text("stats.txt", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


# --- training ----------------------------------------------------------------

def _training_pairs(args) -> tuple[list, list | None]:
    if args.classes:
        pairs = explode_class_pairs(read_classes(args.classes), args.cap, args.seed)
    elif args.pairs:
        pairs = read_pairs(args.pairs)
    else:
        raise UsageError("train needs --pairs or --classes")
    val = read_pairs(args.val_pairs) if args.val_pairs else None
    if args.mode == "structemb":
        pairs = make_identity_pairs(pairs)
        if val is not None:
            val = make_identity_pairs(val)
    if not len(pairs):
        raise DataFormatError("no training pairs")
    return pairs.examples, (val.examples if val is not None and len(val) else None)


def cmd_train(args, run: Run) -> int:
    pairs, val = _training_pairs(args)
    vocab = build_vocab(pairs + (val or []), full_alphabet=True)
    cfg = ModelConfig(
        vocab_size=len(vocab), d_model=args.d_model, n_heads=args.heads,
        n_encoder_layers=args.enc_layers, n_decoder_layers=args.dec_layers, d_ff=args.d_ff,
        dropout=args.dropout, label_smoothing=args.label_smoothing, learning_rate=args.lr, seed=args.seed,
    )
    tcfg = TrainConfig(max_steps=args.max_steps, min_steps=args.min_steps, patience=args.patience,
                       eval_every=args.eval_every, batch_tokens=args.batch_tokens, log_every=args.log_every)
    model = Seq2Seq(cfg)
    # training is single-threaded so results do not depend on --threads
    with threadpool_limits(1):
        result = train(model, vocab, pairs, tcfg, val)
    save_checkpoint(model, vocab, run.path(args.checkpoint))
    run.record(run.path(args.checkpoint))
    rows = ["step\tloss"] + [f"{i}\t{loss!r}" for i, loss in enumerate(result.losses, 1)]
    run.write_text("train-log.tsv", "\n".join(rows) + "\n")
    if result.val_losses:
        rows = ["step\tval_loss"] + [f"{s}\t{v!r}" for s, v in result.val_losses]
        run.write_text("val-log.tsv", "\n".join(rows) + "\n")
    print(f"mode={args.mode} pairs={len(pairs)} vocab={len(vocab)} steps={result.steps} "
          f"final_loss={result.losses[-1]:.4f} best_step={result.best_step} stopped_early={result.stopped_early}")
    return EXIT_OK


# --- embedding ---------------------------------------------------------------

def cmd_embed(args, run: Run) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    if args.classes:
        items = [(label, e) for label, e in read_classes(args.classes).members()]
    elif args.exprs:
        items = [(None, e) for e in read_expressions(args.exprs)]
    else:
        raise UsageError("embed needs --exprs or --classes")
    entries = []
    with threadpool_limits(args.threads):
        for i, (label, text) in enumerate(items):
            entries.append(Entry(f"e{i:06d}", text, label, embed(model, vocab, text)))
    index = EmbeddingIndex(entries)
    write_index(index, run.path(args.output))
    run.record(run.path(args.output))
    print(f"embedded {len(entries)} expressions, dim={index.dim}, into {run.path(args.output)}")
    return EXIT_OK


# --- evaluation --------------------------------------------------------------

def cmd_eval_scorek(args, run: Run) -> int:
    index = read_index(args.index)
    summary = mean_score_k(index, args.k)
    lines = [f"split\t{args.split}", f"k\t{args.k}", f"score_{args.k}\t{summary.mean:.6f}",
             f"scored\t{summary.scored}", f"skipped\t{summary.skipped}", "", "class\tmean_score"]
    lines += [f"{label}\t{value:.6f}" for label, value in summary.per_class.items()]
    run.write_text("scorek.tsv", "\n".join(lines) + "\n")
    print(f"score_{args.k} ({args.split}) = {100 * summary.mean:.2f}% over {summary.scored} queries "
          f"({summary.skipped} skipped)")
    return EXIT_OK


def _lookup(index: EmbeddingIndex, text: str, lineno: int) -> str:
    ids = index.ids_for_expr(to_text(parse_text(text)))
    if not ids:
        raise DataFormatError(f"expression {text!r} is not in the index", lineno=lineno)
    return ids[0]


def read_analogies(path, index: EmbeddingIndex) -> list[AnalogyQuery]:
    """``x1<TAB>y1<TAB>y2[<TAB>expected x2]``, all in prefix notation."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise DataFormatError("expected 3 or 4 tab-separated expressions", path, lineno)
            try:
                ids = [_lookup(index, p, lineno) for p in parts[:3]]
                expected = to_text(parse_text(parts[3])) if len(parts) == 4 else None
            except PrefixParseError as exc:
                raise DataFormatError(str(exc), path, lineno) from None
            out.append(AnalogyQuery(*ids, expected))
    return out


def cmd_eval_algebra(args, run: Run) -> int:
    index = read_index(args.index)
    queries = read_analogies(args.queries, index)
    rows = ["x1\ty1\ty2\tpredicted\tsimilarity\texpected\tcorrect"]
    correct = judged = 0
    for q in queries:
        res = embedding_algebra(index, q)
        e = index.entry
        flag = "" if res.correct is None else str(res.correct)
        rows.append(f"{e(q.x1).expr}\t{e(q.y1).expr}\t{e(q.y2).expr}\t{res.predicted_expr}\t"
                    f"{res.similarity:.6f}\t{q.expected or ''}\t{flag}")
        if res.correct is not None:
            judged += 1
            correct += res.correct
    run.write_text("algebra.tsv", "\n".join(rows) + "\n")
    print("\n".join(rows))
    if judged:
        print(f"correct {correct}/{judged}")
    return EXIT_OK


def cmd_eval_distance(args, run: Run) -> int:
    embedders = {}
    for item in args.index:
        name, sep, path = item.partition("=")
        if not sep or not name:
            raise UsageError(f"--index expects NAME=PATH, got {item!r}")
        embedders[name] = read_index(path)
    first = next(iter(embedders.values()))
    query_ids = []
    for lineno, text in enumerate(read_expressions(args.queries), 1):
        qid = _lookup(first, text, lineno)
        for name, index in embedders.items():
            if qid not in index or index.entry(qid).expr != first.entry(qid).expr:
                raise DataFormatError(f"index {name} does not hold query {text!r} under id {qid}")
        query_ids.append(qid)
    analysis = distance_report(embedders, query_ids, args.top_n, recursive=not args.top_level_only)
    neigh = ["query\tembedder\trank\tneighbour\tsimilarity"]
    top = ["query,candidate_label,raw_distance,normalized_distance"]
    for qd in analysis.queries:
        for n in qd.neighbours:
            neigh.append(f"{qd.query_expr}\t{n.embedder}\t{n.rank}\t{n.expr}\t{n.similarity:.6f}")
        top.extend(qd.top1.to_csv().splitlines()[1:])
    run.write_text("neighbours.tsv", "\n".join(neigh) + "\n")
    run.write_text("distance.csv", "\n".join(top) + "\n")
    lines = ["scenario\t" + "\t".join(list(embedders) + ["tie"])]
    for scenario, counter in (("raw", analysis.tally.raw), ("normalized", analysis.tally.normalized)):
        lines.append(scenario + "\t" + "\t".join(str(counter.get(k, 0)) for k in list(embedders) + ["tie"]))
    run.write_text("distance-tally.tsv", "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def cmd_eval_generation(args, run: Run) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    tests = read_expressions(args.test)
    rows = ["beam\taccuracy\tcount"]
    detail = ["beam\tsource\trank\tcandidate\tlogprob\toutcome"]
    with threadpool_limits(args.threads):
        for beam in args.beam:
            res = evaluate_generation(model, vocab, tests, beam, args.mode, DEFAULT_ORACLE, args.max_len)
            rows.append(f"{beam}\t{res.accuracy:.4f}\t{len(tests)}")
            for rec in res.records:
                for rank, c in enumerate(rec.candidates, 1):
                    detail.append(f"{beam}\t{rec.source}\t{rank}\t{c.text}\t{c.logprob:.6f}\t{c.outcome.value}")
    run.write_text("generation.tsv", "\n".join(rows) + "\n")
    run.write_text("generation-beams.tsv", "\n".join(detail) + "\n")
    print("\n".join(rows))
    return EXIT_OK


def cmd_eval_pca(args, run: Run) -> int:
    index = read_index(args.index)
    coords = pca_2d(index)
    labels = [e.label for e in index.entries]
    csv_path, svg_path = emit_scatter(coords, labels, run.path(args.output), title=args.title)
    run.record(csv_path)
    run.record(svg_path)
    print(f"wrote {csv_path} and {svg_path}")
    return EXIT_OK


def cmd_infer(args, run: Run) -> int:
    model, vocab = load_checkpoint(args.checkpoint)
    source = to_text(parse_text(args.expr))
    rec = infer(model, vocab, source, args.beam, args.mode, DEFAULT_ORACLE, args.max_len)
    rows = ["rank\tcandidate\tlogprob\tverdict"]
    for rank, c in enumerate(rec.candidates, 1):
        rows.append(f"{rank}\t{c.text}\t{c.logprob:.6f}\t{c.outcome.value}")
    run.write_text("infer.tsv", "\n".join(rows) + "\n")
    print("\n".join(rows))
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="global random seed (default 42)")
    common.add_argument("--threads", type=int, default=1, help="worker processes / BLAS threads for data, embedding and evaluation")
    common.add_argument("--out-dir", default=".", help="directory for artifacts and run-manifest.json")
    common.add_argument("--config", help="JSON file of option defaults; command-line flags take precedence")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="eqembed", description="Equivalent-expression datasets, seq2seq training and embedding evaluation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sources", parents=[common], help="sample random source expressions")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--max-ops", type=int, default=5)
    p.add_argument("--min-ops", type=int, default=1)
    p.add_argument("--output", default="sources.txt")
    p.set_defaults(func=cmd_gen_sources)

    p = sub.add_parser("gen-data", parents=[common], help="generate equivalent pairs and disjoint splits",
                       description="Writes train.pairs, val.pairs, val.txt, test.txt and stats.txt "
                                   "(or classes.txt with --classes).")
    p.add_argument("--sources", help="file of prefix expressions, one per line (default: sample --count)")
    p.add_argument("--count", type=int, default=1000, help="number of sampled sources when --sources is absent")
    p.add_argument("--rules", default="all", help="'all' or a comma list such as expand,rewrite_trig:cos")
    p.add_argument("--max-ops", type=int, default=5)
    p.add_argument("--max-per-source", type=int, default=8)
    p.add_argument("--val-size", type=int, default=20)
    p.add_argument("--test-size", type=int, default=50)
    p.add_argument("--classes", action="store_true", help="write equivalence classes instead of pairs")
    p.add_argument("--class-split", default="UnseenEqClass",
                   choices=["train", "validation", "SeenEqClass", "UnseenEqClass"])
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train the seq2seq model")
    p.add_argument("--pairs", help="pair file")
    p.add_argument("--classes", help="class file; ordered member pairs are used as training pairs")
    p.add_argument("--cap", type=int, default=100_000, help="maximum pairs per class with --classes")
    p.add_argument("--val-pairs", help="pair file for validation loss and early stopping")
    p.add_argument("--mode", choices=["sememb", "structemb"], default="sememb")
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--enc-layers", type=int, default=2)
    p.add_argument("--dec-layers", type=int, default=2)
    p.add_argument("--d-ff", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--label-smoothing", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--max-steps", type=int, default=2000)
    p.add_argument("--min-steps", type=int, default=0)
    p.add_argument("--patience", type=int, default=0, help="evaluations without improvement before stopping; 0 disables")
    p.add_argument("--eval-every", type=int, default=100)
    p.add_argument("--batch-tokens", type=int, default=2048)
    p.add_argument("--log-every", type=int, default=100)
    p.add_argument("--checkpoint", default="model.ckpt")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("embed", parents=[common], help="write max-pooled embeddings to an index file")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--exprs", help="file of prefix expressions")
    p.add_argument("--classes", help="class file; class ids become labels")
    p.add_argument("--output", default="index.tsv")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("eval", help="evaluate embeddings or generation")
    ev = p.add_subparsers(dest="eval_kind", required=True)

    q = ev.add_parser("scorek", parents=[common], help="mean score_k over labeled entries")
    q.add_argument("--index", required=True)
    q.add_argument("--k", type=int, default=5)
    q.add_argument("--split", default="unseen", help="name reported with the score")
    q.set_defaults(func=cmd_eval_scorek)

    q = ev.add_parser("algebra", parents=[common], help="solve x1 - y1 + y2 analogies")
    q.add_argument("--index", required=True)
    q.add_argument("--queries", required=True, help="TSV of x1, y1, y2 and optional expected x2")
    q.set_defaults(func=cmd_eval_algebra)

    q = ev.add_parser("distance", parents=[common], help="tree edit distance of nearest neighbours")
    q.add_argument("--index", action="append", required=True, metavar="NAME=PATH",
                   help="one index per embedder; all must share ids")
    q.add_argument("--queries", required=True, help="file of query expressions present in every index")
    q.add_argument("--top-n", type=int, default=5)
    q.add_argument("--top-level-only", action="store_true", help="strip constants only at the top level")
    q.set_defaults(func=cmd_eval_distance)

    q = ev.add_parser("generation", parents=[common], help="beam-search accuracy")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--test", required=True, help="file of test expressions")
    q.add_argument("--beam", type=int, nargs="+", default=[1, 10, 50])
    q.add_argument("--mode", choices=["sememb", "structemb"], default="sememb")
    q.add_argument("--max-len", type=int, default=64, help="maximum decoded tokens")
    q.set_defaults(func=cmd_eval_generation)

    q = ev.add_parser("pca", parents=[common], help="2-D PCA scatter of an index")
    q.add_argument("--index", required=True)
    q.add_argument("--output", default="pca", help="output stem; .csv and .svg are written")
    q.add_argument("--title")
    q.set_defaults(func=cmd_eval_pca)

    p = sub.add_parser("infer", parents=[common], help="decode equivalents of one expression")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--expr", required=True, help="prefix expression, e.g. 'div sin x cos x'")
    p.add_argument("--beam", type=int, default=5)
    p.add_argument("--mode", choices=["sememb", "structemb"], default="sememb")
    p.add_argument("--max-len", type=int, default=64)
    p.set_defaults(func=cmd_infer)
    return parser


def _subparser_for(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.ArgumentParser:
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    node = parser
    for token in argv:
        if token in action.choices:
            node = action.choices[token]
            nested = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
            if not nested:
                return node
            action = nested[0]
    return node


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read --config: {exc}")
        if not isinstance(overrides, dict):
            parser.error("--config must hold a JSON object")
        target = _subparser_for(parser, argv)
        known = {a.dest for a in target._actions}
        unknown = sorted(set(overrides) - known)
        if unknown:
            parser.error(f"unknown keys in --config: {', '.join(unknown)}")
        # config values become defaults, so explicit flags still win
        target.set_defaults(**{k.replace("-", "_"): v for k, v in overrides.items()})
        args = parser.parse_args(argv)
    return args


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    run = Run(args)
    try:
        code = args.func(args, run)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLoss as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataFormatError, PrefixParseError, InsufficientCorpus, CheckpointError, IndexFormatError,
            EmptyEvaluation, ZeroVector, DegenerateCovariance, KeyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    run.finish()
    return code


if __name__ == "__main__":
    sys.exit(main())
