"""Command-line surface: generate, train, eval, rerank, report.

Every command materializes its full configuration, hashes its inputs,
and writes a manifest.json next to its outputs, so any run can be
audited and replayed. All state flows through flags; identical flags
over identical inputs produce bitwise-identical outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from dataclasses import asdict
from pathlib import Path

from . import __version__, kernels, metrics
from .corpus import SyntheticConfig, generate_synthetic, load_corpus, load_queries, save_corpus, save_queries
from .errors import ConfigError, DdsiError
from .mmr import MmrConfig, retrieve_then_rerank
from .model import load_checkpoint, save_checkpoint
from .train import TrainConfig, train, write_history


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(out_dir: Path, command: str, config: dict, seed: int | None, inputs: list[Path], outputs: list[Path]) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "backend": kernels.active_backend(),
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    _atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(arg: str) -> Path:
    path = Path(arg)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_generate(args) -> int:
    cfg = SyntheticConfig(
        num_topics=args.topics,
        docs_per_topic=args.docs_per_topic,
        vocab_per_topic=args.vocab_per_topic,
        shared_vocab=args.shared_vocab,
        doc_len=args.doc_len,
        queries_per_doc=args.queries_per_doc,
        query_len=args.query_len,
        near_duplicate_fraction=args.near_dup,
        seed=args.seed,
    )
    cfg.validate()
    corpus, train_q, test_q = generate_synthetic(cfg)
    out = _out_dir(args.out)
    corpus_path, train_path, test_path = out / "corpus.jsonl", out / "train.tsv", out / "test.tsv"
    save_corpus(corpus, corpus_path)
    save_queries(train_q, train_path)
    save_queries(test_q, test_path)
    _write_manifest(out, "generate", asdict(cfg), cfg.seed, [], [corpus_path, train_path, test_path])
    print(f"wrote {corpus.num_docs} docs, {len(train_q)} train / {len(test_q)} test queries to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = TrainConfig(
        alpha=args.alpha,
        k=args.k,
        lr=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        optimizer=args.optimizer,
    )
    cfg.validate()
    corpus = load_corpus(args.corpus)
    queries = load_queries(args.queries, corpus)
    params, history = train(corpus, queries, cfg)
    out = _out_dir(args.out)
    ckpt_path, hist_path = out / "checkpoint.bin", out / "history.tsv"
    save_checkpoint(params, ckpt_path)
    write_history(history, hist_path)
    _write_manifest(out, "train", asdict(cfg), cfg.seed, [Path(args.corpus), Path(args.queries)], [ckpt_path, hist_path])
    final = history[-1]
    print(f"trained {cfg.epochs} epochs: ce={final.ce:.4f} diversity={final.diversity:.4f} train_hits1={final.train_hits1:.4f}")
    return 0


def cmd_eval(args) -> int:
    corpus = load_corpus(args.corpus)
    queries = load_queries(args.queries, corpus)
    params = load_checkpoint(args.checkpoint)
    run = metrics.run_queries(params, queries, args.cutoff)
    run.corpus = corpus
    report = metrics.report_from_run(run, corpus)
    dataset = args.dataset if args.dataset else Path(args.corpus).stem
    out = _out_dir(args.out)
    report_path, table_path, run_path = out / "report.tsv", out / "report.txt", out / "run.tsv"
    metrics.write_report_tsv(report, report_path, dataset=dataset, alpha=args.alpha)
    table = metrics.format_report_table(metrics.read_report_tsv(report_path))
    _atomic_write_text(table_path, table)
    metrics.write_run(run, run_path)
    config = {"cutoff": args.cutoff, "alpha": args.alpha, "dataset": dataset}
    _write_manifest(out, "eval", config, None, [Path(args.checkpoint), Path(args.corpus), Path(args.queries)], [report_path, table_path, run_path])
    print(table, end="")
    return 0


def cmd_rerank(args) -> int:
    cfg = MmrConfig(lambda_=args.lambda_, m=args.m, pool=args.pool)
    cfg.validate()
    corpus = load_corpus(args.corpus)
    queries = load_queries(args.queries, corpus)
    params = load_checkpoint(args.checkpoint)
    rankings = [retrieve_then_rerank(params, q.tokens, cfg, qid=q.qid) for q in queries]
    run = metrics.EvalRun(rankings=rankings, golds=[q.gold_docid for q in queries], corpus=corpus)
    out = _out_dir(args.out)
    run_path = out / "run.tsv"
    metrics.write_run(run, run_path)
    config = {"lambda": cfg.lambda_, "m": cfg.m, "pool": cfg.pool}
    _write_manifest(out, "rerank", config, None, [Path(args.checkpoint), Path(args.corpus), Path(args.queries)], [run_path])
    print(f"reranked {len(rankings)} queries into {run_path}")
    return 0


def cmd_report(args) -> int:
    rows = []
    for path in args.reports:
        rows.extend(metrics.read_report_tsv(path))
    table = metrics.format_report_table(rows)
    if args.out:
        ordered = sorted(rows, key=lambda r: (r["dataset"], -(r["alpha"] if r["alpha"] is not None else float("-inf"))))
        lines = ["\t".join(metrics.REPORT_COLUMNS)]
        for r in ordered:
            lines.append(
                "\t".join(
                    ("NA" if r[c] is None else (str(r[c]) if c in ("dataset", "num_queries") else f"{r[c]:.17g}"))
                    for c in metrics.REPORT_COLUMNS
                )
            )
        _atomic_write_text(Path(args.out), "\n".join(lines) + "\n")
    print(table, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddsi", description="Train and evaluate a diversity-aware docid classifier.")
    parser.add_argument("--version", action="version", version=f"ddsi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen_defaults = SyntheticConfig()
    p = sub.add_parser("generate", help="synthesize a clustered corpus with queries")
    p.add_argument("--topics", type=int, default=gen_defaults.num_topics)
    p.add_argument("--docs-per-topic", type=int, default=gen_defaults.docs_per_topic)
    p.add_argument("--vocab-per-topic", type=int, default=gen_defaults.vocab_per_topic)
    p.add_argument("--shared-vocab", type=int, default=gen_defaults.shared_vocab)
    p.add_argument("--doc-len", type=int, default=gen_defaults.doc_len)
    p.add_argument("--queries-per-doc", type=int, default=gen_defaults.queries_per_doc)
    p.add_argument("--query-len", type=int, default=gen_defaults.query_len)
    p.add_argument("--near-dup", type=float, default=gen_defaults.near_duplicate_fraction)
    p.add_argument("--seed", type=int, default=gen_defaults.seed)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    train_defaults = TrainConfig()
    p = sub.add_parser("train", help="train a checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--alpha", type=float, default=train_defaults.alpha)
    p.add_argument("--k", type=int, default=train_defaults.k)
    p.add_argument("--lr", type=float, default=train_defaults.lr)
    p.add_argument("--epochs", type=int, default=train_defaults.epochs)
    p.add_argument("--batch-size", type=int, default=train_defaults.batch_size)
    p.add_argument("--seed", type=int, default=train_defaults.seed)
    p.add_argument("--optimizer", choices=("sgd", "adam"), default=train_defaults.optimizer)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--cutoff", type=int, default=10)
    p.add_argument("--alpha", type=float, default=None, help="label recorded in the report")
    p.add_argument("--dataset", default="", help="label recorded in the report (default: corpus stem)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rerank", help="MMR-rerank model retrievals")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.5)
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--pool", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rerank)

    p = sub.add_parser("report", help="merge eval reports into one table")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out", default=None, help="also write the merged rows as TSV")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"ddsi {args.command}: invalid configuration: {e}", file=sys.stderr)
        return 2
    except (DdsiError, OSError) as e:
        print(f"ddsi {args.command}: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
