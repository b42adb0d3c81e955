"""Command-line interface.

Subcommands: prepare (corpus pipeline), probe (stimuli + scoring), audit
(full battery), prune (mention detection and pruning), icc (reliability),
report (re-render a saved report). Exit codes: 0 success, 1 validation or
usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .audit import (build_scorer, load_annotations_csv, load_audit_config,
                    probe_scorer, run_audit)
from .corpus import (clean_corpus, filter_language, load_corpus, split_corpus,
                     write_corpus)
from .errors import BiasAuditError, ValidationError
from .lexicon import (emotional_weight, load_lexicon, score_text_vad,
                      weighted_sample, write_sample_manifest)
from .pruning import (MatcherConfig, auto_confirm, detect_mentions, export_review,
                      import_review, mention_stats, prune)
from .report import write_report_files
from .scorer import write_score_table
from .stats import icc1
from .stimuli import default_entities_path, load_entities, load_templates


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biasaudit",
                     description="Bias audit toolkit for text valence scorers")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("prepare", help="clean, split, and optionally sample a corpus")
    p.add_argument("--input", required=True, help="corpus CSV or JSONL")
    p.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p.add_argument("--output", required=True, help="output corpus CSV")
    p.add_argument("--max-len", type=int, default=280)
    p.add_argument("--filter-regex",
                   help="keep only snippets whose cleaned text matches this regex "
                        "(language filtering is a library-level predicate hook)")
    p.add_argument("--lexicon", help="affective lexicon CSV for sampling weights")
    p.add_argument("--n-weighted", type=int, default=0)
    p.add_argument("--n-unweighted", type=int, default=0)
    p.add_argument("--top-k", action="store_true",
                   help="deterministic top-k by weight instead of weighted sampling")
    p.add_argument("--seed", type=int, help="required when sampling")
    p.add_argument("--manifest", help="sample manifest CSV (id,weight,stage)")

    p = sub.add_parser("probe", help="score the stimulus matrix with one scorer")
    p.add_argument("--config", required=True, help="TOML config with a [scorers.*] table")
    p.add_argument("--scorer", default="original", choices=["original", "modified"])
    p.add_argument("--entities", help="entities CSV (default: shipped dataset)")
    p.add_argument("--templates", help="templates CSV (default: shipped dataset)")
    p.add_argument("--output", required=True, help="score table CSV")

    p = sub.add_parser("audit", help="run the full audit battery")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--outdir", help="override the config output directory")
    p.add_argument("--n-perm", type=int, help="override permutation count")

    p = sub.add_parser("prune", help="detect entity mentions and prune a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=["csv", "jsonl"], default=None)
    p.add_argument("--entities", help="entities CSV (default: shipped dataset)")
    p.add_argument("--suffix-trim", type=int, default=0)
    p.add_argument("--exact", action="store_true", help="exact token match")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--auto-confirm", action="store_true",
                       help="confirm every candidate (headless)")
    group.add_argument("--review-out", help="export candidates for review and stop")
    group.add_argument("--review-in", help="import a reviewed CSV")
    p.add_argument("--output", help="pruned corpus CSV")
    p.add_argument("--stats", help="mention statistics JSON")

    p = sub.add_parser("icc", help="ICC(1) from an annotations CSV")
    p.add_argument("--annotations", required=True, help="CSV text_id,rater_id,valence")
    p.add_argument("--output", help="write {'icc1': value} JSON here")

    p = sub.add_parser("report", help="re-render tables and figures from report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--outdir", required=True)

    return parser


def _cmd_prepare(args) -> int:
    corpus = load_corpus(args.input, args.format)
    corpus = clean_corpus(corpus)
    corpus = split_corpus(corpus, max_len=args.max_len)
    if args.filter_regex:
        try:
            pattern = re.compile(args.filter_regex)
        except re.error as exc:
            raise ValidationError(f"bad --filter-regex: {exc}") from exc
        corpus = filter_language(corpus, lambda text: pattern.search(text) is not None)
    sampling = args.n_weighted > 0 or args.n_unweighted > 0
    if sampling:
        if args.seed is None:
            raise ValidationError("--seed is required when sampling")
        if not args.lexicon:
            raise ValidationError("--lexicon is required when sampling")
        lexicon = load_lexicon(args.lexicon)
        weights = [emotional_weight(score_text_vad(s.clean_text, lexicon)) for s in corpus]
        weights_by_id = {s.id: w for s, w in zip(corpus, weights)}
        corpus = weighted_sample(corpus, weights, args.n_weighted, args.n_unweighted,
                                 seed=args.seed, top_k=args.top_k)
        if args.manifest:
            write_sample_manifest(corpus, weights_by_id, args.manifest)
    write_corpus(corpus, args.output)
    print(f"wrote {len(corpus)} snippets to {args.output}")
    return 0


def _cmd_probe(args) -> int:
    config = load_audit_config(args.config, seed=0)
    if args.scorer not in config.scorers:
        raise ValidationError(f"config has no [scorers.{args.scorer}] table")
    entities = load_entities(args.entities or config.entities_path, parties=config.parties)
    templates = load_templates(args.templates or config.templates_path)
    scorer = build_scorer(config.scorers[args.scorer])
    table = probe_scorer(entities, templates, scorer)
    write_score_table(table, args.output)
    print(f"wrote {len(table.rows)} scores to {args.output}")
    return 0


def _cmd_audit(args) -> int:
    config = load_audit_config(args.config, seed=args.seed, outdir=args.outdir,
                               n_perm=args.n_perm)
    report = run_audit(config)
    write_report_files(report.to_dict(), config.outdir)
    print(f"audit complete: {config.outdir / 'report.json'}")
    return 0


def _cmd_prune(args) -> int:
    corpus = load_corpus(args.corpus, args.format)
    entities = load_entities(args.entities or default_entities_path())
    matcher = MatcherConfig(suffix_trim=args.suffix_trim, exact=args.exact)
    index = detect_mentions(corpus, entities, matcher)
    if args.review_out:
        export_review(index, corpus, args.review_out)
        print(f"wrote review CSV to {args.review_out}; re-run with --review-in")
        return 0
    if args.review_in:
        index = import_review(index, args.review_in)
    elif args.auto_confirm:
        index = auto_confirm(index)
    else:
        raise ValidationError("choose one of --auto-confirm, --review-out, --review-in")
    stats = mention_stats(index)
    if args.stats:
        Path(args.stats).write_text(
            json.dumps(stats.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if args.output:
        pruned = prune(corpus, index)
        write_corpus(pruned, args.output)
        print(f"pruned {len(corpus) - len(pruned)} of {len(corpus)} snippets "
              f"-> {args.output}")
    else:
        print(f"confirmed mentions: {stats.total} snippets")
    return 0


def _cmd_icc(args) -> int:
    ratings = load_annotations_csv(args.annotations)
    value = icc1(ratings)
    print(f"ICC(1) = {value:.4f}")
    if args.output:
        Path(args.output).write_text(json.dumps({"icc1": value}, indent=2) + "\n",
                                     encoding="utf-8")
    return 0


def _cmd_report(args) -> int:
    path = Path(args.report)
    if not path.exists():
        raise ValidationError(f"report file not found: {path}")
    report_dict = json.loads(path.read_text(encoding="utf-8"))
    write_report_files(report_dict, args.outdir)
    print(f"rendered report into {args.outdir}")
    return 0


_HANDLERS = {
    "prepare": _cmd_prepare,
    "probe": _cmd_probe,
    "audit": _cmd_audit,
    "prune": _cmd_prune,
    "icc": _cmd_icc,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BiasAuditError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"unexpected error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
