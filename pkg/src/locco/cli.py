"""Command-line entry point.

    locco gen-toy CONFIG
    locco warmup CONFIG
    locco iterate CONFIG --i 2
    locco run CONFIG
    locco eval CONFIG --checkpoint PATH --split test
    locco train-generator CONFIG
    locco ablate CONFIG --seeds 0,1,2

Exit codes: 0 success, 1 configuration error, 2 missing artifact, 3 runtime failure.
Metric lines on stdout are comma-delimited: ``iteration,split,metric,value``.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from dataclasses import replace
from pathlib import Path

from .data import ConfigInvalid, DataFormatError, MissingArtifact, RunConfig, format_config, load_config
from .logical_forms import LogicalFormError
from .metrics import format_metric_line
from .models import ModelError, Seq2SeqModel
from .prior import PriorError
from .store import StorageFailure, UnknownIteration
from .toy import DomainSpec, ToyWorld, VocabularyTooSmall, generate
from .training import (
    Corpus, MissingIteration, TrainingError, evaluate_parser, generator_exact_match, is_complete, iteration_dir,
    load_iteration, load_warmup, run, run_iteration, run_warmup, train_generator_from_annotations,
)

log = logging.getLogger("locco")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME = 0, 1, 2, 3


class ArtifactExists(ConfigInvalid):
    pass


def _emit(iteration, split: str, metrics: dict, out=None) -> None:
    out = out or sys.stdout
    for name, value in metrics.items():
        if isinstance(value, (int, float)):
            print(format_metric_line(iteration, split, name, float(value)), file=out)


def _guard(path: Path, overwrite: bool) -> None:
    """Refuse to replace finished outputs unless asked to."""
    if path.exists() and (not path.is_dir() or any(path.iterdir())):
        if not overwrite:
            raise ArtifactExists(f"{path} already exists; pass --overwrite to replace it")
        if path.is_dir():
            shutil.rmtree(path)
        else:
            path.unlink()


def _toy_world(cfg: RunConfig) -> ToyWorld:
    return ToyWorld(_domain_spec(cfg))


def _domain_spec(cfg: RunConfig) -> DomainSpec:
    return DomainSpec(cfg.toy_entities, cfg.toy_relations, cfg.toy_facts, cfg.toy_min_triples,
                      cfg.toy_max_triples, 3, cfg.toy_noise, cfg.iteration.seed)


# -- commands -------------------------------------------------------------------

def cmd_gen_toy(cfg: RunConfig, args) -> int:
    out = Path(args.out) if args.out else cfg.data_dir
    if out is None:
        raise ConfigInvalid("gen-toy needs data_dir in the config or --out")
    if cfg.domain != "triples":
        raise ConfigInvalid("the synthetic domain produces triple sets; set domain = triples")
    for name in ("train.tsv", "unlabeled.txt", "valid.tsv", "test.tsv"):
        _guard(out / name, args.overwrite)
    corpus = generate(_domain_spec(cfg), cfg.n_supervised, cfg.n_unlabeled, cfg.n_val, cfg.n_test)
    for split, path in corpus.write(out).items():
        print(f"{split}\t{path}")
    return EXIT_OK


def cmd_warmup(cfg: RunConfig, args) -> int:
    root = cfg.artifact_dir
    _guard(iteration_dir(root, 0), args.overwrite)
    corpus = cfg.load_corpus(need_unlabeled=False)
    root.mkdir(parents=True, exist_ok=True)
    (root / "run.cfg").write_text(format_config(cfg), encoding="utf-8")
    _, parser, _, _ = run_warmup(corpus, cfg.iteration, root)
    _emit(0, "validation", evaluate_parser(parser, corpus.validation))
    return EXIT_OK


def cmd_iterate(cfg: RunConfig, args) -> int:
    root, i = cfg.artifact_dir, args.i
    if i < 1:
        raise ConfigInvalid("--i counts semi-supervised iterations from 1")
    if not is_complete(iteration_dir(root, i - 1)):
        raise MissingArtifact(f"iteration {i} needs {iteration_dir(root, i - 1)} (run the earlier stage first)")
    _guard(iteration_dir(root, i), args.overwrite)
    corpus = cfg.load_corpus()
    parser, _ = run_iteration(corpus, cfg.iteration, root, i)
    _emit(i, "validation", evaluate_parser(parser, corpus.validation))
    return EXIT_OK


def cmd_run(cfg: RunConfig, args) -> int:
    root = cfg.artifact_dir
    if not args.resume:
        for i in range(cfg.iteration.K + 1):
            _guard(iteration_dir(root, i), args.overwrite)
    corpus = cfg.load_corpus()
    root.mkdir(parents=True, exist_ok=True)
    (root / "run.cfg").write_text(format_config(cfg), encoding="utf-8")
    result = run(corpus, cfg.iteration, root, resume=args.resume)
    for row in result.history:
        _emit(row["iteration"], "validation", {k: v for k, v in row.items() if k != "iteration"})
    if corpus.test:
        _emit(cfg.iteration.K, "test", evaluate_parser(result.parser, corpus.test))
    (root / "history.json").write_text(json.dumps(result.history, indent=1), encoding="utf-8")
    if args.report:
        from .plots import iteration_curves
        path = iteration_curves({cfg.iteration.reward_mode: result.history}, root / "iterations.png")
        print(f"figure\t{path}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    ckpt = Path(args.checkpoint) if args.checkpoint else iteration_dir(cfg.artifact_dir, cfg.iteration.K) / "parser.ckpt"
    if not ckpt.exists():
        raise MissingArtifact(f"missing checkpoint: {ckpt}")
    corpus = cfg.load_corpus(need_unlabeled=False)
    pairs = {"validation": corpus.validation, "test": corpus.test, "train": corpus.supervised}[args.split]
    if not pairs:
        raise ConfigInvalid(f"no {args.split} split configured")
    parser = Seq2SeqModel.load(ckpt)
    _emit(int(parser.tags.get("version", -1)), args.split, evaluate_parser(parser, pairs))
    return EXIT_OK


def cmd_train_generator(cfg: RunConfig, args) -> int:
    root = cfg.artifact_dir
    K = cfg.iteration.K
    out = root / "generator-flip"
    _guard(out, args.overwrite)
    omega, _, scorer, _ = load_warmup(root)
    parser, prior = load_iteration(root, K)
    corpus = cfg.load_corpus()
    rows: list[dict] = []
    generator = train_generator_from_annotations(parser, omega, scorer, prior, corpus, cfg.iteration,
                                                 out / "store", rows)
    generator.save(out / "generator.ckpt")
    (out / "metrics.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    pairs = corpus.test or corpus.validation
    split = "test" if corpus.test else "validation"
    accept = None
    if args.toy:
        world = _toy_world(cfg)
        accept = world.is_realization
    _emit(K + 1, split, {"text_exact_match": generator_exact_match(generator, pairs, accept)})
    return EXIT_OK


def cmd_ablate(cfg: RunConfig, args) -> int:
    from .experiments import METHODS, compare, format_table, summarize
    from .plots import ablation_bars, iteration_curves

    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.iteration.seed]
    methods = args.methods.split(",") if args.methods else list(METHODS)
    if any(m not in METHODS for m in methods):
        raise ConfigInvalid(f"--methods must be drawn from {list(METHODS)}")
    root = cfg.artifact_dir / "ablation"
    if not args.resume:
        _guard(root, args.overwrite)
    base = None if args.toy else cfg.load_corpus()

    def corpus_for(seed):
        if base is not None:
            return base
        spec = replace(_domain_spec(cfg), seed=seed)
        toy = generate(spec, cfg.n_supervised, cfg.n_unlabeled, cfg.n_val, cfg.n_test)
        return Corpus(toy.supervised, toy.unlabeled, toy.validation, toy.test, "triples")

    results = compare(corpus_for, lambda seed: replace(cfg.iteration, seed=seed), seeds, root, methods,
                      resume=args.resume)
    table = format_table(results, order=methods)
    root.mkdir(parents=True, exist_ok=True)
    (root / "table.tsv").write_text(table, encoding="utf-8")
    for r in results:
        print(",".join([r.method, str(r.seed), r.split] + [f"{r.metrics.get(k, float('nan'))!r}"
                                                          for k in ("exact_match", "f1")]))
    print(table, end="")
    bars = ablation_bars(results, root / "ablation.png")
    first = [r for r in results if r.seed == seeds[0] and r.method != "gold_only"]
    curves = iteration_curves({r.method: r.history for r in first}, root / "iterations.png")
    print(f"figure\t{bars}\nfigure\t{curves}")
    summary = summarize(results)
    (root / "summary.json").write_text(json.dumps(summary, indent=1, default=str), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "gen-toy": cmd_gen_toy, "warmup": cmd_warmup, "iterate": cmd_iterate, "run": cmd_run,
    "eval": cmd_eval, "train-generator": cmd_train_generator, "ablate": cmd_ablate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locco", description="Semi-supervised semantic parsing with a logic prior.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("config", help="flat key = value configuration file")
        sp.add_argument("--overwrite", action="store_true", help="replace existing outputs")
        return sp

    sp = command("gen-toy", "write the synthetic corpus files")
    sp.add_argument("--out", help="output directory (default: data_dir)")
    command("warmup", "supervised warm-up of parser and generator")
    sp = command("iterate", "one annotate / update / prior round")
    sp.add_argument("--i", type=int, required=True, help="iteration number, from 1")
    for name, help_text in (("run", "warm-up then K iterations"), ("ablate", "method matrix over seeds")):
        sp = command(name, help_text)
        sp.add_argument("--resume", action="store_true", help="reuse completed stages")
        if name == "run":
            sp.add_argument("--report", action="store_true", help="also write the iteration figure")
        else:
            sp.add_argument("--seeds", help="comma-separated seeds (default: the config seed)")
            sp.add_argument("--methods", help="comma-separated subset of the method matrix")
            sp.add_argument("--toy", action="store_true", help="regenerate the synthetic corpus per seed")
    sp = command("eval", "score a parser checkpoint")
    sp.add_argument("--checkpoint", help="default: the final iteration's parser")
    sp.add_argument("--split", choices=("validation", "test", "train"), default="test")
    sp = command("train-generator", "fresh generator from flipped annotations")
    sp.add_argument("--toy", action="store_true", help="accept any template realization as exact")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except (MissingArtifact, MissingIteration, UnknownIteration) as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigInvalid, DataFormatError, VocabularyTooSmall) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, StorageFailure, PriorError, LogicalFormError, ModelError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
