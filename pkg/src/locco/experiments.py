"""Ablation matrix and multi-seed method comparison.

Every method of one seed shares the same warm-up: it is computed once and
copied into each method's artifact directory before the iterations run.
"""

from __future__ import annotations

import shutil
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .training import Corpus, IterationConfig, evaluate_parser, iteration_dir, load_warmup, run

# method -> overrides of the run config (None: the warm-up parser itself)
METHODS = {
    "full": {"reward_mode": "full"},
    "cc_only": {"reward_mode": "cc_only"},
    "prior_only": {"reward_mode": "prior_only"},
    "greedy_sl": {"reward_mode": "unit", "sampler": "greedy"},
    "sampling_sl": {"reward_mode": "unit", "sampler": "sample"},
    "gold_only": None,
}
LABELS = {
    "full": "LOCCO",
    "cc_only": "log p(x|z) only",
    "prior_only": "log p(z) only",
    "greedy_sl": "Greedy SL",
    "sampling_sl": "Sampling SL",
    "gold_only": "Gold only",
}


@dataclass
class MethodResult:
    method: str
    seed: int
    split: str
    metrics: dict
    history: list
    seconds: float

    def row(self) -> dict:
        return {"method": self.method, "seed": self.seed, "split": self.split, **self.metrics}


def run_methods(corpus: Corpus, config: IterationConfig, root: str | Path,
                methods: Sequence[str] = tuple(METHODS), resume: bool = True) -> list[MethodResult]:
    """Run each method at ``config.seed`` under ``root/<method>``."""
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; expected some of {list(METHODS)}")
    root = Path(root)
    split, pairs = ("test", corpus.test) if corpus.test else ("validation", corpus.validation)
    shared = root / "warmup-shared"
    t0 = time.perf_counter()
    warm = run(corpus, config, shared, resume=resume, stop_after=0)
    warm_seconds = time.perf_counter() - t0
    results = []
    for method in methods:
        overrides = METHODS[method]
        if overrides is None:
            parser = load_warmup(shared)[1]
            results.append(MethodResult(method, config.seed, split, evaluate_parser(parser, pairs),
                                        warm.history, warm_seconds))
            continue
        mdir = root / method
        if not (resume and (iteration_dir(mdir, 0) / "COMPLETE").exists()):
            shutil.rmtree(iteration_dir(mdir, 0), ignore_errors=True)
            shutil.copytree(iteration_dir(shared, 0), iteration_dir(mdir, 0))
        t0 = time.perf_counter()
        res = run(corpus, replace(config, **overrides), mdir, resume=resume)
        results.append(MethodResult(method, config.seed, split, evaluate_parser(res.parser, pairs),
                                    res.history, time.perf_counter() - t0))
    return results


def compare(corpus_for_seed, config_for_seed, seeds: Sequence[int], root: str | Path,
            methods: Sequence[str] = ("full", "sampling_sl", "gold_only"),
            resume: bool = True) -> list[MethodResult]:
    """``run_methods`` over several seeds; the corpus and config may depend on the seed."""
    out = []
    for seed in seeds:
        out += run_methods(corpus_for_seed(seed), config_for_seed(seed), Path(root) / f"seed-{seed}",
                           methods, resume)
    return out


def summarize(results: Sequence[MethodResult], metric: str = "exact_match") -> dict[str, dict]:
    """Per-method mean and per-seed values of ``metric``."""
    table: dict[str, dict] = {}
    for r in results:
        entry = table.setdefault(r.method, {"values": {}, "seconds": 0.0})
        entry["values"][r.seed] = r.metrics.get(metric, float("nan"))
        entry["seconds"] += r.seconds
    for entry in table.values():
        entry["mean"] = float(np.mean(list(entry["values"].values())))
    return table


def paired_gap(results: Sequence[MethodResult], better: str, worse: str,
               metric: str = "exact_match") -> tuple[float, list[float]]:
    """Mean and per-seed differences ``better - worse`` over the seeds both ran."""
    table = summarize(results, metric)
    a, b = table[better]["values"], table[worse]["values"]
    diffs = [a[s] - b[s] for s in sorted(set(a) & set(b))]
    return (float(np.mean(diffs)) if diffs else float("nan")), diffs


def format_table(results: Sequence[MethodResult], metrics: Sequence[str] = ("exact_match", "f1"),
                 order: Optional[Sequence[str]] = None) -> str:
    """Tab-separated method x metric table of means over seeds."""
    tables = {m: summarize(results, m) for m in metrics}
    methods = [m for m in (order or METHODS) if m in tables[metrics[0]]]
    lines = ["\t".join(["method", "label", "seeds", *metrics])]
    for method in methods:
        n = len(tables[metrics[0]][method]["values"])
        cells = [f"{tables[m][method]['mean']:.4f}" for m in metrics]
        lines.append("\t".join([method, LABELS[method], str(n), *cells]))
    return "\n".join(lines) + "\n"
