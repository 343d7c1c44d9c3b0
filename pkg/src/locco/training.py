"""The LOCCO training loop.

warm-up on gold pairs, then K rounds of

1. offline annotation: sample N structures per unlabeled text with the
   previous parser, score each with the frozen generator and the previous
   prior, persist to the annotation store, accumulate fresh part counts;
2. parser update from the store alone (group-normalized, clipped weights);
3. prior update from the fresh counts.
"""

from __future__ import annotations

import json
import logging
import math
import random
import shutil
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .logical_forms import LogicalForm, linearize, parse_form
from .metrics import exact_match_accuracy, triple_f1
from .models import DENOISER, GENERATOR, PARSER, UNK, Architecture, Seq2SeqModel, Vocabulary, build_omega
from .prior import PriorTable, prior_from_forms
from .reward import RewardConfig, clipped_weight, gradient_weight, importance_ratio, normalize, raw_value
from .store import AnnotationRecord, AnnotationStore

log = logging.getLogger(__name__)

# seed-derivation phase codes
_WARMUP, _ANNOTATE, _UPDATE, _GEN, _PRETRAIN = 1, 2, 3, 4, 5


class TrainingError(RuntimeError):
    pass


class EmptySupervisedSet(TrainingError):
    pass


class MissingIteration(TrainingError):
    pass


@dataclass
class IterationConfig:
    K: int = 3
    N: int = 5
    tau: float = 1.0
    epsilon: float = 0.2
    sigma_floor: float = 1e-8
    lr: float = 5e-6
    batch_size: int = 8
    temperature: float = 1.0
    top_p: float = 0.95
    reward_mode: str = "full"
    epochs_per_iteration: int = 1
    patience: int = 5
    seed: int = 0
    optimizer: str = "adam"
    warmup_epochs: int = 100
    warmup_lr: Optional[float] = None
    eval_every_steps: Optional[int] = None
    sampler: str = "sample"
    carry_counts: bool = False
    drop_malformed: bool = False
    corpus_normalization: bool = False
    gold_oversample: int = 1
    workers: int = 1
    max_len: int = 128
    embed_size: int = 32
    hidden_size: int = 64
    pretrain_epochs: int = 0
    pretrain_mask: float = 0.15
    pretrain_lr: float = 3e-3
    pretrain_batch_size: int = 32
    surrogate: str = "masked"
    generator_epochs: Optional[int] = None
    generator_lr: Optional[float] = None
    generator_reward_mode: Optional[str] = None

    def __post_init__(self):
        if self.K < 1 or self.N < 1 or self.batch_size < 1:
            raise ValueError("K, N and batch_size must all be >= 1")
        if self.sampler not in ("sample", "greedy"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.workers < 1 or self.gold_oversample < 1:
            raise ValueError("workers and gold_oversample must be >= 1")
        self.reward  # validates epsilon / floor / mode
        if self.generator_reward_mode is not None:
            replace(self, generator_reward_mode=None, reward_mode=self.generator_reward_mode)

    @property
    def reward(self) -> RewardConfig:
        return RewardConfig(self.epsilon, self.sigma_floor, self.reward_mode, surrogate=self.surrogate)

    @property
    def arch(self) -> Architecture:
        return Architecture(self.embed_size, self.hidden_size, self.hidden_size, self.max_len)

    @property
    def samples_per_input(self) -> int:
        return 1 if self.sampler == "greedy" else self.N

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class Corpus:
    supervised: list[tuple[str, LogicalForm]]
    unlabeled: list[str]
    validation: list[tuple[str, LogicalForm]] = field(default_factory=list)
    test: list[tuple[str, LogicalForm]] = field(default_factory=list)
    kind: str = "triples"

    def __post_init__(self):
        # duplicate texts would collide in the (x, sample_index) grouping of the store
        self.unlabeled = list(dict.fromkeys(self.unlabeled))

    def vocabulary(self) -> Vocabulary:
        texts = []
        for x, z in self.supervised + self.validation:
            texts += [x, linearize(z)]
        return Vocabulary.from_texts(texts + self.unlabeled)


def derive_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def flip(pairs: Sequence[tuple]) -> list[tuple]:
    return [(b, a) + tuple(rest) for a, b, *rest in pairs]


# -- evaluation -------------------------------------------------------------

def predict(parser: Seq2SeqModel, texts: Sequence[str]) -> list[Optional[LogicalForm]]:
    return [r.form if not r.malformed else None for r in parser.greedy_batch(list(texts))]


def evaluate_parser(parser: Seq2SeqModel, pairs: Sequence[tuple[str, LogicalForm]]) -> dict:
    if not pairs:
        return {}
    preds = predict(parser, [x for x, _ in pairs])
    golds = [z for _, z in pairs]
    out = {"exact_match": exact_match_accuracy(preds, golds)}
    if parser.output_kind == "triples":
        report = triple_f1(preds, golds)
        out.update(f1=report.f1, precision=report.precision, recall=report.recall)
    out["loglik"] = float(np.mean(parser.logprob_batch([(x, linearize(z)) for x, z in pairs])))
    return out


def evaluate_generator(generator: Seq2SeqModel, pairs: Sequence[tuple[str, LogicalForm]]) -> dict:
    if not pairs:
        return {}
    return {"loglik": float(np.mean(generator.logprob_batch([(linearize(z), x) for x, z in pairs])))}


def generator_exact_match(generator: Seq2SeqModel, pairs: Sequence[tuple[str, LogicalForm]],
                          accept=None) -> float:
    """Share of gold structures whose greedy verbalization is acceptable.

    ``accept(text, form)`` defaults to string equality with the gold text
    after whitespace normalization.
    """
    if not pairs:
        return 0.0
    outputs = generator.greedy_batch([linearize(z) for _, z in pairs])
    hits = 0
    for out, (x, z) in zip(outputs, pairs):
        text = " ".join(out.text.split())
        hits += bool(accept(text, z)) if accept is not None else text == " ".join(x.split())
    return hits / len(pairs)


def _selection_key(metrics: dict) -> tuple:
    return (metrics.get("exact_match", 0.0), metrics.get("loglik", -math.inf))


class _Selector:
    """Keeps the best-on-validation parameters and counts evaluations without improvement."""

    def __init__(self, model, evaluate, metrics_log: Optional[list], tag: dict):
        self.model, self.evaluate, self.log, self.tag = model, evaluate, metrics_log, tag
        self.best_key, self.best_params, self.best_metrics = None, None, None
        self.stale = 0

    def check(self, step: int, epoch: int) -> None:
        metrics = self.evaluate(self.model)
        if self.log is not None:
            self.log.append({**self.tag, "epoch": epoch, "step": step, "split": "validation", **metrics})
        key = _selection_key(metrics)
        if self.best_key is None or key > self.best_key:
            self.best_key, self.best_params, self.best_metrics = key, self.model.get_flat(), metrics
            self.stale = 0
        else:
            self.stale += 1

    def restore(self) -> None:
        if self.best_params is not None:
            self.model.set_flat(self.best_params)


# -- initial checkpoint -----------------------------------------------------

def pretrain_omega(omega: Seq2SeqModel, texts: Sequence[str], config: IterationConfig) -> Seq2SeqModel:
    """Denoising-autoencoder pretraining of the shared initial checkpoint.

    Stands in for a pretrained language model: the network learns to
    reconstruct each text from a copy with ``pretrain_mask`` of its tokens
    replaced by the unknown token.  No (text, structure) pairing is used.
    """
    if config.pretrain_epochs <= 0 or not texts:
        return omega
    role = omega.role
    omega.role = DENOISER
    rng = random.Random(derive_seed(config.seed, _PRETRAIN))
    optimizer = omega.make_optimizer("adam", config.pretrain_lr)
    order = list(texts)
    for _ in range(config.pretrain_epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.pretrain_batch_size):
            batch = []
            for text in order[start:start + config.pretrain_batch_size]:
                noisy = " ".join(UNK if rng.random() < config.pretrain_mask else w for w in text.split())
                batch.append((noisy, text, 1.0))
            omega.weighted_update(batch, config.pretrain_lr, optimizer=optimizer)
    omega.role = role
    return omega


def make_omega(corpus: "Corpus", config: IterationConfig) -> Seq2SeqModel:
    omega = build_omega(corpus.vocabulary(), config.arch, corpus.kind, derive_seed(config.seed, 0))
    texts = corpus.unlabeled + [x for x, _ in corpus.supervised] + [linearize(z) for _, z in corpus.supervised]
    return pretrain_omega(omega, texts, config)


# -- warm-up ----------------------------------------------------------------

def supervised_training(model: Seq2SeqModel, pairs: Sequence[tuple[str, str]], config: IterationConfig,
                        seed: int, validate=None, metrics_log=None, tag=None) -> Seq2SeqModel:
    """Maximum-likelihood fine-tuning with per-epoch validation and patience."""
    lr = config.warmup_lr if config.warmup_lr is not None else config.lr
    optimizer = model.make_optimizer(config.optimizer, lr)
    rng = random.Random(seed)
    selector = _Selector(model, validate, metrics_log, tag or {}) if validate else None
    order = list(pairs)
    step = 0
    for epoch in range(config.warmup_epochs):
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            batch = [(c, t, 1.0) for c, t in order[start:start + config.batch_size]]
            model.weighted_update(batch, lr, optimizer=optimizer)
            step += 1
        if selector:
            selector.check(step, epoch)
            if selector.stale >= config.patience:
                break
    if selector:
        selector.restore()
    return model


def warmup(parser: Seq2SeqModel, generator: Seq2SeqModel, supervised: Sequence[tuple[str, LogicalForm]],
           config: IterationConfig, validation: Sequence[tuple[str, LogicalForm]] = (),
           metrics_log: Optional[list] = None):
    """Fit parser and generator on gold pairs, freeze the generator, count gold parts."""
    if not supervised:
        raise EmptySupervisedSet("warm-up needs at least one gold pair")
    if parser.get_flat().tobytes() != generator.get_flat().tobytes():
        raise TrainingError("parser and generator must start from the same checkpoint")
    gold = [(x, linearize(z)) for x, z in supervised]
    val = list(validation)
    supervised_training(
        parser, gold, config, derive_seed(config.seed, _WARMUP, 0),
        (lambda m: evaluate_parser(m, val)) if val else None, metrics_log, {"iteration": 0, "model": PARSER})
    supervised_training(
        generator, flip(gold), config, derive_seed(config.seed, _WARMUP, 1),
        (lambda m: evaluate_generator(m, val)) if val else None, metrics_log,
        {"iteration": 0, "model": GENERATOR})
    generator.frozen = True
    parser.tags["version"] = 0
    generator.tags["version"] = 0
    prior = prior_from_forms((z for _, z in supervised), config.tau, iteration=0)
    return parser, generator, prior


# -- offline annotation -----------------------------------------------------

def sample_prior_logprob(prior: PriorTable, form: Optional[LogicalForm]) -> float:
    """Prior score of a sample; an unparseable sample is one unseen part."""
    if form is None:
        return math.log(prior.tau / (prior.total + prior.tau))
    return prior.logprob(form)


def _annotate_shard(parser, generator, prior_prev, texts, indices, config, iteration):
    mode = config.reward_mode
    k = config.samples_per_input
    if config.sampler == "greedy":
        samples = [[r] for r in parser.greedy_batch(texts)]
    else:
        seeds = [derive_seed(config.seed, _ANNOTATE, iteration, i) for i in indices]
        samples = parser.sample_batch(texts, k, config.temperature, config.top_p, seeds)
    flat = [(x, s) for x, group in zip(texts, samples) for s in group]
    if mode in ("full", "cc_only"):
        cc = generator.logprob_batch([(s.text, x) for x, s in flat])
    else:
        cc = np.zeros(len(flat))
    records, counts = [], PriorTable(config.tau, iteration=iteration)
    for j, (x, s) in enumerate(flat):
        form = None if s.malformed else s.form
        lp = sample_prior_logprob(prior_prev, form) if mode in ("full", "prior_only") else 0.0
        v = raw_value(float(cc[j]), lp, mode)
        records.append(AnnotationRecord(iteration, x, s.text, v, min(s.logq, 0.0), s.malformed, j % k))
        if form is not None:
            counts.observe(form)
    return records, counts


def annotate_pass(parser_prev: Seq2SeqModel, generator: Seq2SeqModel, prior_prev: PriorTable,
                  unlabeled: Sequence[str], config: IterationConfig, iteration: int,
                  store: AnnotationStore) -> PriorTable:
    """Sample, score and persist annotations for iteration ``iteration``.

    Returns the fresh count table Θ^i built from this pass's samples.
    """
    if parser_prev.tags.get("version") != iteration - 1 or prior_prev.iteration != iteration - 1:
        raise TrainingError(
            f"iteration {iteration} must sample from version {iteration - 1} artifacts, got parser "
            f"{parser_prev.tags.get('version')} / prior {prior_prev.iteration}")
    if not generator.frozen:
        raise TrainingError("the generator must be frozen during semi-supervised iterations")
    store.open_iteration(iteration)
    texts = list(unlabeled)
    n_workers = max(1, min(config.workers, len(texts)))
    bounds = np.linspace(0, len(texts), n_workers + 1).astype(int)
    jobs = [(list(range(bounds[w], bounds[w + 1]))) for w in range(n_workers)]

    def work(w):
        idx = jobs[w]
        records, counts = _annotate_shard(parser_prev, generator, prior_prev, [texts[i] for i in idx], idx,
                                          config, iteration)
        store.extend(records, worker=w)
        return counts

    if n_workers == 1:
        shard_counts = [work(0)]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            shard_counts = list(pool.map(work, range(n_workers)))
    store.merge(iteration)

    fresh = prior_prev.snapshot() if config.carry_counts else PriorTable(config.tau)
    for counts in shard_counts:
        fresh = fresh.merge(counts)
    fresh.iteration = iteration
    return fresh


# -- parser update ----------------------------------------------------------

def _advantages(groups: list[list[AnnotationRecord]], config: IterationConfig) -> list[list[float]]:
    if config.reward_mode == "unit":
        return [[1.0] * len(g) for g in groups]
    if config.corpus_normalization:
        flat = normalize([r.v for g in groups for r in g], config.sigma_floor)
        out, pos = [], 0
        for g in groups:
            out.append(flat[pos:pos + len(g)])
            pos += len(g)
        return out
    return [normalize([r.v for r in g], config.sigma_floor) for g in groups]


def silver_weights(records: Sequence[AnnotationRecord], advantages: Sequence[float],
                   logq_now: Sequence[float], reward: RewardConfig) -> list[float]:
    """Update weights for one group from the clipped surrogate; exactly 1 in ``unit`` mode."""
    if reward.mode == "unit":
        return [1.0] * len(records)
    return [
        gradient_weight(importance_ratio(q, r.logq, reward.ratio_ceiling), a, reward.epsilon, reward.surrogate)
        for r, a, q in zip(records, advantages, logq_now)
    ]


def _surrogate_epochs(model: Seq2SeqModel, items: list, config: IterationConfig, lr: float, epochs: int,
                      seed: int, selector: Optional[_Selector]) -> None:
    """Shuffled weighted passes over silver groups and gold pairs.

    A silver item is a group of ``(condition, target, logp_old, advantage)``;
    each member is weighted by the clipped surrogate at the current ratio,
    divided by N.  A gold item is a ``(condition, target)`` pair with weight 1.
    The loss of a batch is normalized by its number of items.
    """
    reward = config.reward
    n = config.samples_per_input
    eval_every = config.eval_every_steps or max(50, len(items) // 10)
    if selector:
        selector.check(0, -1)  # the incoming model competes too
    optimizer = model.make_optimizer(config.optimizer, lr)
    rng = random.Random(seed)
    step = 0
    for epoch in range(epochs):
        order = list(items)
        rng.shuffle(order)
        for start in range(0, len(order), config.batch_size):
            chunk = order[start:start + config.batch_size]
            batch, plan = [], []
            for kind, payload in chunk:
                if kind == "gold":
                    plan.append((len(batch), None))
                    batch.append((payload[0], payload[1], 1.0))
                else:
                    plan.append((len(batch), payload))
                    batch.extend((c, t, 0.0) for c, t, _, _ in payload)

            def weights_for(logp_now, plan=plan, size=len(batch)):
                w = np.zeros(size)
                for pos, group in plan:
                    if group is None:
                        w[pos] = 1.0
                    elif reward.mode == "unit":
                        w[pos:pos + len(group)] = 1.0 / n
                    else:
                        for j, (_, _, old, adv) in enumerate(group):
                            ratio = importance_ratio(logp_now[pos + j], old, reward.ratio_ceiling)
                            w[pos + j] = gradient_weight(ratio, adv, reward.epsilon, reward.surrogate) / n
                return w

            model.weighted_update(batch, lr, normalizer=len(chunk), optimizer=optimizer, weight_fn=weights_for)
            step += 1
            if selector and step % eval_every == 0:
                selector.check(step, epoch)
        if selector and (not selector.log or selector.log[-1].get("step") != step):
            selector.check(step, epoch)
        if selector and selector.stale >= config.patience:
            break
    if selector:
        selector.restore()


def parser_update(parser: Seq2SeqModel, store: AnnotationStore, iteration: int,
                  supervised: Sequence[tuple[str, LogicalForm]], config: IterationConfig,
                  validation: Sequence[tuple[str, LogicalForm]] = (),
                  metrics_log: Optional[list] = None) -> Seq2SeqModel:
    """Weighted pass(es) over D^U ∪ D^S reading silver data from the store only.

    Silver sample n of input x contributes ``R_n / (|B| N)``; gold pairs
    contribute ``1 / |B|`` and bypass normalization and clipping.
    """
    if iteration not in store.iterations():
        raise MissingIteration(f"no annotation records for iteration {iteration}")
    parser = parser.clone(role=PARSER, frozen=False)
    groups = store.groups(iteration)
    if config.drop_malformed:
        groups = [[r for r in g if not r.malformed] for g in groups]
        groups = [g for g in groups if g]
    advantages = _advantages(groups, config)
    items = [("silver", [(r.x, r.z, r.logq, adv) for r, adv in zip(g, a)]) for g, a in zip(groups, advantages)]
    items += [("gold", (x, linearize(z))) for x, z in supervised] * config.gold_oversample
    val = list(validation)
    selector = (_Selector(parser, lambda m: evaluate_parser(m, val), metrics_log, {"iteration": iteration})
                if val else None)
    _surrogate_epochs(parser, items, config, config.lr, config.epochs_per_iteration,
                      derive_seed(config.seed, _UPDATE, iteration), selector)
    parser.tags["version"] = iteration
    return parser


# -- full procedure -----------------------------------------------------------

@dataclass
class RunResult:
    parser: Seq2SeqModel
    generator: Seq2SeqModel
    prior: PriorTable
    store_dirs: list[Path]
    omega: Seq2SeqModel
    history: list[dict] = field(default_factory=list)
    parsers: list[Seq2SeqModel] = field(default_factory=list)


def iteration_dir(artifact_dir: Path, i: int) -> Path:
    return artifact_dir / ("warmup" if i == 0 else f"iter-{i}")


def _write_metrics(path: Path, rows: list[dict]) -> None:
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8")


def save_iteration(directory: Path, parser, prior, metrics_rows, generator=None, omega=None) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    parser.save(directory / "parser.ckpt")
    prior.save(directory / "prior.tsv")
    if generator is not None:
        generator.save(directory / "generator.ckpt")
    if omega is not None:
        omega.save(directory / "omega.ckpt")
    _write_metrics(directory / "metrics.jsonl", metrics_rows)
    (directory / "COMPLETE").write_text("ok\n")


def is_complete(directory: Path) -> bool:
    return (directory / "COMPLETE").exists()


def load_warmup(root: Path):
    wdir = iteration_dir(root, 0)
    if not is_complete(wdir):
        raise MissingIteration(f"warm-up artifacts not found under {wdir}")
    return (Seq2SeqModel.load(wdir / "omega.ckpt"), Seq2SeqModel.load(wdir / "parser.ckpt"),
            Seq2SeqModel.load(wdir / "generator.ckpt"), PriorTable.load(wdir / "prior.tsv"))


def load_iteration(root: Path, i: int):
    """Parser and prior of record for iteration ``i`` (0 = warm-up)."""
    idir = iteration_dir(root, i)
    if not is_complete(idir):
        raise MissingIteration(f"iteration {i} artifacts not found under {idir}")
    return Seq2SeqModel.load(idir / "parser.ckpt"), PriorTable.load(idir / "prior.tsv")


def run_warmup(corpus: Corpus, config: IterationConfig, root: Path):
    omega = make_omega(corpus, config)
    rows: list[dict] = []
    parser, generator, prior = warmup(omega.clone(role=PARSER), omega.clone(role=GENERATOR),
                                      corpus.supervised, config, corpus.validation, rows)
    save_iteration(iteration_dir(root, 0), parser, prior, rows, generator, omega)
    return omega, parser, generator, prior


def run_iteration(corpus: Corpus, config: IterationConfig, root: Path, i: int,
                  parser=None, generator=None, prior=None):
    """One annotate / update / prior round reading iteration ``i - 1`` artifacts."""
    if i < 1:
        raise ValueError("semi-supervised iterations start at 1")
    if generator is None:
        generator = load_warmup(root)[2]
    if parser is None or prior is None:
        parser, prior = load_iteration(root, i - 1)
    idir = iteration_dir(root, i)
    if idir.exists():
        shutil.rmtree(idir)  # never mix shards from an interrupted attempt
    store = AnnotationStore(idir)
    rows: list[dict] = []
    fresh = annotate_pass(parser, generator, prior, corpus.unlabeled, config, i, store)
    parser = parser_update(parser, store, i, corpus.supervised, config, corpus.validation, rows)
    save_iteration(idir, parser, fresh, rows)
    return parser, fresh


def run(corpus: Corpus, config: IterationConfig, artifact_dir: Optional[str | Path] = None,
        resume: bool = True, stop_after: Optional[int] = None, keep_parsers: bool = False) -> RunResult:
    """Warm-up then ``config.K`` annotate / update / prior rounds.

    With ``artifact_dir`` every stage is persisted and completed stages are
    reloaded instead of recomputed when ``resume`` is true.
    """
    tmp = None
    if artifact_dir is None:
        tmp = tempfile.mkdtemp(prefix="locco-")
        artifact_dir = tmp
    root = Path(artifact_dir)
    root.mkdir(parents=True, exist_ok=True)
    history: list[dict] = []

    if resume and is_complete(iteration_dir(root, 0)):
        omega, parser, generator, prior = load_warmup(root)
    else:
        omega, parser, generator, prior = run_warmup(corpus, config, root)
    history.append({"iteration": 0, **evaluate_parser(parser, corpus.validation)})

    gen_hash = generator.param_hash()
    store_dirs, parsers = [], [parser] if keep_parsers else []
    last = config.K if stop_after is None else min(config.K, stop_after)
    for i in range(1, last + 1):
        idir = iteration_dir(root, i)
        if resume and is_complete(idir):
            parser, prior = load_iteration(root, i)
        else:
            parser, prior = run_iteration(corpus, config, root, i, parser, generator, prior)
        if generator.param_hash() != gen_hash:
            raise TrainingError("frozen generator changed during training")
        store_dirs.append(idir)
        if keep_parsers:
            parsers.append(parser)
        history.append({"iteration": i, **evaluate_parser(parser, corpus.validation)})
        log.info("iteration %d: %s", i, history[-1])

    result = RunResult(parser, generator, prior, store_dirs, omega, history, parsers)
    if tmp is not None:
        shutil.rmtree(tmp, ignore_errors=True)
        result.store_dirs = []
    return result


# -- generator retraining from flipped annotations ---------------------------

def train_generator_from_annotations(final_parser: Seq2SeqModel, omega: Seq2SeqModel,
                                     scoring_generator: Seq2SeqModel, prior: PriorTable,
                                     corpus: Corpus, config: IterationConfig,
                                     store_dir: Optional[str | Path] = None,
                                     metrics_log: Optional[list] = None) -> Seq2SeqModel:
    """Annotate once more with the final parser, flip (x, z) to (z, x), train a fresh generator.

    The fresh generator starts from ``omega`` (not the frozen scorer), is
    warmed up on flipped gold pairs and then trained with the same weighted
    pass, the ratio being the generator's own likelihood of the flipped pair
    relative to the start of the silver phase.
    """
    tmp = None
    if store_dir is None:
        tmp = tempfile.mkdtemp(prefix="locco-gen-")
        store_dir = tmp
    iteration = int(final_parser.tags.get("version", 0)) + 1
    store = AnnotationStore(store_dir)
    annotate_pass(final_parser, scoring_generator, prior, corpus.unlabeled, config, iteration, store)

    generator = omega.clone(role=GENERATOR, frozen=False)
    val = list(corpus.validation)
    gold = [(x, linearize(z)) for x, z in corpus.supervised]
    gen_config = replace(config, seed=derive_seed(config.seed, _GEN))
    supervised_training(generator, flip(gold), gen_config, derive_seed(config.seed, _GEN, 0),
                        (lambda m: evaluate_generator(m, val)) if val else None, metrics_log,
                        {"iteration": iteration, "model": GENERATOR, "phase": "warmup"})

    # weighting of the flipped samples may differ from the sampling run's reward
    if config.generator_reward_mode is not None:
        config = replace(config, reward_mode=config.generator_reward_mode, generator_reward_mode=None)
    groups = store.groups(iteration)
    if config.drop_malformed:
        groups = [g for g in ([r for r in g if not r.malformed] for g in groups) if g]
    advantages = _advantages(groups, config)
    # the ratio is taken against the generator as it enters this phase
    start = generator.logprob_batch([(r.z, r.x) for g in groups for r in g])
    items, pos = [], 0
    for g, adv in zip(groups, advantages):
        items.append(("silver", [(r.z, r.x, float(start[pos + j]), a) for j, (r, a) in enumerate(zip(g, adv))]))
        pos += len(g)
    items += [("gold", (z, x)) for x, z in gold] * config.gold_oversample
    selector = (_Selector(generator, lambda m: evaluate_generator(m, val), metrics_log,
                          {"iteration": iteration, "model": GENERATOR, "phase": "silver"}) if val else None)
    lr = config.generator_lr if config.generator_lr is not None else config.lr
    epochs = config.generator_epochs if config.generator_epochs is not None else config.epochs_per_iteration
    _surrogate_epochs(generator, items, config, lr, epochs, derive_seed(config.seed, _GEN, 1), selector)
    generator.tags["version"] = iteration
    if tmp is not None:
        shutil.rmtree(tmp, ignore_errors=True)
    return generator
