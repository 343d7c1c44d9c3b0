import numpy as np
import pytest

from helpers import tiny_config, tiny_corpus
from locco.logical_forms import parse_triples
from locco.models import GENERATOR, PARSER
from locco.presets import toy_corpus
from locco.prior import PriorTable, prior_from_forms
from locco.store import AnnotationStore
from locco.training import (
    EmptySupervisedSet, IterationConfig, MissingIteration, TrainingError, annotate_pass, evaluate_parser, flip,
    iteration_dir, make_omega, parser_update, run, run_iteration, run_warmup, sample_prior_logprob, warmup,
)


@pytest.fixture(scope="module")
def warm(tmp_path_factory):
    root = tmp_path_factory.mktemp("warm")
    corpus, config = tiny_corpus(), tiny_config()
    omega, parser, generator, prior = run_warmup(corpus, config, root)
    return corpus, config, root, omega, parser, generator, prior


def test_config_validation():
    with pytest.raises(ValueError):
        IterationConfig(K=0)
    with pytest.raises(ValueError):
        IterationConfig(sampler="beam")
    with pytest.raises(ValueError):
        IterationConfig(generator_reward_mode="other")
    with pytest.raises(ValueError):
        IterationConfig(epsilon=1.5)


def test_flip_is_an_involution():
    pairs = [("x1", "z1"), ("x2", "z2")]
    assert flip(pairs) == [("z1", "x1"), ("z2", "x2")]
    assert flip(flip(pairs)) == pairs


def test_warmup_memorizes_small_set():
    sizes = {"n_supervised": 10, "n_unlabeled": 5, "n_val": 2, "n_test": 2}
    corpus = toy_corpus(3, sizes, n_entities=4, n_relations=2, n_facts=20, max_triples=1)
    pairs = corpus.supervised
    config = tiny_config(embed_size=32, hidden_size=32, warmup_epochs=100, batch_size=2, warmup_lr=2e-2)
    omega = make_omega(corpus, config)
    parser, generator, prior = warmup(omega.clone(role=PARSER), omega.clone(role=GENERATOR), pairs, config)
    assert evaluate_parser(parser, pairs)["exact_match"] == 1.0
    assert generator.frozen and not parser.frozen
    assert prior == prior_from_forms([z for _, z in pairs], config.tau)


def test_warmup_requires_gold_and_shared_start(warm):
    corpus, config, _, omega, *_ = warm
    with pytest.raises(EmptySupervisedSet):
        warmup(omega.clone(role=PARSER), omega.clone(role=GENERATOR), [], config)
    other = omega.clone(role=GENERATOR)
    other.set_flat(other.get_flat() + 1.0)
    with pytest.raises(TrainingError):
        warmup(omega.clone(role=PARSER), other, corpus.supervised, config)


def test_annotate_counts_and_determinism(warm, tmp_path):
    corpus, config, _, _, parser, generator, prior = warm
    fresh_a = annotate_pass(parser, generator, prior, corpus.unlabeled, config, 1, AnnotationStore(tmp_path / "a"))
    fresh_b = annotate_pass(parser, generator, prior, corpus.unlabeled, config, 1, AnnotationStore(tmp_path / "b"))
    records = list(AnnotationStore(tmp_path / "a").iterate(1))
    assert len(records) == len(corpus.unlabeled) * config.N
    assert (tmp_path / "a" / "ann-i1.records").read_bytes() == (tmp_path / "b" / "ann-i1.records").read_bytes()
    assert fresh_a == fresh_b and fresh_a.iteration == 1
    sampled = PriorTable(config.tau)
    for r in records:
        if not r.malformed:
            sampled.observe(parse_triples(r.z))
    assert fresh_a.occurrences == sampled.occurrences


def test_workers_give_the_same_store(warm, tmp_path):
    corpus, config, _, _, parser, generator, prior = warm
    annotate_pass(parser, generator, prior, corpus.unlabeled, config, 1, AnnotationStore(tmp_path / "one"))
    annotate_pass(parser, generator, prior, corpus.unlabeled, tiny_config(workers=3), 1,
                  AnnotationStore(tmp_path / "three"))
    assert (tmp_path / "one" / "ann-i1.records").read_bytes() == (tmp_path / "three" / "ann-i1.records").read_bytes()


def _values(warm, tmp_path, name, config, generator=None, prior=None):
    corpus, _, _, _, parser, gen0, prior0 = warm
    store = AnnotationStore(tmp_path / name)
    annotate_pass(parser, generator or gen0, prior or prior0, corpus.unlabeled, config, 1, store)
    return [r.v for r in store.iterate(1)]


def test_mode_reductions_at_value_level(warm, tmp_path):
    corpus, _, _, omega, parser, generator, prior = warm
    other_gen = omega.clone(role=GENERATOR, frozen=True)
    other_prior = prior_from_forms([z for _, z in corpus.validation], 1.0)
    prior_only = tiny_config(reward_mode="prior_only")
    assert _values(warm, tmp_path, "p1", prior_only) == _values(warm, tmp_path, "p2", prior_only, other_gen)
    cc_only = tiny_config(reward_mode="cc_only")
    assert _values(warm, tmp_path, "c1", cc_only) == _values(warm, tmp_path, "c2", cc_only, prior=other_prior)
    assert set(_values(warm, tmp_path, "u", tiny_config(reward_mode="unit"))) == {1.0}


def test_alternation_discipline(warm, tmp_path):
    corpus, config, _, _, parser, generator, prior = warm
    with pytest.raises(TrainingError):
        annotate_pass(parser, generator, prior, corpus.unlabeled, config, 2, AnnotationStore(tmp_path))
    with pytest.raises(TrainingError):
        annotate_pass(parser, generator.clone(frozen=False), prior, corpus.unlabeled, config, 1,
                      AnnotationStore(tmp_path))


def test_zero_silver_weights_without_gold_leave_parser(warm, tmp_path):
    corpus, _, _, _, parser, generator, prior = warm
    config = tiny_config(sigma_floor=1e12)  # every group falls under the floor
    store = AnnotationStore(tmp_path)
    annotate_pass(parser, generator, prior, corpus.unlabeled, config, 1, store)
    updated = parser_update(parser, store, 1, [], config)
    assert np.array_equal(updated.get_flat(), parser.get_flat())
    assert updated.tags["version"] == 1


def test_highest_advantage_sample_gains(warm, tmp_path):
    corpus, _, _, _, parser, generator, prior = warm
    config = tiny_config(optimizer="sgd", lr=1e-3, epochs_per_iteration=1, batch_size=1)
    store = AnnotationStore(tmp_path)
    unlabeled = corpus.unlabeled[:1]
    annotate_pass(parser, generator, prior, unlabeled, config, 1, store)
    group = store.groups(1)[0]
    best = max(group, key=lambda r: r.v)
    if len({r.v for r in group}) == 1:
        pytest.skip("degenerate group")
    updated = parser_update(parser, store, 1, [], config)
    assert updated.logprob(best.x, best.z) > parser.logprob(best.x, best.z)


def test_missing_iteration(warm, tmp_path):
    corpus, config, _, _, parser, *_ = warm
    with pytest.raises(MissingIteration):
        parser_update(parser, AnnotationStore(tmp_path), 1, corpus.supervised, config)


def test_run_layout_and_resume(tmp_path):
    corpus, config = tiny_corpus(2), tiny_config(K=3)
    full = run(corpus, config, tmp_path / "a")
    for i in range(4):
        assert (iteration_dir(tmp_path / "a", i) / "COMPLETE").exists()
    for i in (1, 2, 3):
        assert (iteration_dir(tmp_path / "a", i) / f"ann-i{i}.records").exists()
        assert (iteration_dir(tmp_path / "a", i) / "prior.tsv").exists()

    # interrupted after iteration 2, then resumed
    run(corpus, config, tmp_path / "b", stop_after=2)
    resumed = run(corpus, config, tmp_path / "b")
    for i in (1, 2, 3):
        a = (iteration_dir(tmp_path / "a", i) / "parser.ckpt").read_bytes()
        b = (iteration_dir(tmp_path / "b", i) / "parser.ckpt").read_bytes()
        assert a == b
    assert resumed.history == full.history
    assert resumed.parser.tags["version"] == 3


def test_run_iteration_requires_previous(tmp_path):
    with pytest.raises(MissingIteration):
        run_iteration(tiny_corpus(), tiny_config(), tmp_path, 2)


def test_store_is_self_describing(warm, tmp_path):
    """Re-scoring a stored sample reproduces its value."""
    corpus, config, _, _, parser, generator, prior = warm
    store = AnnotationStore(tmp_path)
    annotate_pass(parser, generator, prior, corpus.unlabeled, config, 1, store)
    for r in list(store.iterate(1))[:10]:
        form = None if r.malformed else parse_triples(r.z)
        v = generator.logprob(r.z, r.x) + sample_prior_logprob(prior, form)
        assert abs(v - r.v) <= 1e-9

