"""Small builders shared by the test modules."""

from __future__ import annotations

from locco.presets import toy_corpus
from locco.training import IterationConfig

TINY_SIZES = {"n_supervised": 8, "n_unlabeled": 12, "n_val": 6, "n_test": 6}


def tiny_corpus(seed: int = 0):
    return toy_corpus(seed, TINY_SIZES, n_entities=4, n_relations=2, n_facts=8, max_triples=2)


def tiny_config(**overrides) -> IterationConfig:
    base = dict(K=3, N=3, lr=1e-2, warmup_lr=1e-2, warmup_epochs=3, epochs_per_iteration=1, patience=2,
                batch_size=4, embed_size=8, hidden_size=8, max_len=24, eval_every_steps=2)
    base.update(overrides)
    return IterationConfig(**base)
