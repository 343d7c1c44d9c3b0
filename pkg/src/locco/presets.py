"""Desk-scale settings for the synthetic domain.

The library defaults are sized for fine-tuning a large pretrained model.
The small recurrent model needs a larger step size, a few passes per
iteration and a denoising-pretrained start.
"""

from __future__ import annotations

from dataclasses import replace

from .toy import DomainSpec, generate
from .training import Corpus, IterationConfig

TOY_SIZES = {"n_supervised": 50, "n_unlabeled": 500, "n_val": 100, "n_test": 200}


def toy_domain(seed: int = 0, **overrides) -> DomainSpec:
    base = DomainSpec(n_entities=10, n_relations=3, n_facts=45, min_triples=1, max_triples=2, seed=seed)
    return replace(base, **overrides)


def toy_config(seed: int = 0, **overrides) -> IterationConfig:
    base = IterationConfig(
        K=3, N=5, seed=seed,
        optimizer="adam", lr=3e-4, warmup_lr=3e-3, warmup_epochs=60, patience=10,
        epochs_per_iteration=3, eval_every_steps=40,
        embed_size=64, hidden_size=64, pretrain_epochs=50,
        generator_epochs=15, generator_lr=3e-3, generator_reward_mode="unit",
    )
    return replace(base, **overrides)


def toy_corpus(seed: int = 0, sizes: dict | None = None, **domain_overrides) -> Corpus:
    """The synthetic corpus for ``seed`` as a training ``Corpus``."""
    toy = generate(toy_domain(seed, **domain_overrides), **(sizes or TOY_SIZES))
    return Corpus(toy.supervised, toy.unlabeled, toy.validation, toy.test, "triples")
