"""Parser / generator backends and the built-in reference seq2seq model.

The training loop only relies on the :class:`ModelBackend` surface, so a
different model (e.g. a pretrained LLM wrapper) can stand in for
:class:`Seq2SeqModel` without touching it.

The reference model is deliberately tiny: a single-layer bidirectional GRU
encoder, a single-layer GRU decoder and additive attention, all in float64
so its gradients can be checked against finite differences.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence

from .logical_forms import (
    PROMPTS, STRUCTURE_TO_TEXT, TEXT_TO_STRUCTURE, LogicalForm, LogicalFormError, parse_form, tokenize,
)

PAD, UNK, EOS, BOS = "<pad>", "<unk>", "<eos>", "<bos>"
SPECIALS = (PAD, UNK, EOS, BOS)
PARSER, GENERATOR, DENOISER = "parser", "generator", "denoiser"
CHECKPOINT_FORMAT = "locco-checkpoint"
CHECKPOINT_VERSION = 1

DTYPE = torch.float64


class ModelError(RuntimeError):
    pass


class FrozenModel(ModelError):
    pass


class MaxLengthExceeded(ModelError):
    """Raised only on request; by default over-length decodes are flagged, not raised."""


class Vocabulary:
    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = list(SPECIALS)
        self.index: dict[str, int] = {t: i for i, t in enumerate(self.tokens)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.index:
            self.index[token] = len(self.tokens)
            self.tokens.append(token)
        return self.index[token]

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def encode(self, text: str) -> list[int]:
        unk = self.index[UNK]
        return [self.index.get(tok, unk) for tok in tokenize(text)]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "Vocabulary":
        vocab = cls()
        for prompt in PROMPTS.values():
            for tok in tokenize(prompt):
                vocab.add(tok)
        for text in texts:
            for tok in tokenize(text):
                vocab.add(tok)
        return vocab


@dataclass(frozen=True)
class Architecture:
    embed_size: int = 32
    hidden_size: int = 64
    attention_size: int = 64
    max_len: int = 128


@dataclass
class SampleResult:
    form: Optional[LogicalForm]
    logq: float
    tokens: tuple[str, ...]
    malformed: bool = False
    truncated: bool = False

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


class ModelBackend(Protocol):
    """What the training loop needs from a parser or generator."""

    role: str
    frozen: bool

    def logprob_batch(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray: ...

    def sample_batch(self, conditions: Sequence[str], n: int, temperature: float, top_p: float,
                     seeds: Sequence[int]) -> list[list[SampleResult]]: ...

    def greedy_batch(self, conditions: Sequence[str]) -> list[SampleResult]: ...

    def weighted_update(self, batch, lr: float, **kwargs) -> "ModelBackend": ...

    def clone(self, role: Optional[str] = None, frozen: Optional[bool] = None) -> "ModelBackend": ...


class _Network(nn.Module):
    def __init__(self, vocab_size: int, arch: Architecture):
        super().__init__()
        E, H, A = arch.embed_size, arch.hidden_size, arch.attention_size
        self.embed = nn.Embedding(vocab_size, E)
        self.encoder = nn.GRU(E, H, batch_first=True, bidirectional=True)
        self.bridge = nn.Linear(2 * H, H)
        self.decoder = nn.GRU(E, H, batch_first=True)
        self.att_query = nn.Linear(H, A, bias=False)
        self.att_key = nn.Linear(2 * H, A)
        self.att_score = nn.Linear(A, 1, bias=False)
        self.readout = nn.Linear(3 * H, E)
        self.project = nn.Linear(E, vocab_size)
        # never emitted: padding and beginning-of-sequence
        mask = torch.zeros(vocab_size, dtype=DTYPE)
        mask[SPECIALS.index(PAD)] = -math.inf
        mask[SPECIALS.index(BOS)] = -math.inf
        self.register_buffer("output_mask", mask, persistent=False)

    def encode(self, src: torch.Tensor, lengths: torch.Tensor):
        emb = self.embed(src)
        packed = pack_padded_sequence(emb, lengths, batch_first=True, enforce_sorted=False)
        out, _ = self.encoder(packed)
        out, _ = nn.utils.rnn.pad_packed_sequence(out, batch_first=True, total_length=src.shape[1])
        mask = torch.arange(src.shape[1])[None, :] < lengths[:, None]
        pooled = (out * mask[..., None]).sum(1) / lengths[:, None].to(DTYPE)
        h0 = torch.tanh(self.bridge(pooled))
        keys = self.att_key(out)
        return out, keys, mask, h0

    def attend_logp(self, states, enc_out, keys, mask):
        """states: (B, T, H) decoder states -> (B, T, V) log-probabilities."""
        q = self.att_query(states)
        scores = self.att_score(torch.tanh(q[:, :, None, :] + keys[:, None, :, :])).squeeze(-1)
        scores = scores.masked_fill(~mask[:, None, :], -math.inf)
        alpha = torch.softmax(scores, dim=-1)
        context = alpha @ enc_out
        hidden = torch.tanh(self.readout(torch.cat([states, context], dim=-1)))
        logits = self.project(hidden) + self.output_mask
        return torch.log_softmax(logits, dim=-1)


def _pad(seqs: Sequence[Sequence[int]], pad: int = 0) -> tuple[torch.Tensor, torch.Tensor]:
    lengths = torch.tensor([len(s) for s in seqs], dtype=torch.long)
    width = max(1, int(lengths.max()))
    out = torch.full((len(seqs), width), pad, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = torch.tensor(s, dtype=torch.long)
    return out, lengths


class Seq2SeqModel:
    """Reference parser/generator handle.

    ``role`` decides the prompt prepended to every condition: parsers see
    ``"Text to Graph: x"``, generators ``"Graph to Text: z"``.
    """

    chunk_rows = 256

    def __init__(self, vocab: Vocabulary, arch: Architecture = Architecture(), role: str = PARSER,
                 output_kind: str = "triples", frozen: bool = False, seed: int = 0,
                 init_scale: float = 0.1):
        if role not in (PARSER, GENERATOR, DENOISER):
            raise ValueError(f"unknown role {role!r}")
        self.vocab = vocab
        self.arch = arch
        self.role = role
        self.output_kind = output_kind
        self.frozen = frozen
        self.tags: dict = {}
        self.net = _Network(len(vocab), arch).to(DTYPE)
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for p in self.net.parameters():
                p.copy_((torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2 - 1) * init_scale)
        self.net.train(False)

    # -- parameters ---------------------------------------------------------

    @property
    def n_params(self) -> int:
        return sum(p.numel() for p in self.net.parameters())

    def get_flat(self) -> np.ndarray:
        return nn.utils.parameters_to_vector(self.net.parameters()).detach().numpy().copy()

    def set_flat(self, vector: np.ndarray) -> None:
        if self.frozen:
            raise FrozenModel("cannot overwrite parameters of a frozen model")
        vec = torch.from_numpy(np.array(vector, dtype=np.float64))
        if vec.numel() != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {vec.numel()}")
        with torch.no_grad():
            nn.utils.vector_to_parameters(vec.clone(), self.net.parameters())

    def param_hash(self) -> str:
        return hashlib.sha256(self.get_flat().astype("<f8").tobytes()).hexdigest()

    def clone(self, role: Optional[str] = None, frozen: Optional[bool] = None) -> "Seq2SeqModel":
        new = copy.deepcopy(self)
        if role is not None:
            new.role = role
        if frozen is not None:
            new.frozen = frozen
        new.tags = dict(self.tags)
        return new

    def clone_frozen(self) -> "Seq2SeqModel":
        return self.clone(frozen=True)

    # -- text handling ------------------------------------------------------

    @property
    def direction(self) -> Optional[str]:
        return {PARSER: TEXT_TO_STRUCTURE, GENERATOR: STRUCTURE_TO_TEXT}.get(self.role)

    def _source_ids(self, condition: str) -> list[int]:
        if self.direction is None:
            return self.vocab.encode(condition)
        return self.vocab.encode(f"{PROMPTS[self.direction]} {condition}")

    def _result(self, ids: list[int], logq: float, truncated: bool) -> SampleResult:
        tokens = tuple(self.vocab.decode(ids))
        form, malformed = None, truncated
        if self.role == PARSER:
            try:
                form = parse_form(" ".join(tokens), self.output_kind)
            except LogicalFormError:
                malformed = True
        return SampleResult(form, logq, tokens, malformed, truncated)

    # -- scoring ------------------------------------------------------------

    def _logprob_tensor(self, pairs: Sequence[tuple[str, str]]) -> torch.Tensor:
        eos, bos = self.vocab.index[EOS], self.vocab.index[BOS]
        src, src_len = _pad([self._source_ids(c) for c in pairs_conditions(pairs)])
        targets = [self.vocab.encode(t) for _, t in pairs]
        tgt_in, _ = _pad([[bos] + t for t in targets])
        tgt_out, tgt_len = _pad([t + [eos] for t in targets])
        enc_out, keys, mask, h0 = self.net.encode(src, src_len)
        states, _ = self.net.decoder(self.net.embed(tgt_in), h0[None])
        logp = self.net.attend_logp(states, enc_out, keys, mask)
        picked = logp.gather(-1, tgt_out[..., None]).squeeze(-1)
        tmask = torch.arange(tgt_out.shape[1])[None, :] < tgt_len[:, None]
        return torch.where(tmask, picked, 0.0).sum(1)

    def logprob_batch(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        out = np.empty(len(pairs))
        with torch.no_grad():
            for start in range(0, len(pairs), self.chunk_rows):
                chunk = pairs[start:start + self.chunk_rows]
                out[start:start + len(chunk)] = self._logprob_tensor(chunk).numpy()
        return out

    def logprob(self, condition: str, target: str) -> float:
        """Exact log-probability of ``target`` (plus end-of-sequence) given ``condition``."""
        return float(self.logprob_batch([(condition, target)])[0])

    def logprob_grad(self, condition: str, target: str) -> np.ndarray:
        self.net.zero_grad(set_to_none=True)
        self._logprob_tensor([(condition, target)]).sum().backward()
        return np.concatenate([p.grad.detach().numpy().ravel() for p in self.net.parameters()])

    def next_token_distribution(self, condition: str, prefix: str = "") -> np.ndarray:
        """Probabilities over the whole vocabulary for the token after ``prefix``."""
        bos = self.vocab.index[BOS]
        src, src_len = _pad([self._source_ids(condition)])
        tgt_in, _ = _pad([[bos] + self.vocab.encode(prefix)])
        with torch.no_grad():
            enc_out, keys, mask, h0 = self.net.encode(src, src_len)
            states, _ = self.net.decoder(self.net.embed(tgt_in), h0[None])
            logp = self.net.attend_logp(states[:, -1:], enc_out, keys, mask)
        return logp.exp()[0, 0].numpy()

    # -- decoding -----------------------------------------------------------

    def _decode(self, conditions: Sequence[str], n: int, temperature: float, top_p: float,
                rngs: Optional[list[np.random.Generator]], max_len: int):
        eos, bos = self.vocab.index[EOS], self.vocab.index[BOS]
        src, src_len = _pad([self._source_ids(c) for c in conditions])
        with torch.no_grad():
            enc_out, keys, mask, h0 = self.net.encode(src, src_len)
            rep = lambda t: t.repeat_interleave(n, dim=0)
            enc_out, keys, mask, h = rep(enc_out), rep(keys), rep(mask), rep(h0)[None]
            rows = enc_out.shape[0]
            prev = torch.full((rows, 1), bos, dtype=torch.long)
            logq = torch.zeros(rows, dtype=DTYPE)
            done = torch.zeros(rows, dtype=torch.bool)
            chosen = []
            for _ in range(max_len):
                states, h = self.net.decoder(self.net.embed(prev), h)
                logp = self.net.attend_logp(states, enc_out, keys, mask)[:, 0]
                if rngs is None:
                    choice = logp.argmax(-1)
                else:
                    u = torch.from_numpy(np.concatenate([rng.random(n) for rng in rngs]))
                    choice = _nucleus_choice(logp, temperature, top_p, u)
                logq += torch.where(done, 0.0, logp.gather(-1, choice[:, None]).squeeze(-1))
                chosen.append(torch.where(done, -1, choice))
                done |= choice == eos
                if bool(done.all()):
                    break
                prev = choice[:, None]
        steps = torch.stack(chosen, dim=1).numpy() if chosen else np.empty((rows, 0), dtype=np.int64)
        results = []
        for r in range(rows):
            ids = [int(i) for i in steps[r] if i >= 0]
            finished = bool(ids) and ids[-1] == eos
            if finished:
                ids = ids[:-1]
            results.append(self._result(ids, float(logq[r]), truncated=not finished))
        return [results[i * n:(i + 1) * n] for i in range(len(conditions))]

    def _decode_chunked(self, conditions, n, temperature, top_p, rngs, max_len):
        per_chunk = max(1, self.chunk_rows * 4 // n)
        out = []
        for start in range(0, len(conditions), per_chunk):
            out.extend(self._decode(conditions[start:start + per_chunk], n, temperature, top_p,
                                    None if rngs is None else rngs[start:start + per_chunk], max_len))
        return out

    def sample_batch(self, conditions: Sequence[str], n: int = 5, temperature: float = 1.0,
                     top_p: float = 0.95, seeds: Sequence[int] = (), max_len: Optional[int] = None
                     ) -> list[list[SampleResult]]:
        """``n`` nucleus samples per condition; ``seeds[i]`` drives condition ``i``.

        ``logq`` is always the temperature-1 score under the unmodified model.
        """
        if self.role != PARSER:
            raise ModelError("sampling annotations requires a parser")
        if n < 1 or not 0 < top_p <= 1 or temperature <= 0:
            raise ValueError("need n >= 1, 0 < top_p <= 1 and temperature > 0")
        if len(seeds) != len(conditions):
            raise ValueError("one seed per condition required")
        rngs = [np.random.default_rng(s) for s in seeds]
        return self._decode_chunked(list(conditions), n, temperature, top_p, rngs,
                                    max_len or self.arch.max_len)

    def sample(self, x: str, n: int = 5, temperature: float = 1.0, top_p: float = 0.95,
               seed: int = 0, max_len: Optional[int] = None) -> list[SampleResult]:
        return self.sample_batch([x], n, temperature, top_p, [seed], max_len)[0]

    def greedy_batch(self, conditions: Sequence[str], max_len: Optional[int] = None) -> list[SampleResult]:
        if not conditions:
            return []
        out = self._decode_chunked(list(conditions), 1, 1.0, 1.0, None, max_len or self.arch.max_len)
        return [group[0] for group in out]

    def greedy(self, x: str, max_len: Optional[int] = None) -> SampleResult:
        return self.greedy_batch([x], max_len)[0]

    # -- training -----------------------------------------------------------

    def make_optimizer(self, kind: str = "sgd", lr: float = 5e-6):
        if kind == "sgd":
            return None
        if kind == "adam":
            return torch.optim.Adam(self.net.parameters(), lr=lr)
        raise ValueError(f"unknown optimizer {kind!r}")

    def weighted_update(self, batch: Sequence[tuple[str, str, float]], lr: float,
                        normalizer: Optional[float] = None, optimizer=None,
                        weight_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
                        ) -> "Seq2SeqModel":
        """One ascent step on ``(1/normalizer) * Σ weight * log p(target | condition)``.

        ``normalizer`` defaults to ``len(batch)``.  When ``weight_fn`` is given
        it receives the current (detached) log-probabilities of the batch and
        returns the weights to use, which lets callers derive importance
        ratios from the very forward pass that is differentiated.  The
        weights actually applied are left in ``last_weights``.
        """
        if self.frozen:
            raise FrozenModel("frozen models reject updates")
        if not batch:
            return self
        pairs = [(c, t) for c, t, _ in batch]
        weights = np.array([w for _, _, w in batch], dtype=np.float64)
        norm = float(normalizer if normalizer is not None else len(batch))
        self.net.zero_grad(set_to_none=True)
        logp = self._logprob_tensor(pairs)
        if weight_fn is not None:
            weights = np.asarray(weight_fn(logp.detach().numpy()), dtype=np.float64)
        if not np.all(np.isfinite(weights)):
            raise ValueError("non-finite update weights")
        self.last_weights = weights
        loss = -(torch.from_numpy(weights) * logp).sum() / norm
        loss.backward()
        with torch.no_grad():
            if optimizer is None:
                for p in self.net.parameters():
                    if p.grad is not None:
                        p.add_(p.grad, alpha=-lr)
            else:
                for group in optimizer.param_groups:
                    group["lr"] = lr
                optimizer.step()
        return self

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        header = {
            "format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "role": self.role,
            "frozen": self.frozen, "output_kind": self.output_kind, "arch": asdict(self.arch),
            "vocab": self.vocab.tokens, "n_params": self.n_params, "tags": self.tags,
        }
        data = json.dumps(header, sort_keys=True).encode("utf-8") + b"\n"
        Path(path).write_bytes(data + self.get_flat().astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "Seq2SeqModel":
        raw = Path(path).read_bytes()
        head, _, body = raw.partition(b"\n")
        header = json.loads(head)
        if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != CHECKPOINT_VERSION:
            raise ModelError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
        vocab = Vocabulary()
        for tok in header["vocab"][len(SPECIALS):]:
            vocab.add(tok)
        model = cls(vocab, Architecture(**header["arch"]), header["role"], header["output_kind"])
        params = np.frombuffer(body, dtype="<f8")
        if params.size != header["n_params"]:
            raise ModelError(f"{path}: truncated parameter block")
        model.set_flat(params)
        model.frozen = header["frozen"]
        model.tags = header["tags"]
        return model


def pairs_conditions(pairs):
    return [c for c, _ in pairs]


def _nucleus_choice(logp: torch.Tensor, temperature: float, top_p: float, u: torch.Tensor) -> torch.Tensor:
    """Inverse-CDF draw from the top-p nucleus of ``softmax(logp / temperature)``."""
    scaled = torch.log_softmax(logp / temperature, dim=-1)
    sorted_lp, order = torch.sort(scaled, dim=-1, descending=True, stable=True)
    probs = sorted_lp.exp()
    before = torch.cumsum(probs, dim=-1) - probs
    kept = torch.where(before < top_p, probs, 0.0)
    cum = torch.cumsum(kept, dim=-1)
    target = u * cum[:, -1]
    pos = torch.searchsorted(cum, target[:, None], right=True).squeeze(-1)
    last_kept = (kept > 0).sum(-1) - 1
    pos = torch.minimum(pos, last_kept)
    return order.gather(-1, pos[:, None]).squeeze(-1)


def build_omega(vocab: Vocabulary, arch: Architecture = Architecture(), output_kind: str = "triples",
                seed: int = 0) -> Seq2SeqModel:
    """The shared initial checkpoint both parser and generator start from."""
    return Seq2SeqModel(vocab, arch, PARSER, output_kind, seed=seed)


def sample(model, x, n=5, temperature=1.0, top_p=0.95, seed=0):
    return model.sample(x, n, temperature, top_p, seed)


def logprob(model, condition, target):
    return model.logprob(condition, target)


def greedy(model, x):
    return model.greedy(x)


def weighted_update(model, batch, lr, **kwargs):
    return model.weighted_update(batch, lr, **kwargs)


def clone_frozen(model):
    return model.clone_frozen()
