"""Semi-supervised semantic parsing with cycle-consistency and a count-based logic prior."""

from .logical_forms import (
    SExpr, Triple, TripleSet, linearize, parse_form, parse_paren_triples, parse_sexpr, parse_triples, parts,
)
from .metrics import exact_match_accuracy, triple_f1
from .models import Seq2SeqModel, Vocabulary, build_omega
from .prior import PriorTable, prior_from_forms
from .reward import RewardConfig, clipped_weight, importance_ratio, normalize, raw_value
from .store import AnnotationRecord, AnnotationStore
from .training import Corpus, IterationConfig, annotate_pass, parser_update, run, warmup

__version__ = "0.1.0"
