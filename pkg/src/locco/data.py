"""Corpus files and the flat run-configuration format.

Pair files hold one ``text<TAB>linearized form`` per line; unlabeled files
hold bare text lines.  A run configuration is a ``key = value`` text file
where every ``IterationConfig`` field can be set, plus paths and the domain.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, get_args, get_type_hints

from .logical_forms import LogicalFormError, parse_form
from .presets import toy_config
from .training import Corpus, IterationConfig

KINDS = ("triples", "sexpr")
PRESETS = ("default", "toy")
ENV_SEED = "LOCCO_SEED"
ENV_ARTIFACT_DIR = "LOCCO_ARTIFACT_DIR"


class ConfigInvalid(ValueError):
    pass


class MissingArtifact(FileNotFoundError):
    pass


class DataFormatError(ValueError):
    pass


def read_pairs(path: str | Path, kind: str = "triples") -> list[tuple]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing data file: {path}")
    pairs = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.count("\t") != 1:
            raise DataFormatError(f"{path}:{lineno}: expected exactly one tab")
        text, form = line.split("\t")
        try:
            pairs.append((" ".join(text.split()), parse_form(form, kind)))
        except LogicalFormError as exc:
            raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    return pairs


def read_texts(path: str | Path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing data file: {path}")
    return [" ".join(line.split()) for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


# -- run configuration --------------------------------------------------------

@dataclass
class RunConfig:
    supervised: Optional[Path] = None
    unlabeled: Optional[Path] = None
    validation: Optional[Path] = None
    test: Optional[Path] = None
    artifact_dir: Path = Path("artifacts")
    domain: str = "triples"
    preset: str = "default"
    iteration: IterationConfig = field(default_factory=IterationConfig)
    # synthetic-domain generation (gen-toy)
    data_dir: Optional[Path] = None
    toy_entities: int = 10
    toy_relations: int = 3
    toy_facts: int = 45
    toy_min_triples: int = 1
    toy_max_triples: int = 2
    toy_noise: float = 0.0
    n_supervised: int = 50
    n_unlabeled: int = 500
    n_val: int = 100
    n_test: int = 200

    def split_path(self, name: str) -> Optional[Path]:
        explicit = getattr(self, name)
        if explicit is not None:
            return explicit
        if self.data_dir is not None:
            default = {"supervised": "train.tsv", "unlabeled": "unlabeled.txt",
                       "validation": "valid.tsv", "test": "test.tsv"}[name]
            return self.data_dir / default
        return None

    def load_corpus(self, need_unlabeled: bool = True) -> Corpus:
        paths = {name: self.split_path(name) for name in ("supervised", "unlabeled", "validation", "test")}
        if paths["supervised"] is None:
            raise ConfigInvalid("no supervised file configured (set supervised or data_dir)")
        if need_unlabeled and paths["unlabeled"] is None:
            raise ConfigInvalid("no unlabeled file configured (set unlabeled or data_dir)")
        return Corpus(
            supervised=read_pairs(paths["supervised"], self.domain),
            unlabeled=read_texts(paths["unlabeled"]) if paths["unlabeled"] is not None else [],
            validation=read_pairs(paths["validation"], self.domain) if paths["validation"] else [],
            test=read_pairs(paths["test"], self.domain) if paths["test"] else [],
            kind=self.domain,
        )


def _coerce(raw: str, typ, key: str):
    text = raw.strip()
    args = [t for t in get_args(typ) if t is not type(None)]
    if args:  # Optional[X]
        if text.lower() in ("none", "null", ""):
            return None
        typ = args[0]
    try:
        if typ is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if typ in (int, float, Path):
            return typ(text)
    except ValueError as exc:
        raise ConfigInvalid(f"{key}: cannot read {raw!r} as {typ.__name__}") from exc
    return text


def parse_config(text: str, base_dir: Optional[Path] = None, environ=None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Relative paths are resolved against ``base_dir``.  ``LOCCO_SEED`` and
    ``LOCCO_ARTIFACT_DIR`` in the environment override the file.
    """
    environ = os.environ if environ is None else environ
    run_hints = get_type_hints(RunConfig)
    iter_hints = get_type_hints(IterationConfig)
    run_values, iter_values = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in iter_hints:
            iter_values[key] = _coerce(value, iter_hints[key], key)
        elif key in run_hints and key != "iteration":
            run_values[key] = _coerce(value, run_hints[key], key)
        else:
            raise ConfigInvalid(f"line {lineno}: unknown key {key!r}")
    if ENV_SEED in environ:
        iter_values["seed"] = _coerce(environ[ENV_SEED], int, ENV_SEED)
    if ENV_ARTIFACT_DIR in environ:
        run_values["artifact_dir"] = Path(environ[ENV_ARTIFACT_DIR])
    preset = run_values.get("preset", "default")
    if preset not in PRESETS:
        raise ConfigInvalid(f"preset must be one of {PRESETS}, got {preset!r}")
    try:
        if preset == "toy":
            iteration = toy_config(**iter_values)
        else:
            iteration = IterationConfig(**iter_values)
        config = RunConfig(iteration=iteration, **run_values)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    if config.domain not in KINDS:
        raise ConfigInvalid(f"domain must be one of {KINDS}, got {config.domain!r}")
    if base_dir is not None:
        for f in fields(RunConfig):
            value = getattr(config, f.name)
            if isinstance(value, Path) and not value.is_absolute():
                setattr(config, f.name, base_dir / value)
    return config


def load_config(path: str | Path, environ=None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"missing config file: {path}")
    return parse_config(path.read_text(encoding="utf-8"), path.parent, environ)


def format_config(config: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        if f.name == "iteration":
            continue
        value = getattr(config, f.name)
        lines.append(f"{f.name} = {'none' if value is None else value}")
    for key, value in config.iteration.to_dict().items():
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"
