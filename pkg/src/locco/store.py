"""Append-only annotation records, one shard file per worker.

Layout under the store root::

    ann-i<iteration>-w<worker>.part   # written by one worker, append-only
    ann-i<iteration>.records          # canonical merge of all shards

Each line is one JSON object with a fixed field order; reals are written
with 17 significant digits so they reload bit-exactly.
"""

from __future__ import annotations

import json
import math
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

FIELDS = ("iteration", "x", "z", "v", "logq", "malformed", "sample_index")
_SHARD_RE = re.compile(r"^ann-i(\d+)-w(\d+)\.part$")
_MERGED_RE = re.compile(r"^ann-i(\d+)\.records$")


class StorageFailure(RuntimeError):
    pass


class UnknownIteration(KeyError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    iteration: int
    x: str
    z: str
    v: float
    logq: float
    malformed: bool = False
    sample_index: int = 0

    def validate(self) -> None:
        if self.iteration < 1:
            raise StorageFailure(f"iteration must be >= 1 (warm-up writes no records), got {self.iteration}")
        if not (math.isfinite(self.v) and math.isfinite(self.logq)):
            raise StorageFailure("record values must be finite")
        if self.logq > 0:
            raise StorageFailure(f"sampler log-probability must be <= 0, got {self.logq}")
        if self.sample_index < 0:
            raise StorageFailure("negative sample_index")
        if "\n" in self.x or "\n" in self.z:
            raise StorageFailure("newlines are not allowed inside records")

    def to_line(self) -> str:
        return (
            "{"
            f'"iteration": {self.iteration:d}, "x": {json.dumps(self.x)}, "z": {json.dumps(self.z)}, '
            f'"v": {self.v:.17g}, "logq": {self.logq:.17g}, '
            f'"malformed": {"true" if self.malformed else "false"}, "sample_index": {self.sample_index:d}'
            "}"
        )

    @classmethod
    def from_line(cls, line: str) -> "AnnotationRecord":
        data = json.loads(line)
        if tuple(data) != FIELDS:
            raise StorageFailure(f"unexpected record fields {tuple(data)}")
        return cls(int(data["iteration"]), data["x"], data["z"], float(data["v"]), float(data["logq"]),
                   bool(data["malformed"]), int(data["sample_index"]))

    def sort_key(self):
        return (self.x, self.sample_index, self.z, self.v, self.logq, self.malformed)


class AnnotationStore:
    def __init__(self, root: str | Path, fsync: bool = False):
        self.root = Path(root)
        self.fsync = fsync
        try:
            self.root.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc

    def shard_path(self, iteration: int, worker: int = 0) -> Path:
        return self.root / f"ann-i{iteration}-w{worker}.part"

    def merged_path(self, iteration: int) -> Path:
        return self.root / f"ann-i{iteration}.records"

    def shards(self, iteration: int) -> list[Path]:
        found = []
        for p in self.root.iterdir():
            m = _SHARD_RE.match(p.name)
            if m and int(m.group(1)) == iteration:
                found.append(p)
        return sorted(found)

    def iterations(self) -> list[int]:
        its = set()
        for p in self.root.iterdir():
            m = _SHARD_RE.match(p.name) or _MERGED_RE.match(p.name)
            if m:
                its.add(int(m.group(1)))
        return sorted(its)

    def open_iteration(self, iteration: int) -> None:
        """Mark ``iteration`` as existing, even if it ends up with no records."""
        if iteration < 1:
            raise StorageFailure("iterations start at 1")
        if not self.merged_path(iteration).exists():
            self._write(self.merged_path(iteration), "")

    def append(self, record: AnnotationRecord, worker: int = 0) -> "AnnotationStore":
        record.validate()
        try:
            with open(self.shard_path(record.iteration, worker), "a", encoding="utf-8") as fh:
                fh.write(record.to_line() + "\n")
                if self.fsync:
                    fh.flush()
                    os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        return self

    def extend(self, records, worker: int = 0) -> "AnnotationStore":
        """Append many records of one iteration to a single shard."""
        records = list(records)
        if not records:
            return self
        iterations = {r.iteration for r in records}
        if len(iterations) != 1:
            raise StorageFailure("extend() takes records of exactly one iteration")
        for record in records:
            record.validate()
        try:
            with open(self.shard_path(iterations.pop(), worker), "a", encoding="utf-8") as fh:
                fh.writelines(r.to_line() + "\n" for r in records)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        return self

    @staticmethod
    def read_file(path: Path) -> list[AnnotationRecord]:
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        return [AnnotationRecord.from_line(line) for line in text.splitlines() if line]

    def merge(self, iteration: int) -> Path:
        """Rewrite the canonical file from every shard of ``iteration``.

        Shards are the source of truth, so merging is idempotent and the
        result does not depend on shard order.
        """
        shards = self.shards(iteration)
        if not shards and not self.merged_path(iteration).exists():
            raise UnknownIteration(iteration)
        records = [r for p in shards for r in self.read_file(p)]
        records.sort(key=AnnotationRecord.sort_key)
        self._write(self.merged_path(iteration), "".join(r.to_line() + "\n" for r in records))
        return self.merged_path(iteration)

    def iterate(self, iteration: int) -> Iterator[AnnotationRecord]:
        """Records of one iteration; all samples of an input are contiguous."""
        path = self.merged_path(iteration)
        if not path.exists():
            if self.shards(iteration):
                raise StorageFailure(f"iteration {iteration} has unmerged shards; call merge() first")
            raise UnknownIteration(iteration)
        return iter(self.read_file(path))

    def groups(self, iteration: int) -> list[list[AnnotationRecord]]:
        out: list[list[AnnotationRecord]] = []
        for record in self.iterate(iteration):
            if out and out[-1][0].x == record.x:
                out[-1].append(record)
            else:
                out.append([record])
        return out

    def _write(self, path: Path, text: str) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        try:
            tmp.write_text(text, encoding="utf-8")
            os.replace(tmp, path)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
