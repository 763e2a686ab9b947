"""Ingestion of headline-body stance corpora.

Input is the two-CSV layout used by the fake-news stance task: a stances
file with columns ``Headline, Body ID, Stance`` and a bodies file with
columns ``Body ID, articleBody``. Both are UTF-8 with RFC-4180 quoting.
Malformed rows are hard errors; silently skipping them would corrupt the
label histogram.
"""

from __future__ import annotations

import csv
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum


class CorpusError(ValueError):
    """Malformed corpus input."""


class SchemaError(CorpusError):
    """A required CSV column is missing or a row does not fit the schema."""


class JoinError(CorpusError):
    """A body id cannot be resolved to exactly one body text."""


class LabelError(CorpusError):
    """A stance label string is not one of the four known labels."""


class DegenerateSplitError(CorpusError):
    """Requested split would leave one side without any pairs."""


class Stance(Enum):
    """Relation of a news body to a headline claim."""

    AGREE = "agree"
    DISAGREE = "disagree"
    DISCUSS = "discuss"
    UNRELATED = "unrelated"

    @classmethod
    def parse(cls, label: str, row: int | None = None) -> "Stance":
        """Case-insensitive parse with surrounding whitespace stripped."""
        try:
            return cls(label.strip().lower())
        except ValueError:
            where = f" (stances row {row})" if row is not None else ""
            raise LabelError(f"unknown stance label {label!r}{where}") from None


STANCES: tuple[Stance, ...] = tuple(Stance)
STANCE_INDEX: dict[Stance, int] = {s: i for i, s in enumerate(STANCES)}

STANCES_COLUMNS = ("Headline", "Body ID", "Stance")
BODIES_COLUMNS = ("Body ID", "articleBody")


@dataclass
class StancePair:
    """One headline-body example; ``stance`` is None for unlabeled input."""

    headline: str
    body_id: int
    body: str
    stance: Stance | None = None


@dataclass
class Corpus:
    """Joined pairs plus the body table they reference."""

    pairs: list[StancePair]
    bodies: dict[int, str]
    label_histogram: dict[Stance, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.label_histogram:
            self.label_histogram = label_histogram(self)

    def __len__(self) -> int:
        return len(self.pairs)


def label_histogram(corpus: "Corpus") -> dict[Stance, int]:
    """Count labeled pairs per stance; all four stances are always keyed."""
    counts = Counter(p.stance for p in corpus.pairs if p.stance is not None)
    return {s: counts.get(s, 0) for s in STANCES}


def _require_columns(fieldnames, required, path):
    if fieldnames is None:
        raise SchemaError(f"{path}: file is empty, expected header {', '.join(required)}")
    for column in required:
        if column not in fieldnames:
            raise SchemaError(f"{path}: missing required column {column!r}")


def _parse_body_id(raw, path, row):
    if raw is None:
        raise SchemaError(f"{path}: row {row} is missing fields")
    try:
        return int(raw.strip())
    except ValueError:
        raise SchemaError(f"{path}: row {row} has non-integer Body ID {raw!r}") from None


_EXTRA = "__extra_fields__"


def _read_bodies(path) -> dict[int, str]:
    bodies: dict[int, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, restkey=_EXTRA)
        _require_columns(reader.fieldnames, BODIES_COLUMNS, path)
        for row_num, row in enumerate(reader, start=1):
            if _EXTRA in row:
                raise SchemaError(f"{path}: row {row_num} has extra fields")
            body_id = _parse_body_id(row.get("Body ID"), path, row_num)
            body = row.get("articleBody")
            if body is None:
                raise SchemaError(f"{path}: row {row_num} is missing fields")
            if body_id in bodies:
                raise JoinError(f"{path}: duplicate body id {body_id}")
            bodies[body_id] = body
    return bodies


def load_corpus(stances_path, bodies_path) -> Corpus:
    """Load and join the two CSV files into a Corpus.

    Row order follows the stances file. Every row must join to exactly one
    body and carry a parseable stance label; failures raise SchemaError,
    JoinError or LabelError naming the offending column, id or row.
    """
    bodies = _read_bodies(bodies_path)
    pairs: list[StancePair] = []
    with open(stances_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, restkey=_EXTRA)
        _require_columns(reader.fieldnames, STANCES_COLUMNS, stances_path)
        for row_num, row in enumerate(reader, start=1):
            if _EXTRA in row:
                raise SchemaError(f"{stances_path}: row {row_num} has extra fields")
            headline = row.get("Headline")
            raw_stance = row.get("Stance")
            if headline is None or raw_stance is None:
                raise SchemaError(f"{stances_path}: row {row_num} is missing fields")
            body_id = _parse_body_id(row.get("Body ID"), stances_path, row_num)
            if body_id not in bodies:
                raise JoinError(f"{stances_path}: row {row_num} references unknown body id {body_id}")
            stance = Stance.parse(raw_stance, row=row_num)
            body = bodies[body_id]
            if not headline.strip() or not body.strip():
                raise CorpusError(f"{stances_path}: row {row_num} has an empty headline or body")
            pairs.append(StancePair(headline=headline, body_id=body_id, body=body, stance=stance))
    return Corpus(pairs=pairs, bodies=bodies)


def save_corpus(corpus: Corpus, stances_path, bodies_path) -> None:
    """Write a Corpus back to the two-CSV layout (inverse of load_corpus)."""
    with open(stances_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(STANCES_COLUMNS)
        for pair in corpus.pairs:
            writer.writerow([pair.headline, pair.body_id, pair.stance.value if pair.stance else ""])
    with open(bodies_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(BODIES_COLUMNS)
        for body_id in sorted(corpus.bodies):
            writer.writerow([body_id, corpus.bodies[body_id]])


def load_stance_rows(path) -> list[tuple[str, int, Stance]]:
    """Read a stances-only CSV (gold or predictions) without a bodies file."""
    rows: list[tuple[str, int, Stance]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, restkey=_EXTRA)
        _require_columns(reader.fieldnames, STANCES_COLUMNS, path)
        for row_num, row in enumerate(reader, start=1):
            if _EXTRA in row:
                raise SchemaError(f"{path}: row {row_num} has extra fields")
            headline = row.get("Headline")
            raw_stance = row.get("Stance")
            if headline is None or raw_stance is None:
                raise SchemaError(f"{path}: row {row_num} is missing fields")
            body_id = _parse_body_id(row.get("Body ID"), path, row_num)
            rows.append((headline, body_id, Stance.parse(raw_stance, row=row_num)))
    return rows


def _subcorpus(corpus: Corpus, pairs: list[StancePair]) -> Corpus:
    referenced = {p.body_id for p in pairs}
    return Corpus(pairs=pairs, bodies={i: corpus.bodies[i] for i in sorted(referenced)})


def split(corpus: Corpus, validation_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Deterministic body-disjoint split into (train, validation).

    All pairs sharing a body land on the same side, so near-duplicate bodies
    never leak across the split. The rule, exactly: sort the distinct body
    ids ascending, shuffle them with ``random.Random(seed).shuffle``, then
    assign bodies to the validation side in shuffled order until the
    validation pair count reaches ``round(validation_fraction * len(pairs))``.
    The achieved fraction can overshoot by at most the largest per-body pair
    count.
    """
    if not corpus.pairs:
        raise CorpusError("cannot split an empty corpus")
    if not 0.0 < validation_fraction < 1.0:
        raise ValueError(f"validation_fraction must be in (0, 1), got {validation_fraction}")
    per_body = Counter(p.body_id for p in corpus.pairs)
    target = round(validation_fraction * len(corpus.pairs))
    if target == 0:
        raise DegenerateSplitError(
            f"fraction {validation_fraction} of {len(corpus.pairs)} pairs rounds to zero"
        )
    order = sorted(per_body)
    random.Random(seed).shuffle(order)
    validation_ids: set[int] = set()
    count = 0
    for body_id in order:
        if count >= target:
            break
        validation_ids.add(body_id)
        count += per_body[body_id]
    if count >= len(corpus.pairs):
        raise DegenerateSplitError("split would leave the training side empty")
    train_pairs = [p for p in corpus.pairs if p.body_id not in validation_ids]
    val_pairs = [p for p in corpus.pairs if p.body_id in validation_ids]
    return _subcorpus(corpus, train_pairs), _subcorpus(corpus, val_pairs)
