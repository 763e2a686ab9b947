"""Confusion matrix, class-wise accuracy and the two weighted score variants.

Two scores are reported because the literal formula
0.25 * binary-accuracy + 0.75 * related-accuracy does not coincide with the
challenge's official pointwise weighting (0.25 credit per correct
related/unrelated decision, 0.75 extra per exactly-correct related stance,
normalized by the maximum attainable points). The official variant is the
default for model selection and reporting; the formula variant is kept for
comparability, and every report states the gap between them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import STANCE_INDEX, STANCES, Stance

NUM_CLASSES = len(STANCES)
_UNRELATED_IDX = STANCE_INDEX[Stance.UNRELATED]

BINARY_WEIGHT = 0.25
EXACT_RELATED_WEIGHT = 0.75


class ConfusionFormatError(ValueError):
    """Stored confusion matrix file is malformed."""


@dataclass
class ConfusionMatrix:
    """4x4 counts indexed [gold][predicted] in stance order."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ValueError(f"confusion matrix must be 4x4, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_total(self, stance: Stance) -> int:
        return int(self.counts[STANCE_INDEX[stance]].sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and bool(
            np.array_equal(self.counts, other.counts)
        )


def confusion(golds: list[Stance], preds: list[Stance]) -> ConfusionMatrix:
    """Tally gold/predicted pairs; lengths must match and be non-zero."""
    if len(golds) != len(preds):
        raise ValueError(f"gold and prediction lengths differ: {len(golds)} vs {len(preds)}")
    if not golds:
        raise ValueError("cannot score an empty prediction set")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for g, p in zip(golds, preds):
        counts[STANCE_INDEX[g], STANCE_INDEX[p]] += 1
    return ConfusionMatrix(counts)


def _binary_correct(cm: ConfusionMatrix) -> int:
    """Pairs whose related/unrelated decision is correct."""
    c = cm.counts
    related_hit = int(c[: _UNRELATED_IDX, : _UNRELATED_IDX].sum())
    unrelated_hit = int(c[_UNRELATED_IDX, _UNRELATED_IDX])
    return related_hit + unrelated_hit


def _related_exact(cm: ConfusionMatrix) -> int:
    return int(np.trace(cm.counts[: _UNRELATED_IDX, : _UNRELATED_IDX]))


def _related_total(cm: ConfusionMatrix) -> int:
    return int(cm.counts[: _UNRELATED_IDX].sum())


def score_paper_formula(cm: ConfusionMatrix) -> float:
    """100 * (0.25 * binary accuracy + 0.75 * exact accuracy on gold-related pairs).

    The second term is 0 by convention when no gold-related pairs exist.
    """
    total = cm.total
    if total == 0:
        raise ValueError("cannot score an empty confusion matrix")
    score1 = _binary_correct(cm) / total
    related = _related_total(cm)
    score2 = _related_exact(cm) / related if related else 0.0
    return 100.0 * (BINARY_WEIGHT * score1 + EXACT_RELATED_WEIGHT * score2)


def score_official_weighted(cm: ConfusionMatrix) -> float:
    """Official challenge weighting, as a percentage of the maximum points.

    0.25 points per pair with a correct related/unrelated decision plus 0.75
    additional points per gold-related pair with the exactly-correct stance;
    the maximum is 0.25 * total + 0.75 * gold-related count.
    """
    total = cm.total
    if total == 0:
        raise ValueError("cannot score an empty confusion matrix")
    points = BINARY_WEIGHT * _binary_correct(cm) + EXACT_RELATED_WEIGHT * _related_exact(cm)
    maximum = BINARY_WEIGHT * total + EXACT_RELATED_WEIGHT * _related_total(cm)
    return 100.0 * points / maximum


@dataclass
class EvalReport:
    """Every metric for one evaluation run, in percent."""

    confusion: ConfusionMatrix
    class_accuracy: dict[Stance, float]
    empty_classes: tuple[Stance, ...]
    overall_accuracy: float
    score_paper_formula: float
    score_official_weighted: float

    @property
    def variant_gap(self) -> float:
        """Absolute difference between the two score variants."""
        return abs(self.score_official_weighted - self.score_paper_formula)


def report_from_confusion(cm: ConfusionMatrix) -> EvalReport:
    """Assemble class-wise accuracies, overall accuracy and both scores."""
    class_accuracy: dict[Stance, float] = {}
    empty: list[Stance] = []
    for stance in STANCES:
        row = cm.row_total(stance)
        hit = int(cm.counts[STANCE_INDEX[stance], STANCE_INDEX[stance]])
        if row == 0:
            empty.append(stance)
            class_accuracy[stance] = 0.0
        else:
            class_accuracy[stance] = 100.0 * hit / row
    overall = 100.0 * int(np.trace(cm.counts)) / cm.total
    return EvalReport(
        confusion=cm,
        class_accuracy=class_accuracy,
        empty_classes=tuple(empty),
        overall_accuracy=overall,
        score_paper_formula=score_paper_formula(cm),
        score_official_weighted=score_official_weighted(cm),
    )


def report(golds: list[Stance], preds: list[Stance]) -> EvalReport:
    return report_from_confusion(confusion(golds, preds))


def format_report(rep: EvalReport) -> str:
    """Human-readable table: confusion matrix, per-class and overall metrics."""
    names = [s.value for s in STANCES]
    width = max(len(n) for n in names) + 2
    lines = ["Confusion matrix (rows = gold, columns = predicted):"]
    header = " " * width + "".join(f"{n:>{width}}" for n in names) + f"{'acc %':>{width}}"
    lines.append(header)
    for stance in STANCES:
        cm_row = rep.confusion.counts[STANCE_INDEX[stance]]
        cells = "".join(f"{int(v):>{width}}" for v in cm_row)
        acc = f"{rep.class_accuracy[stance]:>{width}.2f}"
        flag = " (no gold examples)" if stance in rep.empty_classes else ""
        lines.append(f"{stance.value:<{width}}{cells}{acc}{flag}")
    lines.append(f"Overall accuracy:        {rep.overall_accuracy:.2f}")
    lines.append(f"Official weighted score: {rep.score_official_weighted:.2f}")
    lines.append(f"Formula-variant score:   {rep.score_paper_formula:.2f}")
    if rep.variant_gap > 0.005:
        lines.append(
            f"Note: the two score variants differ by {rep.variant_gap:.2f} points; "
            "the official weighting is authoritative."
        )
    return "\n".join(lines) + "\n"


def report_key_values(rep: EvalReport) -> str:
    """Machine-readable key=value lines, percentages at 2-decimal precision."""
    lines = [f"total={rep.confusion.total}"]
    for stance in STANCES:
        lines.append(f"class_accuracy_{stance.value}={rep.class_accuracy[stance]:.2f}")
    for stance in STANCES:
        lines.append(f"empty_class_{stance.value}={int(stance in rep.empty_classes)}")
    lines.append(f"overall_accuracy={rep.overall_accuracy:.2f}")
    lines.append(f"score_official_weighted={rep.score_official_weighted:.2f}")
    lines.append(f"score_paper_formula={rep.score_paper_formula:.2f}")
    lines.append(f"score_variant_gap={rep.variant_gap:.2f}")
    for g in STANCES:
        for p in STANCES:
            lines.append(
                f"confusion_{g.value}_{p.value}={int(rep.confusion.counts[STANCE_INDEX[g], STANCE_INDEX[p]])}"
            )
    return "\n".join(lines) + "\n"


def save_confusion(cm: ConfusionMatrix, path) -> None:
    """Plain-text matrix: 4 rows of 4 whitespace-separated counts, stance order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in cm.counts:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def load_confusion(path) -> ConfusionMatrix:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != NUM_CLASSES:
                raise ConfusionFormatError(f"{path}: expected 4 counts per row, got {line!r}")
            try:
                rows.append([int(p) for p in parts])
            except ValueError:
                raise ConfusionFormatError(f"{path}: non-integer count in {line!r}") from None
    if len(rows) != NUM_CLASSES:
        raise ConfusionFormatError(f"{path}: expected 4 rows, got {len(rows)}")
    return ConfusionMatrix(np.array(rows, dtype=np.int64))
