import pytest

from helpers import REFERENCE_CONFUSION

from stancefusion.scoring import ConfusionMatrix


@pytest.fixture
def reference_confusion() -> ConfusionMatrix:
    return ConfusionMatrix(REFERENCE_CONFUSION.copy())
