"""Stance classification of headline-body news pairs.

Fuses three per-pair feature families - sentence-embedding comparisons,
raw term-frequency vectors and hand-crafted overlap heuristics - in a
from-scratch multi-branch feed-forward network, and evaluates predictions
under the challenge's weighted score.
"""

from .bundles import FeatureBundle, extract_bundle, extract_bundles, stack_bundles
from .corpus import (
    Corpus,
    CorpusError,
    Stance,
    StancePair,
    label_histogram,
    load_corpus,
    save_corpus,
    split,
)
from .embeddings import (
    EmbeddingStore,
    FallbackEmbedder,
    NeuralFeatures,
    fallback_embed,
    load_embeddings,
    neural_features,
)
from .external import PolarityLexicon, external_features
from .network import (
    BranchSpec,
    MlpModel,
    TrainConfig,
    build_model,
    default_branch_specs,
    forward,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .scoring import (
    ConfusionMatrix,
    EvalReport,
    confusion,
    report,
    report_from_confusion,
    score_official_weighted,
    score_paper_formula,
)
from .statistical import Vocabulary, build_vocabulary, statistical_feature, tf_vector

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusError",
    "Stance",
    "StancePair",
    "label_histogram",
    "load_corpus",
    "save_corpus",
    "split",
    "Vocabulary",
    "build_vocabulary",
    "tf_vector",
    "statistical_feature",
    "PolarityLexicon",
    "external_features",
    "EmbeddingStore",
    "FallbackEmbedder",
    "NeuralFeatures",
    "fallback_embed",
    "load_embeddings",
    "neural_features",
    "FeatureBundle",
    "extract_bundle",
    "extract_bundles",
    "stack_bundles",
    "BranchSpec",
    "MlpModel",
    "TrainConfig",
    "build_model",
    "default_branch_specs",
    "forward",
    "predict",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "ConfusionMatrix",
    "EvalReport",
    "confusion",
    "report",
    "report_from_confusion",
    "score_official_weighted",
    "score_paper_formula",
    "__version__",
]
