"""Machine-generated-text forensics toolkit.

Pipelines: adversarial attack generation and the 5+1 corpus expansion,
adversarial normalization, implicit comparison features, linear and
mixture-of-experts document detectors, CRF human/AI boundary segmentation,
evaluation metrics, and a batch CLI.
"""

from .corpus import (
    Document,
    SegmentedDocument,
    SplitAssignment,
    extract_boundaries,
    load_documents,
    stratified_split,
    word_tokenize,
)
from .attacks import (
    AttackConfig,
    AttackOutcome,
    apply_attack,
    case_swap,
    expand_corpus,
    homoglyph_replace,
    misspell,
    synonym_substitute,
    zero_width_insert,
)
from .normalizer import NormalizerConfig, build_dictionary, invert_confusables, normalize
from .features import (
    ImplicitFeatures,
    TfIdfModel,
    bleu,
    cosine_similarity,
    edit_distance,
    homoglyph_count,
    implicit_feature_vector,
    tfidf_fit,
    tfidf_transform,
    wer,
    word_overlap_ratio,
)
from .detectors import LinearModel, TrainConfig, build_implicit_classifier, predict, predict_proba, train
from .moe import MoEModel, aux_load_balance_loss, embed, init_moe, moe_forward, moe_train
from .crf import CrfModel, forward_logZ, nll_and_gradient, segment, train_crf, viterbi_decode
from .metrics import ConfusionMatrix, boundary_offset_stats, confusion, mcc, per_class_prf, render_report

__version__ = "0.1.0"
