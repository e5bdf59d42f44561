"""Metric differential privacy for bag-of-words documents."""

__version__ = "0.1.0"

from .embeddings import EmbeddingTable, load_embeddings, save_embeddings
from .errors import (
    CorpusError,
    DimensionMismatchError,
    DocDPError,
    EmbeddingFormatError,
    EmptyDocumentError,
    EnumerationBoundError,
    OOVError,
)
from .laplace import (
    NoiseSample,
    log_density_unnormalized,
    sample_noise,
    sample_radius,
    sample_unit_sphere,
)
from .obfuscator import (
    ObfuscationReport,
    PreprocessConfig,
    fix_length,
    obfuscate_corpus,
    obfuscate_document,
    obfuscate_word,
    preprocess,
)
from .transport import (
    BowDocument,
    CostMatrix,
    FlowMatrix,
    PermutationMatching,
    brute_force_min_permutation,
    cost_matrix,
    transport_simplex,
    wmd,
    wmd_assignment,
    wmd_result,
)
from .verifier import (
    PrivacyCheckResult,
    check_document_indistinguishability,
    check_word_privacy,
    document_distribution,
    exact_word_distribution_1d,
    mc_word_distribution,
)
