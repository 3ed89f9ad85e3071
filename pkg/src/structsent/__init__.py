"""structsent: hierarchical JSON representations of scientific sentences.

Core capabilities: the two-part structured schema (core claim plus
relation-typed hierarchy), the batch JSON-validity structural loss, the
corpus filters and deterministic splits, the reconstruction metrics
(cosine, BLEU, ROUGE-1 F1, METEOR), an LLM gateway for generating and
reconstructing, and a staged pipeline runner.
"""

from .corpus import (
    FilterConfig,
    FilterReport,
    SentenceRecord,
    SplitManifest,
    enforce_article_cap,
    filter_sentences,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .embeddings import EmbeddingVector, OfflineHashEmbedder, RemoteEmbedder
from .llmgateway import (
    ChatGateway,
    LlmRequest,
    LlmResponse,
    PromptTemplate,
    ProviderConfig,
    ReconstructionRecord,
    harvest_structured,
    load_template,
    render_prompt,
)
from .metrics import (
    EvalScores,
    SummaryStats,
    bleu,
    cosine,
    meteor,
    rouge1_f1,
    score_pair,
    summarize,
    tokenize,
)
from .penalty import (
    LossBreakdown,
    PenaltyFragment,
    ValidityMode,
    combined_loss,
    is_valid_json,
    structure_penalty,
)
from .pipeline import RunConfig, RunReport, compare_pairs, run_pipeline, run_stage
from .schema import (
    ComplianceReport,
    CoreStatement,
    HierarchyNode,
    RelationCatalog,
    StructuredRep,
    check_compliance,
    parse_structured,
    serialize_structured,
)

__version__ = "0.1.0"

__all__ = [
    "ChatGateway",
    "ComplianceReport",
    "CoreStatement",
    "EmbeddingVector",
    "EvalScores",
    "FilterConfig",
    "FilterReport",
    "HierarchyNode",
    "LlmRequest",
    "LlmResponse",
    "LossBreakdown",
    "OfflineHashEmbedder",
    "PenaltyFragment",
    "PromptTemplate",
    "ProviderConfig",
    "ReconstructionRecord",
    "RelationCatalog",
    "RemoteEmbedder",
    "RunConfig",
    "RunReport",
    "SentenceRecord",
    "SplitManifest",
    "StructuredRep",
    "SummaryStats",
    "ValidityMode",
    "bleu",
    "check_compliance",
    "combined_loss",
    "compare_pairs",
    "cosine",
    "enforce_article_cap",
    "filter_sentences",
    "harvest_structured",
    "is_valid_json",
    "load_corpus",
    "load_template",
    "meteor",
    "parse_structured",
    "render_prompt",
    "rouge1_f1",
    "run_pipeline",
    "run_stage",
    "save_corpus",
    "score_pair",
    "serialize_structured",
    "split_corpus",
    "structure_penalty",
    "summarize",
    "tokenize",
]
