"""Corpus-auditing toolkit for black-box verbatim-regurgitation testing.

Builds faux multi-turn transcripts from source documents, elicits the held-out
final segment from a chat-completions backend (live or mock), counts word-level
maximal verbatim matches against the reference, and compares match-frequency
distributions between a likely-trained cohort and a post-cutoff control cohort
with non-parametric statistics.
"""

from msr_audit.corpus import (
    CorpusError,
    Document,
    TokenizedDocument,
    filter_by_length,
    load_corpus,
    tokenize,
    tokenize_document,
    truncate,
)
from msr_audit.gateway import (
    Backend,
    BackendError,
    GenerationCache,
    GenerationParams,
    GenerationRecord,
    LiveBackend,
    ObliviousBackend,
    PartialCopyBackend,
    VerbatimBackend,
    backend_from_spec,
    generate,
    generate_batch,
    request_key,
)
from msr_audit.matching import (
    FrequencyArray,
    MaximalMatch,
    frequency_array,
    longest_common_substring_len,
    maximal_common_substrings,
    sum_arrays,
)
from msr_audit.prompting import (
    DEFAULT_SYSTEM_PROMPT,
    GeneratedCompletion,
    Segmentation,
    Transcript,
    Turn,
    build_transcript,
    format_transcript,
    render_segment,
    segment,
)
from msr_audit.runner import (
    AuditReport,
    DocumentMatchSummary,
    ExperimentConfig,
    TemperatureSweep,
    emit_report,
    report_to_dict,
    run_audit,
    sweep_length,
    sweep_shots,
    sweep_temperature,
)
from msr_audit.stats import (
    CohortComparison,
    chi2_sf,
    cliffs_delta,
    compare_cohorts,
    compare_samples,
    kruskal_wallis,
    ks_distance,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "Backend",
    "BackendError",
    "CohortComparison",
    "CorpusError",
    "DEFAULT_SYSTEM_PROMPT",
    "Document",
    "DocumentMatchSummary",
    "ExperimentConfig",
    "FrequencyArray",
    "GeneratedCompletion",
    "GenerationCache",
    "GenerationParams",
    "GenerationRecord",
    "LiveBackend",
    "MaximalMatch",
    "ObliviousBackend",
    "PartialCopyBackend",
    "Segmentation",
    "TemperatureSweep",
    "TokenizedDocument",
    "Transcript",
    "Turn",
    "VerbatimBackend",
    "backend_from_spec",
    "build_transcript",
    "chi2_sf",
    "cliffs_delta",
    "compare_cohorts",
    "compare_samples",
    "emit_report",
    "filter_by_length",
    "format_transcript",
    "frequency_array",
    "generate",
    "generate_batch",
    "kruskal_wallis",
    "ks_distance",
    "load_corpus",
    "longest_common_substring_len",
    "maximal_common_substrings",
    "render_segment",
    "report_to_dict",
    "request_key",
    "run_audit",
    "segment",
    "sum_arrays",
    "sweep_length",
    "sweep_shots",
    "sweep_temperature",
    "tokenize",
    "tokenize_document",
    "truncate",
]
