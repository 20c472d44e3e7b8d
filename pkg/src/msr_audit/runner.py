"""End-to-end audit pipeline.

Takes a two-cohort corpus through tokenization, length filtering, optional
truncation, transcript construction, completion, matching, and the final
cohort comparison. Also provides parameter sweeps (shot count, temperature,
truncation length) and report emission.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from msr_audit.corpus import (
    COHORTS,
    CorpusError,
    Document,
    TokenizedDocument,
    filter_by_length,
    tokenize_document,
    truncate,
)
from msr_audit.gateway import (
    Backend,
    BackendError,
    GenerationCache,
    GenerationParams,
    backend_from_spec,
    generate_batch,
)
from msr_audit.matching import (
    FrequencyArray,
    frequency_array,
    maximal_common_substrings,
    sum_arrays,
)
from msr_audit.prompting import (
    DEFAULT_SYSTEM_PROMPT,
    GeneratedCompletion,
    Transcript,
    build_transcript,
    segment,
)
from msr_audit.stats import CohortComparison, compare_cohorts, compare_samples

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything an audit run needs besides the corpus itself.

    ``l_max=None`` means auto: truncation length divided by shot count (the
    longest reference a segment can hold). ``truncate_words`` caps every
    document at a fixed token count so cohorts are length-matched.
    """

    backend: str = "verbatim"
    model: str = "mock"
    shots: int = 6
    l_min: int = 5
    l_max: int | None = 12
    temperature: float = 0.1
    min_words: int = 1000
    truncate_words: int | None = None
    max_in_flight: int = 4
    cache_path: str | None = None
    seed: int = 0
    system_prompt: str = DEFAULT_SYSTEM_PROMPT
    lowercase: bool = False
    exact_lengths: bool = False
    max_tokens: int | None = None
    base_url: str | None = None

    @property
    def resolved_l_max(self) -> int:
        """Effective upper match-length bound after applying truncation."""
        if self.truncate_words is not None:
            cap = self.truncate_words // self.shots
            return cap if self.l_max is None else min(self.l_max, cap)
        if self.l_max is None:
            raise ValueError("l_max can only be auto (None) when truncate_words is set")
        return self.l_max

    def validate(self) -> None:
        if self.shots < 2 or self.shots % 2:
            raise ValueError(f"shots must be an even number >= 2, got {self.shots}")
        if self.l_min < 1:
            raise ValueError(f"l_min must be >= 1, got {self.l_min}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.min_words < 0:
            raise ValueError(f"min_words must be >= 0, got {self.min_words}")
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        if self.truncate_words is not None and self.truncate_words < self.shots:
            raise ValueError(
                f"truncation to {self.truncate_words} words cannot fill {self.shots} segments"
            )
        resolved = self.resolved_l_max
        if resolved < self.l_min:
            raise ValueError(
                f"resolved l_max {resolved} is below l_min {self.l_min}; "
                "raise the truncation length or lower l_min"
            )


@dataclass(frozen=True)
class DocumentMatchSummary:
    """Matching outcome for one document."""

    doc_id: str
    cohort: str
    longest_match: int
    counts: FrequencyArray


@dataclass(frozen=True)
class AuditReport:
    config: ExperimentConfig
    created_at: str
    f_pre: FrequencyArray
    f_post: FrequencyArray
    comparison: CohortComparison
    documents: tuple[DocumentMatchSummary, ...]
    failures: int
    n_docs_pre: int
    n_docs_post: int


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _resolve_backends(
    config: ExperimentConfig,
    backends: Backend | Mapping[str, Backend] | None,
) -> dict[str, Backend]:
    if backends is None:
        shared = backend_from_spec(config.backend, base_url=config.base_url)
        return {cohort: shared for cohort in COHORTS}
    if isinstance(backends, Backend):
        return {cohort: backends for cohort in COHORTS}
    mapping = dict(backends)
    missing = [cohort for cohort in COHORTS if cohort not in mapping]
    if missing:
        raise ValueError(f"backends mapping is missing cohorts: {missing}")
    return mapping


def run_audit(
    corpus: Sequence[Document],
    config: ExperimentConfig,
    backends: Backend | Mapping[str, Backend] | None = None,
) -> AuditReport:
    """Run the full audit and compare the pre and post cohorts.

    Per-document failures (too short to segment, generation errors) are
    counted and skipped; an entire cohort coming up empty is an error.
    """
    config.validate()
    backend_map = _resolve_backends(config, backends)
    params = GenerationParams(
        model=config.model,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
        seed=config.seed,
    )
    cache = GenerationCache(config.cache_path)
    failures = 0

    tokenized = [tokenize_document(doc, lowercase=config.lowercase) for doc in corpus]
    eligible = filter_by_length(tokenized, config.min_words)
    if config.truncate_words is not None:
        eligible = [truncate(doc, config.truncate_words) for doc in eligible]

    prepared: dict[str, list[tuple[int, TokenizedDocument, Transcript]]] = {
        cohort: [] for cohort in COHORTS
    }
    for position, doc in enumerate(eligible):
        try:
            bounds = segment(doc, config.shots)
            transcript = build_transcript(doc, bounds, system_prompt=config.system_prompt)
        except ValueError as exc:
            logger.warning("skipping document %r: %s", doc.id, exc)
            failures += 1
            continue
        prepared[doc.cohort].append((position, doc, transcript))

    for cohort in COHORTS:
        if not prepared[cohort]:
            raise CorpusError(f"cohort {cohort!r} is empty after filtering")

    ordered: list[tuple[int, DocumentMatchSummary]] = []
    cohort_arrays: dict[str, list[FrequencyArray]] = {cohort: [] for cohort in COHORTS}
    for cohort in COHORTS:
        entries = prepared[cohort]
        records = generate_batch(
            backend_map[cohort],
            [transcript for _, _, transcript in entries],
            params,
            max_in_flight=config.max_in_flight,
            cache=cache,
            doc_ids=[doc.id for _, doc, _ in entries],
        )
        for (position, doc, transcript), record in zip(entries, records):
            if record.error is not None:
                failures += 1
                continue
            text = record.output_text.lower() if config.lowercase else record.output_text
            completion = GeneratedCompletion.from_text(text)
            matches = maximal_common_substrings(transcript.reference_tokens, completion.tokens)
            counts = frequency_array(
                matches, config.l_min, config.resolved_l_max, exact=config.exact_lengths
            )
            ordered.append(
                (
                    position,
                    DocumentMatchSummary(
                        doc_id=doc.id,
                        cohort=cohort,
                        longest_match=max((m.length for m in matches), default=0),
                        counts=counts,
                    ),
                )
            )
            cohort_arrays[cohort].append(counts)

    for cohort in COHORTS:
        if not cohort_arrays[cohort]:
            # Documents were prepared but every generation failed, so this is
            # the backend's fault rather than the corpus's.
            raise BackendError(
                f"empty cohort results for {cohort!r}: all {len(prepared[cohort])} generations failed"
            )

    f_pre = sum_arrays(cohort_arrays["pre"])
    f_post = sum_arrays(cohort_arrays["post"])
    ordered.sort(key=lambda item: item[0])
    return AuditReport(
        config=config,
        created_at=_utcnow(),
        f_pre=f_pre,
        f_post=f_post,
        comparison=compare_cohorts(f_pre, f_post),
        documents=tuple(summary for _, summary in ordered),
        failures=failures,
        n_docs_pre=len(cohort_arrays["pre"]),
        n_docs_post=len(cohort_arrays["post"]),
    )


def sweep_shots(
    corpus: Sequence[Document],
    config: ExperimentConfig,
    shot_values: Iterable[int],
    backends: Backend | Mapping[str, Backend] | None = None,
) -> dict[int, AuditReport]:
    """Re-run the audit at each shot count. All values are validated before
    any run starts, so a bad value cannot waste earlier runs."""
    values = list(shot_values)
    if not values:
        raise ValueError("shot sweep needs at least one value")
    configs = {value: replace(config, shots=value) for value in values}
    for candidate in configs.values():
        candidate.validate()
    return {value: run_audit(corpus, configs[value], backends=backends) for value in values}


@dataclass(frozen=True)
class TemperatureSweep:
    """Per-temperature reports, plus a low-versus-high contrast when exactly
    two temperatures were swept (positive delta: cooler run matches more)."""

    reports: dict[float, AuditReport]
    low_vs_high: CohortComparison | None


def _total_counts(report: AuditReport) -> tuple[int, ...]:
    return sum_arrays([report.f_pre, report.f_post]).counts


def sweep_temperature(
    corpus: Sequence[Document],
    config: ExperimentConfig,
    temperatures: Iterable[float],
    backends: Backend | Mapping[str, Backend] | None = None,
) -> TemperatureSweep:
    values = list(temperatures)
    if not values:
        raise ValueError("temperature sweep needs at least one value")
    if len(set(values)) != len(values):
        raise ValueError("temperature sweep values must be distinct")
    configs = {value: replace(config, temperature=value) for value in values}
    for candidate in configs.values():
        candidate.validate()
    reports = {value: run_audit(corpus, configs[value], backends=backends) for value in values}
    low_vs_high = None
    if len(values) == 2:
        low, high = sorted(values)
        low_vs_high = compare_samples(_total_counts(reports[low]), _total_counts(reports[high]))
    return TemperatureSweep(reports=reports, low_vs_high=low_vs_high)


def sweep_length(
    corpus: Sequence[Document],
    config: ExperimentConfig,
    lengths: Iterable[int],
    backends: Backend | Mapping[str, Backend] | None = None,
) -> dict[int, AuditReport]:
    """Re-run the audit with every document truncated to each length."""
    values = list(lengths)
    if not values:
        raise ValueError("length sweep needs at least one value")
    configs = {value: replace(config, truncate_words=value) for value in values}
    for candidate in configs.values():
        candidate.validate()
    return {value: run_audit(corpus, configs[value], backends=backends) for value in values}


def report_to_dict(report: AuditReport) -> dict:
    """JSON-ready view of a report."""

    def array_dict(array: FrequencyArray) -> dict:
        return {"l_min": array.l_min, "l_max": array.l_max, "counts": list(array.counts)}

    return {
        "created_at": report.created_at,
        "config": asdict(report.config),
        "failures": report.failures,
        "documents_pre": report.n_docs_pre,
        "documents_post": report.n_docs_post,
        "f_pre": array_dict(report.f_pre),
        "f_post": array_dict(report.f_post),
        "comparison": asdict(report.comparison),
        "documents": [
            {
                "doc_id": summary.doc_id,
                "cohort": summary.cohort,
                "longest_match": summary.longest_match,
                "counts": list(summary.counts.counts),
            }
            for summary in report.documents
        ],
    }


def emit_report(report: AuditReport, out_dir: str | Path) -> dict[str, Path]:
    """Write summary.json and frequencies.csv under ``out_dir``.

    frequencies.csv carries no timestamp, so reruns of a deterministic
    configuration produce byte-identical files. Refuses to write anything
    when either cohort is empty.
    """
    if report.n_docs_pre < 1 or report.n_docs_post < 1:
        raise CorpusError("refusing to write a report with an empty cohort")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary_path = out / "summary.json"
    summary_path.write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    lines = ["k,count_pre,count_post"]
    for offset, k in enumerate(range(report.f_pre.l_min, report.f_pre.l_max + 1)):
        lines.append(f"{k},{report.f_pre.counts[offset]},{report.f_post.counts[offset]}")
    csv_path = out / "frequencies.csv"
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    return {"summary": summary_path, "frequencies": csv_path}
