"""Parsers and writers for the standard retrieval experiment file formats.

Formats handled:

  run file  ``<qid> Q0 <docid> <rank> <score> <tag>`` (whitespace separated)
  qrels     ``<qid> 0 <docid> <grade>``
  corpus    JSON Lines with keys "id", "contents", optional "title"
  queries   TSV ``<qid>\\t<text>``

Parsers are pure functions of file contents; every failure is a structured
error carrying the offending line number, and arbitrary bytes never crash
them. Blank lines are skipped and counted in a ParseWarnings sink.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import NamedTuple

from .datamodel import (
    CandidateList,
    DocCandidate,
    HarnessError,
    Qrels,
    Query,
    Ranking,
    ValidationError,
    make_candidate_list,
)


class ParseError(HarnessError):
    """A line failed to parse; message carries the path and line number."""

    def __init__(self, path, line_number: int, message: str):
        self.path = str(path)
        self.line_number = line_number
        super().__init__(f"{path}:{line_number}: {message}")


class DuplicateEntryError(ParseError):
    """A key that must be unique within a file appeared twice."""


class MissingFieldError(ParseError):
    """A required JSON key is absent."""


class MissingDocsError(HarnessError):
    """Run docs could not be resolved in the corpus."""

    def __init__(self, missing: Sequence[str]):
        self.missing = sorted(missing)
        preview = ", ".join(self.missing[:10])
        if len(self.missing) > 10:
            preview += ", ..."
        super().__init__(
            f"{len(self.missing)} run doc(s) missing from corpus: {preview}"
        )


@dataclass
class ParseWarnings:
    """Counts of tolerated oddities seen while parsing."""

    blank_lines: int = 0
    duplicate_qrel_pairs: int = 0


class RunEntry(NamedTuple):
    doc_id: str
    rank: int
    score: float


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    contents: str
    title: str | None = None

    def passage_text(self, include_title: bool = True) -> str:
        if include_title and self.title:
            return f"{self.title} {self.contents}"
        return self.contents


def _lines(path):
    with open(path, encoding="utf-8", errors="replace") as handle:
        for line_number, raw in enumerate(handle, start=1):
            yield line_number, raw.rstrip("\r\n")


def parse_run_file(
    path, warnings: ParseWarnings | None = None
) -> dict[str, list[RunEntry]]:
    """Read a six-column run file into per-query entries sorted by rank."""
    warnings = warnings if warnings is not None else ParseWarnings()
    per_query: dict[str, list[RunEntry]] = {}
    seen: set[tuple[str, str]] = set()
    for line_number, line in _lines(path):
        if not line.strip():
            warnings.blank_lines += 1
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(path, line_number, f"expected 6 fields, found {len(fields)}")
        query_id, _literal, doc_id, rank_text, score_text, _tag = fields
        try:
            rank = int(rank_text)
        except ValueError:
            raise ParseError(path, line_number, f"rank {rank_text!r} is not an integer") from None
        if rank < 1:
            raise ParseError(path, line_number, f"rank must be >= 1, got {rank}")
        try:
            score = float(score_text)
        except ValueError:
            raise ParseError(path, line_number, f"score {score_text!r} is not a number") from None
        if not math.isfinite(score):
            raise ParseError(path, line_number, f"score {score_text!r} is not finite")
        if (query_id, doc_id) in seen:
            raise DuplicateEntryError(
                path, line_number, f"duplicate (query, doc) pair ({query_id}, {doc_id})"
            )
        seen.add((query_id, doc_id))
        per_query.setdefault(query_id, []).append(RunEntry(doc_id, rank, score))
    for entries in per_query.values():
        entries.sort(key=lambda entry: entry.rank)
    return per_query


def parse_qrels(path, warnings: ParseWarnings | None = None) -> Qrels:
    """Read TREC qrels; a repeated (query, doc) pair keeps the last grade."""
    warnings = warnings if warnings is not None else ParseWarnings()
    grades: dict[str, dict[str, int]] = {}
    for line_number, line in _lines(path):
        if not line.strip():
            warnings.blank_lines += 1
            continue
        fields = line.split()
        if len(fields) != 4:
            raise ParseError(path, line_number, f"expected 4 fields, found {len(fields)}")
        query_id, _iteration, doc_id, grade_text = fields
        try:
            grade = int(grade_text)
        except ValueError:
            raise ParseError(path, line_number, f"grade {grade_text!r} is not an integer") from None
        if grade < 0:
            raise ParseError(path, line_number, f"grade must be nonnegative, got {grade}")
        query_grades = grades.setdefault(query_id, {})
        if doc_id in query_grades:
            warnings.duplicate_qrel_pairs += 1
        query_grades[doc_id] = grade
    return Qrels(grades)


def parse_corpus_jsonl(
    path, warnings: ParseWarnings | None = None
) -> dict[str, CorpusRecord]:
    """Read a JSONL corpus into a map id -> CorpusRecord."""
    warnings = warnings if warnings is not None else ParseWarnings()
    records: dict[str, CorpusRecord] = {}
    for line_number, line in _lines(path):
        if not line.strip():
            warnings.blank_lines += 1
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(path, line_number, f"invalid JSON: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(path, line_number, "expected a JSON object")
        for key in ("id", "contents"):
            if key not in obj:
                raise MissingFieldError(path, line_number, f"missing {key!r} key")
        doc_id = str(obj["id"])
        if not doc_id:
            raise ParseError(path, line_number, "empty doc id")
        if doc_id in records:
            raise DuplicateEntryError(path, line_number, f"duplicate doc id {doc_id!r}")
        title = obj.get("title")
        records[doc_id] = CorpusRecord(
            id=doc_id,
            contents=str(obj["contents"]),
            title=str(title) if title is not None else None,
        )
    return records


def parse_queries_tsv(path, warnings: ParseWarnings | None = None) -> list[Query]:
    """Read ``qid<TAB>text`` lines into Query objects, in file order."""
    warnings = warnings if warnings is not None else ParseWarnings()
    queries: list[Query] = []
    seen: set[str] = set()
    for line_number, line in _lines(path):
        if not line.strip():
            warnings.blank_lines += 1
            continue
        if "\t" not in line:
            raise ParseError(path, line_number, "expected <qid><TAB><text>")
        query_id, text = line.split("\t", 1)
        if query_id in seen:
            raise DuplicateEntryError(path, line_number, f"duplicate query id {query_id!r}")
        try:
            query = Query(query_id, text)
        except ValidationError as exc:
            raise ValidationError(f"{path}:{line_number}: {exc}") from exc
        seen.add(query_id)
        queries.append(query)
    return queries


def _check_token(value: str, what: str) -> str:
    if not value or any(ch.isspace() for ch in value):
        raise ValidationError(f"{what} {value!r} must be nonempty and whitespace-free")
    return value


def write_run_file(rankings: Sequence[Ranking], tag: str, path) -> None:
    """Write rankings as six-column run lines, queries in input order.

    Scores are serialized with six decimal places so golden files are stable
    across platforms; (query, doc, rank) round-trips exactly through
    parse_run_file.
    """
    _check_token(tag, "run tag")
    with open(path, "w", encoding="utf-8") as out:
        for ranking in rankings:
            query_id = _check_token(ranking.query_id, "query id")
            for entry in ranking.entries:
                doc_id = _check_token(entry.doc_id, "doc id")
                out.write(
                    f"{query_id} Q0 {doc_id} {entry.rank} {entry.score:.6f} {tag}\n"
                )


def assemble_experiment(
    run_path,
    corpus_path,
    queries_path,
    depth: int = 100,
    include_title: bool = True,
) -> list[CandidateList]:
    """Join a run file, corpus, and queries into per-query candidate lists.

    Each query's run entries are truncated to ``depth`` and ranks renumbered
    contiguously from 1. Docs within the truncated pool must resolve in the
    corpus; when ``include_title`` is set, passage text is title + " " +
    contents for records that carry a title.
    """
    if depth < 1:
        raise ValidationError(f"depth must be >= 1, got {depth}")
    run = parse_run_file(run_path)
    corpus = parse_corpus_jsonl(corpus_path)
    queries: Mapping[str, Query] = {q.id: q for q in parse_queries_tsv(queries_path)}

    missing_queries = [query_id for query_id in run if query_id not in queries]
    if missing_queries:
        raise HarnessError(
            "run queries missing from queries file: " + ", ".join(sorted(missing_queries))
        )
    kept = {query_id: entries[:depth] for query_id, entries in run.items()}
    missing_docs = {
        entry.doc_id
        for entries in kept.values()
        for entry in entries
        if entry.doc_id not in corpus
    }
    if missing_docs:
        raise MissingDocsError(sorted(missing_docs))

    lists: list[CandidateList] = []
    for query_id, entries in kept.items():
        docs = [
            DocCandidate(
                doc_id=entry.doc_id,
                text=corpus[entry.doc_id].passage_text(include_title),
                first_stage_rank=new_rank,
                first_stage_score=entry.score,
            )
            for new_rank, entry in enumerate(entries, start=1)
        ]
        lists.append(make_candidate_list(queries[query_id], docs))
    return lists
