"""Domain types for cases, predictions, and gold annotations, plus file I/O.

The on-disk case schema is package-defined (see README); it is a stand-in
format so fixtures are easy to author, not an ingester for any particular
source system's native files.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import CaseFileError, ValidationError

ST1_WORD_LIMIT = 15
ST3_WORD_LIMIT = 75
SUBTASKS = (1, 2, 3, 4)

_CITATION_RE = re.compile(r"\[\s*\d+(?:\s*,\s*\d+)*\s*\]")


def count_words(text: str) -> int:
    """Number of maximal non-whitespace runs in ``text``."""
    return len(text.split())


def contains_citation_marker(text: str) -> bool:
    """True if ``text`` carries a bracketed citation marker such as ``[2]``."""
    return _CITATION_RE.search(text) is not None


def strip_citation_markers(text: str) -> str:
    """Remove bracketed citation markers and collapse the whitespace they leave."""
    cleaned = _CITATION_RE.sub(" ", text)
    return re.sub(r"\s+", " ", cleaned).strip()


class RelevanceLabel(str, Enum):
    """Gold relevance of a note sentence to the question."""

    ESSENTIAL = "essential"
    SUPPLEMENTARY = "supplementary"
    NOT_RELEVANT = "not-relevant"


@dataclass(frozen=True)
class NoteSentence:
    """One numbered sentence of a clinical note excerpt."""

    id: int
    text: str

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"note sentence id must be >= 1, got {self.id}")
        if not self.text or self.text != self.text.strip():
            raise ValidationError(f"note sentence {self.id}: text must be non-empty with no surrounding whitespace")


@dataclass(frozen=True)
class AnswerSentence:
    """One numbered sentence of a reference answer."""

    id: int
    text: str

    def __post_init__(self):
        if self.id < 1:
            raise ValidationError(f"answer sentence id must be >= 1, got {self.id}")
        if not self.text or self.text != self.text.strip():
            raise ValidationError(f"answer sentence {self.id}: text must be non-empty with no surrounding whitespace")


@dataclass(frozen=True)
class AlignmentLink:
    """A citation edge from an answer sentence to a supporting note sentence."""

    answer_id: int
    note_id: int
    confidence: float

    def __post_init__(self):
        if self.answer_id < 1 or self.note_id < 1:
            raise ValidationError(f"link ids must be >= 1, got ({self.answer_id}, {self.note_id})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"link ({self.answer_id}, {self.note_id}): confidence {self.confidence} outside [0, 1]")

    @property
    def pair(self) -> tuple[int, int]:
        return (self.answer_id, self.note_id)


def _check_contiguous(ids: Sequence[int], context: str, what: str = "ids") -> None:
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate {what}, {context}")
    if sorted(ids) != list(range(1, len(ids) + 1)):
        raise ValidationError(f"non-contiguous {what}, {context}")


@dataclass(frozen=True)
class GoldAnnotations:
    """Gold labels for one case: sentence relevance, reference answer, links."""

    relevance: Mapping[int, RelevanceLabel] = field(default_factory=dict)
    reference_answer: tuple[AnswerSentence, ...] = ()
    alignments: tuple[tuple[int, frozenset[int]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "relevance", dict(self.relevance))
        object.__setattr__(self, "reference_answer", tuple(self.reference_answer))
        object.__setattr__(
            self, "alignments", tuple((aid, frozenset(nids)) for aid, nids in self.alignments)
        )
        if self.reference_answer:
            _check_contiguous([a.id for a in self.reference_answer], "reference answer", what="answer ids")
        answer_ids = {a.id for a in self.reference_answer}
        for aid, _ in self.alignments:
            if aid not in answer_ids:
                raise ValidationError(f"alignment refers to answer id {aid} not present in the reference answer")

    def essential_ids(self) -> frozenset[int]:
        return frozenset(i for i, lab in self.relevance.items() if lab is RelevanceLabel.ESSENTIAL)

    def supplementary_ids(self) -> frozenset[int]:
        return frozenset(i for i, lab in self.relevance.items() if lab is RelevanceLabel.SUPPLEMENTARY)

    def link_pairs(self) -> frozenset[tuple[int, int]]:
        """Gold alignment edges flattened to (answer_id, note_id) pairs."""
        return frozenset((aid, nid) for aid, nids in self.alignments for nid in nids)


@dataclass(frozen=True)
class CaseRecord:
    """One shared-task case: questions, numbered note sentences, optional gold."""

    case_id: str
    patient_narrative: str
    patient_question: str
    clinician_question: Optional[str] = None
    note_sentences: tuple[NoteSentence, ...] = ()
    gold: Optional[GoldAnnotations] = None

    def __post_init__(self):
        object.__setattr__(self, "note_sentences", tuple(self.note_sentences))
        if not self.case_id:
            raise ValidationError("case_id must be non-empty")
        if not self.patient_question.strip():
            raise ValidationError(f"empty patient_question, case {self.case_id}")
        if not self.note_sentences:
            raise ValidationError(f"empty note excerpt, case {self.case_id}")
        _check_contiguous([s.id for s in self.note_sentences], f"case {self.case_id}")
        if self.gold is not None:
            note_ids = {s.id for s in self.note_sentences}
            bad = sorted(set(self.gold.relevance) - note_ids)
            if bad:
                raise ValidationError(f"relevance labels for unknown sentence ids {bad}, case {self.case_id}")
            for aid, nids in self.gold.alignments:
                dangling = sorted(set(nids) - note_ids)
                if dangling:
                    raise ValidationError(
                        f"alignment for answer {aid} cites unknown note ids {dangling}, case {self.case_id}"
                    )

    def note_ids(self) -> frozenset[int]:
        return frozenset(s.id for s in self.note_sentences)


@dataclass(frozen=True)
class PredictionBundle:
    """Per-case predictions for whichever subtasks were run.

    st4_links are stored sorted by (answer_id, note_id) so equal link sets
    compare equal regardless of construction order.
    """

    case_id: str
    st1_question: Optional[str] = None
    st2_essential_ids: Optional[frozenset[int]] = None
    st3_answer: Optional[str] = None
    st4_links: Optional[tuple[AlignmentLink, ...]] = None

    def __post_init__(self):
        if not self.case_id:
            raise ValidationError("case_id must be non-empty")
        if self.st2_essential_ids is not None:
            object.__setattr__(self, "st2_essential_ids", frozenset(self.st2_essential_ids))
        if self.st1_question is not None:
            if count_words(self.st1_question) > ST1_WORD_LIMIT:
                raise ValidationError(f"st1 question over {ST1_WORD_LIMIT} words, case {self.case_id}")
            if not self.st1_question.rstrip().endswith("?"):
                raise ValidationError(f"st1 question does not end with '?', case {self.case_id}")
        if self.st3_answer is not None:
            if count_words(self.st3_answer) > ST3_WORD_LIMIT:
                raise ValidationError(f"st3 answer over {ST3_WORD_LIMIT} words, case {self.case_id}")
            if contains_citation_marker(self.st3_answer):
                raise ValidationError(f"st3 answer contains citation markers, case {self.case_id}")
        if self.st4_links is not None:
            links = tuple(sorted(self.st4_links, key=lambda l: l.pair))
            pairs = [l.pair for l in links]
            if len(set(pairs)) != len(pairs):
                raise ValidationError(f"duplicate alignment pairs, case {self.case_id}")
            object.__setattr__(self, "st4_links", links)

    def field_for(self, subtask: int):
        return {
            1: self.st1_question,
            2: self.st2_essential_ids,
            3: self.st3_answer,
            4: self.st4_links,
        }[subtask]


# ---------------------------------------------------------------------------
# Case file I/O


def _require(obj: Mapping, key: str, context: str):
    if key not in obj:
        raise CaseFileError(f"{context}: missing field '{key}'")
    return obj[key]


def _parse_gold(obj: Mapping, case_id: str) -> GoldAnnotations:
    context = f"case {case_id}, field 'gold'"
    relevance: dict[int, RelevanceLabel] = {}
    for key, value in (obj.get("relevance") or {}).items():
        try:
            sid = int(key)
        except (TypeError, ValueError):
            raise CaseFileError(f"{context}: relevance key '{key}' is not an integer id") from None
        try:
            relevance[sid] = RelevanceLabel(value)
        except ValueError:
            raise CaseFileError(f"{context}: unknown relevance label '{value}' for sentence {key}") from None
    answers = tuple(
        AnswerSentence(id=int(_require(a, "id", context)), text=str(_require(a, "text", context)).strip())
        for a in (obj.get("reference_answer") or [])
    )
    alignments = tuple(
        (int(_require(a, "answer_id", context)), frozenset(int(n) for n in _require(a, "note_ids", context)))
        for a in (obj.get("alignments") or [])
    )
    return GoldAnnotations(relevance=relevance, reference_answer=answers, alignments=alignments)


def load_cases(path) -> list[CaseRecord]:
    """Load a case file (see README for the schema), validating all invariants."""
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CaseFileError(f"cannot read case file {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, list):
        raise CaseFileError(f"{path}: top level must be a list of case objects")

    cases = []
    for index, entry in enumerate(doc):
        if not isinstance(entry, dict):
            raise CaseFileError(f"{path}: case #{index}: expected an object")
        case_id = str(_require(entry, "case_id", f"case #{index}"))
        context = f"case {case_id}"
        sentences = tuple(
            NoteSentence(id=int(_require(s, "id", context)), text=str(_require(s, "text", context)).strip())
            for s in _require(entry, "note_excerpt", context)
        )
        gold_obj = entry.get("gold")
        gold = _parse_gold(gold_obj, case_id) if gold_obj is not None else None
        clinician = entry.get("clinician_question")
        cases.append(
            CaseRecord(
                case_id=case_id,
                patient_narrative=str(_require(entry, "patient_narrative", context)),
                patient_question=str(_require(entry, "patient_question", context)),
                clinician_question=None if clinician is None else str(clinician),
                note_sentences=sentences,
                gold=gold,
            )
        )
    return cases


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def _submission_entry(bundle: PredictionBundle, subtask: int) -> dict:
    value = bundle.field_for(subtask)
    if value is None:
        raise ValidationError(f"missing subtask {subtask} prediction, case {bundle.case_id}")
    if subtask == 1:
        return {"clinician_question": value}
    if subtask == 2:
        return {"essential": sorted(value)}
    if subtask == 3:
        return {"answer": value}
    grouped: dict[int, list[int]] = {}
    for link in value:
        grouped.setdefault(link.answer_id, []).append(link.note_id)
    return {"links": [{"answer_id": aid, "note_ids": sorted(nids)} for aid, nids in sorted(grouped.items())]}


def write_submission(bundles: Iterable[PredictionBundle], subtask: int, path) -> None:
    """Write the per-subtask submission document (sorted by case id, atomic)."""
    if subtask not in SUBTASKS:
        raise ValueError(f"unknown subtask {subtask}")
    doc: dict[str, dict] = {}
    for bundle in bundles:
        if bundle.case_id in doc:
            raise ValidationError(f"duplicate case id '{bundle.case_id}' in submission")
        doc[bundle.case_id] = _submission_entry(bundle, subtask)
    text = json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    _atomic_write_text(Path(path), text)


def load_submission(path, subtask: int) -> list[PredictionBundle]:
    """Load a submission document back into bundles.

    The interchange schema does not carry link confidences, so reloaded
    subtask-4 links all have confidence 1.0.
    """
    if subtask not in SUBTASKS:
        raise ValueError(f"unknown subtask {subtask}")
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaseFileError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise CaseFileError(f"cannot read submission {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise CaseFileError(f"{path}: top level must be a map of case_id to prediction")

    bundles = []
    for case_id, entry in doc.items():
        context = f"case {case_id}"
        if subtask == 1:
            bundle = PredictionBundle(case_id, st1_question=str(_require(entry, "clinician_question", context)))
        elif subtask == 2:
            ids = frozenset(int(i) for i in _require(entry, "essential", context))
            bundle = PredictionBundle(case_id, st2_essential_ids=ids)
        elif subtask == 3:
            bundle = PredictionBundle(case_id, st3_answer=str(_require(entry, "answer", context)))
        else:
            links = tuple(
                AlignmentLink(int(_require(rec, "answer_id", context)), int(nid), 1.0)
                for rec in _require(entry, "links", context)
                for nid in _require(rec, "note_ids", context)
            )
            bundle = PredictionBundle(case_id, st4_links=links)
        bundles.append(bundle)
    return bundles
