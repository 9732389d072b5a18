"""Deposition transcript parsing.

Raw transcript text is reduced to an ordered sequence of question/answer
pairs.  Everything else (attorney colloquy, court rulings, exhibit
markers, headers, blank runs) is recorded in the deposition's discarded
list with a reason, so that every input line is accounted for exactly
once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from . import embeddings, ontology


class TranscriptError(ValueError):
    pass


class NoQAContentError(TranscriptError):
    """No QA pairs found; carries a summary of what was discarded."""

    def __init__(self, summary: dict[str, int]):
        self.summary = summary
        detail = ", ".join(f"{reason}: {n}" for reason, n in sorted(summary.items()))
        super().__init__(f"no QA content found (discarded {detail or 'nothing'})")


@dataclass(frozen=True)
class QAPair:
    index: int
    question: str
    answer: str
    page_line: str | None = None
    line_spans: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True)
class DiscardedSpan:
    start: int
    end: int
    reason: str
    text: str


@dataclass
class Deposition:
    id: str
    deponent_role: str | None
    pairs: list[QAPair]
    discarded: list[DiscardedSpan] = field(default_factory=list)


@dataclass(frozen=True)
class ParseConfig:
    question_prefixes: tuple[str, ...] = ("Q.", "Q:", "Q ")
    answer_prefixes: tuple[str, ...] = ("A.", "A:", "A ")
    keep_unanswered: bool = False
    strip_line_numbers: bool = True

    def __post_init__(self):
        if not self.question_prefixes or not self.answer_prefixes:
            raise ValueError("marker prefix lists must be non-empty")
        if set(self.question_prefixes) & set(self.answer_prefixes):
            raise ValueError("question and answer prefixes must be disjoint")


_LINE_NUMBER_RE = re.compile(r"^\s*\d{1,4}(?:\s+|$)")
_SPEAKER_RE = re.compile(r"^(?:BY\s+)?(?:MR|MS|MRS|DR)\.?\s+[A-Z][A-Z.'\-]*\s*:")
_THE_SPEAKER_RE = re.compile(r"^THE\s+[A-Z]+\s*:")
_PAGE_RE = re.compile(r"^page\s+\d+\b", re.IGNORECASE)


@dataclass(frozen=True)
class _Line:
    text: str
    start: int  # first raw line number (1-based)
    end: int  # last raw line number


def _logical_lines(raw: str, config: ParseConfig) -> list[_Line]:
    """Raw text -> logical lines with raw line spans.

    Strips line-number columns, rejoins hyphenated wraps and
    lowercase-start soft wraps, and collapses blank runs into single
    empty logical lines (kept for line accounting).
    """
    lines: list[_Line] = []
    for lineno, raw_line in enumerate(raw.splitlines(), start=1):
        text = raw_line.rstrip()
        if config.strip_line_numbers:
            text = _LINE_NUMBER_RE.sub("", text, count=1)
        text = text.strip()
        if not text:
            if lines and not lines[-1].text:
                lines[-1] = _Line("", lines[-1].start, lineno)
            else:
                lines.append(_Line("", lineno, lineno))
            continue
        if lines and lines[-1].text:
            prev = lines[-1]
            if prev.text.endswith("-") and text[0].islower():
                lines[-1] = _Line(prev.text[:-1] + text, prev.start, lineno)
                continue
            if text[0].islower():
                lines[-1] = _Line(prev.text + " " + text, prev.start, lineno)
                continue
        lines.append(_Line(text, lineno, lineno))
    return lines


def normalize_lines(raw: str, config: ParseConfig | None = None) -> list[str]:
    """Clean raw transcript text into logical lines (blank lines dropped)."""
    config = config or ParseConfig()
    return [ln.text for ln in _logical_lines(raw, config) if ln.text]


def _match_prefix(text: str, prefixes: tuple[str, ...]) -> str | None:
    for prefix in sorted(prefixes, key=len, reverse=True):
        if text.startswith(prefix):
            return text[len(prefix):].strip()
    return None


def _classify(text: str) -> str | None:
    """Reason for discarding a non-marker line, or None for a continuation."""
    if _SPEAKER_RE.match(text) or _THE_SPEAKER_RE.match(text):
        return "colloquy"
    if text.startswith("(") or text.startswith("["):
        return "parenthetical"
    if _PAGE_RE.match(text):
        return "header"
    letters = [c for c in text if c.isalpha()]
    if letters and all(c.isupper() for c in letters):
        return "header"
    return None


def parse_transcript(
    raw: str,
    config: ParseConfig | None = None,
    deposition_id: str = "deposition",
    deponent_role: str | None = None,
) -> Deposition:
    """Parse raw transcript text into an ordered Deposition.

    Every maximal run of question-marker lines followed by answer-marker
    lines (plus their continuations) becomes one QAPair.  A new question
    before any answer closes the previous pair; unanswered questions are
    kept only under config.keep_unanswered.
    """
    config = config or ParseConfig()
    if deponent_role is not None:
        deponent_role = ontology.parse_role(deponent_role).role

    pairs: list[QAPair] = []
    discarded: list[DiscardedSpan] = []
    q_lines: list[_Line] = []
    a_lines: list[_Line] = []
    # Where unmarked continuation lines attach: "q", "a", a discarded
    # reason (continuations of colloquy etc.), or None before any block.
    target: str | None = None
    target_reason = ""

    def close_pair() -> None:
        nonlocal q_lines, a_lines
        if not q_lines:
            return
        question = " ".join(ln.text for ln in q_lines)
        answer = " ".join(ln.text for ln in a_lines)
        spans = tuple((ln.start, ln.end) for ln in q_lines + a_lines)
        if not question:
            for ln in q_lines + a_lines:
                discarded.append(DiscardedSpan(ln.start, ln.end, "empty question", ln.text))
        elif not a_lines and not config.keep_unanswered:
            for ln in q_lines:
                discarded.append(DiscardedSpan(ln.start, ln.end, "unanswered question", ln.text))
        else:
            lo = min(s for s, _ in spans)
            hi = max(e for _, e in spans)
            pairs.append(
                QAPair(
                    index=len(pairs),
                    question=question,
                    answer=answer,
                    page_line=f"{lo}-{hi}",
                    line_spans=spans,
                )
            )
        q_lines, a_lines = [], []

    for ln in _logical_lines(raw, config):
        if not ln.text:
            discarded.append(DiscardedSpan(ln.start, ln.end, "blank", ""))
            continue
        q_body = _match_prefix(ln.text, config.question_prefixes)
        a_body = None if q_body is not None else _match_prefix(ln.text, config.answer_prefixes)
        if q_body is not None:
            close_pair()
            q_lines = [_Line(q_body, ln.start, ln.end)]
            target = "q"
            continue
        if a_body is not None:
            if not q_lines:
                discarded.append(
                    DiscardedSpan(ln.start, ln.end, "answer without question", ln.text)
                )
                target, target_reason = "discard", "answer without question"
                continue
            a_lines.append(_Line(a_body, ln.start, ln.end))
            target = "a"
            continue
        reason = _classify(ln.text)
        if reason is not None:
            discarded.append(DiscardedSpan(ln.start, ln.end, reason, ln.text))
            target, target_reason = "discard", reason
            continue
        if target == "q":
            q_lines.append(ln)
        elif target == "a":
            a_lines.append(ln)
        elif target == "discard":
            discarded.append(DiscardedSpan(ln.start, ln.end, target_reason, ln.text))
        else:
            discarded.append(DiscardedSpan(ln.start, ln.end, "preamble", ln.text))
    close_pair()

    if not pairs:
        summary: dict[str, int] = {}
        for span in discarded:
            summary[span.reason] = summary.get(span.reason, 0) + 1
        raise NoQAContentError(summary)
    return Deposition(id=deposition_id, deponent_role=deponent_role, pairs=pairs, discarded=discarded)


def qa_stats(deposition: Deposition) -> dict[str, float]:
    """Pair counts and mean token lengths under the shared tokenizer."""
    n = len(deposition.pairs)
    if n == 0:
        return {
            "pair_count": 0,
            "mean_question_tokens": 0.0,
            "mean_answer_tokens": 0.0,
            "discarded_count": len(deposition.discarded),
        }
    q_tokens = sum(len(embeddings.tokenize(p.question)) for p in deposition.pairs)
    a_tokens = sum(len(embeddings.tokenize(p.answer)) for p in deposition.pairs)
    return {
        "pair_count": n,
        "mean_question_tokens": q_tokens / n,
        "mean_answer_tokens": a_tokens / n,
        "discarded_count": len(deposition.discarded),
    }


def pair_record(deposition_id: str, pair: QAPair, role: str | None) -> dict:
    """JSONL record for one QA pair (field order fixed)."""
    return {
        "deposition_id": deposition_id,
        "index": pair.index,
        "question": pair.question,
        "answer": pair.answer,
        "role": role,
    }


def write_pairs_jsonl(depositions: list[Deposition], path: str) -> int:
    """Write QA pairs as JSONL, one object per pair; returns pair count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for dep in depositions:
            for pair in dep.pairs:
                fh.write(json.dumps(pair_record(dep.id, pair, dep.deponent_role)) + "\n")
                n += 1
    return n


def read_pairs_jsonl(path: str) -> list[Deposition]:
    """Read a pairs JSONL file back into Depositions (grouped by id, in order)."""
    by_id: dict[str, Deposition] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TranscriptError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            dep_id = rec["deposition_id"]
            role = rec.get("role")
            if dep_id not in by_id:
                by_id[dep_id] = Deposition(id=dep_id, deponent_role=role, pairs=[])
            by_id[dep_id].pairs.append(
                QAPair(index=int(rec["index"]), question=rec["question"], answer=rec["answer"])
            )
    for dep in by_id.values():
        dep.pairs.sort(key=lambda p: p.index)
    return list(by_id.values())
