"""Canonicalization of QA pairs into declarative sentences.

Each question and answer gets a coarse dialog-act tag; the (question
act, answer act) cell of a rule grid then decides how the pair is fused
into first-person declarative sentences.  Untransformable pairs raise,
and callers fall back to plain question+answer concatenation.  The
rewrite rules only permute, delete, and substitute words from a small
fixed lexicon, so fusion never invents content tokens.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass

from .embeddings import word_tokens
from .transcript import QAPair


class QuestionDA(enum.Enum):
    YES_NO = "yes_no"
    WH = "wh"
    DECLARATIVE_CHECK = "declarative_check"
    CHOICE = "choice"
    OTHER_Q = "other_q"


class AnswerDA(enum.Enum):
    AFFIRM = "affirm"
    DENY = "deny"
    STATEMENT = "statement"
    DONT_KNOW = "dont_know"
    OTHER_A = "other_a"


class InputVariant(enum.Enum):
    Q = "q"
    A = "a"
    QA = "qa"
    DSM = "dsm"
    QADSM = "qadsm"
    DSC = "dsc"
    DSCM = "dscm"


DS_VARIANTS = {InputVariant.DSM, InputVariant.QADSM, InputVariant.DSC, InputVariant.DSCM}


class UntransformableError(ValueError):
    """The rule grid produced an empty fusion for this pair."""


class ComposeError(ValueError):
    """A declarative-sentence input is missing for a DS variant."""


@dataclass(frozen=True)
class DeclarativeText:
    sentences: tuple[str, ...]
    provenance: str  # "machine" or "human"

    @property
    def joined(self) -> str:
        return " ".join(self.sentences)


AUXILIARIES = {
    "am", "is", "are", "was", "were", "do", "does", "did",
    "have", "has", "had", "can", "could", "will", "would", "should",
}
WH_WORDS = {"who", "whom", "whose", "what", "which", "when", "where", "why", "how"}
YES_TOKENS = {"yes", "yeah", "yep", "yea", "correct", "right", "sure", "absolutely", "exactly"}
NO_TOKENS = {"no", "nope", "nah", "never"}
PRONOUNS = {
    "you", "i", "he", "she", "it", "we", "they", "there", "that", "this",
    "anyone", "anybody", "someone", "somebody",
}
DETERMINERS = {
    "the", "a", "an", "this", "that", "these", "those",
    "your", "my", "his", "her", "its", "our", "their",
}

# Deponent-perspective pronoun swap; questions address the deponent as
# "you" while attorney self-reference uses first person.  "you" in
# object position (after a preposition or "me") becomes "me".
_PRONOUN_FLIP = {
    "you": "i", "your": "my", "yours": "mine", "yourself": "myself",
    "i": "you", "me": "you", "my": "your", "mine": "yours", "myself": "yourself",
}
_OBJECT_CUES = {
    "to", "of", "for", "with", "at", "from", "by", "about", "against",
    "between", "near", "toward", "towards", "tell", "told", "ask", "asked",
    "gave", "give", "show", "showed",
}
# Second-to-first person agreement once a subject has become "i".
_AGREEMENT = {"are": "am", "were": "was"}

# Tokens the rewrite rules may introduce beyond the pair's own words.
REWRITE_LEXICON = (
    set(_PRONOUN_FLIP) | set(_PRONOUN_FLIP.values())
    | set(_AGREEMENT.values()) | {"me", "not", "don't", "know"}
)

_TAG_RE = re.compile(
    r",\s*(?:is\s+that\s+|isn't\s+that\s+|am\s+i\s+|are\s+we\s+)?"
    r"(?:correct|right|true|fair)\s*\?*\s*$",
    re.IGNORECASE,
)
_DONT_KNOW_RE = re.compile(
    r"\b(?:don't|do\s+not|can't|cannot|couldn't|could\s+not|didn't|did\s+not)"
    r"\s+(?:know|recall|remember)\b"
    r"|\bnot\s+sure\b|\bno\s+idea\b|\bno\s+recollection\b",
    re.IGNORECASE,
)
_SENT_SPLIT_RE = re.compile(
    r"(?<=[.!?])(?<!\bMr\.)(?<!\bMrs\.)(?<!\bMs\.)(?<!\bDr\.)"
    r"(?<!\bJr\.)(?<!\bSr\.)(?<!\bSt\.)\s+(?=[\"'A-Z0-9])"
)
_WORD_RE = re.compile(r"[\w']+")


def split_sentences(text: str) -> list[str]:
    """Naive sentence splitter with a small title-abbreviation guard."""
    text = " ".join(text.split())
    if not text:
        return []
    return [s for s in _SENT_SPLIT_RE.split(text) if s.strip()]


def tag_question_da(question: str) -> QuestionDA:
    """Deterministic dialog-act tag for a question."""
    words = word_tokens(question)
    if not words:
        return QuestionDA.OTHER_Q
    first = words[0]
    if first in AUXILIARIES:
        if re.search(r"\bor\b", question, re.IGNORECASE):
            return QuestionDA.CHOICE
        return QuestionDA.YES_NO
    if first in WH_WORDS:
        return QuestionDA.WH
    if _TAG_RE.search(question):
        return QuestionDA.DECLARATIVE_CHECK
    return QuestionDA.OTHER_Q


def tag_answer_da(answer: str) -> AnswerDA:
    """Deterministic dialog-act tag for an answer."""
    words = word_tokens(answer)
    if not words:
        return AnswerDA.OTHER_A
    first = words[0]
    if first in YES_TOKENS:
        return AnswerDA.AFFIRM
    if first in NO_TOKENS:
        return AnswerDA.DENY
    if _DONT_KNOW_RE.search(answer):
        return AnswerDA.DONT_KNOW
    return AnswerDA.STATEMENT


def _flip_word(word: str, prev: str | None = None) -> str:
    lower = word.lower()
    if lower == "you" and prev in _OBJECT_CUES:
        flipped = "me"
    else:
        flipped = _PRONOUN_FLIP.get(lower)
    if flipped is None:
        return word
    if word[0].isupper():
        return flipped.capitalize()
    return flipped


def _flip_pronouns(text: str) -> str:
    out = []
    last = 0
    prev: str | None = None
    for m in _WORD_RE.finditer(text):
        out.append(text[last:m.start()])
        out.append(_flip_word(m.group(0), prev))
        prev = m.group(0).lower()
        last = m.end()
    out.append(text[last:])
    text = "".join(out)
    # Subject-verb agreement once "you were/are" became "i were/are".
    text = re.sub(r"\b([Ii])\s+were\b", r"\1 was", text)
    text = re.sub(r"\b([Ii])\s+are\b", r"\1 am", text)
    text = re.sub(r"\bwere\s+([Ii])\b", r"was \1", text)
    text = re.sub(r"\bare\s+([Ii])\b", r"am \1", text)
    return text


def _finish_sentence(text: str) -> str:
    """Capitalize, rewrite a trailing '?' to '.', ensure terminal punctuation."""
    text = " ".join(text.split()).strip()
    if not text:
        return ""
    text = re.sub(r"\s*\?+$", ".", text)
    if text[-1] not in ".!":
        text += "."
    if text[0].islower():
        text = text[0].upper() + text[1:]
    # Standalone "i" is always capitalized.
    text = re.sub(r"\bi\b", "I", text)
    return text


def _question_body(question: str) -> str:
    """Question text without its trailing question mark or check tag."""
    body = question.strip()
    body = _TAG_RE.sub("", body)
    body = re.sub(r"\s*\?+\s*$", "", body)
    return body.strip()


def _flip_statement(question: str) -> str:
    """Pronoun-flipped question body as a sentence (no word reordering)."""
    return _finish_sentence(_flip_pronouns(_question_body(question)))


def _restate(question: str, negate: bool = False) -> str:
    """Move the leading auxiliary after the subject and flip pronouns.

    "Were you able to ...?" becomes "I was able to ...".  Subjects are
    detected as a single pronoun, or a determiner plus head word; other
    shapes keep a single-token subject, accepting some noise.
    """
    words = _question_body(question).split()
    if len(words) < 2:
        raise UntransformableError(f"cannot restate question {question!r}")
    aux, rest = words[0].lower(), words[1:]
    head = re.sub(r"[^\w']", "", rest[0]).lower()
    span = 2 if head in DETERMINERS and len(rest) > 2 else 1
    subject = _flip_pronouns(" ".join(rest[:span]))
    predicate = _flip_pronouns(" ".join(rest[span:]))
    subject_head = word_tokens(subject)
    if subject_head and subject_head[0] == "i":
        aux = _AGREEMENT.get(aux, aux)
    out = subject + " " + aux + (" not " if negate else " ") + predicate
    return _finish_sentence(out)


def _strip_leading_token(answer: str, tokens: set[str]) -> str:
    """Drop a bare leading yes/no token (with trailing punctuation) from an answer."""
    pattern = r"^\s*(?:%s)\b[\s,.!;:]*" % "|".join(sorted(tokens))
    return re.sub(pattern, "", answer, count=1, flags=re.IGNORECASE).strip()


def _answer_sentences(answer: str) -> list[str]:
    finished = (_finish_sentence(s) for s in split_sentences(answer))
    # Pure-punctuation fragments carry no content.
    return [s for s in finished if any(c.isalnum() for c in s)]


def to_declarative(qa: QAPair) -> DeclarativeText:
    """Fuse one QA pair into machine-generated declarative sentences (DS-M)."""
    question, answer = qa.question.strip(), qa.answer.strip()
    if not question or not answer:
        raise UntransformableError("question and answer must both be non-empty")
    q_da = tag_question_da(question)
    a_da = tag_answer_da(answer)

    sentences: list[str] = []
    if a_da is AnswerDA.DONT_KNOW:
        sentences.append("I don't know.")
        sentences.append(_flip_statement(question))
    elif q_da is QuestionDA.YES_NO and a_da is AnswerDA.AFFIRM:
        sentences.append(_restate(question))
        sentences.extend(_answer_sentences(_strip_leading_token(answer, YES_TOKENS)))
    elif q_da is QuestionDA.YES_NO and a_da is AnswerDA.DENY:
        sentences.append(_restate(question, negate=True))
        sentences.extend(_answer_sentences(_strip_leading_token(answer, NO_TOKENS)))
    elif q_da is QuestionDA.WH and a_da is AnswerDA.STATEMENT:
        if len(word_tokens(answer)) < 3:
            sentences.append(_flip_statement(question))
        sentences.extend(_answer_sentences(answer))
    elif q_da is QuestionDA.DECLARATIVE_CHECK and a_da is AnswerDA.AFFIRM:
        sentences.append(_flip_statement(question))
        sentences.extend(_answer_sentences(_strip_leading_token(answer, YES_TOKENS)))
    else:
        sentences.append(_flip_statement(question))
        sentences.extend(_answer_sentences(answer))

    sentences = [s for s in sentences if s]
    if not sentences:
        raise UntransformableError(f"untransformable pair: {question!r} / {answer!r}")
    return DeclarativeText(sentences=tuple(sentences), provenance="machine")


def fallback_concat(qa: QAPair) -> str:
    """Plain question+answer concatenation for untransformable pairs."""
    return (qa.question.strip() + " " + qa.answer.strip()).strip()


def parse_variant(text: str) -> InputVariant:
    key = text.strip().lower().replace("+", "").replace("-", "").replace("_", "")
    for variant in InputVariant:
        if variant.value == key:
            return variant
    valid = ", ".join(v.value for v in InputVariant)
    raise ComposeError(f"unknown input variant {text!r}; valid: {valid}")


def compose_input(
    qa: QAPair,
    variant: InputVariant,
    ds_m: DeclarativeText | None = None,
    ds_c: DeclarativeText | None = None,
) -> str:
    """Build the classifier input text for one pair under an input variant."""
    if variant is InputVariant.Q:
        return qa.question
    if variant is InputVariant.A:
        return qa.answer
    if variant is InputVariant.QA:
        return qa.question + " " + qa.answer
    if variant in (InputVariant.DSM, InputVariant.QADSM) and ds_m is None:
        raise ComposeError(f"variant {variant.value} requires machine declarative sentences")
    if variant in (InputVariant.DSC, InputVariant.DSCM) and ds_c is None:
        raise ComposeError(f"variant {variant.value} requires human declarative sentences")
    if variant is InputVariant.DSM:
        return ds_m.joined
    if variant is InputVariant.QADSM:
        return qa.question + " " + qa.answer + " " + ds_m.joined
    if variant is InputVariant.DSC:
        return ds_c.joined
    # DSCM concatenates human-written then machine-generated sentences.
    if ds_m is None:
        raise ComposeError("variant dscm requires machine declarative sentences")
    return ds_c.joined + " " + ds_m.joined


def write_ds_jsonl(records: list[tuple[str, int, DeclarativeText]], path: str) -> int:
    """Write a DS sidecar JSONL: {"deposition_id", "index", "ds", "provenance"}."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for dep_id, index, ds in records:
            fh.write(
                json.dumps(
                    {
                        "deposition_id": dep_id,
                        "index": index,
                        "ds": ds.joined,
                        "provenance": ds.provenance,
                    }
                )
                + "\n"
            )
            n += 1
    return n


def read_ds_jsonl(path: str) -> dict[tuple[str, int], DeclarativeText]:
    """Read a DS sidecar JSONL into a (deposition_id, index) -> DeclarativeText map."""
    out: dict[tuple[str, int], DeclarativeText] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            rec = json.loads(line)
            provenance = rec.get("provenance", "machine")
            if provenance not in ("machine", "human"):
                raise ComposeError(f"{path}:{lineno}: bad provenance {provenance!r}")
            key = (rec["deposition_id"], int(rec["index"]))
            sentences = tuple(split_sentences(rec["ds"])) or (rec["ds"],)
            out[key] = DeclarativeText(sentences=sentences, provenance=provenance)
    return out
