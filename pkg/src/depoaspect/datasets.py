"""Labeled-example assembly, stratified splitting, class-distribution
reporting, and synthetic corpus generation.

The synthetic corpus stands in for real deposition data (which is
proprietary): each class owns a token pool, a shared confounder pool
injects vocabulary overlap, and question/answer templates exercise the
canonicalization rule grid.  At overlap 0 the classes are separable by
construction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import canon, ontology
from .autodiff import Rng, stable_seed
from .embeddings import SentenceVectors, WordEmbeddings, tokenize
from .transcript import Deposition, QAPair


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledExample:
    id: str
    deposition_id: str
    index: int
    question: str
    answer: str
    label: str
    ds_m: canon.DeclarativeText | None = None
    ds_c: canon.DeclarativeText | None = None
    role: str | None = None

    def compose(self, variant: canon.InputVariant) -> str:
        qa = QAPair(index=self.index, question=self.question, answer=self.answer)
        return canon.compose_input(qa, variant, ds_m=self.ds_m, ds_c=self.ds_c)


@dataclass
class LabeledSet:
    examples: list[LabeledExample]
    provenance: str = ""
    excluded_label_rows: int = 0
    unlabeled_pairs: int = 0

    def __post_init__(self):
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DatasetError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)
            ontology.code_index(ex.label)

    def __len__(self) -> int:
        return len(self.examples)

    def labels(self) -> list[str]:
        return [ex.label for ex in self.examples]


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.70, 0.20, 0.10)
    stratified: bool = True
    by_deposition: bool = False
    seed: int = 42

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise DatasetError("ratios must be three positive numbers")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise DatasetError(f"ratios must sum to 1, got {sum(self.ratios)}")


def _ds_m_for(pair: QAPair) -> canon.DeclarativeText:
    try:
        return canon.to_declarative(pair)
    except canon.UntransformableError:
        return canon.DeclarativeText(sentences=(canon.fallback_concat(pair),), provenance="machine")


def build_examples(
    depositions: list[Deposition],
    labels: list[dict],
    ds_m: dict[tuple[str, int], canon.DeclarativeText] | None = None,
    ds_c: dict[tuple[str, int], canon.DeclarativeText] | None = None,
) -> LabeledSet:
    """Join QA pairs with label rows and declarative-sentence sidecars.

    Every label row must reference an existing (deposition_id, index);
    duplicates of the same pair are counted as excluded (first row wins).
    Pairs without labels are excluded with a count.  DS-M is generated by
    the canonicalization rules when no sidecar entry is supplied.
    """
    pairs: dict[tuple[str, int], tuple[Deposition, QAPair]] = {}
    for dep in depositions:
        for pair in dep.pairs:
            pairs[(dep.id, pair.index)] = (dep, pair)
    missing = [
        (row["deposition_id"], int(row["index"]))
        for row in labels
        if (row["deposition_id"], int(row["index"])) not in pairs
    ]
    if missing:
        shown = ", ".join(f"{d}#{i}" for d, i in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise DatasetError(f"labels reference missing pairs: {shown}{more}")

    examples: list[LabeledExample] = []
    seen: set[tuple[str, int]] = set()
    excluded = 0
    for row in labels:
        key = (row["deposition_id"], int(row["index"]))
        if key in seen:
            excluded += 1
            continue
        seen.add(key)
        dep, pair = pairs[key]
        label = ontology.parse_label(row["label"])
        role = row.get("role") or dep.deponent_role
        if role is not None:
            role = ontology.parse_role(role).role
        ds_m_text = (ds_m or {}).get(key) or _ds_m_for(pair)
        ds_c_text = (ds_c or {}).get(key)
        examples.append(
            LabeledExample(
                id=f"{key[0]}#{key[1]}",
                deposition_id=key[0],
                index=key[1],
                question=pair.question,
                answer=pair.answer,
                label=label,
                ds_m=ds_m_text,
                ds_c=ds_c_text,
                role=role,
            )
        )
    unlabeled = len(pairs) - len(seen)
    return LabeledSet(
        examples=examples,
        provenance="joined from depositions and label rows",
        excluded_label_rows=excluded,
        unlabeled_pairs=unlabeled,
    )


def largest_remainder_cuts(count: int, ratios: tuple[float, ...]) -> list[int]:
    """Integer bucket sizes summing exactly to count, one per ratio.

    Floors each quota and hands remaining units to the largest
    fractional remainders (earlier bucket wins ties), so each bucket is
    within one of its exact quota.  Quotas use exact rational
    arithmetic so ties break by bucket order, not float noise.
    """
    quotas = [Fraction(count) * Fraction(str(float(r))) for r in ratios]
    floors = [int(q) for q in quotas]
    leftover = count - sum(floors)
    remainders = sorted(
        range(len(ratios)), key=lambda i: (-(quotas[i] - floors[i]), i)
    )
    for i in remainders[:leftover]:
        floors[i] += 1
    return floors


def split(
    labeled: LabeledSet, spec: SplitSpec | None = None
) -> tuple[LabeledSet, LabeledSet, LabeledSet]:
    """Partition into train/validation/test sets.

    Stratified mode shuffles within each class (seeded) and cuts by
    largest-remainder quotas; classes with fewer than 3 examples go
    entirely to train with a warning.  The three parts are disjoint and
    their union is the input.
    """
    spec = spec or SplitSpec()
    if not labeled.examples:
        raise DatasetError("cannot split an empty set")
    rng = Rng(stable_seed(spec.seed, "split"))
    buckets: tuple[list[LabeledExample], ...] = ([], [], [])

    def cut(items: list, counts: list[int]) -> None:
        start = 0
        for bucket, size in zip(buckets, counts):
            bucket.extend(items[start:start + size])
            start += size

    if spec.by_deposition:
        order: list[str] = []
        groups: dict[str, list[LabeledExample]] = {}
        for ex in labeled.examples:
            if ex.deposition_id not in groups:
                order.append(ex.deposition_id)
                groups[ex.deposition_id] = []
            groups[ex.deposition_id].append(ex)
        perm = [order[i] for i in rng.permutation(len(order))]
        cut([groups[d] for d in perm], largest_remainder_cuts(len(perm), spec.ratios))
        flat = tuple([ex for grp in b for ex in grp] for b in buckets)
        return tuple(
            LabeledSet(part, provenance=f"{name} split (by deposition)")
            for part, name in zip(flat, ("train", "val", "test"))
        )

    if spec.stratified:
        for code in ontology.VALID_CODES:
            members = [ex for ex in labeled.examples if ex.label == code]
            if not members:
                continue
            shuffled = [members[i] for i in rng.permutation(len(members))]
            if len(members) < 3:
                warnings.warn(
                    f"class {code} has only {len(members)} example(s); all assigned to train"
                )
                buckets[0].extend(shuffled)
                continue
            cut(shuffled, largest_remainder_cuts(len(shuffled), spec.ratios))
    else:
        shuffled = [labeled.examples[i] for i in rng.permutation(len(labeled.examples))]
        cut(shuffled, largest_remainder_cuts(len(shuffled), spec.ratios))

    return tuple(
        LabeledSet(part, provenance=f"{name} split")
        for part, name in zip(buckets, ("train", "val", "test"))
    )


def class_distribution(labeled: LabeledSet) -> dict:
    """Per-class counts with percentages truncated to two decimals."""
    counts = {code: 0 for code in ontology.VALID_CODES}
    for ex in labeled.examples:
        counts[ex.label] += 1
    total = len(labeled.examples)
    out = {"total": total, "classes": {}}
    for code in ontology.VALID_CODES:
        if total:
            percent = math.floor(10000.0 * counts[code] / total) / 100.0
        else:
            percent = 0.0
        out["classes"][code] = {"count": counts[code], "percent": percent}
    return out


# ---------------------------------------------------------------------------
# Synthetic corpora


@dataclass(frozen=True)
class SynthSpec:
    per_class_counts: dict[str, int] | int = 50
    vocab_per_class: int = 24
    overlap_fraction: float = 0.0
    signal_location: str = "qa"  # "qa", "answer", or "question"
    depositions: int = 4
    seed: int = 42

    def __post_init__(self):
        if isinstance(self.per_class_counts, dict):
            bad = [c for c in self.per_class_counts if c not in ontology.VALID_CODES]
            if bad:
                raise DatasetError(f"unknown classes in per_class_counts: {bad}")
            if any(v < 0 for v in self.per_class_counts.values()):
                raise DatasetError("per-class counts must be >= 0")
        elif self.per_class_counts < 0:
            raise DatasetError("per-class count must be >= 0")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise DatasetError("overlap_fraction must be in [0, 1)")
        if self.vocab_per_class < 1:
            raise DatasetError("vocab_per_class must be >= 1")
        if self.signal_location not in ("qa", "answer", "question"):
            raise DatasetError(f"bad signal_location {self.signal_location!r}")

    def counts(self) -> dict[str, int]:
        if isinstance(self.per_class_counts, dict):
            return {c: self.per_class_counts.get(c, 0) for c in ontology.VALID_CODES}
        return {c: self.per_class_counts for c in ontology.VALID_CODES}

    def class_pools(self) -> dict[str, tuple[str, ...]]:
        return {
            code: tuple(f"{code.lower()}thing{i}" for i in range(self.vocab_per_class))
            for code in ontology.VALID_CODES
        }

    def shared_pool(self) -> tuple[str, ...]:
        return tuple(f"common{i}" for i in range(self.vocab_per_class))


_Q_TEMPLATES = (
    "Did you see the {0} near the {1} that day?",
    "Were you aware of the {0} and the {1}?",
    "Have you mentioned the {0} before the {1}?",
    "What happened with the {0} and the {1}?",
    "Where was the {0} when you noticed the {1}?",
    "You handled the {0} by the {1}, correct?",
)
_A_TEMPLATES = (
    "Yes. The {0} was right next to the {1}.",
    "No. The {0} never reached the {1}.",
    "The {0} stayed close to the {1} that morning.",
    "I remember the {0} and then the {1} clearly.",
)


def synth_corpus(spec: SynthSpec) -> LabeledSet:
    """Deterministic synthetic labeled corpus exercising the full pipeline."""
    rng = Rng(stable_seed(spec.seed, "synth-corpus"))
    pools = spec.class_pools()
    shared = spec.shared_pool()
    roles = [r.role for r in ontology.role_catalog()]
    dep_ids = [f"synth-{i:03d}" for i in range(max(1, spec.depositions))]
    dep_index = {d: 0 for d in dep_ids}
    examples: list[LabeledExample] = []

    def draw(pool: tuple[str, ...], use_signal: bool) -> str:
        if not use_signal or rng.random() < spec.overlap_fraction:
            return shared[int(rng.integers(0, len(shared)))]
        return pool[int(rng.integers(0, len(pool)))]

    n_ex = 0
    for code, count in spec.counts().items():
        pool = pools[code]
        q_signal = spec.signal_location in ("qa", "question")
        a_signal = spec.signal_location in ("qa", "answer")
        for _ in range(count):
            q_tpl = _Q_TEMPLATES[int(rng.integers(0, len(_Q_TEMPLATES)))]
            a_tpl = _A_TEMPLATES[int(rng.integers(0, len(_A_TEMPLATES)))]
            question = q_tpl.format(draw(pool, q_signal), draw(pool, q_signal))
            answer = a_tpl.format(draw(pool, a_signal), draw(pool, a_signal))
            dep_id = dep_ids[n_ex % len(dep_ids)]
            idx = dep_index[dep_id]
            dep_index[dep_id] += 1
            pair = QAPair(index=idx, question=question, answer=answer)
            examples.append(
                LabeledExample(
                    id=f"{dep_id}#{idx}",
                    deposition_id=dep_id,
                    index=idx,
                    question=question,
                    answer=answer,
                    label=code,
                    ds_m=_ds_m_for(pair),
                    role=roles[dep_ids.index(dep_id) % len(roles)],
                )
            )
            n_ex += 1
    return LabeledSet(examples, provenance=f"synthetic corpus (seed={spec.seed})")


def synth_word_vectors(tokens, dim: int = 16, seed: int = 42) -> WordEmbeddings:
    """Deterministic per-token random vectors (keyed by token, not order)."""
    vocabulary = {}
    for token in sorted(set(tokens)):
        rng = Rng(stable_seed(seed, "wordvec", token))
        vocabulary[token] = rng.uniform(-0.5, 0.5, dim)
    return WordEmbeddings(dim=dim, vocabulary=vocabulary)


def synth_sentence_vectors(
    id_texts: list[tuple[str, str]],
    pools: dict[str, tuple[str, ...]],
    extra_dim: int = 4,
    seed: int = 42,
) -> SentenceVectors:
    """Stand-in sentence encoder: per-class token indicators plus hash noise.

    The first 12 components count class-pool token hits (normalized);
    the remainder is a deterministic hashed bag-of-words projection.
    """
    pool_sets = {code: frozenset(pool) for code, pool in pools.items()}
    dim = len(ontology.VALID_CODES) + extra_dim
    sv = SentenceVectors(dim=dim)
    noise_cache: dict[str, np.ndarray] = {}

    def noise(token: str) -> np.ndarray:
        vec = noise_cache.get(token)
        if vec is None:
            vec = Rng(stable_seed(seed, "sentvec", token)).uniform(-0.5, 0.5, extra_dim)
            noise_cache[token] = vec
        return vec

    for example_id, text in id_texts:
        tokens = tokenize(text)
        vec = np.zeros(dim)
        for i, code in enumerate(ontology.VALID_CODES):
            vec[i] = sum(1.0 for t in tokens if t in pool_sets[code])
        if tokens:
            vec[:12] /= len(tokens)
            for t in tokens:
                vec[12:] += noise(t)
            vec[12:] /= len(tokens)
        if example_id in sv.map:
            raise DatasetError(f"duplicate sentence-vector id {example_id!r}")
        sv.map[example_id] = vec
    return sv


# ---------------------------------------------------------------------------
# JSONL interchange


def read_labels_jsonl(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            for key in ("deposition_id", "index", "label"):
                if key not in row:
                    raise DatasetError(f"{path}:{lineno}: missing field {key!r}")
            rows.append(row)
    return rows


def write_labels_jsonl(labeled: LabeledSet, path: str) -> int:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in labeled.examples:
            row = {"deposition_id": ex.deposition_id, "index": ex.index, "label": ex.label}
            if ex.role:
                row["role"] = ex.role
            fh.write(json.dumps(row) + "\n")
    return len(labeled.examples)


def write_examples_jsonl(labeled: LabeledSet, path: str) -> int:
    """Full LabeledExample export (the dataset interchange format)."""
    with open(path, "w", encoding="utf-8") as fh:
        for ex in labeled.examples:
            fh.write(
                json.dumps(
                    {
                        "id": ex.id,
                        "deposition_id": ex.deposition_id,
                        "index": ex.index,
                        "question": ex.question,
                        "answer": ex.answer,
                        "ds_m": ex.ds_m.joined if ex.ds_m else None,
                        "ds_c": ex.ds_c.joined if ex.ds_c else None,
                        "label": ex.label,
                        "role": ex.role,
                    }
                )
                + "\n"
            )
    return len(labeled.examples)


def read_examples_jsonl(path: str) -> LabeledSet:
    examples = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: invalid JSON ({exc})") from None
            ds_m = rec.get("ds_m")
            ds_c = rec.get("ds_c")
            examples.append(
                LabeledExample(
                    id=rec["id"],
                    deposition_id=rec["deposition_id"],
                    index=int(rec["index"]),
                    question=rec["question"],
                    answer=rec["answer"],
                    label=ontology.parse_label(rec["label"]),
                    ds_m=canon.DeclarativeText(tuple(canon.split_sentences(ds_m)) or (ds_m,), "machine") if ds_m else None,
                    ds_c=canon.DeclarativeText(tuple(canon.split_sentences(ds_c)) or (ds_c,), "human") if ds_c else None,
                    role=rec.get("role"),
                )
            )
    return LabeledSet(examples, provenance=f"loaded from {path}")
