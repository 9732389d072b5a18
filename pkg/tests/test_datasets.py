from fractions import Fraction

import numpy as np
import pytest

from depoaspect import canon, datasets, ontology
from depoaspect.datasets import (
    DatasetError,
    LabeledSet,
    SplitSpec,
    SynthSpec,
    build_examples,
    class_distribution,
    largest_remainder_cuts,
    split,
    synth_corpus,
)
from depoaspect.transcript import Deposition, QAPair

TABLE5_COUNTS = {
    "B": 1455, "EB": 1468, "ED": 522, "EC": 220, "PPC": 39, "TR": 245,
    "EE": 62, "IP": 51, "DP": 80, "OPS": 1011, "PRD": 1617, "O": 2477,
}


def _deposition(n_pairs: int, dep_id: str = "d1") -> Deposition:
    pairs = [
        QAPair(index=i, question=f"Did you see item {i}?", answer=f"Yes, item {i} was there.")
        for i in range(n_pairs)
    ]
    return Deposition(id=dep_id, deponent_role="Plaintiff", pairs=pairs)


def test_build_examples_joins_pairs_and_labels():
    dep = _deposition(2)
    labels = [
        {"deposition_id": "d1", "index": 0, "label": "B"},
        {"deposition_id": "d1", "index": 1, "label": "eb"},
    ]
    labeled = build_examples([dep], labels)
    assert len(labeled) == 2
    assert labeled.examples[0].label == "B"
    assert labeled.examples[1].label == "EB"
    assert labeled.examples[0].role == "Plaintiff"


def test_build_examples_missing_pair_errors():
    with pytest.raises(DatasetError, match="d1#99"):
        build_examples([_deposition(1)], [{"deposition_id": "d1", "index": 99, "label": "B"}])


def test_build_examples_generates_ds_m_when_no_sidecar():
    labeled = build_examples([_deposition(1)], [{"deposition_id": "d1", "index": 0, "label": "B"}])
    assert labeled.examples[0].ds_m is not None
    assert labeled.examples[0].ds_m.joined.startswith("I did see item 0.")


def test_build_examples_sidecar_overrides_generation():
    ds = {("d1", 0): canon.DeclarativeText(("Custom sentence.",), "machine")}
    labeled = build_examples(
        [_deposition(1)], [{"deposition_id": "d1", "index": 0, "label": "B"}], ds_m=ds
    )
    assert labeled.examples[0].ds_m.joined == "Custom sentence."


def test_build_examples_ds_c_sidecar_enables_human_variants():
    ds_c = {("d1", 0): canon.DeclarativeText(("A human-written sentence.",), "human")}
    labeled = build_examples(
        [_deposition(1)], [{"deposition_id": "d1", "index": 0, "label": "B"}], ds_c=ds_c
    )
    ex = labeled.examples[0]
    assert ex.ds_c.provenance == "human"
    assert ex.compose(canon.InputVariant.DSC) == "A human-written sentence."
    dscm = ex.compose(canon.InputVariant.DSCM)
    assert dscm.startswith("A human-written sentence.")
    assert dscm.endswith(ex.ds_m.joined)


def test_build_examples_accounting_invariant():
    dep = _deposition(3)
    labels = [
        {"deposition_id": "d1", "index": 0, "label": "B"},
        {"deposition_id": "d1", "index": 0, "label": "EB"},  # duplicate row
        {"deposition_id": "d1", "index": 1, "label": "O"},
    ]
    labeled = build_examples([dep], labels)
    assert len(labeled) + labeled.excluded_label_rows == len(labels)
    assert labeled.unlabeled_pairs == 1


def test_labeled_set_rejects_duplicate_ids():
    ex = datasets.LabeledExample(
        id="a#0", deposition_id="a", index=0, question="Q?", answer="A.", label="B"
    )
    with pytest.raises(DatasetError):
        LabeledSet([ex, ex])


def _uniform_set(count: int, code: str = "B") -> LabeledSet:
    examples = [
        datasets.LabeledExample(
            id=f"d#{i}", deposition_id="d", index=i,
            question=f"Did you see item {i}?", answer="Yes.", label=code,
        )
        for i in range(count)
    ]
    return LabeledSet(examples)


def test_split_exact_ratios_single_class():
    train, val, test = split(_uniform_set(100), SplitSpec(seed=1))
    assert (len(train), len(val), len(test)) == (70, 20, 10)


def test_split_partition_disjoint_and_complete():
    labeled = _table5_like_set({"B": 40, "EB": 25, "O": 35})
    train, val, test = split(labeled, SplitSpec(seed=2))
    ids = [ex.id for part in (train, val, test) for ex in part.examples]
    assert len(ids) == len(set(ids)) == len(labeled)


def test_split_small_class_goes_to_train_with_warning():
    labeled = _table5_like_set({"B": 30, "PPC": 2})
    with pytest.warns(UserWarning, match="PPC"):
        train, val, test = split(labeled, SplitSpec(seed=3))
    ppc = [ex for ex in train.examples if ex.label == "PPC"]
    assert len(ppc) == 2
    assert not any(ex.label == "PPC" for ex in val.examples + test.examples)


def test_split_deterministic_and_seed_sensitive():
    labeled = _table5_like_set({"B": 50, "EB": 50})
    a = split(labeled, SplitSpec(seed=4))
    b = split(labeled, SplitSpec(seed=4))
    c = split(labeled, SplitSpec(seed=5))
    ids = lambda parts: [[ex.id for ex in p.examples] for p in parts]
    assert ids(a) == ids(b)
    assert ids(a) != ids(c)
    assert [len(p) for p in c] == [len(p) for p in a]


def test_split_by_deposition_keeps_groups_together():
    examples = []
    for d in range(10):
        for i in range(4):
            examples.append(
                datasets.LabeledExample(
                    id=f"dep{d}#{i}", deposition_id=f"dep{d}", index=i,
                    question="Did you see it?", answer="Yes.", label="B",
                )
            )
    labeled = LabeledSet(examples)
    train, val, test = split(labeled, SplitSpec(seed=6, by_deposition=True))
    for part in (train, val, test):
        deps = {ex.deposition_id for ex in part.examples}
        for other in (train, val, test):
            if other is part:
                continue
            assert deps.isdisjoint({ex.deposition_id for ex in other.examples})


def _table5_like_set(counts: dict[str, int]) -> LabeledSet:
    examples = []
    i = 0
    for code, count in counts.items():
        for _ in range(count):
            examples.append(
                datasets.LabeledExample(
                    id=f"t#{i}", deposition_id="t", index=i,
                    question=f"Did you see item {i}?", answer="Yes.", label=code,
                )
            )
            i += 1
    return LabeledSet(examples)


def oracle_cuts(count: int, ratios) -> list[int]:
    """Exact largest-remainder arithmetic with Fractions."""
    quotas = [Fraction(count) * Fraction(str(r)) for r in ratios]
    floors = [int(q) for q in quotas]
    leftover = count - sum(floors)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def test_largest_remainder_matches_fraction_oracle():
    for count in list(range(0, 50)) + [1455, 2477, 9247]:
        assert largest_remainder_cuts(count, (0.7, 0.2, 0.1)) == oracle_cuts(count, (0.7, 0.2, 0.1))


def test_split_table5_counts_within_one_of_exact():
    labeled = _table5_like_set(TABLE5_COUNTS)
    train, val, test = split(labeled, SplitSpec(seed=7))
    for code, count in TABLE5_COUNTS.items():
        got = (
            sum(1 for ex in train.examples if ex.label == code),
            sum(1 for ex in val.examples if ex.label == code),
            sum(1 for ex in test.examples if ex.label == code),
        )
        for actual, ratio in zip(got, (0.7, 0.2, 0.1)):
            assert abs(actual - count * ratio) <= 1.0
        assert sum(got) == count


def test_class_distribution_matches_published_truncation():
    labeled = _table5_like_set(TABLE5_COUNTS)
    dist = class_distribution(labeled)
    assert dist["total"] == 9247
    assert dist["classes"]["B"] == {"count": 1455, "percent": 15.73}
    assert dist["classes"]["PRD"] == {"count": 1617, "percent": 17.48}
    assert dist["classes"]["O"] == {"count": 2477, "percent": 26.78}


def test_class_distribution_percent_sums_near_100():
    # Truncation loses at most 0.01 per class (12 classes).
    labeled = _table5_like_set(TABLE5_COUNTS)
    dist = class_distribution(labeled)
    total_percent = sum(v["percent"] for v in dist["classes"].values())
    assert 100.0 - 0.12 <= total_percent <= 100.0


def test_class_distribution_empty_and_single_class():
    empty = class_distribution(LabeledSet([]))
    assert empty["total"] == 0
    assert all(v["count"] == 0 for v in empty["classes"].values())
    single = class_distribution(_uniform_set(5, "TR"))
    assert single["classes"]["TR"]["percent"] == 100.0


def test_synth_corpus_deterministic():
    spec = SynthSpec(per_class_counts=5, seed=11)
    a = synth_corpus(spec)
    b = synth_corpus(spec)
    assert [(e.id, e.question, e.answer, e.label) for e in a.examples] == [
        (e.id, e.question, e.answer, e.label) for e in b.examples
    ]


def test_synth_corpus_counts_and_labels():
    spec = SynthSpec(per_class_counts={"B": 3, "EB": 2}, seed=12)
    labeled = synth_corpus(spec)
    assert len(labeled) == 5
    assert sum(1 for e in labeled.examples if e.label == "B") == 3


def test_synth_corpus_disjoint_vocab_at_zero_overlap():
    spec = SynthSpec(per_class_counts=4, overlap_fraction=0.0, seed=13)
    pools = spec.class_pools()
    labeled = synth_corpus(spec)
    for ex in labeled.examples:
        tokens = set(datasets.tokenize(ex.question + " " + ex.answer))
        for code, pool in pools.items():
            if code == ex.label:
                continue
            assert tokens.isdisjoint(pool), (ex.label, code)


def test_synth_corpus_signal_location_answer_keeps_questions_generic():
    spec = SynthSpec(per_class_counts=4, signal_location="answer", seed=14)
    pools = spec.class_pools()
    all_class_tokens = {t for pool in pools.values() for t in pool}
    labeled = synth_corpus(spec)
    for ex in labeled.examples:
        q_tokens = set(datasets.tokenize(ex.question))
        assert q_tokens.isdisjoint(all_class_tokens)
        a_tokens = set(datasets.tokenize(ex.answer))
        assert a_tokens & set(pools[ex.label])


def test_synth_corpus_rejects_bad_spec():
    with pytest.raises(DatasetError):
        SynthSpec(overlap_fraction=1.0)
    with pytest.raises(DatasetError):
        SynthSpec(per_class_counts={"NOPE": 3})


def test_synth_word_vectors_keyed_by_token():
    a = datasets.synth_word_vectors(["b", "a"], dim=8, seed=1)
    b = datasets.synth_word_vectors(["a", "b", "c"], dim=8, seed=1)
    np.testing.assert_array_equal(a.vocabulary["a"], b.vocabulary["a"])


def test_synth_sentence_vectors_indicator_block():
    spec = SynthSpec(per_class_counts=2, seed=15)
    pools = spec.class_pools()
    token = pools["TR"][0]
    sv = datasets.synth_sentence_vectors([("x", f"the {token} was there")], pools, seed=15)
    vec = sv.map["x"]
    tr_index = ontology.code_index("TR")
    assert vec[tr_index] > 0
    assert sum(vec[i] > 0 for i in range(12)) == 1


def test_examples_jsonl_round_trip(tmp_path):
    labeled = synth_corpus(SynthSpec(per_class_counts=3, seed=16))
    path = tmp_path / "examples.jsonl"
    datasets.write_examples_jsonl(labeled, str(path))
    loaded = datasets.read_examples_jsonl(str(path))
    assert len(loaded) == len(labeled)
    for orig, back in zip(labeled.examples, loaded.examples):
        assert (orig.id, orig.question, orig.answer, orig.label) == (
            back.id, back.question, back.answer, back.label,
        )
        assert orig.ds_m.joined == back.ds_m.joined


def test_labels_jsonl_round_trip(tmp_path):
    labeled = synth_corpus(SynthSpec(per_class_counts=2, seed=17))
    path = tmp_path / "labels.jsonl"
    datasets.write_labels_jsonl(labeled, str(path))
    rows = datasets.read_labels_jsonl(str(path))
    assert len(rows) == len(labeled)
    assert all("label" in r for r in rows)


def test_split_spec_validation():
    with pytest.raises(DatasetError):
        SplitSpec(ratios=(0.5, 0.5, 0.5))
    with pytest.raises(DatasetError):
        SplitSpec(ratios=(0.7, 0.3))
    with pytest.raises(DatasetError):
        split(LabeledSet([]), SplitSpec())
