import numpy as np
import pytest

from depoaspect import evaluation, ontology
from depoaspect.evaluation import (
    EvalError,
    confusion,
    error_report,
    evaluate,
    paired_permutation_test,
    prf1,
)

LABELS2 = ("x", "y")


def brute_force_prf1(matrix: np.ndarray) -> dict:
    """Independent re-derivation straight from the definitions."""
    n = matrix.shape[0]
    per = {}
    for c in range(n):
        tp = matrix[c][c]
        fp = sum(matrix[g][c] for g in range(n)) - tp
        fn = sum(matrix[c][p] for p in range(n)) - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per[c] = (precision, recall, f1, tp + fn)
    total = sum(per[c][3] for c in range(n))
    weighted = sum(per[c][2] * per[c][3] for c in range(n)) / total if total else 0.0
    present = [c for c in range(n) if per[c][3] > 0]
    macro = sum(per[c][2] for c in present) / len(present) if present else 0.0
    accuracy = sum(matrix[c][c] for c in range(n)) / total if total else 0.0
    return {"per": per, "weighted": weighted, "macro": macro, "accuracy": accuracy}


def test_confusion_diagonal_on_perfect_predictions():
    golds = ["B", "EB", "O", "TR", "B"]
    matrix = confusion(golds, golds)
    assert matrix.sum() == 5
    assert np.trace(matrix) == 5


def test_confusion_empty():
    matrix = confusion([], [])
    assert matrix.shape == (12, 12)
    assert matrix.sum() == 0


def test_confusion_hand_counted_errors():
    golds = ["B"] * 5 + ["EB"] * 5
    preds = ["B"] * 4 + ["O"] + ["EB"] * 4 + ["B"]
    matrix = confusion(golds, preds)
    assert matrix.sum() - np.trace(matrix) == 2
    assert matrix[ontology.code_index("B"), ontology.code_index("O")] == 1
    assert matrix[ontology.code_index("EB"), ontology.code_index("B")] == 1


def test_confusion_length_mismatch():
    with pytest.raises(EvalError):
        confusion(["B"], ["B", "EB"])


def test_prf1_perfect():
    report = evaluate(["B", "EB", "O"], ["B", "EB", "O"])
    assert report.weighted_f1 == 1.0
    assert report.accuracy == 1.0
    for code in ("B", "EB", "O"):
        assert report.per_class[code]["f1"] == 1.0


def test_prf1_two_class_hand_computed():
    matrix = np.array([[8, 2], [3, 7]])
    report = prf1(matrix, LABELS2)
    assert report.per_class["x"]["precision"] == pytest.approx(8 / 11)
    assert report.per_class["x"]["recall"] == pytest.approx(0.8)
    expected_f1 = 2 * (8 / 11) * 0.8 / ((8 / 11) + 0.8)
    assert report.per_class["x"]["f1"] == pytest.approx(expected_f1, abs=1e-4)
    assert report.per_class["x"]["f1"] == pytest.approx(0.7619, abs=1e-4)


def test_prf1_zero_support_convention():
    matrix = np.zeros((12, 12), dtype=int)
    matrix[0, 0] = 10
    report = prf1(matrix)
    assert report.per_class["EB"]["f1"] == 0.0
    assert report.per_class["EB"]["support"] == 0
    assert report.macro_f1 == 1.0  # only class B present
    assert report.weighted_f1 == 1.0


def test_prf1_agrees_with_brute_force_on_random_matrices():
    rng = np.random.default_rng(99)
    for _ in range(200):
        matrix = rng.integers(0, 30, (12, 12))
        report = prf1(matrix)
        ref = brute_force_prf1(matrix)
        assert report.weighted_f1 == pytest.approx(ref["weighted"], abs=1e-12)
        assert report.macro_f1 == pytest.approx(ref["macro"], abs=1e-12)
        assert report.accuracy == pytest.approx(ref["accuracy"], abs=1e-12)


def test_weighted_f1_identity_holds():
    rng = np.random.default_rng(3)
    matrix = rng.integers(0, 20, (12, 12))
    report = prf1(matrix)
    total = sum(report.per_class[c]["support"] for c in report.labels)
    identity = sum(report.per_class[c]["f1"] * report.per_class[c]["support"] for c in report.labels) / total
    assert report.weighted_f1 == pytest.approx(identity, abs=1e-12)


def test_micro_accuracy_is_trace_over_total():
    rng = np.random.default_rng(4)
    matrix = rng.integers(0, 9, (12, 12))
    report = prf1(matrix)
    assert report.accuracy == pytest.approx(np.trace(matrix) / matrix.sum(), abs=1e-12)


def test_weighted_f1_invariant_to_class_order():
    rng = np.random.default_rng(5)
    golds = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 300)]
    preds = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 300)]
    base = evaluate(golds, preds).weighted_f1
    permuted_labels = tuple(reversed(ontology.VALID_CODES))
    permuted = prf1(confusion(golds, preds, permuted_labels), permuted_labels).weighted_f1
    assert base == pytest.approx(permuted, abs=1e-12)


def test_permutation_identical_predictions_p_is_one():
    golds = ["B", "EB", "O"] * 10
    preds = ["B", "O", "O"] * 10
    assert paired_permutation_test(preds, preds, golds, n_iter=50, seed=1) == 1.0


def test_permutation_perfect_vs_constant_wrong():
    golds = (["B"] * 100 + ["EB"] * 100)
    perfect = list(golds)
    wrong = ["O"] * 200
    p = paired_permutation_test(perfect, wrong, golds, n_iter=200, seed=2)
    assert p <= 0.01


def test_permutation_p_bounds():
    rng = np.random.default_rng(6)
    golds = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 40)]
    a = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 40)]
    b = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 40)]
    n_iter = 99
    p = paired_permutation_test(a, b, golds, n_iter=n_iter, seed=7)
    assert 1 / (n_iter + 1) <= p <= 1.0


def test_permutation_deterministic_under_seed():
    rng = np.random.default_rng(8)
    golds = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 60)]
    a = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 60)]
    b = [ontology.VALID_CODES[i] for i in rng.integers(0, 12, 60)]
    p1 = paired_permutation_test(a, b, golds, n_iter=300, seed=11)
    p2 = paired_permutation_test(a, b, golds, n_iter=300, seed=11)
    assert p1 == p2


def test_permutation_length_mismatch():
    with pytest.raises(EvalError):
        paired_permutation_test(["B"], ["B", "EB"], ["B"], n_iter=10)


def test_error_report_empty_for_diagonal():
    report = evaluate(["B", "EB"], ["B", "EB"])
    assert error_report(report, [("B", "B", "t1"), ("EB", "EB", "t2")]) == []


def test_error_report_dominant_pair_first():
    golds = ["B"] * 6 + ["EB"]
    preds = ["OPS"] * 5 + ["B"] + ["ED"]
    report = evaluate(golds, preds)
    examples = list(zip(golds, preds, [f"text{i}" for i in range(7)]))
    out = error_report(report, examples, k=10)
    assert out[0]["gold"] == "B"
    assert out[0]["predicted"] == "OPS"
    assert out[0]["count"] == 5
    assert len(out[0]["samples"]) == 3


def test_error_report_k_larger_than_cells():
    golds = ["B", "EB"]
    preds = ["EB", "B"]
    report = evaluate(golds, preds)
    out = error_report(report, list(zip(golds, preds, ["a", "b"])), k=50)
    assert len(out) == 2


def test_report_table_and_json_render():
    report = evaluate(["B", "EB", "O", "O"], ["B", "EB", "O", "B"])
    table = evaluation.report_table(report)
    assert "Avg." in table
    assert "support-weighted" in table
    payload = evaluation.report_json(report)
    assert '"weighted_f1"' in payload
