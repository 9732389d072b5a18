import numpy as np
import pytest

from depoaspect import autodiff as ad
from depoaspect.autodiff import Rng, Tape, Tensor


def ce_of(vec: Tensor, gold: int = 0):
    def f(tape):
        loss, _ = ad.softmax_cross_entropy(vec, gold, tape)
        return loss
    return f


# ---------------------------------------------------------------------------
# conv1d_ngram


def test_conv_zero_filters_zero_output():
    seq = Tensor(Rng(0).uniform(-1, 1, (4, 3)))
    out = ad.conv1d_ngram(seq, Tensor(np.zeros((2, 6))), Tensor(np.zeros(2)), 2)
    assert np.all(out.data == 0.0)
    assert out.data.shape == (3, 2)


def test_conv_hand_computed_dot_products():
    # L=3, D=2, n=2, K=1 with hand-chosen weights.
    seq = Tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    filters = Tensor([[1.0, -1.0, 0.5, 2.0]])
    bias = Tensor([0.25])
    out = ad.conv1d_ngram(seq, filters, bias, 2)
    # row0: 1*1 + 2*(-1) + 3*0.5 + 4*2 + 0.25 = 8.75
    # row1: 3*1 + 4*(-1) + 5*0.5 + 6*2 + 0.25 = 13.75
    np.testing.assert_allclose(out.data, [[8.75], [13.75]])


def test_conv_unigram_identity():
    seq = Tensor(Rng(1).uniform(-1, 1, (4, 3)))
    out = ad.conv1d_ngram(seq, Tensor(np.eye(3)), Tensor(np.zeros(3)), 1)
    np.testing.assert_array_equal(out.data, seq.data)


def test_conv_sequence_shorter_than_window_errors():
    seq = Tensor(np.zeros((2, 3)))
    with pytest.raises(ad.ShapeError, match="shorter than window"):
        ad.conv1d_ngram(seq, Tensor(np.zeros((1, 9))), Tensor(np.zeros(1)), 3)


def test_conv_gradients():
    rng = Rng(2)
    seq = Tensor(rng.uniform(-1, 1, (5, 3)))
    filters = Tensor(rng.uniform(-1, 1, (2, 6)))
    bias = Tensor(rng.uniform(-1, 1, 2))

    def f(tape):
        out = ad.conv1d_ngram(seq, filters, bias, 2, tape)
        pooled = ad.maxpool_over_time(out, 4, tape)
        loss, _ = ad.softmax_cross_entropy(pooled, 1, tape)
        return loss

    assert ad.grad_check(f, [seq, filters, bias]) <= 1e-4


# ---------------------------------------------------------------------------
# maxpool_over_time


def test_maxpool_definition():
    out = ad.maxpool_over_time(Tensor([[1.0, 5.0], [3.0, 2.0]]), 2)
    np.testing.assert_array_equal(out.data, [3.0, 5.0])


def test_maxpool_single_row():
    out = ad.maxpool_over_time(Tensor([[7.0, -1.0]]), 1)
    np.testing.assert_array_equal(out.data, [7.0, -1.0])


def test_maxpool_mask_restricts_rows():
    out = ad.maxpool_over_time(Tensor([[1.0], [2.0], [99.0]]), 2)
    assert out.data[0] == 2.0


def test_maxpool_zero_mask_errors():
    with pytest.raises(ad.ShapeError):
        ad.maxpool_over_time(Tensor([[1.0]]), 0)


def test_maxpool_tie_routes_to_first_occurrence():
    # Column 0 ties between both rows; the gradient must land on row 0.
    x = Tensor([[1.0, 0.0], [1.0, 2.0]])
    tape = Tape()
    out = ad.maxpool_over_time(x, 2, tape)
    loss, _ = ad.softmax_cross_entropy(out, 0, tape)
    ad.backward(tape, loss)
    assert x.grad[0, 0] != 0.0
    assert x.grad[1, 0] == 0.0


def test_maxpool_gradient_matches_finite_differences():
    x = Tensor(Rng(3).uniform(-1, 1, (4, 3)))

    def f(tape):
        pooled = ad.maxpool_over_time(x, 3, tape)
        loss, _ = ad.softmax_cross_entropy(pooled, 2, tape)
        return loss

    assert ad.grad_check(f, [x]) <= 1e-4


# ---------------------------------------------------------------------------
# lstm_cell_step


def test_lstm_zero_params_zero_state():
    params = ad.LstmParams(
        Tensor(np.zeros((8, 3))), Tensor(np.zeros((8, 2))), Tensor(np.zeros(8))
    )
    h, c = ad.lstm_cell_step(Tensor(np.ones(3)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), params)
    np.testing.assert_array_equal(h.data, 0.0)
    np.testing.assert_array_equal(c.data, 0.0)


def test_lstm_hand_evaluated_gates():
    # H=2, D=1: z = w_x*x + b, gates evaluated with explicit formulas here.
    w_x = np.arange(8, dtype=float).reshape(8, 1) * 0.1
    b = np.linspace(-0.2, 0.5, 8)
    params = ad.LstmParams(Tensor(w_x), Tensor(np.zeros((8, 2))), Tensor(b))
    x = np.array([0.7])
    c_prev = np.array([0.3, -0.4])
    h, c = ad.lstm_cell_step(Tensor(x), Tensor(np.zeros(2)), Tensor(c_prev), params)
    z = w_x @ x + b
    sig = lambda v: 1.0 / (1.0 + np.exp(-v))
    i, f = sig(z[0:2]), sig(z[2:4])
    g, o = np.tanh(z[4:6]), sig(z[6:8])
    c_ref = f * c_prev + i * g
    h_ref = o * np.tanh(c_ref)
    np.testing.assert_allclose(c.data, c_ref, atol=1e-12)
    np.testing.assert_allclose(h.data, h_ref, atol=1e-12)


def test_lstm_gradients():
    rng = Rng(4)
    params = ad.LstmParams.init(Rng(5), 3, 2)
    x = Tensor(rng.uniform(-1, 1, 3))
    h0 = Tensor(rng.uniform(-1, 1, 2))
    c0 = Tensor(rng.uniform(-1, 1, 2))

    def f(tape):
        h1, c1 = ad.lstm_cell_step(x, h0, c0, params, tape)
        h2, _ = ad.lstm_cell_step(x, h1, c1, params, tape)
        loss, _ = ad.softmax_cross_entropy(h2, 0, tape)
        return loss

    checked = [x, h0, c0, params.w_x, params.w_h, params.b]
    assert ad.grad_check(f, checked) <= 1e-4


# ---------------------------------------------------------------------------
# bilstm_sequence


def test_bilstm_single_step_matches_cell():
    fwd = ad.LstmParams.init(Rng(6), 3, 2)
    bwd = ad.LstmParams.init(Rng(7), 3, 2)
    seq = Tensor(Rng(8).uniform(-1, 1, (1, 3)))
    out = ad.bilstm_sequence(seq, fwd, bwd)
    zeros = Tensor(np.zeros(2))
    x = Tensor(seq.data[0].copy())
    hf, _ = ad.lstm_cell_step(x, zeros, zeros, fwd)
    hb, _ = ad.lstm_cell_step(x, zeros, zeros, bwd)
    np.testing.assert_allclose(out.data[0], np.concatenate([hf.data, hb.data]), atol=1e-12)


def test_bilstm_zero_params_zero_output():
    zero = ad.LstmParams(Tensor(np.zeros((8, 3))), Tensor(np.zeros((8, 2))), Tensor(np.zeros(8)))
    out = ad.bilstm_sequence(Tensor(np.ones((4, 3))), zero, zero)
    np.testing.assert_array_equal(out.data, np.zeros((4, 4)))


def test_bilstm_reversal_symmetry():
    shared = ad.LstmParams.init(Rng(9), 3, 2)
    seq = Tensor(Rng(10).uniform(-1, 1, (5, 3)))
    out = ad.bilstm_sequence(seq, shared, shared).data
    rev_out = ad.bilstm_sequence(Tensor(seq.data[::-1].copy()), shared, shared).data
    swapped = np.concatenate([rev_out[:, 2:], rev_out[:, :2]], axis=1)[::-1]
    np.testing.assert_allclose(out, swapped, atol=1e-12)


def test_bilstm_gradients():
    fwd = ad.LstmParams.init(Rng(11), 2, 2)
    bwd = ad.LstmParams.init(Rng(12), 2, 2)
    seq = Tensor(Rng(13).uniform(-1, 1, (3, 2)))
    scorer = Tensor(Rng(14).uniform(-1, 1, 4))

    def f(tape):
        states = ad.bilstm_sequence(seq, fwd, bwd, tape)
        context, _ = ad.attention_pool(states, scorer, tape)
        loss, _ = ad.softmax_cross_entropy(context, 1, tape)
        return loss

    checked = [seq, scorer] + fwd.tensors() + bwd.tensors()
    assert ad.grad_check(f, checked) <= 1e-4


# ---------------------------------------------------------------------------
# attention_pool


def test_attention_zero_scorer_uniform_weights():
    states = Tensor(Rng(15).uniform(-1, 1, (4, 3)))
    context, weights = ad.attention_pool(states, Tensor(np.zeros(3)))
    np.testing.assert_allclose(weights, 0.25)
    np.testing.assert_allclose(context.data, states.data.mean(axis=0), atol=1e-12)


def test_attention_single_row():
    states = Tensor([[1.0, 2.0]])
    context, weights = ad.attention_pool(states, Tensor([0.3, -0.4]))
    np.testing.assert_allclose(weights, [1.0])
    np.testing.assert_allclose(context.data, [1.0, 2.0])


def test_attention_weights_sum_to_one_property():
    for seed in range(20):
        rng = Rng(seed)
        states = Tensor(rng.uniform(-3, 3, (5, 4)))
        scorer = Tensor(rng.uniform(-3, 3, 4))
        _, weights = ad.attention_pool(states, scorer)
        assert weights.min() >= 0.0
        assert abs(weights.sum() - 1.0) <= 1e-9


def test_attention_gradients():
    states = Tensor(Rng(16).uniform(-1, 1, (4, 3)))
    scorer = Tensor(Rng(17).uniform(-1, 1, 3))

    def f(tape):
        context, _ = ad.attention_pool(states, scorer, tape)
        loss, _ = ad.softmax_cross_entropy(context, 0, tape)
        return loss

    assert ad.grad_check(f, [states, scorer]) <= 1e-4


# ---------------------------------------------------------------------------
# softmax_cross_entropy


def test_softmax_uniform_logits():
    loss, probs = ad.softmax_cross_entropy(Tensor(np.zeros(12)), 3)
    assert float(loss.data) == pytest.approx(np.log(12.0), abs=1e-12)
    np.testing.assert_allclose(probs, 1.0 / 12.0)


def test_softmax_large_logits_stable():
    loss, probs = ad.softmax_cross_entropy(Tensor([1000.0, 0.0]), 0)
    assert float(loss.data) == pytest.approx(0.0, abs=1e-12)
    assert np.isfinite(probs).all()


def test_softmax_gold_out_of_range():
    with pytest.raises(ad.ShapeError):
        ad.softmax_cross_entropy(Tensor([0.0, 1.0]), 2)


def test_softmax_gradient_is_probs_minus_onehot():
    logits = Tensor(Rng(18).uniform(-2, 2, 5))
    tape = Tape()
    loss, probs = ad.softmax_cross_entropy(logits, 2, tape)
    ad.backward(tape, loss)
    onehot = np.zeros(5)
    onehot[2] = 1.0
    np.testing.assert_allclose(logits.grad, probs - onehot, atol=1e-12)
    assert ad.grad_check(ce_of(logits, 2), [logits]) <= 1e-4


def test_softmax_probabilities_sum_to_one():
    for seed in range(10):
        _, probs = ad.softmax_cross_entropy(Tensor(Rng(seed).uniform(-5, 5, 12)), 0)
        assert abs(probs.sum() - 1.0) <= 1e-9
        assert probs.min() >= 0.0


# ---------------------------------------------------------------------------
# dense


def test_dense_zero_weights_relu():
    out = ad.dense(Tensor([1.0, -2.0]), Tensor(np.zeros((3, 2))), Tensor(np.zeros(3)), "relu")
    np.testing.assert_array_equal(out.data, np.zeros(3))


def test_dense_identity_passthrough():
    x = Tensor([0.5, -1.5])
    out = ad.dense(x, Tensor(np.eye(2)), Tensor(np.zeros(2)), "identity")
    np.testing.assert_array_equal(out.data, x.data)


def test_dense_unknown_activation():
    with pytest.raises(ValueError, match="activation"):
        ad.dense(Tensor([1.0]), Tensor([[1.0]]), Tensor([0.0]), "softplus")


@pytest.mark.parametrize("activation", ["relu", "tanh", "logistic", "identity"])
def test_dense_gradients(activation):
    rng = Rng(19)
    x = Tensor(rng.uniform(-1, 1, 3))
    w = Tensor(rng.uniform(-1, 1, (4, 3)))
    b = Tensor(rng.uniform(-1, 1, 4))

    def f(tape):
        out = ad.dense(x, w, b, activation, tape)
        loss, _ = ad.softmax_cross_entropy(out, 1, tape)
        return loss

    assert ad.grad_check(f, [x, w, b]) <= 1e-4


# ---------------------------------------------------------------------------
# dropout


def test_dropout_rate_zero_identity():
    x = Tensor([1.0, 2.0])
    out = ad.dropout(x, 0.0, Rng(0), True)
    assert out is x


def test_dropout_inference_identity():
    x = Tensor([1.0, 2.0])
    assert ad.dropout(x, 0.9, Rng(0), False) is x


def test_dropout_rate_one_rejected():
    with pytest.raises(ValueError):
        ad.dropout(Tensor([1.0]), 1.0, Rng(0), True)


def test_dropout_preserves_expectation():
    x = Tensor(np.full(8, 2.0))
    rng = Rng(123)
    total = np.zeros(8)
    trials = 10000
    for _ in range(trials):
        total += ad.dropout(x, 0.3, rng, True).data
    mean = total / trials
    np.testing.assert_allclose(mean, x.data, rtol=0.02)


def test_dropout_same_seed_same_masks():
    x = Tensor(np.ones(32))
    a = ad.dropout(x, 0.5, Rng(7), True).data
    b = ad.dropout(x, 0.5, Rng(7), True).data
    np.testing.assert_array_equal(a, b)


def test_dropout_gradient_through_mask():
    x = Tensor(Rng(20).uniform(-1, 1, 6))

    def f(tape):
        out = ad.dropout(x, 0.4, Rng(77), True, tape)
        loss, _ = ad.softmax_cross_entropy(out, 0, tape)
        return loss

    assert ad.grad_check(f, [x]) <= 1e-4


# ---------------------------------------------------------------------------
# backward and tape


def test_backward_square():
    x = Tensor(3.0)
    tape = Tape()
    y = ad.mul(x, x, tape)
    ad.backward(tape, y)
    assert float(x.grad) == pytest.approx(6.0)


def test_backward_product():
    x, y = Tensor(2.0), Tensor(5.0)
    tape = Tape()
    z = ad.mul(x, y, tape)
    ad.backward(tape, z)
    assert float(x.grad) == pytest.approx(5.0)
    assert float(y.grad) == pytest.approx(2.0)


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0])
    with pytest.raises(ad.ShapeError):
        ad.backward(Tape(), x)


def test_gradients_accumulate_over_uses():
    x = Tensor(3.0)
    tape = Tape()
    a = ad.mul(x, x, tape)       # x^2
    b = ad.add_scalars(a, x, tape)  # x^2 + x
    ad.backward(tape, b)
    assert float(x.grad) == pytest.approx(7.0)  # 2x + 1


# ---------------------------------------------------------------------------
# helper primitives


def test_embedding_lookup_gradient_scatters():
    table = Tensor(Rng(21).uniform(-1, 1, (5, 3)))

    def f(tape):
        rows = ad.embedding_lookup(table, [1, 3, 1], tape)
        pooled = ad.maxpool_over_time(rows, 3, tape)
        loss, _ = ad.softmax_cross_entropy(pooled, 0, tape)
        return loss

    assert ad.grad_check(f, [table]) <= 1e-4


def test_concat_vecs_round_trip_gradient():
    a = Tensor(Rng(22).uniform(-1, 1, 2))
    b = Tensor(Rng(23).uniform(-1, 1, 3))

    def f(tape):
        joined = ad.concat_vecs([a, b], tape)
        loss, _ = ad.softmax_cross_entropy(joined, 4, tape)
        return loss

    assert ad.grad_check(f, [a, b]) <= 1e-4


def test_l2_penalty_value_and_gradient():
    w = Tensor([[1.0, -2.0], [0.5, 0.0]])
    pen = ad.l2_penalty([w], 0.1)
    assert float(pen.data) == pytest.approx(0.1 * (1 + 4 + 0.25))
    assert ad.grad_check(lambda tape: ad.l2_penalty([w], 0.1, tape), [w]) <= 1e-4


def test_mean_scalars_gradient():
    xs = [Tensor(float(i)) for i in range(1, 4)]

    def f(tape):
        sq = [ad.mul(x, x, tape) for x in xs]
        return ad.mean_scalars(sq, tape)

    assert ad.grad_check(f, xs) <= 1e-4


# ---------------------------------------------------------------------------
# grad_check itself and properties


def test_grad_check_quadratic_nearly_exact():
    x = Tensor(Rng(24).uniform(-1, 1, 4))

    def f(tape):
        return ad.l2_penalty([x], 1.0, tape)

    assert ad.grad_check(f, [x]) < 1e-8


def test_unigram_conv_maxpool_permutation_invariant():
    rng = Rng(25)
    seq = rng.uniform(-1, 1, (6, 3))
    filters = Tensor(rng.uniform(-1, 1, (4, 3)))
    bias = Tensor(rng.uniform(-1, 1, 4))

    def composite(matrix):
        conv = ad.conv1d_ngram(Tensor(matrix), filters, bias, 1)
        return ad.maxpool_over_time(conv, matrix.shape[0]).data

    base = composite(seq)
    perm = seq[Rng(26).permutation(6)]
    np.testing.assert_array_equal(composite(perm), base)


def test_glorot_deterministic_under_seed():
    a = ad.glorot_uniform(Rng(31), (4, 5))
    b = ad.glorot_uniform(Rng(31), (4, 5))
    np.testing.assert_array_equal(a, b)


def test_stable_seed_platform_stable():
    assert ad.stable_seed(42, "train") == ad.stable_seed(42, "train")
    assert ad.stable_seed(42, "train") != ad.stable_seed(42, "init")
    assert 0 <= ad.stable_seed("anything") < 2 ** 63


def test_adam_descends_quadratic():
    x = Tensor(np.array([5.0, -3.0]))
    opt = ad.Adam([x], learning_rate=0.1)
    for _ in range(500):
        tape = Tape()
        loss = ad.l2_penalty([x], 1.0, tape)
        opt.zero_grads()
        ad.backward(tape, loss)
        opt.step()
    assert np.abs(x.data).max() < 1e-2
