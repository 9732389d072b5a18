"""Dense float64 tensors with taped reverse-mode gradients.

The op set is exactly what the classifiers need: n-gram convolution,
masked max-pool over time, LSTM cell steps, bidirectional sequence
encoding, attention pooling, dense layers, dropout, and a numerically
stable softmax cross-entropy.  Every primitive's analytic gradient is
verifiable against central finite differences via grad_check.

A Tape records primitive applications in execution order; since every
output is created after its inputs, reverse tape order is a valid
topological order and backward visits each node exactly once.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

_ACTIVATIONS = ("relu", "tanh", "logistic", "identity")


class ShapeError(ValueError):
    pass


class GradientError(RuntimeError):
    pass


class Tensor:
    """A dense float64 array with an accumulated gradient slot."""

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), name=self.name)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.data.shape}>"


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    __slots__ = ("_nodes",)

    def __init__(self):
        self._nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []

    def record(self, output: Tensor, inputs: tuple[Tensor, ...], backward_fn) -> None:
        self._nodes.append((output, inputs, backward_fn))

    def __len__(self) -> int:
        return len(self._nodes)


def backward(tape: Tape, loss: Tensor, wrt: list[Tensor] | None = None):
    """Accumulate d(loss)/d(input) into .grad for every taped input.

    Gradients sum over all uses of a tensor.  If wrt is given, returns
    the gradient arrays for those tensors (in order) as a convenience.
    """
    if loss.data.ndim != 0 and loss.data.size != 1:
        raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
    for output, _, _ in tape._nodes:
        output.grad = None
    loss.grad = np.ones_like(loss.data)
    for output, inputs, backward_fn in reversed(tape._nodes):
        g = output.grad
        if g is None:
            continue
        for tensor, grad in zip(inputs, backward_fn(g)):
            if grad is None:
                continue
            if tensor.grad is None:
                tensor.grad = grad
            else:
                tensor.grad = tensor.grad + grad
    if wrt is not None:
        return [p.grad for p in wrt]
    return None


class Rng:
    """Deterministic random stream (PCG64); same seed, same stream, any platform."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def random(self, shape=None) -> np.ndarray:
        return self.generator.random(shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self.generator.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None):
        return self.generator.integers(low, high, shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def child(self, *parts) -> "Rng":
        return Rng(stable_seed(self.seed, *parts))


def stable_seed(*parts) -> int:
    """Platform-stable 63-bit seed derived from the given parts."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def glorot_uniform(rng: Rng, shape: tuple[int, ...]) -> np.ndarray:
    """Glorot/Xavier uniform init; fan counts from the last two dims."""
    if len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        fan_out, fan_in = shape[-2], shape[-1]
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, shape)


# ---------------------------------------------------------------------------
# Primitives


def conv1d_ngram(seq: Tensor, filters: Tensor, bias: Tensor, n: int, tape: Tape | None = None) -> Tensor:
    """n-gram convolution: row t = filters . concat(seq[t..t+n-1]) + bias."""
    if n < 1:
        raise ShapeError(f"window size must be >= 1, got {n}")
    L, D = seq.data.shape
    if L < n:
        raise ShapeError(f"sequence shorter than window: length {L} < n {n}")
    K, W = filters.data.shape
    if W != n * D:
        raise ShapeError(f"filters expect width {n * D} (n*D), got {W}")
    if bias.data.shape != (K,):
        raise ShapeError(f"bias shape {bias.data.shape} != ({K},)")
    T = L - n + 1
    windows = np.lib.stride_tricks.sliding_window_view(seq.data, (n, D))[:, 0]
    windows = windows.reshape(T, n * D)
    out = Tensor(windows @ filters.data.T + bias.data)
    if tape is not None:
        def backward_fn(g):
            dwin = (g @ filters.data).reshape(T, n, D)
            dseq = np.zeros_like(seq.data)
            for i in range(n):
                dseq[i:i + T] += dwin[:, i, :]
            return [dseq, g.T @ windows, g.sum(axis=0)]

        tape.record(out, (seq, filters, bias), backward_fn)
    return out


def maxpool_over_time(x: Tensor, mask_len: int, tape: Tape | None = None) -> Tensor:
    """Per-column max over the first mask_len rows (first argmax wins ties)."""
    T, K = x.data.shape
    if not 1 <= mask_len <= T:
        raise ShapeError(f"mask_len {mask_len} outside [1, {T}]")
    region = x.data[:mask_len]
    idx = region.argmax(axis=0)
    out = Tensor(region[idx, np.arange(K)])
    if tape is not None:
        def backward_fn(g):
            dx = np.zeros_like(x.data)
            dx[idx, np.arange(K)] = g
            return [dx]

        tape.record(out, (x,), backward_fn)
    return out


class LstmParams:
    """Gate parameters for one direction: stacked [input; forget; cell; output]."""

    def __init__(self, w_x: Tensor, w_h: Tensor, b: Tensor):
        four_h, d = w_x.data.shape
        if four_h % 4 != 0:
            raise ShapeError(f"w_x first dim {four_h} not divisible by 4")
        h = four_h // 4
        if w_h.data.shape != (four_h, h):
            raise ShapeError(f"w_h shape {w_h.data.shape} != ({four_h}, {h})")
        if b.data.shape != (four_h,):
            raise ShapeError(f"b shape {b.data.shape} != ({four_h},)")
        self.w_x, self.w_h, self.b = w_x, w_h, b
        self.hidden = h
        self.input_dim = d

    @classmethod
    def init(cls, rng: Rng, input_dim: int, hidden: int) -> "LstmParams":
        return cls(
            Tensor(glorot_uniform(rng, (4 * hidden, input_dim)), name="w_x"),
            Tensor(glorot_uniform(rng, (4 * hidden, hidden)), name="w_h"),
            Tensor(np.zeros(4 * hidden), name="b"),
        )

    def tensors(self) -> list[Tensor]:
        return [self.w_x, self.w_h, self.b]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lstm_cell_step(
    x: Tensor, h_prev: Tensor, c_prev: Tensor, params: LstmParams, tape: Tape | None = None
) -> tuple[Tensor, Tensor]:
    """One gated recurrent update; returns (hidden state, cell state)."""
    H = params.hidden
    if x.data.shape != (params.input_dim,):
        raise ShapeError(f"x shape {x.data.shape} != ({params.input_dim},)")
    if h_prev.data.shape != (H,) or c_prev.data.shape != (H,):
        raise ShapeError("h_prev/c_prev shape mismatch")
    z = params.w_x.data @ x.data + params.w_h.data @ h_prev.data + params.b.data
    i = _sigmoid(z[:H])
    f = _sigmoid(z[H:2 * H])
    g_cand = np.tanh(z[2 * H:3 * H])
    o = _sigmoid(z[3 * H:])
    c_new = f * c_prev.data + i * g_cand
    tanh_c = np.tanh(c_new)
    h_out = Tensor(o * tanh_c)
    c_out = Tensor(c_new)
    if tape is not None:
        inputs = (x, h_prev, c_prev, params.w_x, params.w_h, params.b)

        def gate_backward(gh, gc):
            do = gh * tanh_c
            dc = gc + gh * o * (1.0 - tanh_c ** 2)
            df = dc * c_prev.data
            di = dc * g_cand
            dg = dc * i
            dc_prev = dc * f
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g_cand ** 2),
                do * o * (1.0 - o),
            ])
            return [
                params.w_x.data.T @ dz,
                params.w_h.data.T @ dz,
                dc_prev,
                np.outer(dz, x.data),
                np.outer(dz, h_prev.data),
                dz,
            ]

        # Gradient entering through h and through c are recorded as two
        # nodes over the same saved activations; contributions sum.
        tape.record(h_out, inputs, lambda g: gate_backward(g, 0.0))
        tape.record(c_out, inputs, lambda g: gate_backward(np.zeros(H), g))
    return h_out, c_out


def select_row(m: Tensor, t: int, tape: Tape | None = None) -> Tensor:
    """Row t of a matrix as a vector (gradient scatters back to that row)."""
    out = Tensor(m.data[t].copy())
    if tape is not None:
        def backward_fn(g):
            dm = np.zeros_like(m.data)
            dm[t] = g
            return [dm]

        tape.record(out, (m,), backward_fn)
    return out


def stack_pairs(fwd: list[Tensor], bwd: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Stack per-step state pairs into (L, 2H): row t = [fwd[t], bwd[t]]."""
    if len(fwd) != len(bwd) or not fwd:
        raise ShapeError("need equal, non-empty state lists")
    h = fwd[0].data.shape[0]
    out = Tensor(np.stack([np.concatenate([f.data, b.data]) for f, b in zip(fwd, bwd)]))
    if tape is not None:
        def backward_fn(g):
            grads = [g[t, :h] for t in range(len(fwd))]
            grads += [g[t, h:] for t in range(len(bwd))]
            return grads

        tape.record(out, tuple(fwd) + tuple(bwd), backward_fn)
    return out


def bilstm_sequence(
    seq: Tensor, fwd_params: LstmParams, bwd_params: LstmParams, tape: Tape | None = None
) -> Tensor:
    """Bidirectional encoding: row t = [forward state at t, backward state at t]."""
    L = seq.data.shape[0]
    if L < 1:
        raise ShapeError("sequence must have at least one row")
    rows = [select_row(seq, t, tape) for t in range(L)]

    def run(params: LstmParams, order):
        h = Tensor(np.zeros(params.hidden))
        c = Tensor(np.zeros(params.hidden))
        states: dict[int, Tensor] = {}
        for t in order:
            h, c = lstm_cell_step(rows[t], h, c, params, tape)
            states[t] = h
        return states

    fwd_states = run(fwd_params, range(L))
    bwd_states = run(bwd_params, range(L - 1, -1, -1))
    return stack_pairs([fwd_states[t] for t in range(L)], [bwd_states[t] for t in range(L)], tape)


def attention_pool(states: Tensor, scorer: Tensor, tape: Tape | None = None) -> tuple[Tensor, np.ndarray]:
    """Softmax-weighted pooling of sequence states.

    weights = softmax(states . scorer); context = sum_t weights[t] * states[t].
    The returned weights are a diagnostic; gradient flows through context.
    """
    L, S = states.data.shape
    if scorer.data.shape != (S,):
        raise ShapeError(f"scorer shape {scorer.data.shape} != ({S},)")
    scores = states.data @ scorer.data
    e = np.exp(scores - scores.max())
    w = e / e.sum()
    context = Tensor(w @ states.data)
    if tape is not None:
        def backward_fn(g):
            dw = states.data @ g
            dscores = w * (dw - float(w @ dw))
            dstates = np.outer(w, g) + np.outer(dscores, scorer.data)
            return [dstates, states.data.T @ dscores]

        tape.record(context, (states, scorer), backward_fn)
    return context, w


def softmax_cross_entropy(
    logits: Tensor, gold: int, tape: Tape | None = None
) -> tuple[Tensor, np.ndarray]:
    """Stable log-sum-exp cross-entropy; returns (loss, probabilities)."""
    C = logits.data.shape[0]
    if not 0 <= gold < C:
        raise ShapeError(f"gold index {gold} outside [0, {C})")
    m = logits.data.max()
    e = np.exp(logits.data - m)
    z = e.sum()
    p = e / z
    loss = Tensor(np.log(z) + m - logits.data[gold])
    if tape is not None:
        onehot = np.zeros(C)
        onehot[gold] = 1.0

        def backward_fn(g):
            return [(p - onehot) * g]

        tape.record(loss, (logits,), backward_fn)
    return loss, p


def dense(x: Tensor, w: Tensor, b: Tensor, activation: str = "identity", tape: Tape | None = None) -> Tensor:
    """activation(W x + b) with activation in relu/tanh/logistic/identity."""
    if activation not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}; use one of {_ACTIVATIONS}")
    dout, din = w.data.shape
    if x.data.shape != (din,):
        raise ShapeError(f"x shape {x.data.shape} != ({din},)")
    if b.data.shape != (dout,):
        raise ShapeError(f"b shape {b.data.shape} != ({dout},)")
    z = w.data @ x.data + b.data
    if activation == "relu":
        y = np.maximum(z, 0.0)
        dact = (z > 0.0).astype(np.float64)
    elif activation == "tanh":
        y = np.tanh(z)
        dact = 1.0 - y ** 2
    elif activation == "logistic":
        y = _sigmoid(z)
        dact = y * (1.0 - y)
    else:
        y = z
        dact = np.ones_like(z)
    out = Tensor(y)
    if tape is not None:
        def backward_fn(g):
            dz = g * dact
            return [w.data.T @ dz, np.outer(dz, x.data), dz]

        tape.record(out, (x, w, b), backward_fn)
    return out


def dropout(x: Tensor, rate: float, rng: Rng, training: bool, tape: Tape | None = None) -> Tensor:
    """Inverted dropout: kept entries scaled by 1/(1-rate); identity at inference."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    mask = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = Tensor(x.data * mask)
    if tape is not None:
        tape.record(out, (x,), lambda g: [g * mask])
    return out


def embedding_lookup(table: Tensor, ids: list[int], tape: Tape | None = None) -> Tensor:
    """Gather rows of a learned embedding table; gradient scatters by row."""
    idx = np.asarray(ids, dtype=np.intp)
    if idx.size == 0:
        raise ShapeError("embedding lookup needs at least one id")
    if idx.min() < 0 or idx.max() >= table.data.shape[0]:
        raise ShapeError("embedding id out of range")
    out = Tensor(table.data[idx])
    if tape is not None:
        def backward_fn(g):
            dt = np.zeros_like(table.data)
            np.add.at(dt, idx, g)
            return [dt]

        tape.record(out, (table,), backward_fn)
    return out


def concat_vecs(vecs: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Concatenate vectors into one; gradient splits back."""
    if not vecs:
        raise ShapeError("nothing to concatenate")
    sizes = [v.data.shape[0] for v in vecs]
    out = Tensor(np.concatenate([v.data for v in vecs]))
    if tape is not None:
        offsets = np.cumsum([0] + sizes)

        def backward_fn(g):
            return [g[offsets[i]:offsets[i + 1]] for i in range(len(vecs))]

        tape.record(out, tuple(vecs), backward_fn)
    return out


def add_scalars(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    out = Tensor(a.data + b.data)
    if tape is not None:
        tape.record(out, (a, b), lambda g: [g, g])
    return out


def mul(a: Tensor, b: Tensor, tape: Tape | None = None) -> Tensor:
    """Elementwise product of same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ShapeError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data)
    if tape is not None:
        tape.record(out, (a, b), lambda g: [g * b.data, g * a.data])
    return out


def mean_scalars(losses: list[Tensor], tape: Tape | None = None) -> Tensor:
    """Mean of scalar losses (the batch objective)."""
    if not losses:
        raise ShapeError("empty loss list")
    n = float(len(losses))
    out = Tensor(sum(float(l.data) for l in losses) / n)
    if tape is not None:
        tape.record(out, tuple(losses), lambda g: [g / n for _ in losses])
    return out


def l2_penalty(tensors: list[Tensor], coeff: float, tape: Tape | None = None) -> Tensor:
    """coeff * sum of squared entries over the given tensors."""
    if coeff < 0:
        raise ValueError("l2 coefficient must be non-negative")
    out = Tensor(coeff * sum(float((t.data ** 2).sum()) for t in tensors))
    if tape is not None:
        tape.record(out, tuple(tensors), lambda g: [2.0 * coeff * t.data * g for t in tensors])
    return out


# ---------------------------------------------------------------------------
# Verification and optimization


def grad_check(f, params: list[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between taped gradients and central differences.

    f(tape) must build the scalar loss for the current parameter values;
    it is called with a live Tape for the analytic pass and with
    tape=None for the two-sided numeric probes.  Any randomness inside f
    must be re-seeded identically on every call.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.grad = None
    tape = Tape()
    loss = f(tape)
    if not np.isfinite(loss.data):
        raise GradientError("non-finite loss in grad_check")
    backward(tape, loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(f(None).data)
            flat[i] = orig - eps
            fm = float(f(None).data)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise GradientError("non-finite loss during finite differencing")
            numeric = (fp - fm) / (2.0 * eps)
            a = ana.reshape(-1)[i]
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, rel)
    return worst


class Adam:
    """Adam over named parameter tensors (beta1=0.9, beta2=0.999, eps=1e-8)."""

    def __init__(self, params: list[Tensor], learning_rate: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / (1.0 - b1 ** self.t)
            v_hat = self.v[i] / (1.0 - b2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grads(self) -> None:
        for p in self.params:
            p.grad = None
