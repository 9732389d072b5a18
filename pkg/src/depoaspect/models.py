"""The three classifier families behind one sklearn-style estimator API.

* CnnTextClassifier: fixed word vectors -> n-gram convolutions -> masked
  max-pool over time -> dense hidden -> dropout -> softmax.
* BiLstmAttentionClassifier: learned embeddings -> dropout -> bi-LSTM ->
  attention pooling -> dropout -> softmax, with an L2 weight penalty.
* EmbeddingHeadClassifier: externally produced sentence vectors -> one
  dense hidden layer -> dropout -> softmax.

All training is full-precision Adam on seeded mini-batches with early
stopping on validation weighted F1 (patience 3, at most 30 epochs); a
(seed, data, hyperparameters) triple fully determines the run.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, asdict

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from . import autodiff as ad
from . import evaluation, ontology
from .autodiff import Rng, Tape, Tensor, stable_seed
from .embeddings import SentenceVectors, WordEmbeddings, embed_tokens, tokenize

FAMILY_CNN = "cnn"
FAMILY_BILSTM = "bilstm_attn"
FAMILY_EMB_HEAD = "emb_head"
FAMILIES = (FAMILY_CNN, FAMILY_BILSTM, FAMILY_EMB_HEAD)

SNAPSHOT_MAGIC = "depoaspect-model"
SNAPSHOT_VERSION = 1

_ACTIVATION_ALIASES = {"sigmoid": "logistic"}

_BILSTM_LR_SET = (0.0001, 0.001, 0.01, 0.1)
_EMB_HEAD_LR_SET = (5e-5, 2e-5, 1e-4, 5e-4, 2e-4, 1e-3, 5e-3, 0.01, 0.05, 0.1)


class ModelError(ValueError):
    pass


class HyperParamError(ModelError):
    pass


class DivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}, batch {batch}")
        self.epoch, self.batch = epoch, batch


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Hyperparameter schema; validation enforces the tuning-grid ranges."""

    family: str
    hidden_size: int = 100
    embedding_size: int | None = None
    dropout_rate: float = 0.1
    activation: str = "sigmoid"
    ngram_windows: tuple[int, ...] = (1,)
    filters_per_window: int = 100
    learning_rate: float = 1e-3
    max_seq_len: int = 128
    batch_size: int = 100
    max_epochs: int = 30
    l2_coeff: float = 0.0
    patience: int = 3
    seed: int = 42

    def validate(self) -> None:
        problems: list[str] = []
        if self.family not in FAMILIES:
            raise HyperParamError(f"unknown family {self.family!r}; valid: {FAMILIES}")
        if self.family == FAMILY_CNN:
            if self.hidden_size not in (100, 200, 300, 400, 500):
                problems.append(f"CNN hidden_size {self.hidden_size} not in 100..500 step 100")
            if not 0.1 <= self.dropout_rate <= 0.5:
                problems.append(f"CNN dropout_rate {self.dropout_rate} not in [0.1, 0.5]")
            if _ACTIVATION_ALIASES.get(self.activation, self.activation) not in ("logistic", "tanh", "relu"):
                problems.append(f"CNN activation {self.activation!r} not in sigmoid/tanh/relu")
            if not self.ngram_windows or any(n not in (1, 2, 3) for n in self.ngram_windows):
                problems.append(f"CNN ngram_windows {self.ngram_windows} must be within (1, 2, 3)")
            if self.filters_per_window < 1:
                problems.append("filters_per_window must be >= 1")
        elif self.family == FAMILY_BILSTM:
            if self.hidden_size not in (64, 128, 256):
                problems.append(f"BiLSTM hidden_size {self.hidden_size} not in (64, 128, 256)")
            if self.embedding_size not in (32, 64, 128, 256):
                problems.append(f"BiLSTM embedding_size {self.embedding_size} not in (32, 64, 128, 256)")
            if not any(math.isclose(self.learning_rate, lr) for lr in _BILSTM_LR_SET):
                problems.append(f"BiLSTM learning_rate {self.learning_rate} not in {_BILSTM_LR_SET}")
            if not 0.0 <= self.dropout_rate < 1.0:
                problems.append(f"dropout_rate {self.dropout_rate} not in [0, 1)")
        else:
            if self.hidden_size < 1:
                problems.append("hidden_size must be >= 1")
            if not any(math.isclose(self.learning_rate, lr) for lr in _EMB_HEAD_LR_SET):
                problems.append(f"emb_head learning_rate {self.learning_rate} not in {_EMB_HEAD_LR_SET}")
            if not 0.0 <= self.dropout_rate < 1.0:
                problems.append(f"dropout_rate {self.dropout_rate} not in [0, 1)")
        if self.max_seq_len not in (32, 128):
            problems.append(f"max_seq_len {self.max_seq_len} not in (32, 128)")
        if self.batch_size not in (80, 100):
            problems.append(f"batch_size {self.batch_size} not in (80, 100)")
        if not 1 <= self.max_epochs <= 30:
            problems.append(f"max_epochs {self.max_epochs} not in [1, 30]")
        if self.learning_rate <= 0:
            problems.append("learning_rate must be positive")
        if self.l2_coeff < 0:
            problems.append("l2_coeff must be >= 0")
        if self.patience < 1:
            problems.append("patience must be >= 1")
        if problems:
            raise HyperParamError("; ".join(problems))


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray
    predicted: str


@dataclass
class TrainingHistory:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = -1

    def append(self, train_loss: float, val_weighted_f1: float) -> None:
        self.epochs.append({"train_loss": train_loss, "val_weighted_f1": val_weighted_f1})

    def __len__(self) -> int:
        return len(self.epochs)


def _resolve_classes(classes, y) -> tuple[str, ...]:
    if classes is not None:
        return tuple(classes)
    uniq = set(str(v) for v in y)
    if uniq <= set(ontology.VALID_CODES):
        return tuple(ontology.VALID_CODES)
    return tuple(sorted(uniq))


def _holdout(X, y, seed: int) -> tuple[list, list, list, list]:
    """Seeded stratified 80/20 holdout when no validation set is given."""
    by_label: dict[str, list[int]] = {}
    for i, label in enumerate(y):
        by_label.setdefault(label, []).append(i)
    rng = Rng(stable_seed(seed, "holdout"))
    train_idx: list[int] = []
    val_idx: list[int] = []
    for label in sorted(by_label):
        idx = by_label[label]
        perm = [idx[j] for j in rng.permutation(len(idx))]
        n_val = max(1, len(perm) // 5) if len(perm) > 1 else 0
        val_idx.extend(perm[:n_val])
        train_idx.extend(perm[n_val:])
    train_idx.sort()
    val_idx.sort()
    return (
        [X[i] for i in train_idx],
        [y[i] for i in train_idx],
        [X[i] for i in val_idx],
        [y[i] for i in val_idx],
    )


class _AspectClassifier(BaseEstimator, ClassifierMixin):
    """Shared fit/predict machinery; subclasses provide the network."""

    _family = ""

    # -- subclass hooks ----------------------------------------------------
    def _hyper(self) -> HyperParams:
        raise NotImplementedError

    def _setup(self, X, y) -> None:
        """Derive data-dependent structure (vocab, dims) before init."""

    def _init_params(self, rng: Rng) -> dict[str, Tensor]:
        raise NotImplementedError

    def _prepare(self, X) -> list:
        raise NotImplementedError

    def _logits(self, x, tape: Tape | None, rng: Rng | None, training: bool) -> Tensor:
        raise NotImplementedError

    def _l2_tensors(self) -> list[Tensor]:
        return []

    def _extra_state(self) -> dict:
        return {}

    def _restore_extra(self, extra: dict) -> None:
        pass

    # -- public API ---------------------------------------------------------
    def initialize(self, classes=None) -> "_AspectClassifier":
        """Build (seeded) parameters without training, enabling predict()."""
        hyper = self._hyper()
        hyper.validate()
        self.classes_ = tuple(classes) if classes is not None else tuple(ontology.VALID_CODES)
        self.hyper_ = hyper
        self.params_ = self._init_params(Rng(stable_seed(hyper.seed, "init")))
        self.history_ = TrainingHistory()
        return self

    def fit(self, X, y, X_val=None, y_val=None):
        hyper = self._hyper()
        hyper.validate()
        X, y = list(X), [str(v) for v in y]
        if len(X) != len(y):
            raise ModelError(f"X and y length mismatch: {len(X)} vs {len(y)}")
        if not X:
            raise ModelError("empty training set")
        if (X_val is None) != (y_val is None):
            raise ModelError("provide both X_val and y_val, or neither")
        if X_val is None:
            X, y, X_val, y_val = _holdout(X, y, hyper.seed)
            if not X_val:
                X_val, y_val = X, y
        else:
            X_val, y_val = list(X_val), [str(v) for v in y_val]
        self.classes_ = _resolve_classes(getattr(self, "classes", None), list(y) + list(y_val))
        class_index = {c: i for i, c in enumerate(self.classes_)}
        try:
            golds = [class_index[v] for v in y]
            val_golds = [class_index[v] for v in y_val]
        except KeyError as exc:
            raise ModelError(f"label {exc.args[0]!r} not in classes {self.classes_}") from None

        self.hyper_ = hyper
        self._setup(X, y)
        self.params_ = self._init_params(Rng(stable_seed(hyper.seed, "init")))
        inputs = self._prepare(X)
        val_inputs = self._prepare(X_val)

        rng = Rng(stable_seed(hyper.seed, "train"))
        optimizer = ad.Adam(list(self.params_.values()), hyper.learning_rate)
        history = TrainingHistory()
        best_f1 = -1.0
        best_snapshot = None
        drops = 0
        n = len(inputs)
        for epoch in range(hyper.max_epochs):
            order = rng.permutation(n)
            loss_sum = 0.0
            for b, start in enumerate(range(0, n, hyper.batch_size)):
                batch = order[start:start + hyper.batch_size]
                tape = Tape()
                losses = [
                    ad.softmax_cross_entropy(
                        self._logits(inputs[i], tape, rng, True), golds[i], tape
                    )[0]
                    for i in batch
                ]
                objective = ad.mean_scalars(losses, tape)
                if hyper.l2_coeff > 0 and self._l2_tensors():
                    penalty = ad.l2_penalty(self._l2_tensors(), hyper.l2_coeff, tape)
                    objective = ad.add_scalars(objective, penalty, tape)
                value = float(objective.data)
                if not np.isfinite(value):
                    raise DivergedError(epoch, b)
                optimizer.zero_grads()
                ad.backward(tape, objective)
                optimizer.step()
                loss_sum += value * len(batch)
            val_preds = [int(np.argmax(self._probs(x))) for x in val_inputs]
            matrix = np.bincount(
                np.asarray(val_golds) * len(self.classes_) + np.asarray(val_preds),
                minlength=len(self.classes_) ** 2,
            ).reshape(len(self.classes_), len(self.classes_))
            val_f1 = evaluation.weighted_f1_from_confusion(matrix)
            history.append(loss_sum / n, val_f1)
            if val_f1 > best_f1:
                best_f1 = val_f1
                history.best_epoch = epoch
                best_snapshot = {k: t.data.copy() for k, t in self.params_.items()}
                drops = 0
            elif val_f1 < best_f1:
                drops += 1
                if drops >= hyper.patience:
                    break
            else:
                drops = 0
        if best_snapshot is not None:
            for k, t in self.params_.items():
                t.data = best_snapshot[k]
        self.history_ = history
        return self

    def _probs(self, x) -> np.ndarray:
        logits = self._logits(x, None, None, False)
        e = np.exp(logits.data - logits.data.max())
        return e / e.sum()

    def _check_fitted(self) -> None:
        if not hasattr(self, "params_"):
            raise ModelError(f"{type(self).__name__} has no parameters; call fit() or initialize()")

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        return np.stack([self._probs(x) for x in self._prepare(list(X))])

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return np.array([self.classes_[i] for i in probs.argmax(axis=1)])

    def predict_one(self, x) -> Prediction:
        self._check_fitted()
        probs = self._probs(self._prepare([x])[0])
        return Prediction(probabilities=probs, predicted=self.classes_[int(np.argmax(probs))])

    def n_parameters(self) -> int:
        self._check_fitted()
        return int(sum(t.data.size for t in self.params_.values()))


class CnnTextClassifier(_AspectClassifier):
    """n-gram convolution text classifier over fixed word vectors."""

    _family = FAMILY_CNN

    def __init__(self, hidden_size=300, dropout_rate=0.5, activation="sigmoid",
                 ngram_windows=(1,), filters_per_window=100, learning_rate=1e-3,
                 max_seq_len=128, batch_size=100, max_epochs=30, l2_coeff=0.0,
                 patience=3, seed=42, word_embeddings=None, classes=None):
        self.hidden_size = hidden_size
        self.dropout_rate = dropout_rate
        self.activation = activation
        self.ngram_windows = ngram_windows
        self.filters_per_window = filters_per_window
        self.learning_rate = learning_rate
        self.max_seq_len = max_seq_len
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.l2_coeff = l2_coeff
        self.patience = patience
        self.seed = seed
        self.word_embeddings = word_embeddings
        self.classes = classes

    def _hyper(self) -> HyperParams:
        return HyperParams(
            family=FAMILY_CNN,
            hidden_size=self.hidden_size,
            dropout_rate=self.dropout_rate,
            activation=self.activation,
            ngram_windows=tuple(self.ngram_windows),
            filters_per_window=self.filters_per_window,
            learning_rate=self.learning_rate,
            max_seq_len=self.max_seq_len,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            l2_coeff=self.l2_coeff,
            patience=self.patience,
            seed=self.seed,
        )

    def _we(self) -> WordEmbeddings:
        if self.word_embeddings is None:
            raise ModelError("CnnTextClassifier requires word_embeddings")
        return self.word_embeddings

    def _act(self) -> str:
        return _ACTIVATION_ALIASES.get(self.activation, self.activation)

    def _init_params(self, rng: Rng) -> dict[str, Tensor]:
        we = self._we()
        windows = tuple(self.ngram_windows)
        if any(n > self.max_seq_len for n in windows):
            raise ModelError(
                f"ngram window {max(windows)} exceeds max_seq_len {self.max_seq_len}"
            )
        k = self.filters_per_window
        params: dict[str, Tensor] = {}
        for n in windows:
            params[f"conv{n}_filters"] = Tensor(ad.glorot_uniform(rng, (k, n * we.dim)))
            params[f"conv{n}_bias"] = Tensor(np.zeros(k))
        pooled = k * len(windows)
        params["hidden_w"] = Tensor(ad.glorot_uniform(rng, (self.hidden_size, pooled)))
        params["hidden_b"] = Tensor(np.zeros(self.hidden_size))
        params["out_w"] = Tensor(ad.glorot_uniform(rng, (len(self.classes_), self.hidden_size)))
        params["out_b"] = Tensor(np.zeros(len(self.classes_)))
        return params

    def _prepare(self, X) -> list:
        we = self._we()
        out = []
        for text in X:
            matrix, true_len = embed_tokens(tokenize(text), we, self.max_seq_len)
            out.append((Tensor(matrix), max(true_len, 1)))
        return out

    def _logits(self, x, tape, rng, training) -> Tensor:
        seq, true_len = x
        pooled = []
        for n in tuple(self.ngram_windows):
            conv = ad.conv1d_ngram(
                seq, self.params_[f"conv{n}_filters"], self.params_[f"conv{n}_bias"], n, tape
            )
            mask = min(max(true_len - n + 1, 1), conv.data.shape[0])
            pooled.append(ad.maxpool_over_time(conv, mask, tape))
        features = pooled[0] if len(pooled) == 1 else ad.concat_vecs(pooled, tape)
        hidden = ad.dense(features, self.params_["hidden_w"], self.params_["hidden_b"], self._act(), tape)
        hidden = ad.dropout(hidden, self.dropout_rate, rng, training, tape) if training else hidden
        return ad.dense(hidden, self.params_["out_w"], self.params_["out_b"], "identity", tape)

    def _l2_tensors(self) -> list[Tensor]:
        return [t for name, t in self.params_.items() if not name.endswith("_b") and not name.endswith("_bias")]

    def _extra_state(self) -> dict:
        we = self._we()
        return {
            "word_vectors": {
                "dim": we.dim,
                "vocabulary": {t: [float(v) for v in vec] for t, vec in we.vocabulary.items()},
            }
        }

    def _restore_extra(self, extra: dict) -> None:
        wv = extra["word_vectors"]
        self.word_embeddings = WordEmbeddings(
            dim=int(wv["dim"]),
            vocabulary={t: np.array(vec) for t, vec in wv["vocabulary"].items()},
        )


class BiLstmAttentionClassifier(_AspectClassifier):
    """Bidirectional LSTM with attention pooling over learned embeddings."""

    _family = FAMILY_BILSTM

    def __init__(self, hidden_size=256, embedding_size=128, dropout_rate=0.1,
                 learning_rate=0.01, max_seq_len=32, batch_size=100, max_epochs=30,
                 l2_coeff=1e-4, patience=3, seed=42, vocab=None, classes=None):
        self.hidden_size = hidden_size
        self.embedding_size = embedding_size
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.max_seq_len = max_seq_len
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.l2_coeff = l2_coeff
        self.patience = patience
        self.seed = seed
        self.vocab = vocab
        self.classes = classes

    def _hyper(self) -> HyperParams:
        return HyperParams(
            family=FAMILY_BILSTM,
            hidden_size=self.hidden_size,
            embedding_size=self.embedding_size,
            dropout_rate=self.dropout_rate,
            learning_rate=self.learning_rate,
            max_seq_len=self.max_seq_len,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            l2_coeff=self.l2_coeff,
            patience=self.patience,
            seed=self.seed,
        )

    def _setup(self, X, y) -> None:
        if self.vocab is None:
            tokens = sorted({t for text in X for t in tokenize(text)})
            self.vocab_ = ["<unk>"] + tokens
        else:
            self.vocab_ = ["<unk>"] + [t for t in self.vocab if t != "<unk>"]
        if len(self.vocab_) <= 1:
            raise ModelError("empty vocabulary: no tokens in training texts")
        self._token_index = {t: i for i, t in enumerate(self.vocab_)}

    def initialize(self, classes=None):
        if self.vocab is None:
            raise ModelError("empty vocabulary: pass vocab= to initialize without data")
        self._setup([], [])
        return super().initialize(classes)

    def _init_params(self, rng: Rng) -> dict[str, Tensor]:
        if not hasattr(self, "vocab_"):
            raise ModelError("vocabulary not built; call fit() or initialize()")
        v, e, h = len(self.vocab_), self.embedding_size, self.hidden_size
        fwd = ad.LstmParams.init(rng.child("fwd"), e, h)
        bwd = ad.LstmParams.init(rng.child("bwd"), e, h)
        params = {
            "embedding": Tensor(ad.glorot_uniform(rng, (v, e))),
            "fwd_w_x": fwd.w_x, "fwd_w_h": fwd.w_h, "fwd_b": fwd.b,
            "bwd_w_x": bwd.w_x, "bwd_w_h": bwd.w_h, "bwd_b": bwd.b,
            "scorer": Tensor(ad.glorot_uniform(rng, (2 * h,))),
            "out_w": Tensor(ad.glorot_uniform(rng, (len(self.classes_), 2 * h))),
            "out_b": Tensor(np.zeros(len(self.classes_))),
        }
        self._fwd = fwd
        self._bwd = bwd
        return params

    def _prepare(self, X) -> list:
        idx = self._token_index
        out = []
        for text in X:
            ids = [idx.get(t, 0) for t in tokenize(text)][: self.max_seq_len]
            out.append(ids or [0])
        return out

    def _logits(self, x, tape, rng, training) -> Tensor:
        embedded = ad.embedding_lookup(self.params_["embedding"], x, tape)
        if training:
            embedded = ad.dropout(embedded, self.dropout_rate, rng, training, tape)
        states = ad.bilstm_sequence(embedded, self._fwd, self._bwd, tape)
        context, _ = ad.attention_pool(states, self.params_["scorer"], tape)
        if training:
            context = ad.dropout(context, self.dropout_rate, rng, training, tape)
        return ad.dense(context, self.params_["out_w"], self.params_["out_b"], "identity", tape)

    def _l2_tensors(self) -> list[Tensor]:
        # Weight matrices except biases and the embedding table.
        return [
            self.params_[k]
            for k in ("fwd_w_x", "fwd_w_h", "bwd_w_x", "bwd_w_h", "scorer", "out_w")
        ]

    def _extra_state(self) -> dict:
        return {"vocab": list(self.vocab_)}

    def _restore_extra(self, extra: dict) -> None:
        self.vocab_ = list(extra["vocab"])
        self._token_index = {t: i for i, t in enumerate(self.vocab_)}

    def _rebind_lstm(self) -> None:
        p = self.params_
        self._fwd = ad.LstmParams(p["fwd_w_x"], p["fwd_w_h"], p["fwd_b"])
        self._bwd = ad.LstmParams(p["bwd_w_x"], p["bwd_w_h"], p["bwd_b"])


class EmbeddingHeadClassifier(_AspectClassifier):
    """Single-hidden-layer head over precomputed sentence vectors."""

    _family = FAMILY_EMB_HEAD

    def __init__(self, hidden_size=128, dropout_rate=0.1, activation="relu",
                 learning_rate=2e-5, max_seq_len=32, batch_size=80, max_epochs=30,
                 l2_coeff=0.0, patience=3, seed=42, sentence_vectors=None,
                 sentence_dim=None, classes=None):
        self.hidden_size = hidden_size
        self.dropout_rate = dropout_rate
        self.activation = activation
        self.learning_rate = learning_rate
        self.max_seq_len = max_seq_len
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.l2_coeff = l2_coeff
        self.patience = patience
        self.seed = seed
        self.sentence_vectors = sentence_vectors
        self.sentence_dim = sentence_dim
        self.classes = classes

    def _hyper(self) -> HyperParams:
        return HyperParams(
            family=FAMILY_EMB_HEAD,
            hidden_size=self.hidden_size,
            dropout_rate=self.dropout_rate,
            activation=self.activation,
            learning_rate=self.learning_rate,
            max_seq_len=self.max_seq_len,
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            l2_coeff=self.l2_coeff,
            patience=self.patience,
            seed=self.seed,
        )

    def _dim(self) -> int:
        if self.sentence_dim is not None:
            return int(self.sentence_dim)
        sv = self.sentence_vectors
        if isinstance(sv, SentenceVectors):
            if sv.dim is None:
                raise ModelError("no vectors: sentence-vector table is empty")
            return sv.dim
        raise ModelError("sentence_dim or a non-empty sentence_vectors table is required")

    def _setup(self, X, y) -> None:
        self.input_dim_ = self._dim()
        if self.input_dim_ < 1:
            raise ModelError("sentence vector dimension must be positive")

    def initialize(self, classes=None):
        self._setup([], [])
        return super().initialize(classes)

    def _act(self) -> str:
        return _ACTIVATION_ALIASES.get(self.activation, self.activation)

    def _init_params(self, rng: Rng) -> dict[str, Tensor]:
        d = self.input_dim_
        return {
            "hidden_w": Tensor(ad.glorot_uniform(rng, (self.hidden_size, d))),
            "hidden_b": Tensor(np.zeros(self.hidden_size)),
            "out_w": Tensor(ad.glorot_uniform(rng, (len(self.classes_), self.hidden_size))),
            "out_b": Tensor(np.zeros(len(self.classes_))),
        }

    def _prepare(self, X) -> list:
        out = []
        for x in X:
            if isinstance(x, str):
                if not isinstance(self.sentence_vectors, SentenceVectors):
                    raise ModelError(f"no sentence-vector table to resolve id {x!r}")
                try:
                    vec = self.sentence_vectors.lookup(x)
                except KeyError:
                    raise ModelError(f"missing sentence vector for example id {x!r}") from None
            else:
                vec = np.asarray(x, dtype=np.float64)
            if vec.shape != (self.input_dim_,):
                raise ModelError(f"sentence vector shape {vec.shape} != ({self.input_dim_},)")
            out.append(Tensor(vec))
        return out

    def _logits(self, x, tape, rng, training) -> Tensor:
        hidden = ad.dense(x, self.params_["hidden_w"], self.params_["hidden_b"], self._act(), tape)
        if training:
            hidden = ad.dropout(hidden, self.dropout_rate, rng, training, tape)
        return ad.dense(hidden, self.params_["out_w"], self.params_["out_b"], "identity", tape)

    def _l2_tensors(self) -> list[Tensor]:
        return [self.params_["hidden_w"], self.params_["out_w"]]

    def _extra_state(self) -> dict:
        return {"input_dim": self.input_dim_}

    def _restore_extra(self, extra: dict) -> None:
        self.input_dim_ = int(extra["input_dim"])
        self.sentence_dim = self.input_dim_


_FAMILY_CLASSES = {
    FAMILY_CNN: CnnTextClassifier,
    FAMILY_BILSTM: BiLstmAttentionClassifier,
    FAMILY_EMB_HEAD: EmbeddingHeadClassifier,
}


def build_cnn(hyper: HyperParams, word_embeddings: WordEmbeddings) -> CnnTextClassifier:
    """Configured (and parameter-initialized) convolutional classifier."""
    hyper.validate()
    model = CnnTextClassifier(
        hidden_size=hyper.hidden_size,
        dropout_rate=hyper.dropout_rate,
        activation=hyper.activation,
        ngram_windows=hyper.ngram_windows,
        filters_per_window=hyper.filters_per_window,
        learning_rate=hyper.learning_rate,
        max_seq_len=hyper.max_seq_len,
        batch_size=hyper.batch_size,
        max_epochs=hyper.max_epochs,
        l2_coeff=hyper.l2_coeff,
        patience=hyper.patience,
        seed=hyper.seed,
        word_embeddings=word_embeddings,
    )
    return model.initialize()


def build_bilstm_attn(hyper: HyperParams, vocab: list[str]) -> BiLstmAttentionClassifier:
    """Configured bidirectional-LSTM classifier over a fixed vocabulary."""
    hyper.validate()
    if not vocab:
        raise ModelError("empty vocabulary")
    model = BiLstmAttentionClassifier(
        hidden_size=hyper.hidden_size,
        embedding_size=hyper.embedding_size,
        dropout_rate=hyper.dropout_rate,
        learning_rate=hyper.learning_rate,
        max_seq_len=hyper.max_seq_len,
        batch_size=hyper.batch_size,
        max_epochs=hyper.max_epochs,
        l2_coeff=hyper.l2_coeff,
        patience=hyper.patience,
        seed=hyper.seed,
        vocab=list(vocab),
    )
    return model.initialize()


def build_emb_head(hyper: HyperParams, sentence_dim: int) -> EmbeddingHeadClassifier:
    """Configured sentence-embedding head classifier."""
    hyper.validate()
    if sentence_dim < 1:
        raise ModelError("sentence_dim must be positive")
    model = EmbeddingHeadClassifier(
        hidden_size=hyper.hidden_size,
        dropout_rate=hyper.dropout_rate,
        activation=hyper.activation,
        learning_rate=hyper.learning_rate,
        max_seq_len=hyper.max_seq_len,
        batch_size=hyper.batch_size,
        max_epochs=hyper.max_epochs,
        l2_coeff=hyper.l2_coeff,
        patience=hyper.patience,
        seed=hyper.seed,
        sentence_dim=sentence_dim,
    )
    return model.initialize()


def train(model: _AspectClassifier, train_set, val_set=None) -> _AspectClassifier:
    """Fit on (X, y) pairs with early stopping; returns the fitted model."""
    X, y = train_set
    if val_set is None:
        return model.fit(X, y)
    return model.fit(X, y, X_val=val_set[0], y_val=val_set[1])


def predict(model: _AspectClassifier, x) -> Prediction:
    return model.predict_one(x)


def save_model(model: _AspectClassifier, path: str) -> None:
    """Write a JSON snapshot (magic, version, family, hyper, parameters)."""
    model._check_fitted()
    hyper = asdict(model.hyper_)
    hyper["ngram_windows"] = list(hyper["ngram_windows"])
    payload = {
        "magic": SNAPSHOT_MAGIC,
        "version": SNAPSHOT_VERSION,
        "family": model._family,
        "codec_version": ontology.CODEC_VERSION,
        "classes": list(model.classes_),
        "hyper": hyper,
        "params": {
            name: {"shape": list(t.data.shape), "data": [float(v) for v in t.data.reshape(-1)]}
            for name, t in model.params_.items()
        },
        "extra": model._extra_state(),
        "history": model.history_.epochs,
        "best_epoch": model.history_.best_epoch,
    }
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
    os.replace(tmp, path)


def _hyper_from_dict(d: dict) -> HyperParams:
    d = dict(d)
    d["ngram_windows"] = tuple(d.get("ngram_windows") or (1,))
    return HyperParams(**d)


def load_model(path: str, expected_family: str | None = None) -> _AspectClassifier:
    """Load a snapshot back into a ready-to-predict estimator."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SnapshotError(f"{path}: truncated or corrupt snapshot ({exc})") from None
    if not isinstance(payload, dict) or payload.get("magic") != SNAPSHOT_MAGIC:
        raise SnapshotError(f"{path}: not a model snapshot")
    if payload.get("version") != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {payload.get('version')}")
    if payload.get("codec_version") != ontology.CODEC_VERSION:
        raise SnapshotError(
            f"{path}: label codec {payload.get('codec_version')!r} does not match "
            f"{ontology.CODEC_VERSION!r}"
        )
    family = payload.get("family")
    if family not in _FAMILY_CLASSES:
        raise SnapshotError(f"{path}: unknown family {family!r}")
    if expected_family is not None and family != expected_family:
        raise SnapshotError(
            f"{path}: snapshot family {family!r} does not match expected {expected_family!r}"
        )
    hyper = _hyper_from_dict(payload["hyper"])
    cls = _FAMILY_CLASSES[family]
    model = cls()
    for key, value in payload["hyper"].items():
        if key in ("family", "filters_per_window", "embedding_size", "ngram_windows"):
            continue
        if hasattr(model, key):
            setattr(model, key, value)
    if family == FAMILY_CNN:
        model.ngram_windows = tuple(hyper.ngram_windows)
        model.filters_per_window = hyper.filters_per_window
    if family == FAMILY_BILSTM:
        model.embedding_size = hyper.embedding_size
    model.hyper_ = hyper
    model.classes_ = tuple(payload["classes"])
    model._restore_extra(payload.get("extra", {}))
    model.params_ = {
        name: Tensor(np.array(entry["data"]).reshape(entry["shape"]))
        for name, entry in payload["params"].items()
    }
    model.history_ = TrainingHistory(
        epochs=list(payload.get("history", [])), best_epoch=int(payload.get("best_epoch", -1))
    )
    if family == FAMILY_BILSTM:
        model._rebind_lstm()
    return model
