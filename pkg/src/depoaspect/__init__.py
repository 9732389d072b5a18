"""Aspect classification for legal deposition transcripts.

Parses depositions into QA pairs, canonicalizes each pair into
declarative sentences, and classifies pairs into a 12-class aspect
ontology with three trainable classifier families, plus an evaluation
and experiment harness.
"""

from .canon import (
    AnswerDA,
    DeclarativeText,
    InputVariant,
    QuestionDA,
    compose_input,
    tag_answer_da,
    tag_question_da,
    to_declarative,
)
from .datasets import LabeledExample, LabeledSet, SplitSpec, SynthSpec, build_examples, split, synth_corpus
from .evaluation import EvalReport, confusion, evaluate, paired_permutation_test, prf1
from .models import (
    BiLstmAttentionClassifier,
    CnnTextClassifier,
    EmbeddingHeadClassifier,
    HyperParams,
    Prediction,
    build_bilstm_attn,
    build_cnn,
    build_emb_head,
    load_model,
    save_model,
)
from .ontology import AspectClass, DeponentRole, aspect_catalog, aspects_for_role, parse_label
from .transcript import Deposition, ParseConfig, QAPair, parse_transcript, qa_stats

__version__ = "0.1.0"

__all__ = [
    "AnswerDA", "AspectClass", "BiLstmAttentionClassifier", "CnnTextClassifier",
    "DeclarativeText", "DeponentRole", "Deposition", "EmbeddingHeadClassifier",
    "EvalReport", "HyperParams", "InputVariant", "LabeledExample", "LabeledSet",
    "ParseConfig", "Prediction", "QAPair", "QuestionDA", "SplitSpec", "SynthSpec",
    "aspect_catalog", "aspects_for_role", "build_bilstm_attn", "build_cnn",
    "build_emb_head", "build_examples", "compose_input", "confusion", "evaluate",
    "load_model", "paired_permutation_test", "parse_label", "parse_transcript",
    "prf1", "qa_stats", "save_model", "split", "synth_corpus", "tag_answer_da",
    "tag_question_da", "to_declarative",
]
