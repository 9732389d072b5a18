"""End-to-end experiment runner.

Reads a JSON config describing a dataset (real files or a synthetic
spec), a list of input variants, and per-family hyperparameter grids;
trains every (variant, family) cell with early stopping, picks the best
grid point by validation weighted F1, evaluates on the held-out test
split, and emits a comparison table plus pairwise significance tests.

Re-running with the same config produces byte-identical results.json:
all randomness is derived from the config seed, per-cell seeds are
stable hashes of (seed, variant, family, grid index), and the output
carries no timestamps.
"""

from __future__ import annotations

import itertools
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import canon, datasets, evaluation, models, ontology
from .autodiff import stable_seed
from .canon import InputVariant
from .embeddings import load_sentence_vectors, load_word_vectors, tokenize
from .transcript import read_pairs_jsonl


class ExperimentError(ValueError):
    pass


_GRID_KEYS = {
    models.FAMILY_CNN: (
        "hidden_size", "dropout_rate", "activation", "ngram_windows",
        "filters_per_window", "learning_rate", "max_seq_len", "batch_size",
        "max_epochs", "l2_coeff", "patience",
    ),
    models.FAMILY_BILSTM: (
        "hidden_size", "embedding_size", "dropout_rate", "learning_rate",
        "max_seq_len", "batch_size", "max_epochs", "l2_coeff", "patience",
    ),
    models.FAMILY_EMB_HEAD: (
        "hidden_size", "dropout_rate", "activation", "learning_rate",
        "max_seq_len", "batch_size", "max_epochs", "l2_coeff", "patience",
    ),
}


@dataclass
class ExperimentConfig:
    dataset: dict
    variants: list[str]
    families: list[dict]
    split: dict = field(default_factory=dict)
    seed: int = 42
    output_dir: str = "experiment-out"
    significance_iterations: int = 1000

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            config = cls(
                dataset=raw["dataset"],
                variants=list(raw["variants"]),
                families=list(raw["families"]),
                split=dict(raw.get("split", {})),
                seed=int(raw.get("seed", 42)),
                output_dir=str(raw.get("output_dir", "experiment-out")),
                significance_iterations=int(raw.get("significance_iterations", 1000)),
            )
        except KeyError as exc:
            raise ExperimentError(f"config missing required field {exc.args[0]!r}") from None
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ExperimentError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    def validate(self) -> None:
        if not self.variants:
            raise ExperimentError("config must list at least one input variant")
        if not self.families:
            raise ExperimentError("config must list at least one model family")
        for v in self.variants:
            canon.parse_variant(v)
        kind = self.dataset.get("kind")
        if kind == "files":
            for key in ("pairs", "labels"):
                path = self.dataset.get(key)
                if not path:
                    raise ExperimentError(f"files dataset requires {key!r}")
                if not os.path.exists(path):
                    raise ExperimentError(f"dataset file not found: {path}")
            for key in ("ds_m", "ds_c"):
                path = self.dataset.get(key)
                if path and not os.path.exists(path):
                    raise ExperimentError(f"dataset file not found: {path}")
        elif kind != "synthetic":
            raise ExperimentError(f"dataset.kind must be 'files' or 'synthetic', got {kind!r}")
        seen_families = set()
        for spec in self.families:
            family = spec.get("family")
            if family not in models.FAMILIES:
                raise ExperimentError(f"unknown family {family!r}; valid: {models.FAMILIES}")
            if family in seen_families:
                raise ExperimentError(f"family {family!r} listed twice; merge its grids")
            seen_families.add(family)
            for key in spec.get("grid", {}):
                if key not in _GRID_KEYS[family]:
                    raise ExperimentError(f"grid key {key!r} not tunable for family {family}")
            source = spec.get("word_vectors") if family == models.FAMILY_CNN else None
            if isinstance(source, str) and not os.path.exists(source):
                raise ExperimentError(f"word-vector file not found: {source}")
            source = spec.get("sentence_vectors") if family == models.FAMILY_EMB_HEAD else None
            if isinstance(source, str) and not os.path.exists(source):
                raise ExperimentError(f"sentence-vector file not found: {source}")
            if family == models.FAMILY_EMB_HEAD and spec.get("sentence_vectors") is None:
                raise ExperimentError("emb_head family requires a sentence_vectors source")
            if family == models.FAMILY_CNN and spec.get("word_vectors") is None:
                raise ExperimentError("cnn family requires a word_vectors source")
        synth_refs = any(
            isinstance(spec.get("sentence_vectors"), dict) or isinstance(spec.get("word_vectors"), dict)
            for spec in self.families
        )
        if synth_refs and kind != "synthetic":
            for spec in self.families:
                if isinstance(spec.get("sentence_vectors"), dict):
                    raise ExperimentError(
                        "synthetic sentence vectors need the synthetic dataset (class pools)"
                    )


def _synth_spec(config: ExperimentConfig) -> datasets.SynthSpec:
    d = config.dataset
    counts = d.get("per_class_counts", d.get("per_class_count", 50))
    return datasets.SynthSpec(
        per_class_counts=counts,
        vocab_per_class=int(d.get("vocab_per_class", 24)),
        overlap_fraction=float(d.get("overlap_fraction", 0.0)),
        signal_location=d.get("signal_location", "qa"),
        depositions=int(d.get("depositions", 4)),
        seed=int(d.get("seed", config.seed)),
    )


def _load_dataset(config: ExperimentConfig) -> tuple[datasets.LabeledSet, datasets.SynthSpec | None]:
    if config.dataset["kind"] == "synthetic":
        spec = _synth_spec(config)
        return datasets.synth_corpus(spec), spec
    depositions = read_pairs_jsonl(config.dataset["pairs"])
    labels = datasets.read_labels_jsonl(config.dataset["labels"])
    ds_m = canon.read_ds_jsonl(config.dataset["ds_m"]) if config.dataset.get("ds_m") else None
    ds_c = canon.read_ds_jsonl(config.dataset["ds_c"]) if config.dataset.get("ds_c") else None
    return datasets.build_examples(depositions, labels, ds_m=ds_m, ds_c=ds_c), None


def _split_spec(config: ExperimentConfig) -> datasets.SplitSpec:
    s = config.split
    return datasets.SplitSpec(
        ratios=tuple(s.get("ratios", (0.70, 0.20, 0.10))),
        stratified=bool(s.get("stratified", True)),
        by_deposition=bool(s.get("by_deposition", False)),
        seed=int(s.get("seed", config.seed)),
    )


def _grid_points(grid: dict) -> list[dict]:
    if not grid:
        return [{}]
    keys = sorted(grid)
    points = []
    for combo in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, combo))
        if "ngram_windows" in point:
            point["ngram_windows"] = tuple(point["ngram_windows"])
        points.append(point)
    return points


def _estimator(family: str, point: dict, seed: int, resources: dict):
    kwargs = dict(point)
    kwargs["seed"] = seed
    kwargs["classes"] = resources["classes"]
    if family == models.FAMILY_CNN:
        return models.CnnTextClassifier(word_embeddings=resources["word_embeddings"], **kwargs)
    if family == models.FAMILY_BILSTM:
        return models.BiLstmAttentionClassifier(**kwargs)
    return models.EmbeddingHeadClassifier(sentence_vectors=resources["sentence_vectors"], **kwargs)


def _compose_or_raise(ex: datasets.LabeledExample, variant: InputVariant) -> str:
    try:
        return ex.compose(variant)
    except canon.ComposeError as exc:
        raise ExperimentError(f"example {ex.id}: {exc}") from None


def run_cell(config: ExperimentConfig, variant_token: str, family_index: int) -> dict:
    """Train and evaluate one (variant, family) cell; pure function of config."""
    variant = canon.parse_variant(variant_token)
    family_spec = config.families[family_index]
    family = family_spec["family"]
    labeled, synth_spec = _load_dataset(config)
    train_set, val_set, test_set = datasets.split(labeled, _split_spec(config))

    def xs(part: datasets.LabeledSet):
        texts = [_compose_or_raise(ex, variant) for ex in part.examples]
        if family == models.FAMILY_EMB_HEAD:
            return [f"{ex.id}#{variant.value}" for ex in part.examples]
        return texts

    resources: dict = {"classes": tuple(ontology.VALID_CODES)}
    if family == models.FAMILY_CNN:
        source = family_spec["word_vectors"]
        if isinstance(source, str):
            resources["word_embeddings"] = load_word_vectors(source)
        else:
            tokens = {
                t
                for ex in labeled.examples
                for t in tokenize(_compose_or_raise(ex, variant))
            }
            resources["word_embeddings"] = datasets.synth_word_vectors(
                tokens, dim=int(source.get("dim", 16)), seed=int(source.get("seed", config.seed))
            )
    if family == models.FAMILY_EMB_HEAD:
        source = family_spec["sentence_vectors"]
        if isinstance(source, str):
            resources["sentence_vectors"] = load_sentence_vectors(source)
        else:
            id_texts = [
                (f"{ex.id}#{variant.value}", _compose_or_raise(ex, variant))
                for ex in labeled.examples
            ]
            resources["sentence_vectors"] = datasets.synth_sentence_vectors(
                id_texts,
                synth_spec.class_pools(),
                extra_dim=int(source.get("extra_dim", 4)),
                seed=int(source.get("seed", config.seed)),
            )

    train_x, val_x, test_x = xs(train_set), xs(val_set), xs(test_set)
    train_y, val_y, test_y = train_set.labels(), val_set.labels(), test_set.labels()

    best = None
    for index, point in enumerate(_grid_points(family_spec.get("grid", {}))):
        seed = stable_seed(config.seed, variant.value, family, index)
        model = _estimator(family, point, seed, resources)
        model.fit(train_x, train_y, X_val=val_x, y_val=val_y)
        val_f1 = model.history_.epochs[model.history_.best_epoch]["val_weighted_f1"]
        if best is None or val_f1 > best["val_f1"]:
            best = {"model": model, "point": point, "index": index, "val_f1": val_f1}

    model = best["model"]
    preds = list(model.predict(test_x))
    report = evaluation.evaluate(test_y, preds, model.classes_)
    best_point = dict(best["point"])
    if "ngram_windows" in best_point:
        best_point["ngram_windows"] = list(best_point["ngram_windows"])
    return {
        "variant": variant.value,
        "family": family,
        "best_hyper": best_point,
        "grid_index": best["index"],
        "val_weighted_f1": best["val_f1"],
        "weighted_f1": report.weighted_f1,
        "report": evaluation.report_to_dict(report),
        "history": model.history_.epochs,
        "best_epoch": model.history_.best_epoch,
        "test_predictions": preds,
        "test_golds": list(test_y),
        "_model": model,
    }


@dataclass
class ExperimentResult:
    cells: dict[str, dict]
    significance: list[dict]
    failures: dict[str, str]


def _cell_key(variant: str, family: str) -> str:
    return f"{variant}|{family}"


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run the full grid; cell failures are recorded and the run continues."""
    config.validate()
    tasks = [
        (variant, index)
        for variant in config.variants
        for index in range(len(config.families))
    ]
    cells: dict[str, dict] = {}
    failures: dict[str, str] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                _cell_key(canon.parse_variant(v).value, config.families[i]["family"]):
                    pool.submit(run_cell, config, v, i)
                for v, i in tasks
            }
            for key, future in futures.items():
                try:
                    cells[key] = future.result()
                except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                    failures[key] = f"{type(exc).__name__}: {exc}"
    else:
        for variant, index in tasks:
            key = _cell_key(canon.parse_variant(variant).value, config.families[index]["family"])
            try:
                cells[key] = run_cell(config, variant, index)
            except Exception as exc:  # noqa: BLE001
                failures[key] = f"{type(exc).__name__}: {exc}"
    if not cells:
        detail = "; ".join(f"{k}: {v}" for k, v in sorted(failures.items()))
        raise ExperimentError(f"all experiment cells failed: {detail}")

    significance = []
    keys = sorted(cells)
    for i, key_a in enumerate(keys):
        for key_b in keys[i + 1:]:
            a, b = cells[key_a], cells[key_b]
            if a["test_golds"] != b["test_golds"]:
                continue
            p = evaluation.paired_permutation_test(
                a["test_predictions"],
                b["test_predictions"],
                a["test_golds"],
                n_iter=config.significance_iterations,
                seed=stable_seed(config.seed, "significance", key_a, key_b),
            )
            significance.append({"a": key_a, "b": key_b, "p_value": p})
    return ExperimentResult(cells=cells, significance=significance, failures=failures)


def compare_table(result: ExperimentResult, config: ExperimentConfig) -> str:
    """Text grid of test weighted F1: rows = variants, columns = families.

    Every cell tied for the best score is marked with '*'.
    """
    families = [spec["family"] for spec in config.families]
    variants = [canon.parse_variant(v).value for v in config.variants]
    scores = {
        key: cell["weighted_f1"] for key, cell in result.cells.items()
    }
    best = max(scores.values()) if scores else None
    width = max([len("variant")] + [len(v) for v in variants]) + 2
    header = "variant".ljust(width) + "".join(f"{f:>14}" for f in families)
    lines = [header]
    for variant in variants:
        row = variant.ljust(width)
        for family in families:
            key = _cell_key(variant, family)
            if key in scores:
                mark = "*" if best is not None and scores[key] == best else ""
                row += f"{scores[key]:.4f}{mark}".rjust(14)
            elif key in result.failures:
                row += "failed".rjust(14)
            else:
                row += "-".rjust(14)
        lines.append(row)
    lines.append("# '*' marks the best cell(s); ties all marked")
    return "\n".join(lines)


def results_payload(result: ExperimentResult, config: ExperimentConfig) -> dict:
    cells = {}
    for key, cell in result.cells.items():
        cells[key] = {k: v for k, v in cell.items() if not k.startswith("_")}
    return {
        "config": {
            "dataset": config.dataset,
            "variants": [canon.parse_variant(v).value for v in config.variants],
            "families": config.families,
            "split": config.split,
            "seed": config.seed,
            "significance_iterations": config.significance_iterations,
        },
        "cells": cells,
        "failures": result.failures,
        "significance": result.significance,
        "table": compare_table(result, config),
    }


def write_results(result: ExperimentResult, config: ExperimentConfig) -> str:
    """Write results.json, the text table, and per-cell model snapshots."""
    os.makedirs(config.output_dir, exist_ok=True)
    payload = results_payload(result, config)
    out_path = os.path.join(config.output_dir, "results.json")
    tmp = out_path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, out_path)
    table_path = os.path.join(config.output_dir, "table.txt")
    with open(table_path + ".tmp", "w", encoding="utf-8") as fh:
        fh.write(payload["table"] + "\n")
    os.replace(table_path + ".tmp", table_path)
    for key, cell in result.cells.items():
        model = cell.get("_model")
        if model is not None:
            snap = os.path.join(config.output_dir, f"model_{key.replace('|', '_')}.json")
            models.save_model(model, snap)
    return out_path
