"""
Command handlers and the process entry point.

This file contains the following functions:
1. command_gen -> writes a corpus directory with a provenance record.
2. command_train -> trains and writes a checkpoint plus its history.
3. command_eval -> scores a checkpoint (or the oracle) on one split.
4. command_sweep -> one train + eval per lambda, written as a table.
5. command_report -> pairs on which two checkpoints disagree.
6. command_compare -> baseline, adversarial baseline and FairPM per seed.
7. run -> parses arguments, dispatches and maps errors to exit codes.

Every command prints one JSON object to stdout; logs go to stderr.
"""
from __future__ import annotations

import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path
from typing import Optional, Sequence

import pandas as pd

from cli.cli_parser import (
    GENERATOR_FLAGS, UsageError, build_parser, default_out_dir,
    default_workers
)
from corpus.corpus_generation import (
    CorpusConfigError, GeneratorConfig, generate, split
)
from corpus.corpus_io import (
    PROVENANCE_FILE, CorpusParseError, criterion_kind_counts, label_rates,
    load_corpus_dir, save_corpus_dir, write_text_atomic
)
from corpus.corpus_models import SENSITIVE_ATTRIBUTES
from encoders.precomputed import EmbeddingFileError, load_precomputed_embeddings
from evaluator.case_study import (
    PairSetMismatchError, case_study, case_study_table, divergences_by_group
)
from evaluator.comparison import compare_modes
from evaluator.metrics import MetricInputError, evaluate
from evaluator.predictions import (
    PredictionError, VocabularyMismatchError, check_vocabulary,
    oracle_predictions, predict_pairs, predict_trials
)
from evaluator.sweep import check_lambdas, sweep_lambda
from pdf_export.pdf_export import (
    create_case_study_report, create_comparison_report, create_sweep_report
)
from trainer.checkpoint import (
    CheckpointError, load_checkpoint, save_checkpoint, save_history
)
from trainer.optimizers import DivergenceError
from trainer.train_config import TrainConfig, TrainConfigError
from trainer.training import train

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3

USAGE_ERRORS = (UsageError, TrainConfigError, CorpusConfigError)
DATA_ERRORS = (
    OSError, json.JSONDecodeError, CorpusParseError, CheckpointError,
    EmbeddingFileError, VocabularyMismatchError, MetricInputError,
    PredictionError, PairSetMismatchError
)


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True
    )


def emit(data: dict) -> None:
    print(json.dumps(data))


def out_dir_of(args) -> Path:
    return Path(args.out_dir or default_out_dir())


def table_records(table: pd.DataFrame) -> list[dict]:
    """Rows as JSON-ready dicts; NaN becomes null."""
    return json.loads(table.to_json(orient="records"))


def write_table(path: Path, table: pd.DataFrame) -> None:
    write_text_atomic(path, table.to_csv(index=False))


def train_config_from_args(args) -> TrainConfig:
    """
    Builds a TrainConfig from a config file and flags.

    This function should:
    1. Start from the defaults, or from --config when given.
    2. Override every field whose flag was passed.
    3. Let --attribute, where the command has it, set the sensitive attribute.
    4. Validate the result.
    """
    config = TrainConfig.from_json_file(args.config) if args.config \
        else TrainConfig()
    data = config.to_dict()
    for field in fields(TrainConfig):
        value = getattr(args, field.name, None)
        if value is not None:
            data[field.name] = value
    if getattr(args, "attribute", None):
        data["sensitive_attribute"] = args.attribute
    return TrainConfig.from_dict(data)


def load_embeddings(args, config: Optional[TrainConfig] = None):
    path = getattr(args, "embeddings", None)
    if not path:
        return None
    return load_precomputed_embeddings(
        path, config.embedding_dim if config is not None else None
    )


# COMMANDS #


def command_gen(args) -> None:
    """
    Generates a corpus directory.

    This function should:
    1. Load the generator config and apply flag overrides; every config
    field has a flag.
    2. Generate and split the corpus.
    3. Write corpus.jsonl, the three split files and provenance.json.
    """
    config = GeneratorConfig.from_json_file(args.config) if args.config \
        else GeneratorConfig()
    overrides = {
        name: getattr(args, name) for name in GENERATOR_FLAGS
        if getattr(args, name) is not None
    }
    if overrides:
        try:
            config = GeneratorConfig.from_dict({**config.to_dict(), **overrides})
        except (TypeError, AttributeError) as error:
            raise UsageError(f"malformed generator flag: {error}") from error

    corpus = generate(config)
    splits = split(corpus, config.split_ratios, config.seed)
    out_dir = out_dir_of(args)
    paths = save_corpus_dir(corpus, splits, out_dir)

    provenance = {
        "command": "gen",
        "seed": config.seed,
        "config-hash": config.config_hash(),
        "config": config.to_dict(),
        "split-sizes": {name: len(part.patients)
                        for name, part in splits.items()},
        "criterion-kinds": criterion_kind_counts(corpus),
        "label-rates": {
            attribute: json.loads(
                label_rates(corpus, attribute).to_json(orient="index")
            )
            for attribute in SENSITIVE_ATTRIBUTES
        },
    }
    provenance_path = out_dir / PROVENANCE_FILE
    write_text_atomic(provenance_path,
                      json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    emit({
        "files": {name: str(path) for name, path in paths.items()},
        "provenance": str(provenance_path),
        "split-sizes": provenance["split-sizes"],
    })


def command_train(args) -> None:
    config = train_config_from_args(args)
    splits = load_corpus_dir(args.corpus_dir)
    params, history = train(splits, config, load_embeddings(args, config))

    checkpoint = Path(args.checkpoint) if args.checkpoint \
        else out_dir_of(args) / "checkpoint.json"
    history_path = checkpoint.with_name(f"{checkpoint.stem}.history.json")
    save_checkpoint(checkpoint, params, config, history)
    save_history(history_path, history)
    emit({
        "checkpoint": str(checkpoint),
        "history": str(history_path),
        "epochs": len(history),
        "best-epoch": history.best_epoch,
        "best-valid": history.best.valid.to_dict(),
    })


def command_eval(args) -> None:
    """
    Scores one split.

    This function should:
    1. Use the oracle labels with --oracle, otherwise the checkpoint's model
    after checking its vocabulary against the corpus.
    2. Derive trial predictions from criterion predictions for --task trial.
    3. Write the report and print it.
    """
    splits = load_corpus_dir(args.corpus_dir)
    corpus = splits[args.split]
    if args.oracle:
        source = "oracle"
        pair_predictions = oracle_predictions(corpus)
    else:
        if not args.checkpoint:
            raise UsageError("eval needs --checkpoint unless --oracle is given")
        source = args.checkpoint
        checkpoint = load_checkpoint(args.checkpoint)
        check_vocabulary(checkpoint.params, splits["train"])
        pair_predictions = predict_pairs(
            checkpoint.params, corpus, load_embeddings(args, checkpoint.config)
        )

    predictions = pair_predictions if args.task == "criterion" \
        else predict_trials(pair_predictions, corpus)
    report = evaluate(predictions, args.task, args.attribute)
    data = {**report.to_dict(), "split": args.split, "source": source}

    path = out_dir_of(args) / f"report-{args.task}-{args.attribute}.json"
    write_text_atomic(path, json.dumps(data, indent=2) + "\n")
    emit(data)


def command_sweep(args) -> None:
    try:
        check_lambdas(args.lambdas)
    except ValueError as error:
        raise UsageError(str(error)) from error
    config = train_config_from_args(args)
    splits = load_corpus_dir(args.corpus_dir)
    tasks = ("criterion", "trial") if args.task == "both" else (args.task,)

    table = sweep_lambda(splits, config, args.lambdas, tasks,
                         workers=args.workers or default_workers(),
                         precomputed=load_embeddings(args, config))
    path = out_dir_of(args) / "sweep.csv"
    write_table(path, table)
    if args.pdf:
        create_sweep_report(args.pdf, table)
    emit({"table": str(path), "rows": table_records(table)})


def command_report(args) -> None:
    splits = load_corpus_dir(args.corpus_dir)
    corpus = splits[args.split]
    baseline = load_checkpoint(args.baseline)
    fairpm = load_checkpoint(args.fairpm)
    check_vocabulary(baseline.params, splits["train"])
    check_vocabulary(fairpm.params, splits["train"])

    rows = case_study(predict_pairs(baseline.params, corpus),
                      predict_pairs(fairpm.params, corpus), corpus)
    table = case_study_table(rows)
    path = out_dir_of(args) / "case_study.csv"
    write_table(path, table)
    if args.pdf:
        create_case_study_report(args.pdf, table)
    emit({
        "case-study": str(path),
        "divergent-pairs": len(rows),
        "by-group": {
            attribute: {group: len(members) for group, members in
                        divergences_by_group(rows, attribute).items()}
            for attribute in SENSITIVE_ATTRIBUTES
        },
    })


def command_compare(args) -> None:
    try:
        check_lambdas(args.lambdas)
    except ValueError as error:
        raise UsageError(str(error)) from error
    if not args.seeds:
        raise UsageError("--seeds needs at least one seed")
    config = train_config_from_args(args)
    splits = load_corpus_dir(args.corpus_dir)

    table, flags = compare_modes(splits, config, args.seeds, args.lambdas,
                                 workers=args.workers or default_workers(),
                                 precomputed=load_embeddings(args, config))
    out_dir = out_dir_of(args)
    write_table(out_dir / "comparison.csv", table)
    write_table(out_dir / "comparison_flags.csv", flags)
    if args.pdf:
        create_comparison_report(args.pdf, table, flags)
    emit({
        "table": str(out_dir / "comparison.csv"),
        "flags": table_records(flags),
        "rows": table_records(table),
    })


COMMANDS = {
    "gen": command_gen,
    "train": command_train,
    "eval": command_eval,
    "sweep": command_sweep,
    "report": command_report,
    "compare": command_compare,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Runs one command and returns its exit code.

    This function should:
    1. Return 1 for usage errors and invalid configurations.
    2. Return 2 for missing or malformed files and undefined metrics.
    3. Return 3 when training diverges.
    4. Write every error message to stderr.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as error:
        print(error, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    configure_logging(args.log_level)
    try:
        COMMANDS[args.command](args)
    except USAGE_ERRORS as error:
        print(f"usage error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as error:
        logger.error("training diverged: %s", error)
        print(f"training diverged: {error}", file=sys.stderr)
        return EXIT_DIVERGED
    except DATA_ERRORS as error:
        print(f"data error: {error}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
