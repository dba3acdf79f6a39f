"""
Command-line grammar.

This file contains the following:
1. UsageError / CommandParser -> argparse that raises instead of exiting.
2. build_parser -> the gen, train, eval, sweep, report and compare commands.
"""
from __future__ import annotations

import argparse
import json
import os

from corpus.corpus_models import SENSITIVE_ATTRIBUTES
from trainer.train_config import MODES, OPTIMIZERS

OUT_DIR_VARIABLE = "FAIRMATCH_OUT_DIR"
THREADS_VARIABLE = "FAIRMATCH_THREADS"
DEFAULT_OUT_DIR = "fairmatch_out"


class UsageError(ValueError):
    """Raised for unknown commands, unknown flags and bad flag values."""


class CommandParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def number_list(text: str) -> list[float]:
    """Parses "0,1,2.5" into floats."""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers, got {text!r}"
        ) from error


def integer_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        ) from error


def sized_list(parse, size: int):
    """Argument type for exactly `size` comma-separated values."""
    def parse_sized(text: str) -> list:
        values = parse(text)
        if len(values) != size:
            raise argparse.ArgumentTypeError(
                f"expected {size} comma-separated values, got {text!r}"
            )
        return values
    return parse_sized


def json_object(text: str) -> dict:
    try:
        value = json.loads(text)
    except json.JSONDecodeError as error:
        raise argparse.ArgumentTypeError(
            f"expected a JSON object, got {text!r}"
        ) from error
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError(f"expected a JSON object, got {text!r}")
    return value


# One flag per GeneratorConfig field.
GENERATOR_FLAGS = {
    "seed": int,
    "patient_count": int,
    "trial_count": int,
    "criteria_per_trial": sized_list(integer_list, 2),
    "vocabulary_sizes": json_object,
    "group_proportions": json_object,
    "bias_strength": float,
    "split_ratios": sized_list(number_list, 3),
    "visits_per_patient": sized_list(integer_list, 2),
    "codes_per_visit": float,
    "age_mean": float,
    "age_std": float,
    "missing_category_rate": float,
    "age_criterion_rate": float,
    "favoured_groups": json_object,
    "skewed_code_fraction": float,
}


def default_out_dir() -> str:
    return os.environ.get(OUT_DIR_VARIABLE, DEFAULT_OUT_DIR)


def default_workers() -> int:
    """FAIRMATCH_THREADS when set to a positive integer, otherwise 1."""
    value = os.environ.get(THREADS_VARIABLE, "")
    return int(value) if value.isdigit() and int(value) > 0 else 1


def _add_out_dir(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out-dir", default=None,
                        help=f"output directory (default ${OUT_DIR_VARIABLE} "
                             f"or {DEFAULT_OUT_DIR})")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    """
    Adds one flag per TrainConfig field.

    Flags default to None so only the ones given override the config file.
    """
    attributes = sorted(SENSITIVE_ATTRIBUTES)
    parser.add_argument("--config", help="JSON training config file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--max-epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--lambda-fc", type=float)
    parser.add_argument("--kappa", type=float)
    parser.add_argument("--sensitive-attribute", choices=attributes)
    parser.add_argument("--optimizer", choices=OPTIMIZERS)
    parser.add_argument("--mode", choices=MODES)
    parser.add_argument("--group-stratified", dest="group_stratified",
                        action="store_true", default=None)
    parser.add_argument("--no-group-stratified", dest="group_stratified",
                        action="store_false")
    parser.add_argument("--reversal-weight", type=float)
    parser.add_argument("--embedding-dim", type=int)
    parser.add_argument("--output-dim", type=int)
    parser.add_argument("--conv-channels", type=int)
    parser.add_argument("--embeddings",
                        help="JSON-lines file of precomputed visit and "
                             "criterion vectors")


def build_parser() -> CommandParser:
    """
    Builds the parser.

    This function should:
    1. Add the shared --log-level flag.
    2. Add one subcommand per pipeline step with kebab-case flags.
    """
    parser = CommandParser(
        prog="fairmatch",
        description="Fair patient-trial matching: generate, train, evaluate."
    )
    parser.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", parser_class=CommandParser)
    commands.required = True

    gen = commands.add_parser("gen", help="generate a synthetic corpus")
    gen.add_argument("--config", help="JSON generator config file")
    _add_out_dir(gen)
    for name, parse in GENERATOR_FLAGS.items():
        gen.add_argument(f"--{name.replace('_', '-')}", type=parse)

    train = commands.add_parser("train", help="train a matching model")
    train.add_argument("--corpus-dir", required=True)
    _add_out_dir(train)
    train.add_argument("--checkpoint", help="checkpoint path "
                                            "(default <out-dir>/checkpoint.json)")
    _add_train_flags(train)

    evaluate = commands.add_parser("eval", help="score a checkpoint")
    evaluate.add_argument("--corpus-dir", required=True)
    evaluate.add_argument("--checkpoint")
    evaluate.add_argument("--task", choices=["criterion", "trial"],
                          default="criterion")
    evaluate.add_argument("--attribute", choices=sorted(SENSITIVE_ATTRIBUTES),
                          default="race")
    evaluate.add_argument("--split", choices=["train", "valid", "test"],
                          default="test")
    evaluate.add_argument("--oracle", action="store_true",
                          help="score the oracle labels instead of a model")
    evaluate.add_argument("--embeddings")
    _add_out_dir(evaluate)

    sweep = commands.add_parser("sweep", help="train and score per lambda_fc")
    sweep.add_argument("--corpus-dir", required=True)
    sweep.add_argument("--lambdas", type=number_list, default=[0, 1, 2, 4, 8])
    sweep.add_argument("--attribute", choices=sorted(SENSITIVE_ATTRIBUTES))
    sweep.add_argument("--task", choices=["criterion", "trial", "both"],
                       default="criterion")
    sweep.add_argument("--workers", type=int, default=None)
    sweep.add_argument("--pdf", help="also render the table as a PDF report")
    _add_out_dir(sweep)
    _add_train_flags(sweep)

    report = commands.add_parser("report",
                                 help="list pairs two checkpoints disagree on")
    report.add_argument("--corpus-dir", required=True)
    report.add_argument("--baseline", required=True)
    report.add_argument("--fairpm", required=True)
    report.add_argument("--split", choices=["train", "valid", "test"],
                        default="test")
    report.add_argument("--pdf")
    _add_out_dir(report)

    compare = commands.add_parser(
        "compare", help="baseline, adversarial baseline and FairPM per seed"
    )
    compare.add_argument("--corpus-dir", required=True)
    compare.add_argument("--seeds", type=integer_list, default=[13, 14, 15])
    compare.add_argument("--lambdas", type=number_list, default=[0, 1, 2, 4, 8])
    compare.add_argument("--attribute", choices=sorted(SENSITIVE_ATTRIBUTES))
    compare.add_argument("--workers", type=int, default=None)
    compare.add_argument("--pdf")
    _add_out_dir(compare)
    _add_train_flags(compare)
    return parser
