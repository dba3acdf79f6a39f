"""
Sensitivity of accuracy and fairness to lambda_fc.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence

import pandas as pd

from corpus.corpus_models import Corpus
from encoders.encoder_params import EncoderParams
from encoders.precomputed import PrecomputedEmbeddings
from evaluator.metrics import (
    TASKS, MetricInputError, MetricsReport, evaluate, report_row, REPORT_COLUMNS
)
from evaluator.predictions import predict_pairs, predict_trials
from trainer.optimizers import DivergenceError
from trainer.train_config import TrainConfig
from trainer.training import train

logger = logging.getLogger(__name__)


def evaluate_tasks(
        params: EncoderParams,
        corpus: Corpus,
        attribute: str,
        tasks: Sequence[str] = TASKS,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> dict[str, MetricsReport]:
    """Scores a model on a corpus for each requested task."""
    pair_predictions = predict_pairs(params, corpus, precomputed)
    reports = {}
    for task in tasks:
        predictions = pair_predictions if task == "criterion" \
            else predict_trials(pair_predictions, corpus)
        reports[task] = evaluate(predictions, task, attribute)
    return reports


def _empty_row(lambda_fc: float, task: str, attribute: str) -> dict:
    return {"lambda": float(lambda_fc), "task": task, "attribute": attribute,
            "accuracy": math.nan, "f1": math.nan, "dp": math.nan,
            "eo": math.nan}


def check_lambdas(lambdas: Sequence[float]) -> None:
    """A sweep needs a non-empty list of non-negative lambdas including 0."""
    if not lambdas:
        raise ValueError("the lambda list is empty")
    if any(value < 0 for value in lambdas):
        raise ValueError("lambda values must be >= 0")
    if 0 not in lambdas:
        raise ValueError("the lambda list must include 0")


def run_cell(
        splits: dict[str, Corpus],
        config: TrainConfig,
        tasks: Sequence[str],
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> list[dict]:
    """
    Trains and scores one lambda value.

    A cell whose training diverges or whose metrics are undefined yields
    NaN metric rows so the remaining cells still run.
    """
    attribute = config.sensitive_attribute
    try:
        params, _ = train(splits, config, precomputed)
        reports = evaluate_tasks(params, splits["test"], attribute, tasks,
                                 precomputed)
    except (DivergenceError, MetricInputError) as error:
        logger.error("lambda %g failed: %s", config.lambda_fc, error)
        return [_empty_row(config.lambda_fc, task, attribute) for task in tasks]
    return [report_row(config.lambda_fc, reports[task]) for task in tasks]


def sweep_lambda(
        splits: dict[str, Corpus],
        base_config: TrainConfig,
        lambdas: Sequence[float],
        tasks: Sequence[str] = ("criterion",),
        workers: int = 1,
        precomputed: Optional[PrecomputedEmbeddings] = None
) -> pd.DataFrame:
    """
    Trains FairPM once per lambda and tabulates the test metrics.

    This function should:
    1. Require a non-empty list of non-negative lambdas that includes 0.
    2. Train every cell with the base config's seed in fairpm mode.
    3. Score the test split for each task.
    4. Run cells in worker processes when workers > 1; rows keep the
    order of the lambda list either way.
    """
    check_lambdas(lambdas)
    unknown = [task for task in tasks if task not in TASKS]
    if unknown:
        raise ValueError(f"Unknown tasks: {unknown}")
    base_config.validate()
    configs = [replace(base_config, mode="fairpm", lambda_fc=float(value))
               for value in lambdas]
    logger.info("Sweeping %d lambda values on %s", len(configs),
                base_config.sensitive_attribute)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run_cell, splits, config, tuple(tasks),
                                   precomputed) for config in configs]
            cells = [future.result() for future in futures]
    else:
        cells = [run_cell(splits, config, tasks, precomputed)
                 for config in configs]

    rows = [row for cell in cells for row in cell]
    return pd.DataFrame(rows, columns=list(REPORT_COLUMNS))
