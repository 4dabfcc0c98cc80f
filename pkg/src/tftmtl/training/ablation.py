"""Multi-task vs single-task vs recurrent baseline on one shared set of windows."""

from __future__ import annotations

from dataclasses import dataclass

from ..metrics import MetricsReport, emit_comparison_table, evaluate_predictions, relative_improvement
from .pipeline import Prepared, fit
from .trainer import TrainConfig, TrainResult, predict_windows

# (row name, model kind, tasks)
VARIANTS = (
    ("TFT-MTL", "tft", ("sales", "inventory")),
    ("TFT single-task (sales)", "tft", ("sales",)),
    ("TFT single-task (inventory)", "tft", ("inventory",)),
    ("GRU", "gru", ("sales", "inventory")),
)


@dataclass
class AblationResult:
    reports: dict[str, MetricsReport]
    results: dict[str, TrainResult]
    checksums: dict[str, dict[str, str]]  # per model: the window sets it consumed

    def table(self) -> tuple[str, str]:
        return emit_comparison_table(list(self.reports.items()))

    def deltas(self) -> dict[str, float]:
        """Percent improvement of the multi-task model over each single-task model."""
        mtl = self.reports["TFT-MTL"]
        out = {}
        for task, name in (("sales", "TFT single-task (sales)"), ("inventory", "TFT single-task (inventory)")):
            if name in self.reports:
                base, cand = self.reports[name].get(task), mtl.get(task)
                out[f"{task}_rmse"] = relative_improvement(base.rmse, cand.rmse)
                out[f"{task}_mape"] = relative_improvement(base.mape_percent, cand.mape_percent)
        return out


def run_ablation(prep: Prepared, cfg: TrainConfig, variants=VARIANTS) -> AblationResult:
    """Train every variant with the same seed, budget and windows; score on the test split."""
    reports, results, checksums = {}, {}, {}
    targets = prep.test.raw_targets()
    for name, kind, tasks in variants:
        model, result, _ = fit(prep, cfg, kind, tasks)
        checksums[name] = prep.checksums()
        reports[name] = evaluate_predictions(predict_windows(model, result.best_params, prep.test,
                                                             cfg.eval_batch_size), targets)
        results[name] = result
    return AblationResult(reports, results, checksums)
