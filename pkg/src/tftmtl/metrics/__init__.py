from .core import accuracy_score, mae, mape, mtes, r_squared, relative_improvement, rmse
from .report import (
    REFERENCE_ROWS,
    TABLE_COLUMNS,
    MetricsReport,
    TaskMetrics,
    emit_comparison_table,
    evaluate_predictions,
    reference_table,
    parse_comparison_csv,
)
