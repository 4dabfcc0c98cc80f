"""Multi-task temporal fusion forecasting of daily sales and inventory."""

__version__ = "0.1.0"
