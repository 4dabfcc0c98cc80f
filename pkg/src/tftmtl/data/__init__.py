from .generator import GeneratorConfig, SyntheticData, generate_synthetic, holiday_calendar, simulate_inventory
from .normalize import (
    CALENDAR_FEATURES,
    DYNAMIC_FEATURES,
    NORMALIZED_FEATURES,
    NormalizerStats,
    StaticEncoder,
    apply_normalizer,
    denormalize,
    fit_normalizer,
)
from .schema import COLUMNS, ProductDayRecord, Violation, read_dataset, validate_schema, write_dataset
from .split import TimeSplit, WindowSplits, assign_windows, shift_months, split_by_time
from .windows import ProductSeries, WindowSample, WindowSet, make_windows, prepare_series
