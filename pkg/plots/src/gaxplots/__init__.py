"""Figure rendering for the tracking study's CSV artifacts."""

from .figures import KINDS, PlotSpec, build_figure, render
from .schema import (
    CHANNEL_COLUMNS,
    EXCHANGE_COLUMNS,
    METRICS_COLUMNS,
    TRAIN_COLUMNS,
    SchemaError,
    load_table,
)

__all__ = [
    "KINDS",
    "PlotSpec",
    "build_figure",
    "render",
    "SchemaError",
    "load_table",
    "CHANNEL_COLUMNS",
    "EXCHANGE_COLUMNS",
    "METRICS_COLUMNS",
    "TRAIN_COLUMNS",
]
