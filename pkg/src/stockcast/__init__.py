"""Multi-step weekly forecasting of index open values with CNN and LSTM models.

The numerical core (layers, backpropagation, Adam) is written directly on
numpy; see :mod:`stockcast.layers` for the layer contracts.
"""

from .data import DailyRecord, Series, make_weeks, make_windows, parse_csv, read_csv, split, synthesize
from .models import Model, ModelKind, build, forecast
from .optim import AdamState, TrainConfig, adam_step, mse_loss, train
from .report import render_report
from .walk_forward import (
    EvalReport,
    ForecastMatrix,
    per_day_rmse,
    persistence_baseline,
    ratio_to_mean,
    rmse,
    run_rounds,
    walk_forward_evaluate,
)

__version__ = "0.1.0"
