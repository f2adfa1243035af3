"""Spatiotemporal and multivariate volatility models for asset-return panels."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .evaluate import bic, dm_matrix, dm_test, forecast_loop, rank_by_mean_loss, rmsfe_mafe  # noqa: E402
from .mgarch import bekk_fit, dcc_fit, proxbekk_fit  # noqa: E402
from .networks import KINDS, WeightMatrix, build_weights  # noqa: E402
from .panel import ResidualPanel, ReturnsPanel, diagnostics, fit_var1, load_panel  # noqa: E402
from .spatial import dstarch_fit, dstarch_forecast, logarch_fit, spgarchx_fit, stegarch_fit, stgarch_fit  # noqa: E402
from .univariate import egarch11_qmle, garch11_qmle  # noqa: E402

__all__ = [
    "KINDS", "ResidualPanel", "ReturnsPanel", "WeightMatrix", "bekk_fit", "bic", "build_weights", "dcc_fit",
    "diagnostics", "dm_matrix", "dm_test", "dstarch_fit", "dstarch_forecast", "egarch11_qmle", "fit_var1",
    "forecast_loop", "garch11_qmle", "load_panel", "logarch_fit", "proxbekk_fit", "rank_by_mean_loss",
    "rmsfe_mafe", "spgarchx_fit", "stegarch_fit", "stgarch_fit",
]
