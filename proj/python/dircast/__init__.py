"""Direction forecasting toolkit: lagged returns, principal components,
kernel SVM, baseline models, and rolling-window backtests."""

from ._core import (
    ConvergenceError,
    Error,
    MlpModel,
    PcaModel,
    SvmModel,
    __version__,
    align_panel_csv,
    build_windows,
    direction_labels,
    fit_pca,
    hit_ratio,
    jacobi_eigh,
    random_walk_predict,
    rdp,
    run_backtest,
    summarize_report,
    train_mlp,
    train_svm,
)

__all__ = [
    "ConvergenceError",
    "Error",
    "MlpModel",
    "PcaModel",
    "SvmModel",
    "__version__",
    "align_panel_csv",
    "build_windows",
    "direction_labels",
    "fit_pca",
    "hit_ratio",
    "jacobi_eigh",
    "random_walk_predict",
    "rdp",
    "run_backtest",
    "summarize_report",
    "train_mlp",
    "train_svm",
]
