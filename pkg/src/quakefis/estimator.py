"""scikit-learn estimator wrapping the hybrid fuzzy trainer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .anfis import TrainingConfig, init_grid_fis, train


class AnfisRegressor(RegressorMixin, BaseEstimator):
    """Sugeno fuzzy regressor trained by hybrid least-squares/backprop.

    A grid of ``n_rules`` paired rules is initialized from the
    training-feature percentiles, then refined epoch by epoch: a global
    linear least-squares solve for the rule consequents followed by one
    full-batch gradient step on the bell membership parameters. The
    kept model is the epoch snapshot with the best validation RMSE.

    Rows are assumed to be in chronological (or otherwise meaningful)
    order: the validation split holds out the *last*
    ``validation_fraction`` of the rows, never a random subset, so
    results are reproducible and time-ordered data is not leaked.

    Parameters
    ----------
    n_rules : int, default=2
        Number of rules (one membership function per rule and input).
    epochs : int, default=200
        Training epochs; 0 means a single least-squares pass.
    learning_rate : float, default=0.01
        Initial step size for the membership-parameter updates.
    lr_policy : {"step-adaptive", "fixed"}, default="step-adaptive"
        "step-adaptive" grows the rate 10% after four consecutive
        error decreases and shrinks it 10% after an increase.
    min_mf_width : float, default=1e-3
        Lower bound kept on membership widths during training.
    convergence_tol : float, default=1e-9
        Stop when the epoch-over-epoch train RMSE improvement is
        non-negative but smaller than this.
    validation_fraction : float, default=0.2
        Tail fraction of the rows held out for snapshot selection;
        0 selects on the training RMSE itself.
    random_state : int, default=0
        Recorded in the training config; the procedure itself is
        deterministic.

    Attributes
    ----------
    fis_ : FuzzyInferenceSystem
        The trained rule base.
    report_ : TrainingReport
        Per-epoch RMSE history and the selected epoch.
    n_features_in_ : int
    """

    def __init__(
        self,
        n_rules=2,
        epochs=200,
        learning_rate=0.01,
        lr_policy="step-adaptive",
        min_mf_width=1e-3,
        convergence_tol=1e-9,
        validation_fraction=0.2,
        random_state=0,
    ):
        self.n_rules = n_rules
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.lr_policy = lr_policy
        self.min_mf_width = min_mf_width
        self.convergence_tol = convergence_tol
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )
        n_val = int(len(X) * self.validation_fraction)
        if n_val > 0 and len(X) - n_val >= 1:
            X_tr, y_tr = X[:-n_val], y[:-n_val]
            X_val, y_val = X[-n_val:], y[-n_val:]
        else:
            X_tr, y_tr = X, y
            X_val, y_val = None, None
        config = TrainingConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            lr_policy=self.lr_policy,
            seed=self.random_state,
            min_mf_width=self.min_mf_width,
            convergence_tol=self.convergence_tol,
        )
        fis0 = init_grid_fis(X_tr, n_rules=self.n_rules, min_mf_width=self.min_mf_width)
        self.fis_, self.report_ = train(
            fis0, X_tr, y_tr, X_val=X_val, y_val=y_val, config=config
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "fis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return self.fis_.infer_batch(X)
