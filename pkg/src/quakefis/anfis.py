"""Hybrid training of Sugeno fuzzy systems.

Each training epoch alternates two half-steps: a global linear
least-squares solve for every rule's consequent coefficients (premises
held fixed), followed by one full-batch gradient-descent step on the
bell membership parameters (consequents held fixed). Gradients flow
through the network layers

    degrees -> firing strengths -> normalized strengths -> output

and are checked against central finite differences in the test suite.
The trainer requires the product AND operator, whose gradients are
smooth; minimum-mode systems can still be evaluated but not trained.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fuzzy import BellMF, FuzzyInferenceSystem, NoRuleFiresError, SugenoRule

# |x - c| below this counts as "at the center", where the b and c
# partials of the bell curve are defined as 0 (the peak).
CENTER_TOL = 1e-12


class TrainingDivergedError(RuntimeError):
    """Epoch RMSE exceeded 10x the first epoch's RMSE."""

    def __init__(self, epoch, rmse, initial_rmse, history):
        self.epoch = epoch
        self.rmse = rmse
        self.initial_rmse = initial_rmse
        self.history = history
        super().__init__(
            f"training diverged at epoch {epoch}: RMSE {rmse:.6g} exceeds "
            f"10x the initial RMSE {initial_rmse:.6g}"
        )


@dataclass
class LayerTrace:
    """Every intermediate quantity of one forward pass.

    degrees has shape (n_rules, input_dim); firing, normalized and
    consequents have shape (n_rules,).
    """

    degrees: np.ndarray
    firing: np.ndarray
    normalized: np.ndarray
    consequents: np.ndarray
    output: float


@dataclass
class BatchTrace:
    """Forward-pass quantities for a whole batch (leading axis: sample)."""

    degrees: np.ndarray      # (n, n_rules, input_dim)
    firing: np.ndarray       # (n, n_rules)
    normalized: np.ndarray   # (n, n_rules)
    consequents: np.ndarray  # (n, n_rules)
    outputs: np.ndarray      # (n,)


@dataclass
class TrainingConfig:
    """Hyperparameters of the hybrid trainer.

    ``epochs=0`` still runs a single least-squares pass so the returned
    model always has fitted consequents. ``learning_rate=0`` leaves the
    membership parameters untouched. ``lr_policy`` is either "fixed" or
    "step-adaptive" (grow 10% after 4 consecutive error decreases,
    shrink 10% after an increase). ``seed`` is recorded for provenance;
    the schedule itself is deterministic.
    """

    epochs: int = 200
    learning_rate: float = 0.01
    lr_policy: str = "step-adaptive"
    seed: int = 0
    min_mf_width: float = 1e-3
    convergence_tol: float = 1e-9

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ValueError(f"epochs must be a non-negative integer, got {self.epochs}")
        self.epochs = int(self.epochs)
        if not (math.isfinite(self.learning_rate) and self.learning_rate >= 0.0):
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.lr_policy not in ("fixed", "step-adaptive"):
            raise ValueError(f"lr_policy must be 'fixed' or 'step-adaptive', got {self.lr_policy!r}")
        self.seed = int(self.seed)
        if not (math.isfinite(self.min_mf_width) and self.min_mf_width > 0.0):
            raise ValueError(f"min_mf_width must be > 0, got {self.min_mf_width}")
        if not (math.isfinite(self.convergence_tol) and self.convergence_tol >= 0.0):
            raise ValueError(f"convergence_tol must be >= 0, got {self.convergence_tol}")


@dataclass
class EpochStats:
    epoch: int
    train_rmse: float
    val_rmse: float
    learning_rate: float


@dataclass
class TrainingReport:
    """Per-epoch error history plus the selected snapshot's position."""

    history: list
    epochs_run: int
    best_epoch: int
    best_val_rmse: float

    def to_csv_string(self) -> str:
        lines = ["epoch,train_rmse,val_rmse,learning_rate"]
        for row in self.history:
            lines.append(
                f"{row.epoch},{row.train_rmse!r},{row.val_rmse!r},{row.learning_rate!r}"
            )
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_string())


# -- forward pass ---------------------------------------------------------


def _require_product(fis: FuzzyInferenceSystem) -> None:
    if fis.and_operator != "product":
        raise ValueError(
            "hybrid training requires the product AND operator; "
            f"this system uses {fis.and_operator!r}"
        )


def _param_arrays(fis):
    """Membership and consequent parameters as (R, N) / (R, N+1) arrays."""
    a = np.array([[mf.a for mf in r.antecedents] for r in fis.rules])
    b = np.array([[mf.b for mf in r.antecedents] for r in fis.rules])
    c = np.array([[mf.c for mf in r.antecedents] for r in fis.rules])
    p = np.array([r.consequent for r in fis.rules])
    return a, b, c, p


def _batch_parts(fis, X):
    """Degrees, firing strengths and rule outputs for all rows of X."""
    a, b, c, p = _param_arrays(fis)
    with np.errstate(over="ignore"):
        mu = 1.0 / (1.0 + np.abs((X[:, None, :] - c) / a) ** (2.0 * b))
    w = mu.prod(axis=2)
    z = p[:, 0][None, :] + X @ p[:, 1:].T
    return mu, w, z


def forward(fis: FuzzyInferenceSystem, x) -> LayerTrace:
    """Single forward pass recording every layer's output.

    trace.output agrees with ``fis.infer(x)`` bit-for-bit: both paths
    evaluate the same membership and averaging arithmetic.
    """
    _require_product(fis)
    x = fis._check_input(x)
    degrees = fis.membership_grid(x)
    w = fis.firing_strengths(x)
    s = w.sum()
    if s == 0.0:
        raise NoRuleFiresError(x)
    z = fis.rule_outputs(x)
    return LayerTrace(
        degrees=degrees,
        firing=w,
        normalized=w / s,
        consequents=z,
        output=float(np.dot(w, z) / s),
    )


def batch_forward(fis: FuzzyInferenceSystem, X) -> BatchTrace:
    """Vectorized forward pass; raises NoRuleFiresError on any silent row."""
    _require_product(fis)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fis.input_dim:
        raise ValueError(f"expected (n_samples, {fis.input_dim}) inputs, got {X.shape}")
    mu, w, z = _batch_parts(fis, X)
    s = w.sum(axis=1)
    silent = np.flatnonzero(s == 0.0)
    if silent.size:
        raise NoRuleFiresError(X[silent[0]])
    return BatchTrace(
        degrees=mu,
        firing=w,
        normalized=w / s[:, None],
        consequents=z,
        outputs=np.einsum("nr,nr->n", w, z) / s,
    )


# -- least squares on consequents ------------------------------------------


def _check_data(fis, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != fis.input_dim:
        raise ValueError(f"expected (n_samples, {fis.input_dim}) inputs, got {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"targets must have shape ({X.shape[0]},), got {y.shape}")
    if X.shape[0] == 0:
        raise ValueError("dataset is empty")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("inputs and targets must be finite")
    return X, y


def fit_consequents(fis: FuzzyInferenceSystem, X, y):
    """Globally optimal consequent coefficients, premises held fixed.

    Solves the linear least-squares problem over all R*(N+1)
    coefficients with regressors ``normalized_firing_i * [1, x]``;
    rank-deficient systems get the minimum-norm solution. Rows firing
    no rule cannot constrain the fit: they are excluded and their
    indices returned.

    Returns (fitted_system, skipped_row_indices).
    """
    _require_product(fis)
    X, y = _check_data(fis, X, y)
    _, w, _ = _batch_parts(fis, X)
    s = w.sum(axis=1)
    skipped = np.flatnonzero(s == 0.0).tolist()
    keep = s > 0.0
    if not np.any(keep):
        raise ValueError("every datum fires no rule; cannot fit consequents")
    Xk, yk, wk, sk = X[keep], y[keep], w[keep], s[keep]
    wn = wk / sk[:, None]  # (n, R)
    n, r = wn.shape
    ones_x = np.hstack([np.ones((n, 1)), Xk])  # (n, N+1)
    phi = (wn[:, :, None] * ones_x[:, None, :]).reshape(n, r * (fis.input_dim + 1))
    theta, *_ = np.linalg.lstsq(phi, yk, rcond=None)
    coeffs = theta.reshape(r, fis.input_dim + 1)
    fitted = fis.copy()
    for rule, row in zip(fitted.rules, coeffs):
        rule.consequent = np.array(row)
    return fitted, skipped


# -- gradients --------------------------------------------------------------


def _batch_premise_gradients(fis, X, y):
    """Mean over samples of the per-sample premise gradient, plus the
    mask of rows that fired. Shape (R, N, 3), last axis (da, db, dc)."""
    a, b, c, _ = _param_arrays(fis)
    mu, w, z = _batch_parts(fis, X)
    s = w.sum(axis=1)
    keep = s > 0.0
    if not np.any(keep):
        raise NoRuleFiresError(X[0])
    mu, w, z, s = mu[keep], w[keep], z[keep], s[keep]
    Xk, yk = X[keep], y[keep]
    n, r, d = mu.shape

    out = np.einsum("nr,nr->n", w, z) / s
    dedz = 2.0 * (out - yk)                        # dE/dz
    dzdw = (z - out[:, None]) / s[:, None]         # (n, R)

    # leave-one-out products: d w_i / d mu_ij without dividing by mu
    loo = np.empty_like(mu)
    for j in range(d):
        loo[:, :, j] = np.prod(np.delete(mu, j, axis=2), axis=2)

    diff = Xk[:, None, :] - c                      # (n, R, N)
    near = np.abs(diff) < CENTER_TOL
    act = mu * (1.0 - mu)
    dmu_da = 2.0 * b * act / a
    with np.errstate(divide="ignore"):
        ratio = np.abs(diff) / a
        dmu_db = np.where(near, 0.0, -2.0 * act * np.log(np.where(near, 1.0, ratio)))
        dmu_dc = np.where(near, 0.0, 2.0 * b * act / np.where(near, 1.0, diff))

    common = (dedz[:, None] * dzdw)[:, :, None] * loo  # (n, R, N)
    grads = np.stack(
        [
            (common * dmu_da).mean(axis=0),
            (common * dmu_db).mean(axis=0),
            (common * dmu_dc).mean(axis=0),
        ],
        axis=-1,
    )
    return grads, keep


def premise_gradients(fis: FuzzyInferenceSystem, x, target: float) -> np.ndarray:
    """Analytic partials of E = (z - target)^2 w.r.t. every (a, b, c).

    Returns shape (n_rules, input_dim, 3) with the last axis ordered
    (dE/da, dE/db, dE/dc). The b and c partials at |x - c| < 1e-12 are
    defined as 0 (the membership peak).
    """
    _require_product(fis)
    x = fis._check_input(x)
    grads, _ = _batch_premise_gradients(
        fis, x[None, :], np.array([float(target)])
    )
    return grads


def squared_error(fis: FuzzyInferenceSystem, x, target: float) -> float:
    """E = (infer(x) - target)^2, the per-sample training loss."""
    return (fis.infer(x) - float(target)) ** 2


def central_difference(f, theta, h=1e-6, lower_bounds=None):
    """Central finite differences of a scalar function of a vector.

    Per-parameter step is ``h * max(1, |theta_i|)``. Where a lower
    bound would be crossed by the downward probe, a one-sided forward
    difference is used instead and flagged.

    Returns (gradient, one_sided) arrays of theta's shape.
    """
    theta = np.asarray(theta, dtype=float).copy()
    if not (math.isfinite(h) and h > 0.0):
        raise ValueError(f"step h must be > 0, got {h}")
    if lower_bounds is None:
        lower_bounds = np.full(theta.shape, -np.inf)
    else:
        lower_bounds = np.asarray(lower_bounds, dtype=float)
    grad = np.zeros_like(theta)
    one_sided = np.zeros(theta.shape, dtype=bool)
    for i in range(theta.size):
        t0 = theta[i]
        step = h * max(1.0, abs(t0))
        if t0 - step <= lower_bounds[i]:
            theta[i] = t0 + step
            f_plus = f(theta)
            theta[i] = t0
            grad[i] = (f_plus - f(theta)) / step
            one_sided[i] = True
        else:
            theta[i] = t0 + step
            f_plus = f(theta)
            theta[i] = t0 - step
            f_minus = f(theta)
            theta[i] = t0
            grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad, one_sided


def finite_difference_gradient(fis: FuzzyInferenceSystem, x, target, h=1e-6):
    """Numerical premise gradient, the independent check on backprop.

    Probes each membership parameter in turn on a private copy of the
    model (the input system is never mutated). Widths and slopes are
    bounded below by 0, so probes that would cross it fall back to a
    one-sided difference (flagged in the second return value).

    Returns (gradient, one_sided), both shaped (n_rules, input_dim, 3).
    """
    _require_product(fis)
    work = fis.copy()
    x = work._check_input(x)
    target = float(target)
    shape = (work.n_rules, work.input_dim, 3)
    theta = np.array(
        [[[mf.a, mf.b, mf.c] for mf in r.antecedents] for r in work.rules]
    ).ravel()
    lower = np.array(
        [[[0.0, 0.0, -np.inf]] * work.input_dim] * work.n_rules
    ).ravel()

    def loss(vec):
        flat = vec.reshape(shape)
        for i, rule in enumerate(work.rules):
            for j, mf in enumerate(rule.antecedents):
                # plain floats keep the scalar overflow semantics
                mf.a = float(flat[i, j, 0])
                mf.b = float(flat[i, j, 1])
                mf.c = float(flat[i, j, 2])
        return squared_error(work, x, target)

    grad, one_sided = central_difference(loss, theta, h=h, lower_bounds=lower)
    return grad.reshape(shape), one_sided.reshape(shape)


# -- metrics ----------------------------------------------------------------


def evaluate_rmse(fis: FuzzyInferenceSystem, X, y) -> float:
    """Root-mean-square error over the rows that fire at least one rule."""
    X, y = _check_data(fis, X, y)
    _, w, z = _batch_parts(fis, X)
    s = w.sum(axis=1)
    keep = s > 0.0
    if not np.any(keep):
        raise ValueError("every datum fires no rule; RMSE undefined")
    preds = np.einsum("nr,nr->n", w[keep], z[keep]) / s[keep]
    return float(np.sqrt(np.mean((preds - y[keep]) ** 2)))


# -- the hybrid loop ---------------------------------------------------------


def train(
    fis: FuzzyInferenceSystem,
    X,
    y,
    X_val=None,
    y_val=None,
    config: TrainingConfig | None = None,
):
    """Hybrid least-squares / gradient-descent training.

    Per epoch: fit consequents by global least squares, measure train
    and validation RMSE of that candidate, then take one full-batch
    gradient step on the membership parameters (mean gradient over the
    samples). The returned model is the candidate with the best
    validation RMSE seen. Without validation data the training set
    doubles as the validation set.

    Stops early when the train-RMSE improvement over the previous
    epoch is non-negative but below ``convergence_tol`` (an increase is
    left to the adaptive learning rate to absorb), and aborts with
    TrainingDivergedError when an epoch's RMSE exceeds 10x the first
    epoch's. Training is deterministic given data, order and config.

    Returns (best_model, TrainingReport).
    """
    if config is None:
        config = TrainingConfig()
    _require_product(fis)
    X, y = _check_data(fis, X, y)
    if X_val is None:
        X_val, y_val = X, y
    else:
        X_val, y_val = _check_data(fis, X_val, y_val)

    work = fis.copy()
    lr = config.learning_rate
    history: list[EpochStats] = []
    warned_silent = False

    def lms_candidate():
        nonlocal work, warned_silent
        work, skipped = fit_consequents(work, X, y)
        if skipped and not warned_silent:
            warnings.warn(
                f"{len(skipped)} training rows fire no rule and are excluded",
                stacklevel=3,
            )
            warned_silent = True
        tr = evaluate_rmse(work, X, y)
        vr = evaluate_rmse(work, X_val, y_val)
        return tr, vr

    if config.epochs == 0:
        tr, vr = lms_candidate()
        history.append(EpochStats(0, tr, vr, lr))
        return work, TrainingReport(history, 0, 0, vr)

    best = None
    best_val = math.inf
    best_epoch = 0
    initial_tr = None
    prev_tr = None
    streak = 0

    for epoch in range(1, config.epochs + 1):
        tr, vr = lms_candidate()
        if config.lr_policy == "step-adaptive" and prev_tr is not None:
            if tr < prev_tr:
                streak += 1
                if streak >= 4:
                    lr *= 1.1
                    streak = 0
            else:
                if tr > prev_tr:
                    lr *= 0.9
                streak = 0
        history.append(EpochStats(epoch, tr, vr, lr))
        if vr < best_val:
            best_val = vr
            best_epoch = epoch
            best = work.copy()
        if initial_tr is None:
            initial_tr = tr
        elif initial_tr > 0.0 and tr > 10.0 * initial_tr:
            raise TrainingDivergedError(epoch, tr, initial_tr, history)
        converged = prev_tr is not None and 0.0 <= prev_tr - tr < config.convergence_tol
        prev_tr = tr
        if converged:
            break

        grads, _ = _batch_premise_gradients(work, X, y)
        for i, rule in enumerate(work.rules):
            for j, mf in enumerate(rule.antecedents):
                mf.a = max(float(mf.a - lr * grads[i, j, 0]), config.min_mf_width)
                mf.b = max(float(mf.b - lr * grads[i, j, 1]), config.min_mf_width)
                mf.c = float(mf.c - lr * grads[i, j, 2])

    report = TrainingReport(history, history[-1].epoch, best_epoch, best_val)
    return best, report


# -- initialization ----------------------------------------------------------


def init_grid_fis(X, n_rules=2, min_mf_width=1e-3, input_labels=None):
    """Percentile-spread initial system with paired rules.

    With the default two rules, input j gets one membership centered at
    its 25th percentile and one at its 75th, widths half the center
    spacing (floored at ``min_mf_width``) and slope 2; rule i takes the
    i-th membership of every input. A constant input column degenerates
    to coincident centers with the floor width, with a warning.
    Consequents start at zero; the first least-squares pass sets them.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError(f"expected a non-empty (n_samples, n_inputs) array, got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("inputs must be finite")
    if n_rules < 1:
        raise ValueError(f"need at least one rule, got {n_rules}")
    n_inputs = X.shape[1]
    if input_labels is None:
        input_labels = [f"x{j + 1}" for j in range(n_inputs)]
    qs = [100.0 * (i + 0.5) / n_rules for i in range(n_rules)]
    centers = np.percentile(X, qs, axis=0)  # (R, N)
    if n_rules == 1:
        spread = (np.percentile(X, 75, axis=0) - np.percentile(X, 25, axis=0)) / 2.0
    else:
        spread = (centers[-1] - centers[0]) / (2.0 * (n_rules - 1))
    widths = np.maximum(spread, min_mf_width)
    for j in np.flatnonzero(spread <= 0.0):
        warnings.warn(
            f"input {input_labels[j]!r} is degenerate (no spread); "
            f"using width {min_mf_width}",
            stacklevel=2,
        )

    if n_rules == 2:
        tier_names = ("low", "high")
    else:
        tier_names = tuple(f"q{i + 1}" for i in range(n_rules))
    rules = []
    for i in range(n_rules):
        antecedents = [
            BellMF(a=widths[j], b=2.0, c=centers[i, j], label=f"{input_labels[j]}/{tier_names[i]}")
            for j in range(n_inputs)
        ]
        rules.append(SugenoRule(antecedents=antecedents))
    return FuzzyInferenceSystem(rules, and_operator="product", input_labels=input_labels)
