"""Command-line pipeline: detect couples, train, predict, evaluate.

Every command is deterministic given identical inputs and seed, writes
its outputs atomically (temp file, rename on success) and echoes the
resolved configuration next to them. Flag values override the optional
TOML config file, which overrides the built-in expert defaults.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import tempfile
from datetime import datetime, timezone

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .anfis import TrainingConfig, TrainingDivergedError, init_grid_fis, train
from .catalog import (
    KM_PER_MILE,
    DAYS_PER_MONTH,
    FEATURE_LABELS,
    CatalogFormatError,
    CouplingConfig,
    assign_targets,
    extract_couples,
    parse_catalog,
    parse_time_utc,
    read_couples_csv,
    split_by_epoch,
    training_arrays,
    write_couples_csv,
)
from .evaluation import (
    build_report,
    emit_plot_data,
    plot_rows_to_csv_string,
    predict_couples,
)
from .fuzzy import FuzzyInferenceSystem, ModelFormatError

EXIT_OK = 0
EXIT_IO = 1
EXIT_DATA = 2

DEFAULT_TRAIN_BEFORE = "1985-01-01"
DEFAULT_TEST_START = "1985-01-01"
DEFAULT_TEST_END = "2001-01-01"


# -- unit-suffixed value parsing ------------------------------------------------


def parse_distance_km(value) -> float:
    """'190mi' or '305.8km' or a bare number of kilometers."""
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip().lower()
    if text.endswith("mi"):
        return float(text[:-2]) * KM_PER_MILE
    if text.endswith("km"):
        return float(text[:-2])
    return float(text)


def parse_duration_days(value) -> float:
    """'91.3d' or '3mo' (1 mo = 30.44 d) or a bare number of days."""
    if isinstance(value, (int, float)):
        return float(value)
    text = value.strip().lower()
    if text.endswith("mo"):
        return float(text[:-2]) * DAYS_PER_MONTH
    if text.endswith("d"):
        return float(text[:-1])
    return float(text)


def parse_boundary(value) -> datetime:
    """A UTC instant: '1985', '1985-01-01' or a full ISO timestamp."""
    if isinstance(value, datetime):
        t = value
        return t.replace(tzinfo=timezone.utc) if t.tzinfo is None else t
    text = str(value).strip()
    if text.isdigit() and len(text) == 4:
        return datetime(int(text), 1, 1, tzinfo=timezone.utc)
    return parse_time_utc(text)


# -- config resolution -----------------------------------------------------------


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


class Resolver:
    """flags > config file > built-in default, with unit conversion."""

    def __init__(self, args, file_cfg):
        self.args = args
        self.cfg = file_cfg
        self.effective = {}

    def get(self, name, default, convert=None):
        value = getattr(self.args, name, None)
        if value is None:
            value = self.cfg.get(name, None)
        if value is None:
            value = default
        if convert is not None and value is not None:
            value = convert(value)
        self.effective[name] = value
        return value


def _coupling_from(res: Resolver) -> CouplingConfig:
    return CouplingConfig(
        min_mag=res.get("min_mag", 5.0, float),
        max_dt_days=res.get("max_dt", "91.3d", parse_duration_days),
        max_dist_km=res.get("max_dist", "190mi", parse_distance_km),
        horizon_days=res.get("horizon", "182.6d", parse_duration_days),
    )


def _training_from(res: Resolver) -> TrainingConfig:
    return TrainingConfig(
        epochs=res.get("epochs", 200, int),
        learning_rate=res.get("learning_rate", 0.01, float),
        lr_policy=res.get("lr_policy", "step-adaptive", str),
        seed=res.get("seed", 0, int),
        min_mf_width=res.get("min_mf_width", 1e-3, float),
        convergence_tol=res.get("convergence_tol", 1e-9, float),
    )


# -- atomic outputs ---------------------------------------------------------------


def _atomic_write_text(path, text) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _echo_config(anchor_path, command, effective) -> None:
    out = {"command": command, "parameters": {}}
    for key, value in sorted(effective.items()):
        if isinstance(value, datetime):
            value = value.isoformat()
        out["parameters"][key] = value
    path = os.path.join(os.path.dirname(os.path.abspath(anchor_path)), "run_config.json")
    _atomic_write_text(path, json.dumps(out, indent=2) + "\n")


def _banner(coupling: CouplingConfig) -> str:
    return (
        f"min_mag={coupling.min_mag!r} max_dt={coupling.max_dt_days!r}d "
        f"max_dist={coupling.max_dist_km:.2f}km horizon={coupling.horizon_days!r}d"
    )


def _load_couples(res, events, coupling):
    """Couples from --couples if given (joined on the catalog for
    timestamps), otherwise extracted and target-assigned on the fly."""
    couples_path = res.get("couples", None, str)
    radius = res.get("target_radius_km", None, float)
    if couples_path:
        return read_couples_csv(couples_path, events)
    couples = extract_couples(events, coupling)
    return assign_targets(couples, events, coupling, target_radius_km=radius)


# -- subcommands ------------------------------------------------------------------


def cmd_couples(args) -> int:
    res = Resolver(args, _load_config_file(args.config))
    coupling = _coupling_from(res)
    radius = res.get("target_radius_km", None, float)
    out_path = res.get("out", "couples.csv", str)
    events = parse_catalog(args.catalog)
    couples = extract_couples(events, coupling)
    couples = assign_targets(couples, events, coupling, target_radius_km=radius)
    buf = io.StringIO()
    write_couples_csv(couples, buf)
    _atomic_write_text(out_path, buf.getvalue())
    _echo_config(out_path, "couples", res.effective)
    n_target = sum(1 for c in couples if c.target is not None)
    n_cens = sum(1 for c in couples if c.censored)
    print(_banner(coupling))
    print(
        f"read {len(events)} events; found {len(couples)} couples; "
        f"{n_target} with target; {n_cens} censored"
    )
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_train(args) -> int:
    res = Resolver(args, _load_config_file(args.config))
    coupling = _coupling_from(res)
    training = _training_from(res)
    train_before = res.get("train_before", DEFAULT_TRAIN_BEFORE, parse_boundary)
    test_start = res.get("test_start", DEFAULT_TEST_START, parse_boundary)
    test_end = res.get("test_end", DEFAULT_TEST_END, parse_boundary)
    model_path = res.get("model", "model.json", str)
    report_path = res.get("report", "training_report.csv", str)

    events = parse_catalog(args.catalog)
    couples = _load_couples(res, events, coupling)
    train_c, val_c, _ = split_by_epoch(couples, train_before, (test_start, test_end))
    X, y = training_arrays(train_c)
    if X.shape[0] == 0:
        raise ValueError("no training couples carry a target; cannot train")
    Xv, yv = training_arrays(val_c)
    if Xv.shape[0] == 0:
        Xv, yv = None, None

    fis0 = init_grid_fis(
        X,
        n_rules=2,
        min_mf_width=training.min_mf_width,
        input_labels=FEATURE_LABELS,
    )
    fis, report = train(fis0, X, y, X_val=Xv, y_val=yv, config=training)
    _atomic_write_text(model_path, fis.to_json())
    _atomic_write_text(report_path, report.to_csv_string())
    _echo_config(model_path, "train", res.effective)
    print(_banner(coupling))
    print(
        f"trained on {X.shape[0]} couples (validation: "
        f"{0 if Xv is None else Xv.shape[0]}); epochs run: {report.epochs_run}"
    )
    print(f"best validation RMSE {report.best_val_rmse:.6f} at epoch {report.best_epoch}")
    print(f"wrote {model_path} and {report_path}")
    return EXIT_OK


def _predictions_csv(alarms) -> str:
    from .catalog import format_time_utc

    lines = ["primary_id,alarm_time,predicted_mag"]
    for a in alarms:
        lines.append(f"{a.primary_id},{format_time_utc(a.alarm_time)},{a.predicted_mag!r}")
    return "\n".join(lines) + "\n"


def _report_skipped(skipped) -> None:
    if skipped:
        ids = ", ".join(c.primary_id for c in skipped)
        print(f"skipped {len(skipped)} couples firing no rule: {ids}", file=sys.stderr)


def cmd_predict(args) -> int:
    res = Resolver(args, _load_config_file(args.config))
    coupling = _coupling_from(res)
    out_path = res.get("out", "predictions.csv", str)
    fis = FuzzyInferenceSystem.load(args.model)
    events = parse_catalog(args.catalog)
    couples = _load_couples(res, events, coupling)
    alarms, skipped = predict_couples(fis, couples, coupling.horizon_days)
    _atomic_write_text(out_path, _predictions_csv(alarms))
    _echo_config(out_path, "predict", res.effective)
    _report_skipped(skipped)
    print(f"predicted {len(alarms)} couples; wrote {out_path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    res = Resolver(args, _load_config_file(args.config))
    coupling = _coupling_from(res)
    test_start = res.get("test_start", DEFAULT_TEST_START, parse_boundary)
    test_end = res.get("test_end", DEFAULT_TEST_END, parse_boundary)
    thresholds = res.get("thresholds", "5.5,6.0", str)
    taus = [float(t) for t in str(thresholds).split(",") if t.strip()]
    match_radius = res.get("match_radius_km", None, float)
    out_path = res.get("out", "evaluation.csv", str)
    fis = FuzzyInferenceSystem.load(args.model)
    events = parse_catalog(args.catalog)
    couples = _load_couples(res, events, coupling)
    test_couples = [c for c in couples if test_start <= c.primary_time < test_end]
    alarms, skipped = predict_couples(fis, test_couples, coupling.horizon_days)
    report = build_report(
        alarms, events, taus, period=(test_start, test_end),
        match_radius_km=match_radius, n_skipped=len(skipped),
    )
    _atomic_write_text(out_path, report.to_csv_string())
    _echo_config(out_path, "evaluate", res.effective)
    _report_skipped(skipped)
    print(report.to_text(), end="")
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_plot_data(args) -> int:
    res = Resolver(args, _load_config_file(args.config))
    coupling = _coupling_from(res)
    start = res.get("start", None, parse_boundary)
    end = res.get("end", None, parse_boundary)
    if start is None or end is None:
        raise ValueError("plot-data requires --start and --end")
    out_path = res.get("out", "plot_data.csv", str)
    fis = FuzzyInferenceSystem.load(args.model)
    events = parse_catalog(args.catalog)
    couples = _load_couples(res, events, coupling)
    alarms, skipped = predict_couples(fis, couples, coupling.horizon_days)
    rows = emit_plot_data(alarms, events, start, end)
    _atomic_write_text(out_path, plot_rows_to_csv_string(rows))
    _echo_config(out_path, "plot-data", res.effective)
    _report_skipped(skipped)
    print(f"wrote {len(rows)} rows to {out_path}")
    return EXIT_OK


def cmd_model_show(args) -> int:
    fis = FuzzyInferenceSystem.load(args.model)
    print(f"inputs ({fis.input_dim}): {', '.join(fis.input_labels)}")
    print(f"AND operator: {fis.and_operator}")
    print(f"rules: {fis.n_rules}")
    for i, rule in enumerate(fis.rules, start=1):
        print(f"rule {i}:")
        for mf, name in zip(rule.antecedents, fis.input_labels):
            print(
                f"  {name} is {mf.label or '?'}  "
                f"(center={mf.c:.6g}, width={mf.a:.6g}, slope={mf.b:.6g})"
            )
        terms = [f"{rule.consequent[0]:.6g}"]
        terms += [
            f"{p:+.6g}*{name}" for p, name in zip(rule.consequent[1:], fis.input_labels)
        ]
        print(f"  then z = {' '.join(terms)}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", metavar="TOML",
        help="config file supplying defaults for any flag (flags win)",
    )

    coupling = argparse.ArgumentParser(add_help=False)
    coupling.add_argument(
        "--min-mag", dest="min_mag",
        help="magnitude cut both couple members must reach (expert default: 5.0)",
    )
    coupling.add_argument(
        "--max-dt", dest="max_dt",
        help="largest couple time separation, e.g. '91.3d' or '3mo' "
             "(expert default: three months = 91.3d)",
    )
    coupling.add_argument(
        "--max-dist", dest="max_dist",
        help="largest couple distance, e.g. '190mi' or '305.8km' "
             "(expert default: 190mi = 305.78km)",
    )
    coupling.add_argument(
        "--horizon", dest="horizon",
        help="forecast look-ahead window, e.g. '182.6d' or '6mo' "
             "(expert default: 6 months = 182.6d)",
    )
    coupling.add_argument(
        "--target-radius-km", dest="target_radius_km",
        help="optional radius restricting target matching around the primary "
             "(default: whole catalog region)",
    )
    coupling.add_argument(
        "--couples", dest="couples",
        help="read couples from this CSV instead of extracting them "
             "(the catalog is still required for timestamps)",
    )

    p = argparse.ArgumentParser(
        prog="quakefis",
        description="Coupled-earthquake alarms from a Sugeno fuzzy system "
                    "with hybrid least-squares/backprop training.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser(
        "couples", parents=[common, coupling],
        help="extract couples and targets from a catalog CSV",
    )
    sp.add_argument("--catalog", required=True, help="catalog CSV path")
    sp.add_argument("--out", help="output couples CSV (default: couples.csv)")
    sp.set_defaults(func=cmd_couples)

    sp = sub.add_parser(
        "train", parents=[common, coupling],
        help="train the fuzzy system on pre-boundary couples",
    )
    sp.add_argument("--catalog", required=True, help="catalog CSV path")
    sp.add_argument(
        "--train-before", dest="train_before",
        help=f"train/validate on couples strictly before this instant "
             f"(default: {DEFAULT_TRAIN_BEFORE})",
    )
    sp.add_argument(
        "--test-start", dest="test_start",
        help=f"test period start (default: {DEFAULT_TEST_START})",
    )
    sp.add_argument(
        "--test-end", dest="test_end",
        help=f"test period end, exclusive (default: {DEFAULT_TEST_END})",
    )
    sp.add_argument("--epochs", help="training epochs; 0 = least-squares pass only (default: 200)")
    sp.add_argument("--learning-rate", dest="learning_rate",
                    help="initial membership-update step (default: 0.01)")
    sp.add_argument("--lr-policy", dest="lr_policy",
                    help="'step-adaptive' or 'fixed' (default: step-adaptive)")
    sp.add_argument("--seed", help="run seed recorded for provenance (default: 0)")
    sp.add_argument("--min-mf-width", dest="min_mf_width",
                    help="lower bound on membership widths (default: 1e-3)")
    sp.add_argument("--convergence-tol", dest="convergence_tol",
                    help="stop once epoch RMSE improvement falls below this (default: 1e-9)")
    sp.add_argument("--model", help="output model JSON (default: model.json)")
    sp.add_argument("--report", help="output per-epoch report CSV (default: training_report.csv)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser(
        "predict", parents=[common, coupling],
        help="emit one magnitude prediction per couple",
    )
    sp.add_argument("--model", required=True, help="trained model JSON")
    sp.add_argument("--catalog", required=True, help="catalog CSV path")
    sp.add_argument("--out", help="output predictions CSV (default: predictions.csv)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser(
        "evaluate", parents=[common, coupling],
        help="score test-period alarms against the catalog",
    )
    sp.add_argument("--model", required=True, help="trained model JSON")
    sp.add_argument("--catalog", required=True, help="catalog CSV path")
    sp.add_argument("--thresholds", help="comma-separated magnitude thresholds (default: 5.5,6.0)")
    sp.add_argument(
        "--match-radius-km", dest="match_radius_km",
        help="optional radius restricting hit matching around the alarm "
             "epicenter (default: time only)",
    )
    sp.add_argument("--test-start", dest="test_start",
                    help=f"test period start (default: {DEFAULT_TEST_START})")
    sp.add_argument("--test-end", dest="test_end",
                    help=f"test period end, exclusive (default: {DEFAULT_TEST_END})")
    sp.add_argument("--out", help="output report CSV (default: evaluation.csv)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser(
        "plot-data", parents=[common, coupling],
        help="emit actual vs predicted series for plotting",
    )
    sp.add_argument("--model", required=True, help="trained model JSON")
    sp.add_argument("--catalog", required=True, help="catalog CSV path")
    sp.add_argument("--start", help="range start (inclusive)")
    sp.add_argument("--end", help="range end (exclusive)")
    sp.add_argument("--out", help="output plot CSV (default: plot_data.csv)")
    sp.set_defaults(func=cmd_plot_data)

    sp = sub.add_parser("model-show", parents=[common], help="print a model's rule base")
    sp.add_argument("--model", required=True, help="model JSON path")
    sp.set_defaults(func=cmd_model_show)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CatalogFormatError, ModelFormatError, TrainingDivergedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
