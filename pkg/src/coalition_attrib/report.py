"""Experiment runner: OLS coefficients next to mean |Shapley| of a forest."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .attribution import DEFAULT_BACKGROUND_CAP, ShapleyExplainer
from .exceptions import CoalitionAttribError, ValidationError
from .forest import ForestConfig, RandomForest
from .linear import fit_ols
from .simulation import ExperimentSpec, generate

FORMATS = ("json", "csv", "markdown")
MODES = ("exact", "sampled")


@dataclass(frozen=True)
class AttributionConfig:
    mode: str = "exact"
    n_permutations: int = 1000
    background_cap: int = DEFAULT_BACKGROUND_CAP

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_permutations < 1:
            raise ValidationError(f"n_permutations must be >= 1, got {self.n_permutations}")
        if self.background_cap < 1:
            raise ValidationError(f"background_cap must be >= 1, got {self.background_cap}")


@dataclass(frozen=True)
class OutputConfig:
    format: str = "json"
    path: str | None = None

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ValidationError(f"format must be one of {FORMATS}, got {self.format!r}")


@dataclass(frozen=True)
class RunConfig:
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    forest: ForestConfig = field(default_factory=ForestConfig)
    attribution: AttributionConfig = field(default_factory=AttributionConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @classmethod
    def for_seed(cls, name="linear3", seed=0, n=1000, noise_sd=0.1, n_trees=100,
                 mode="exact", n_permutations=1000, background_cap=DEFAULT_BACKGROUND_CAP,
                 output=None):
        """One seed drives the data, the forest and the attribution sampling."""
        return cls(
            ExperimentSpec(name, n, noise_sd, seed),
            ForestConfig(n_trees=n_trees, seed=seed),
            AttributionConfig(mode, n_permutations, background_cap),
            output or OutputConfig(),
        )

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ComparisonReport:
    feature_names: tuple
    ols_coefficients: tuple
    mean_abs_shap: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        names = tuple(str(n) for n in self.feature_names)
        coefs = tuple(float(c) for c in self.ols_coefficients)
        shap = tuple(float(s) for s in self.mean_abs_shap)
        if not names:
            raise ValidationError("a comparison report needs at least one feature")
        if not len(names) == len(coefs) == len(shap):
            raise ValidationError(
                f"{len(names)} features, {len(coefs)} coefficients, {len(shap)} attributions"
            )
        if not all(math.isfinite(v) for v in coefs + shap):
            raise ValidationError("report values must be finite")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "ols_coefficients", coefs)
        object.__setattr__(self, "mean_abs_shap", shap)

    def ols(self):
        return dict(zip(self.feature_names, self.ols_coefficients))

    def shap(self):
        return dict(zip(self.feature_names, self.mean_abs_shap))

    def to_dict(self):
        return {
            "feature_names": list(self.feature_names),
            "ols_coefficients": list(self.ols_coefficients),
            "mean_abs_shap": list(self.mean_abs_shap),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(doc["feature_names"], doc["ols_coefficients"], doc["mean_abs_shap"],
                       doc.get("metadata", {}))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed report: {exc}") from None


def run_experiment(config):
    """Generate data, fit both models, explain the forest on every training row."""
    name = config.experiment.name
    try:
        data = generate(config.experiment)
        ols = fit_ols(data.X, data.y, data.feature_names)
        forest = RandomForest.from_config(config.forest).fit(data.X, data.y)
        explainer = ShapleyExplainer(
            forest,
            mode=config.attribution.mode,
            n_permutations=config.attribution.n_permutations,
            background_cap=config.attribution.background_cap,
            random_state=config.experiment.seed,
        ).fit(data.X)
        result = explainer.explain(data.X)
    except CoalitionAttribError as exc:
        exc.args = (f"experiment {name}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
        raise
    metadata = {
        "experiment": name,
        "seed": config.experiment.seed,
        "n": config.experiment.n,
        "ols_intercept": ols.intercept,
        "shap_base_value": result.base_value,
        "config": config.as_dict(),
    }
    return ComparisonReport(data.feature_names, tuple(ols.coefficients),
                            tuple(result.mean_abs()), metadata)


def report_json(report):
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def report_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature", "ols_coef", "mean_abs_shap"])
    for name, coef, shap in zip(report.feature_names, report.ols_coefficients,
                                report.mean_abs_shap):
        writer.writerow([name, repr(coef), repr(shap)])
    return buf.getvalue()


def report_markdown(report):
    lines = ["| feature | OLS coefficient | mean abs SHAP |", "|---|---:|---:|"]
    for name, coef, shap in zip(report.feature_names, report.ols_coefficients,
                                report.mean_abs_shap):
        lines.append(f"| {name} | {coef:.6g} | {shap:.6g} |")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": report_json, "csv": report_csv, "markdown": report_markdown}


def emit_report(report, format="json", path=None):
    """Render ``report``; write it to ``path`` when given. Returns the text."""
    if format not in RENDERERS:
        raise ValidationError(f"format must be one of {FORMATS}, got {format!r}")
    text = RENDERERS[format](report)
    if path is not None:
        Path(path).write_text(text)
    return text


def load_report(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return ComparisonReport.from_dict(doc)


def text_table(report):
    """The two paired blocks, six significant digits."""
    lines = ["Linear Regression Coefficients:"]
    lines += [f"{n}: {c:.6g}" for n, c in zip(report.feature_names, report.ols_coefficients)]
    lines += ["", "Mean Absolute SHAP Values:"]
    lines += [f"{n}: {s:.6g}" for n, s in zip(report.feature_names, report.mean_abs_shap)]
    return "\n".join(lines) + "\n"


def attribution_json(result):
    return json.dumps(result.to_dict(), sort_keys=True, indent=2) + "\n"


def attribution_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["instance", *result.feature_names])
    for i, row in enumerate(np.asarray(result.attributions)):
        writer.writerow([i, *(repr(float(v)) for v in row)])
    return buf.getvalue()
