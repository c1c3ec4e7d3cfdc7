"""Generalized-bell membership functions and Sugeno-type fuzzy inference.

A rule base of the form "if x1 is L1 and ... and xN is LN then z = p0 +
p1*x1 + ... + pN*xN" is evaluated in three steps: fuzzification of each
input through a bell-shaped membership function, AND-combination of the
antecedent degrees into a firing strength per rule, and weighted
averaging of the linear rule consequents:

    mu(x)  = 1 / (1 + |(x - c) / a| ** (2*b))
    w_i    = prod_j mu_ij(x_j)        (or min_j, in "minimum" mode)
    z      = sum_i w_i * z_i / sum_i w_i

Models serialize to a single JSON document that round-trips predictions
bit-exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

FORMAT_VERSION = 1
AND_OPERATORS = ("product", "minimum")


class NoRuleFiresError(ValueError):
    """Every rule's firing strength underflowed to exactly zero.

    Raised instead of returning 0.0 because zero is a meaningful output
    magnitude. Carries the offending input vector as ``x``.
    """

    def __init__(self, x):
        self.x = np.asarray(x, dtype=float)
        super().__init__(f"no rule fires for input {self.x.tolist()}")


class ModelFormatError(ValueError):
    """Serialized model is malformed or has an unsupported version."""


@dataclass
class BellMF:
    """Generalized bell curve ``mu(x) = 1 / (1 + |(x - c)/a|**(2b))``.

    ``a`` is the width (distance from the center to the half-height
    point), ``b`` controls the shoulder steepness and ``c`` is the
    center. The curve peaks at exactly 1.0 at ``x == c``, is symmetric
    about ``c``, and is strictly positive for all finite ``x`` except
    where ``|(x - c)/a|**(2b)`` overflows the float range, in which case
    the degree underflows to 0.0.
    """

    a: float
    b: float
    c: float
    label: str = ""

    def __post_init__(self):
        self.a = float(self.a)
        self.b = float(self.b)
        self.c = float(self.c)
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ValueError(f"width a must be finite and > 0, got {self.a}")
        if not (math.isfinite(self.b) and self.b > 0.0):
            raise ValueError(f"slope b must be finite and > 0, got {self.b}")
        if not math.isfinite(self.c):
            raise ValueError(f"center c must be finite, got {self.c}")

    def __call__(self, x: float) -> float:
        """Membership degree of ``x``, in (0, 1] for finite inputs."""
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"membership input must be finite, got {x}")
        t = abs(x - self.c) / self.a
        try:
            u = t ** (2.0 * self.b)
        except OverflowError:
            return 0.0
        return 1.0 / (1.0 + u)

    def to_dict(self) -> dict:
        return {"a": float(self.a), "b": float(self.b), "c": float(self.c),
                "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "BellMF":
        return cls(a=d["a"], b=d["b"], c=d["c"], label=d.get("label", ""))


@dataclass(eq=False)
class SugenoRule:
    """One rule: bell antecedents plus a linear consequent.

    ``consequent`` holds the bias first, then one coefficient per input,
    so its length is ``len(antecedents) + 1``.
    """

    antecedents: list
    consequent: np.ndarray = field(default=None)

    def __post_init__(self):
        if not self.antecedents:
            raise ValueError("rule needs at least one antecedent")
        n = len(self.antecedents)
        if self.consequent is None:
            self.consequent = np.zeros(n + 1)
        self.consequent = np.asarray(self.consequent, dtype=float)
        if self.consequent.shape != (n + 1,):
            raise ValueError(
                f"consequent must have length {n + 1} (bias + one per input), "
                f"got shape {self.consequent.shape}"
            )
        if not np.all(np.isfinite(self.consequent)):
            raise ValueError("consequent coefficients must be finite")

    @property
    def input_dim(self) -> int:
        return len(self.antecedents)

    def output(self, x) -> float:
        """Crisp consequent z = p0 + p1*x1 + ... + pN*xN."""
        x = np.asarray(x, dtype=float)
        return float(self.consequent[0] + np.dot(self.consequent[1:], x))

    def to_dict(self) -> dict:
        return {
            "antecedents": [mf.to_dict() for mf in self.antecedents],
            "consequent": [float(p) for p in self.consequent],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SugenoRule":
        return cls(
            antecedents=[BellMF.from_dict(m) for m in d["antecedents"]],
            consequent=np.asarray(d["consequent"], dtype=float),
        )


def firing_strength(rule: SugenoRule, x, and_operator: str = "product") -> float:
    """AND-combined degree of truth of a rule's antecedents.

    Product mode multiplies the membership degrees, minimum mode takes
    their minimum; both are 1.0 when every input sits at its center.
    """
    if and_operator not in AND_OPERATORS:
        raise ValueError(f"and_operator must be one of {AND_OPERATORS}")
    x = np.asarray(x, dtype=float)
    if x.shape != (rule.input_dim,):
        raise ValueError(
            f"input has shape {x.shape}, rule expects ({rule.input_dim},)"
        )
    degrees = [mf(xj) for mf, xj in zip(rule.antecedents, x)]
    if and_operator == "product":
        return math.prod(degrees)
    return min(degrees)


class FuzzyInferenceSystem:
    """A Sugeno rule base over N inputs with a fixed AND operator.

    The AND operator is part of the model identity and is serialized
    with it. Instances are treated as immutable after construction or
    training and are safe to share across concurrent readers.
    """

    def __init__(self, rules, and_operator="product", input_labels=None):
        rules = list(rules)
        if not rules:
            raise ValueError("need at least one rule")
        n = rules[0].input_dim
        for r in rules:
            if r.input_dim != n:
                raise ValueError("all rules must share the same input dimension")
        if and_operator not in AND_OPERATORS:
            raise ValueError(f"and_operator must be one of {AND_OPERATORS}")
        if input_labels is None:
            input_labels = [f"x{j + 1}" for j in range(n)]
        input_labels = [str(s) for s in input_labels]
        if len(input_labels) != n:
            raise ValueError(f"expected {n} input labels, got {len(input_labels)}")
        self.rules = rules
        self.and_operator = and_operator
        self.input_labels = input_labels

    @property
    def input_dim(self) -> int:
        return self.rules[0].input_dim

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    def _check_input(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ValueError(
                f"input has shape {x.shape}, system expects ({self.input_dim},)"
            )
        if not np.all(np.isfinite(x)):
            raise ValueError(f"input must be finite, got {x.tolist()}")
        return x

    def membership_grid(self, x) -> np.ndarray:
        """Membership degrees, shape (n_rules, input_dim)."""
        x = self._check_input(x)
        return np.array(
            [[mf(xj) for mf, xj in zip(r.antecedents, x)] for r in self.rules]
        )

    def firing_strengths(self, x) -> np.ndarray:
        x = self._check_input(x)
        return np.array([firing_strength(r, x, self.and_operator) for r in self.rules])

    def rule_outputs(self, x) -> np.ndarray:
        x = self._check_input(x)
        return np.array([r.output(x) for r in self.rules])

    def infer(self, x) -> float:
        """Weighted-average output; min_i z_i <= infer(x) <= max_i z_i.

        Raises NoRuleFiresError when every firing strength is exactly
        zero (the caller decides the fallback).
        """
        x = self._check_input(x)
        w = self.firing_strengths(x)
        s = w.sum()
        if s == 0.0:
            raise NoRuleFiresError(x)
        z = self.rule_outputs(x)
        return float(np.dot(w, z) / s)

    def infer_batch(self, X) -> np.ndarray:
        """Vectorized ``infer`` over the rows of ``X`` (n_samples, input_dim)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ValueError(
                f"expected (n_samples, {self.input_dim}) inputs, got {X.shape}"
            )
        if not np.all(np.isfinite(X)):
            raise ValueError("inputs must be finite")
        a = np.array([[mf.a for mf in r.antecedents] for r in self.rules])
        b = np.array([[mf.b for mf in r.antecedents] for r in self.rules])
        c = np.array([[mf.c for mf in r.antecedents] for r in self.rules])
        with np.errstate(over="ignore"):
            # (n, R, N); overflow of the power term underflows mu to 0.0,
            # matching the scalar path.
            mu = 1.0 / (1.0 + np.abs((X[:, None, :] - c) / a) ** (2.0 * b))
        if self.and_operator == "product":
            w = mu.prod(axis=2)
        else:
            w = mu.min(axis=2)
        s = w.sum(axis=1)
        silent = np.flatnonzero(s == 0.0)
        if silent.size:
            raise NoRuleFiresError(X[silent[0]])
        P = np.array([r.consequent for r in self.rules])  # (R, N+1)
        z = P[:, 0][None, :] + X @ P[:, 1:].T  # (n, R)
        return np.einsum("nr,nr->n", w, z) / s

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "input_dim": self.input_dim,
            "and_operator": self.and_operator,
            "input_labels": list(self.input_labels),
            "rules": [r.to_dict() for r in self.rules],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FuzzyInferenceSystem":
        try:
            version = d["version"]
        except (TypeError, KeyError):
            raise ModelFormatError("model document has no version field")
        if version != FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported model version {version!r}, expected {FORMAT_VERSION}"
            )
        try:
            fis = cls(
                rules=[SugenoRule.from_dict(r) for r in d["rules"]],
                and_operator=d["and_operator"],
                input_labels=d["input_labels"],
            )
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed model document: {exc}") from exc
        if fis.input_dim != d["input_dim"]:
            raise ModelFormatError(
                f"declared input_dim {d['input_dim']} does not match rules "
                f"({fis.input_dim})"
            )
        return fis

    def to_json(self) -> str:
        # json emits shortest round-trip decimal floats, so reloaded
        # parameters are bit-identical and predictions are preserved.
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FuzzyInferenceSystem":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"model is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "FuzzyInferenceSystem":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def copy(self) -> "FuzzyInferenceSystem":
        """Deep copy (parameters are never shared with the original)."""
        return FuzzyInferenceSystem.from_dict(self.to_dict())
