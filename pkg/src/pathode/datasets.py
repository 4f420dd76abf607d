"""Dataset loading and seeded synthetic generators.

CSV contract: optional header row; column 1 is the label (+1/-1), columns
2..p+1 are features; comma-separated, '.' decimal point, UTF-8.  Moment
problems travel as JSON objects {"w": [...], "x_true": [...], "n_moments": k}.
All generators use counter-based streams (Philox) keyed by a single seed.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.special import expit


class DatasetFormatError(ValueError):
    """A data file violates the documented format; message names the line."""


def _try_parse_row(fields: list[str]) -> list[float] | None:
    try:
        return [float(f) for f in fields]
    except ValueError:
        return None


def load_csv_dataset(path: str, standardize: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Parse a labelled CSV into (features, labels).

    An unparseable first row is treated as a header.  Labels must be exactly
    +1 or -1; any malformed later row raises with its 1-based line number.
    standardize=True rescales each feature column to zero mean and unit
    variance (constant columns are left centered only).
    """
    rows: list[list[float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    width = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split(",")
        parsed = _try_parse_row(fields)
        if parsed is None:
            if lineno == 1:
                continue  # header
            raise DatasetFormatError(f"{path}: line {lineno}: unparseable numeric row")
        if len(parsed) < 2:
            raise DatasetFormatError(f"{path}: line {lineno}: need a label and at least one feature")
        if parsed[0] not in (-1.0, 1.0):
            raise DatasetFormatError(f"{path}: line {lineno}: label must be +1 or -1, got {parsed[0]:g}")
        if width is None:
            width = len(parsed)
        elif len(parsed) != width:
            raise DatasetFormatError(
                f"{path}: line {lineno}: expected {width} columns, got {len(parsed)}"
            )
        rows.append(parsed)
    if not rows:
        raise DatasetFormatError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    labels = data[:, 0]
    features = data[:, 1:]
    if standardize:
        features = standardize_features(features)
    return features, labels


def standardize_features(features: np.ndarray) -> np.ndarray:
    """Center each column and scale nonconstant ones to unit variance."""
    features = np.asarray(features, dtype=float)
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    return (features - mean) / std


def save_csv_dataset(features: np.ndarray, labels: np.ndarray, path: str) -> None:
    """Write a labelled dataset in the CSV contract (with a header row)."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    p = features.shape[1]
    header = "label," + ",".join(f"f_{j}" for j in range(1, p + 1))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for y, row in zip(labels, features):
            fh.write(("%d," % int(y)) + ",".join(format(v, ".17g") for v in row) + "\n")


def generate_synthetic_logistic(
    n: int = 569, p: int = 30, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded logistic-model sample at clinical-dataset scale (defaults 569 x 30).

    Features are standard normal; labels are drawn from a logistic model with
    a random unit-scale weight vector.  Stream order: n*p feature normals,
    p weight normals, n label uniforms.
    """
    if n < 2 or p < 1:
        raise ValueError("need n >= 2 and p >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    features = rng.normal(size=(n, p))
    w_true = rng.normal(size=p) / np.sqrt(p)
    probs = expit(features @ w_true)
    labels = np.where(rng.uniform(size=n) < probs, 1.0, -1.0)
    if np.all(labels == labels[0]):  # forcing both classes keeps splits valid
        labels[0] = -labels[0]
    return features, labels


def generate_synthetic_quadratic(
    n: int = 30, p: int = 20, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian design and response for least-squares instances.

    Stream order: n*p design normals, p weight normals, n noise normals;
    b = A w_true + 0.1 * noise.
    """
    if n < 1 or p < 1:
        raise ValueError("need n >= 1 and p >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    A = rng.normal(size=(n, p))
    w_true = rng.normal(size=p) / np.sqrt(p)
    b = A @ w_true + 0.1 * rng.normal(size=n)
    return A, b


def save_moment_json(w: np.ndarray, x_true: np.ndarray, n_moments: int, path: str) -> None:
    payload = {
        "w": [float(v) for v in w],
        "x_true": [float(v) for v in x_true],
        "n_moments": int(n_moments),
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def load_moment_json(path: str) -> tuple[np.ndarray, np.ndarray, int]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        w = np.asarray(payload["w"], dtype=float)
        x_true = np.asarray(payload["x_true"], dtype=float)
        n_moments = int(payload["n_moments"])
    except (KeyError, TypeError) as exc:
        raise DatasetFormatError(f"{path}: missing or malformed moment fields: {exc}") from exc
    return w, x_true, n_moments
