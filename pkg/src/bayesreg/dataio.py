"""CSV datasets, JSON run configuration and reports, synthetic data."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .basis import FAMILIES, IndexSet, enumerate_total_degree, evaluate_design, parse_indices
from .errors import DataError
from .estimators import Dataset, NoiseModel, PosteriorSummary, PriorSpec
from .selection import PriorPolicy, degree_weighted_prior

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _parse_rows(path, header: bool) -> List[Tuple[int, List[float]]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed row {row!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: non-finite value in row {row!r}")
            rows.append((lineno, values))
    if not rows:
        raise DataError(f"{path}: no data rows")
    return rows


def read_dataset(path, d: Optional[int] = None, header: bool = False) -> Dataset:
    """Read ``x_1..x_d, y`` rows from a CSV file.

    Without ``d`` every column but the last is an input.
    """
    rows = _parse_rows(path, header)
    width = d + 1 if d is not None else len(rows[0][1])
    if width < 2:
        raise DataError(f"{path}: need at least one input column and one output column")
    for lineno, values in rows:
        if len(values) != width:
            raise DataError(f"{path}:{lineno}: expected {width} columns, found {len(values)}")
    arr = np.array([v for _, v in rows])
    return Dataset(arr[:, :-1], arr[:, -1])


def write_dataset(path, data: Dataset, header: bool = False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header:
            writer.writerow([f"x{i + 1}" for i in range(data.d)] + ["y"])
        for xi, yi in zip(data.x, data.y):
            writer.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])


def read_matrix(path) -> np.ndarray:
    rows = _parse_rows(path, header=False)
    widths = {len(v) for _, v in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: rows have differing lengths")
    return np.array([v for _, v in rows])


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------


def generate_synthetic(coefficients, index_set: IndexSet, sigma: float, n: int, seed: int):
    """Inputs uniform on [-1, 1]^d and ``y = Psi a + N(0, sigma^2)``.

    Returns ``(dataset, ground_truth)``; the ground truth is a JSON-ready dict.
    """
    a = np.asarray(coefficients, dtype=float).reshape(-1)
    if len(index_set) == 0 or a.shape[0] != len(index_set):
        raise DataError("need one coefficient per multi-index")
    if not sigma >= 0:
        raise DataError("sigma must be non-negative")
    if n < 1:
        raise DataError("n must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    x = rng.uniform(-1.0, 1.0, size=(n, index_set.d))
    eps = rng.standard_normal(n)
    y = evaluate_design(x, index_set).values @ a
    if sigma > 0:
        y = y + sigma * eps
    truth = {
        "family": index_set.family,
        "indices": [list(alpha) for alpha in index_set.indices],
        "coefficients": [float(v) for v in a],
        "sigma": float(sigma),
        "n": int(n),
        "seed": int(seed),
    }
    return Dataset(x, y), truth


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    method: Optional[str] = None
    family: Optional[str] = None
    max_degree: Optional[int] = None
    indices: Optional[List[List[int]]] = None
    noise: Optional[Dict[str, Any]] = None
    prior: Optional[Dict[str, Any]] = None
    policy: Dict[str, float] = field(default_factory=lambda: {"sigma0_sq": 1.0, "gamma": 2.0})
    sweeps: bool = False
    tie_epsilon: float = 1e-9
    replicates: int = 200
    seed: int = 0
    data: Optional[str] = None
    d: Optional[int] = None
    header: bool = False
    rescale: bool = False
    out: Optional[str] = None
    report: Optional[str] = None
    gen: Optional[Dict[str, Any]] = None

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        raw = dict(raw)
        version = raw.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise DataError(f"unsupported config schema_version {version!r}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise DataError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**raw)

    def to_dict(self) -> Dict[str, Any]:
        out = {"schema_version": SCHEMA_VERSION}
        out.update(asdict(self))
        return out

    def validate(self, command: str):
        if self.family is not None and self.family not in FAMILIES:
            raise DataError(f"unknown basis family {self.family!r}")
        if command in ("fit", "select", "bootstrap"):
            if (self.indices is None) == (self.max_degree is None):
                raise DataError("give exactly one of an explicit index list or max_degree")
            if self.data is None:
                raise DataError("no dataset path given")
        if command in ("fit", "bootstrap"):
            if self.method not in ("gls", "ols", "ridge", "lasso"):
                raise DataError(f"method must be one of gls, ols, ridge, lasso (got {self.method!r})")
            kind = prior_kind(self.prior)
            allowed = {
                "gls": {None, "uniform"},
                "ols": {None, "uniform"},
                "ridge": {"gaussian", "policy"},
                "lasso": {"laplace"},
            }[self.method]
            if kind not in allowed:
                raise DataError(f"method {self.method!r} is incompatible with prior {kind!r}")
            if self.method != "ols" and self.noise is None:
                raise DataError(f"method {self.method!r} needs a noise specification")
        if command == "select" and self.noise is None:
            raise DataError("select needs a noise specification")
        if command == "predict" and (self.report is None or self.data is None):
            raise DataError("predict needs a fitted report and a dataset")
        if command == "gen" and not self.gen:
            raise DataError("gen needs a 'gen' section")
        if self.replicates < 2:
            raise DataError("replicates must be >= 2")


def prior_kind(spec: Optional[Dict[str, Any]]) -> Optional[str]:
    if spec is None:
        return None
    if len(spec) != 1:
        raise DataError("prior specification must have exactly one key")
    kind = next(iter(spec))
    if kind not in ("uniform", "gaussian", "laplace", "policy"):
        raise DataError(f"unknown prior kind {kind!r}")
    return kind


def build_index_set(cfg: RunConfig, d: int, default_family: str = "monomial") -> IndexSet:
    family = cfg.family or default_family
    if cfg.indices is not None:
        index_set = IndexSet(parse_indices(cfg.indices), family)
        if len(index_set) == 0 or index_set.d != d:
            raise DataError(f"index list must be non-empty with d={d}")
        return index_set
    return enumerate_total_degree(d, int(cfg.max_degree), family)


def build_noise(spec: Optional[Dict[str, Any]], base_dir: Path = Path(".")) -> Optional[NoiseModel]:
    if spec is None:
        return None
    if len(spec) != 1:
        raise DataError("noise specification must have exactly one key")
    (kind, value), = spec.items()
    if kind == "iid":
        return NoiseModel.iid(value)
    if kind == "diag":
        return NoiseModel.diagonal(value)
    if kind == "full_path":
        path = Path(value)
        if not path.is_absolute():
            path = base_dir / path
        return NoiseModel.full(read_matrix(path))
    raise DataError(f"unknown noise kind {kind!r}")


def _vector(value, p: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(p, float(arr))
    arr = arr.reshape(-1)
    if arr.shape[0] != p:
        raise DataError(f"prior {name} has {arr.shape[0]} entries, basis has {p}")
    return arr


def build_prior(spec: Optional[Dict[str, Any]], index_set: IndexSet) -> Optional[PriorSpec]:
    kind = prior_kind(spec)
    p = len(index_set)
    if kind is None:
        return None
    body = spec[kind] or {}
    if kind == "uniform":
        return PriorSpec.uniform(body.get("bounds"))
    if kind == "policy":
        return degree_weighted_prior(index_set, PriorPolicy(**body))
    mean = _vector(body.get("mean", 0.0), p, "mean")
    if kind == "gaussian":
        if "cov" in body:
            return PriorSpec.gaussian(mean, np.asarray(body["cov"], dtype=float))
        return PriorSpec.gaussian(mean, np.diag(_vector(body.get("variances", 1.0), p, "variances")))
    return PriorSpec.laplace(mean, _vector(body.get("rates", 1.0), p, "rates"))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class FitReport:
    command: str
    config: Dict[str, Any]
    schema_version: int = SCHEMA_VERSION
    basis: Optional[Dict[str, Any]] = None
    posterior: Optional[Dict[str, Any]] = None
    evidence: Optional[Dict[str, Any]] = None
    gamma: Optional[Dict[str, Any]] = None
    selection: Optional[Dict[str, Any]] = None
    bootstrap: Optional[Dict[str, Any]] = None
    prediction: Optional[Dict[str, Any]] = None
    ground_truth: Optional[Dict[str, Any]] = None
    warnings: List[str] = field(default_factory=list)
    error: Optional[Dict[str, Any]] = None
    generated_at: Optional[str] = None


def to_jsonable(obj):
    """Convert numpy containers and scalars to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def emit_report(report: FitReport) -> str:
    # repr-based float formatting is the shortest string that parses back exactly
    return json.dumps(to_jsonable(asdict(report)), indent=2, allow_nan=False) + "\n"


def parse_report(text: str) -> FitReport:
    raw = json.loads(text)
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise DataError(f"unsupported report schema_version {raw.get('schema_version')!r}")
    return FitReport(**raw)


def posterior_to_dict(post: PosteriorSummary) -> Dict[str, Any]:
    return to_jsonable(
        {
            "method": post.method,
            "mean": post.mean,
            "covariance": post.covariance,
            "log_det_cov": post.log_det_cov,
            "sigma2_mle": post.sigma2_mle,
            "sign_vector": post.sign_vector,
            "converged": post.converged,
            "iterations": post.iterations,
            "contains_mle": post.contains_mle,
            "flags": list(post.flags),
        }
    )


def posterior_from_dict(raw: Dict[str, Any]) -> PosteriorSummary:
    cov = raw.get("covariance")
    signs = raw.get("sign_vector")
    return PosteriorSummary(
        mean=np.asarray(raw["mean"], dtype=float),
        covariance=None if cov is None else np.asarray(cov, dtype=float),
        log_det_cov=raw.get("log_det_cov"),
        method=raw["method"],
        sigma2_mle=raw.get("sigma2_mle"),
        sign_vector=None if signs is None else np.asarray(signs, dtype=int),
        converged=raw.get("converged", True),
        iterations=raw.get("iterations", 0),
        contains_mle=raw.get("contains_mle"),
        flags=list(raw.get("flags", [])),
    )
