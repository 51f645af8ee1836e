"""NGCA data: reference and planted samplers, hidden-direction and spectral
statistics, and the seeded experiment runner."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import dist
from .calibrate import Calibration, Dataset, booleanity_check, hermite_test, moment_matrix
from .hermite import hermite_table

CHECKS = ("min_eig", "booleanity", "hermite", "spectral", "planted")
SPECTRAL_CAP = 2 * 10**6


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n: int
    m: int
    D: int = 2
    Dtrunc: int = 8
    k: int = 4
    epsilon: float = 0.2
    profile: str = "a_mix(0.3)"
    trials: int = 1
    seed: int | None = None
    checks: list = field(default_factory=lambda: ["min_eig", "booleanity", "hermite", "spectral"])
    timing: bool = False

    def __post_init__(self):
        if self.n < 2 or self.m < 1 or self.D < 1 or self.Dtrunc < 2:
            raise ConfigError(f"need n >= 2, m >= 1, D >= 1, Dtrunc >= 2 (got n={self.n}, m={self.m}, "
                              f"D={self.D}, Dtrunc={self.Dtrunc})")
        if self.trials < 0:
            raise ConfigError("trials must be non-negative")
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; choose from {list(CHECKS)}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**data)

    def profile_object(self) -> dist.MomentProfile:
        return dist.parse_profile(self.profile, max(self.Dtrunc, 2 * self.D, self.k))


def sample_reference(n: int, m: int, seed) -> Dataset:
    rng = np.random.default_rng(seed)
    return Dataset(rng.standard_normal((m, n)), seed=seed)


def sample_planted(n: int, m: int, profile: dist.MomentProfile, seed) -> tuple[Dataset, np.ndarray]:
    """Samples that are standard Gaussian off a hidden direction v in {+-1/sqrt(n)}^n and follow the profile along it."""
    if not profile.sampleable:
        raise dist.ProfileError(f"profile family {profile.family!r} is not sampleable")
    rng = np.random.default_rng(seed)
    v = rng.choice(np.array([-1.0, 1.0]), size=n) / math.sqrt(n)
    base = rng.standard_normal((m, n))
    along = dist.sample(profile, m, rng)
    x = base - np.outer(base @ v, v) + np.outer(along, v)
    return Dataset(x, seed=seed), v


def hidden_statistic(dataset: Dataset, v, j: int) -> float:
    """Empirical mean of He_j(<x_u, v>) over the samples."""
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1) > 1e-9:
        raise ValueError(f"direction must have unit norm, got {np.linalg.norm(v)}")
    if j == 0:
        return 1.0
    proj = dataset.samples @ v
    return float(hermite_table(j, proj)[j].mean())


def hermite_tensor_mean(dataset: Dataset, r: int) -> np.ndarray:
    """Empirical mean of the degree-r multivariate Hermite tensor (r in {2, 4})."""
    x = dataset.samples
    m, n = x.shape
    eye = np.eye(n)
    second = x.T @ x / m
    if r == 2:
        return second - eye
    y = np.einsum("ui,uj->uij", x, x).reshape(m, n * n)
    fourth = (y.T @ y / m).reshape(n, n, n, n)
    pairs = (np.einsum("ij,kl->ijkl", eye, second) + np.einsum("ik,jl->ijkl", eye, second)
             + np.einsum("il,jk->ijkl", eye, second) + np.einsum("jk,il->ijkl", eye, second)
             + np.einsum("jl,ik->ijkl", eye, second) + np.einsum("kl,ij->ijkl", eye, second))
    deltas = (np.einsum("ij,kl->ijkl", eye, eye) + np.einsum("ik,jl->ijkl", eye, eye)
              + np.einsum("il,jk->ijkl", eye, eye))
    return fourth - pairs + deltas


def spectral_statistic(dataset: Dataset, r: int) -> float:
    """Top singular value of the square-ish flattening of the mean Hermite tensor."""
    if r not in (2, 4):
        raise ValueError(f"order must be 2 or 4, got {r}")
    n = dataset.n
    if n**r > SPECTRAL_CAP:
        raise ValueError(f"flattening has {n**r} entries, cap is {SPECTRAL_CAP}")
    if dataset.m == 0:
        return 0.0
    tensor = hermite_tensor_mean(dataset, r)
    flat = tensor.reshape(n ** math.ceil(r / 2), n ** (r // 2))
    return float(np.linalg.norm(flat, 2))


def _trial(config: ExperimentConfig, index: int, child) -> dict:
    start = time.perf_counter()
    row: dict = {"trial": index}
    try:
        profile = config.profile_object()
        data = sample_reference(config.n, config.m, child)
        cal = Calibration(data, profile, config.Dtrunc, config.k)
        if "min_eig" in config.checks:
            row["min_eig"] = moment_matrix(data, profile, config.D, config.Dtrunc, config.k, calibration=cal).min_eig()
        if "booleanity" in config.checks:
            row["booleanity"] = booleanity_check(data, profile, config.D, config.Dtrunc, config.k)
        if "hermite" in config.checks:
            row["hermite"] = [hermite_test(data, profile, j, config.D, config.Dtrunc, config.k, calibration=cal)
                              for j in range(1, 2 * config.D + 1)]
        if "spectral" in config.checks:
            row["spectral"] = {str(r): spectral_statistic(data, r) for r in (2, 4)
                               if config.n**r <= SPECTRAL_CAP}
        if "planted" in config.checks:
            planted, _ = sample_planted(config.n, config.m, profile, child.spawn(1)[0])
            row["planted_min_eig"] = moment_matrix(planted, profile, config.D, config.Dtrunc, config.k).min_eig()
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    if config.timing:
        row["ms"] = round(1000 * (time.perf_counter() - start), 3)
    return row


def _median(values):
    return float(np.median(values)) if values else None


def summarize(rows: list[dict]) -> dict:
    eigs = [r["min_eig"] for r in rows if "min_eig" in r]
    summary = {
        "trials": len(rows),
        "failed": sum(1 for r in rows if "error" in r),
        "positive_min_eig_fraction": (sum(e > 0 for e in eigs) / len(eigs)) if eigs else None,
        "median_min_eig": _median(eigs),
        "median_booleanity": _median([r["booleanity"] for r in rows if "booleanity" in r]),
    }
    herm = [r["hermite"] for r in rows if "hermite" in r]
    if herm:
        summary["median_abs_hermite"] = [_median([abs(h[j]) for h in herm]) for j in range(len(herm[0]))]
    return summary


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> dict:
    """Run seeded trials; trial t uses the t-th child of the config seed."""
    if config.seed is None:
        raise ConfigError("experiments need an explicit seed")
    children = np.random.SeedSequence(config.seed).spawn(config.trials)
    if jobs > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_trial, [config] * config.trials, range(config.trials), children))
    else:
        rows = [_trial(config, t, c) for t, c in enumerate(children)]
    return {"config": asdict(config), "trials": rows, "summary": summarize(rows)}


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    rows = report["trials"]
    writer = csv.writer(buf, lineterminator="\n")
    header = ["trial", "min_eig", "booleanity", "hermite", "spectral", "planted_min_eig", "ms", "error"]
    writer.writerow(header)
    for r in rows:
        writer.writerow([
            r.get("trial"), r.get("min_eig", ""), r.get("booleanity", ""),
            ";".join(repr(h) for h in r.get("hermite", [])),
            ";".join(f"{k}={v!r}" for k, v in r.get("spectral", {}).items()),
            r.get("planted_min_eig", ""), r.get("ms", ""), r.get("error", ""),
        ])
    return buf.getvalue()
