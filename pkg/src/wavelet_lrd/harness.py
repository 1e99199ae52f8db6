"""Monte Carlo experiments: bias and variance of the estimator along an ``n`` ladder,
plus deterministic checks of the large-scale approximations.

A configuration is a TOML file::

    model = "fgn:0.7"        # see models.parse_model
    order = 2                # B-spline order N
    n = [8192, 32768]        # sample sizes
    reps = 1000              # replicates per sample size
    j0 = "auto"              # or an integer start scale
    beta = 2.0               # smoothness used by j0 = "auto"
    ell = 2                  # scales J0..J0+ell
    weights = "ls"           # "ls" or "opt" (optimal at the true d)
    seed = 42
    level = 0.95             # coverage level of the confidence intervals

    [envelopes]              # checked by `mc --assert`
    mvar_rel_tol = 0.15      # |m Var(d_hat) - limit| / limit at the largest n
    bias_abs_tol = 0.02      # |mean d_hat - d| <= max(tol, 3 SE) at the largest n
    mse_decreasing = true    # MSE decreases from the smallest to the largest n

    [theory]                 # optional deterministic tables
    scales = [3, 4, 5, 6, 7, 8]
    grid = 1024
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .basis import circle_grid, make_bspline_family
from .dwt import decompose, max_scale
from .estimator import (
    auto_start_scale,
    avar_matrix,
    confidence_interval,
    estimate_d,
    limit_variance,
    optimal_weights,
    scale_spectrum,
    wls_weights,
)
from .models import MemoryModel, parse_model
from .simulate import plan_sampler, sample
from .spectra import cross_density_asymptotic, cross_density_on_grid, k_constant, wavelet_variance

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "ExperimentConfig",
    "load_config",
    "run_bias_variance",
    "run_theory_checks",
    "check_envelopes",
    "write_table",
    "run_experiment",
]

_CHUNK = 64


@dataclass
class ExperimentConfig:
    model: str
    order: int = 2
    n: list = field(default_factory=lambda: [4096, 16384, 65536])
    reps: int = 500
    j0: Union[str, int] = "auto"
    beta: float = 2.0
    ell: int = 3
    weights: str = "ls"
    seed: int = 0
    level: float = 0.95
    envelopes: dict = field(default_factory=dict)
    theory: Optional[dict] = None

    def __post_init__(self):
        self.n = sorted(int(v) for v in (self.n if isinstance(self.n, (list, tuple)) else [self.n]))
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if self.weights not in ("ls", "opt"):
            raise ValueError(f"weights must be 'ls' or 'opt', got {self.weights!r}")
        if self.ell < 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")
        fam = make_bspline_family(self.order)
        for n in self.n:
            j0 = self.start_scale(n)
            top = max_scale(n, fam.support_len)
            if j0 + self.ell > top:
                raise ValueError(f"scales {j0}..{j0 + self.ell} exceed J(n) = {top} for n = {n}")
        parse_model(self.model)

    def start_scale(self, n: int) -> int:
        if isinstance(self.j0, str):
            if self.j0 != "auto":
                raise ValueError(f"j0 must be an integer or 'auto', got {self.j0!r}")
            return auto_start_scale(n, self.beta)
        return int(self.j0)

    @property
    def memory_model(self) -> MemoryModel:
        return parse_model(self.model)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    if "model" not in raw:
        raise ValueError("config needs a 'model' field")
    return ExperimentConfig(**raw)


def _fsum_mean(values: np.ndarray) -> float:
    return math.fsum(values.tolist()) / values.size


def _fsum_var(values: np.ndarray) -> float:
    mu = _fsum_mean(values)
    return math.fsum(((values - mu) ** 2).tolist()) / (values.size - 1)


def simulate_estimates(config: ExperimentConfig, n: int, weights: np.ndarray) -> tuple:
    """``d_hat`` for every replicate at sample size ``n``, and ``m``."""
    model = config.memory_model
    fam = make_bspline_family(config.order)
    plan = plan_sampler(model, n)
    j0 = config.start_scale(n)
    # one seed stream per (n, replicate); the n index keeps ladders independent
    seed = [config.seed, n]
    out = np.empty(config.reps)
    m = None
    for start in range(0, config.reps, _CHUNK):
        count = min(_CHUNK, config.reps - start)
        x = sample(plan, seed, count, start)
        spec = scale_spectrum(decompose(x, fam, j0 + config.ell, j_min=j0), j0, config.ell)
        out[start : start + count] = estimate_d(spec, weights)
        m = int(np.sum(spec.counts))
    return out, m


def run_bias_variance(config: ExperimentConfig) -> list:
    """One row per sample size with bias, variance, MSE, ``m Var`` and the limit variance."""
    model = config.memory_model
    desc = make_bspline_family(config.order).descriptor()
    if config.weights == "opt":
        w = optimal_weights(desc, model.d, config.ell)
    else:
        w = wls_weights(config.ell)
    lim = limit_variance(desc, model.d, w, avar_matrix(desc, model.d, config.ell))
    rows = []
    for n in config.n:
        d_hat, m = simulate_estimates(config, n, w)
        mean = _fsum_mean(d_hat)
        var = _fsum_var(d_hat) if d_hat.size > 1 else float("nan")
        mse = math.fsum(((d_hat - model.d) ** 2).tolist()) / d_hat.size
        lo, hi = confidence_interval(0.0, lim, m, config.level)
        covered = np.mean(np.abs(d_hat - model.d) <= hi)
        rows.append(
            {
                "n": n,
                "J0": config.start_scale(n),
                "ell": config.ell,
                "m": m,
                "reps": d_hat.size,
                "d": model.d,
                "mean_d_hat": mean,
                "bias": mean - model.d,
                "bias_se": math.sqrt(var / d_hat.size),
                "var": var,
                "mse": mse,
                "m_var": m * var,
                "m_var_se": m * var * math.sqrt(2.0 / (d_hat.size - 1)),
                "limit_var": lim,
                "m_var_rel_err": (m * var - lim) / lim,
                "coverage": float(covered),
                "bias_envelope": (m / n) ** model.beta + 1.0 / m,
                "bias_ratio": abs(mean - model.d) / ((m / n) ** model.beta + 1.0 / m),
            }
        )
    return rows


def run_theory_checks(config: ExperimentConfig) -> list:
    """Normalised approximation errors of ``sigma^2_j`` and ``D_{j,0}`` against their large-scale
    limits, one row per scale, with the quadrature error of each theoretical value."""
    theory = config.theory or {}
    scales = [int(j) for j in theory.get("scales", range(3, 9))]
    size = int(theory.get("grid", 1024))
    model = config.memory_model
    fam = make_bspline_family(config.order)
    d, f0, beta = model.d, model.fstar0, model.beta
    kq = k_constant(fam.descriptor(), d, full_output=True)
    lam = circle_grid(size)
    d_inf = np.real(cross_density_asymptotic(fam.descriptor(), d, 0, lam)[:, 0])
    rows = []
    for j in scales:
        sq = wavelet_variance(model, fam, j, full_output=True)
        approx = f0 * kq.value * 2.0 ** (2 * j * d)
        norm = 2.0 ** (-(2 * d - beta) * j)
        dj = np.real(cross_density_on_grid(model, fam, j, 0, size)[:, 0])
        rows.append(
            {
                "j": j,
                "sigma2": sq.value,
                "sigma2_quad_err": sq.error,
                "sigma2_limit": approx,
                "K_quad_err": kq.error,
                "var_err_normalized": abs(sq.value - approx) * norm / f0,
                "density_err_normalized": float(np.max(np.abs(dj - f0 * d_inf * 2.0 ** (2 * j * d)))) * norm / f0,
            }
        )
    return rows


def check_envelopes(config: ExperimentConfig, rows: list) -> list:
    """``(name, passed, detail)`` for each envelope configured in ``[envelopes]``."""
    env = config.envelopes or {}
    last, first = rows[-1], rows[0]
    out = []
    if "mvar_rel_tol" in env:
        tol = float(env["mvar_rel_tol"])
        err = abs(last["m_var_rel_err"])
        out.append(("mvar_rel_tol", err <= tol, f"|m Var / limit - 1| = {err:.4f} at n = {last['n']} (tol {tol})"))
    if "bias_abs_tol" in env:
        tol = max(float(env["bias_abs_tol"]), 3 * last["bias_se"])
        err = abs(last["bias"])
        out.append(("bias_abs_tol", err <= tol, f"|bias| = {err:.4f} at n = {last['n']} (tol {tol:.4f})"))
    if env.get("mse_decreasing", False):
        ok = len(rows) > 1 and last["mse"] < first["mse"]
        out.append(("mse_decreasing", ok, f"MSE {first['mse']:.3g} at n = {first['n']} -> {last['mse']:.3g}"))
    return out


def _table_text(rows: list) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
    return buf.getvalue()


def write_table(rows: list, path: Union[str, Path]) -> str:
    """Write rows as CSV; returns the sha256 of the bytes written."""
    text = _table_text(rows)
    Path(path).write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def run_experiment(config: ExperimentConfig, out_dir: Union[str, Path]) -> dict:
    """Run everything the config asks for, write CSV tables and ``manifest.json``; return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_bias_variance(config)
    files = {"bias_variance.csv": write_table(rows, out / "bias_variance.csv")}
    if config.theory is not None:
        files["theory.csv"] = write_table(run_theory_checks(config), out / "theory.csv")
    checks = check_envelopes(config, rows)
    digest = hashlib.sha256("".join(f"{k}:{v}\n" for k, v in sorted(files.items())).encode()).hexdigest()
    manifest = {
        "config": asdict(config),
        "files": files,
        "content_hash": digest,
        "envelopes": [{"name": n, "passed": bool(p), "detail": d} for n, p, d in checks],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
