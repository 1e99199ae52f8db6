"""Command-line entry point: ``wavelet-lrd <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .basis import circle_grid, filter_bank, make_bspline_family
from .dwt import decompose
from .estimator import WaveletMemoryEstimator
from .harness import load_config, run_experiment
from .models import parse_model
from .simulate import plan_sampler, sample
from .spectra import cross_density_on_grid

__all__ = ["main", "build_parser"]


def _read_series(path: str) -> np.ndarray:
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                values.append(float(text))
            except ValueError:
                raise SystemExit(f"{path}:{lineno}: not a number: {text!r}") from None
    return np.asarray(values)


def _write_rows(path: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _cmd_filters(args) -> int:
    fam = make_bspline_family(args.order)
    bank = filter_bank(fam, args.max_scale)
    lam = np.linspace(0.0, np.pi, args.samples)
    out = []
    for row in bank:
        h = row.transfer(lam)
        out.append(
            {
                "j": row.scale,
                "offset": row.offset,
                "coeffs": row.coeffs.tolist(),
                "transfer": {"lambda": lam.tolist(), "re": h.real.tolist(), "im": h.imag.tolist()},
            }
        )
    Path(args.out).write_text(json.dumps(out))
    return 0


def _cmd_dwt(args) -> int:
    x = _read_series(args.inp)
    dec = decompose(x, args.order, args.max_scale)
    rows = ((j, k, repr(float(v))) for j, w in dec.items() for k, v in enumerate(w))
    _write_rows(args.out, ["j", "k", "value"], rows)
    return 0


def _cmd_spectra(args) -> int:
    model = parse_model(args.model)
    dens = cross_density_on_grid(model, args.order, args.scale, args.lag_u, args.grid)
    lam = circle_grid(args.grid)
    header = ["lambda"]
    for v in range(dens.shape[1]):
        header += [f"re_{v}", f"im_{v}"]
    rows = []
    for i, lv in enumerate(lam):
        row = [repr(float(lv))]
        for v in range(dens.shape[1]):
            row += [repr(float(dens[i, v].real)), repr(float(dens[i, v].imag))]
        rows.append(row)
    _write_rows(args.out, header, rows)
    return 0


def _cmd_estimate(args) -> int:
    x = _read_series(args.inp)
    j0 = args.j0 if args.j0 == "auto" else int(args.j0)
    est = WaveletMemoryEstimator(
        order=args.order, j0=j0, ell=args.ell, weights=args.weights, level=args.level, beta=args.beta
    ).fit(x)
    Path(args.out).write_text(json.dumps(est.report_.to_dict(), indent=2) + "\n")
    return 0


def _cmd_simulate(args) -> int:
    model = parse_model(args.model)
    plan = plan_sampler(model, args.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(max(args.reps - 1, 0)))
    for r in range(args.reps):
        x = sample(plan, args.seed, 1, r)[0]
        (out / f"rep_{r:0{width}d}.csv").write_text("".join(f"{v!r}\n" for v in x.tolist()))
    return 0


def _cmd_mc(args) -> int:
    config = load_config(args.config)
    manifest = run_experiment(config, args.out)
    failed = [e for e in manifest["envelopes"] if not e["passed"]]
    for e in manifest["envelopes"]:
        print(f"{'PASS' if e['passed'] else 'FAIL'} {e['name']}: {e['detail']}")
    return 1 if (args.assert_envelopes and failed) else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavelet-lrd", description="Wavelet estimation of long-range dependence")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("filters", help="write wavelet filters and transfer functions as JSON")
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--max-scale", type=int, required=True)
    s.add_argument("--samples", type=int, default=257, help="transfer-function samples on [0, pi]")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_filters)

    s = sub.add_parser("dwt", help="wavelet coefficients of a series (CSV rows j,k,value)")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--max-scale", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_dwt)

    s = sub.add_parser("spectra", help="within/between-scale spectral density on a grid")
    s.add_argument("--model", required=True)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--scale", type=int, required=True)
    s.add_argument("--lag-u", type=int, default=0)
    s.add_argument("--grid", type=int, default=2048)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_spectra)

    s = sub.add_parser("estimate", help="estimate d with a confidence interval (JSON report)")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--order", type=int, default=2)
    s.add_argument("--j0", default="auto")
    s.add_argument("--ell", type=int, default=3)
    s.add_argument("--weights", choices=["ls", "opt"], default="ls")
    s.add_argument("--level", type=float, default=0.95)
    s.add_argument("--beta", type=float, default=2.0, help="smoothness used by --j0 auto")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_estimate)

    s = sub.add_parser("simulate", help="exact Gaussian samples, one CSV per replicate")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    s = sub.add_parser("mc", help="run a Monte Carlo experiment from a TOML config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--assert", dest="assert_envelopes", action="store_true", help="exit 1 if an envelope fails")
    s.set_defaults(func=_cmd_mc)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
