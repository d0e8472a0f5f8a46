"""Command-line front end.

Subcommands::

    erd add-noise IN --sigma S [--seed N] --out OUT
    erd denoise IN [--reference REF] [--sigma S] [solver flags] --out DIR
    erd benchmark DIR [--sigma S ...] [solver flags] [--jobs N] --out CSV
    erd hminus-demo [--n-max N] [--width W] [--out CSV]

Exit codes are 0 on success, 1 for usage errors, 2 for I/O errors and 3 when
the solver produces non-finite values.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, imgio, kernels
from .fftops import hminus_norm_sq, inverse_laplacian_norm
from .metrics import QualityReport, psnr, quality
from .potentials import PotentialSpec
from .solver import IterationDiagnostics, SolverConfig, SolverDivergence, decompose_outputs, run

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

BENCHMARK_COLUMNS = ("file", "sigma", "psnr_noisy", "psnr_restored", "mssim_noisy",
                     "mssim_restored", "iters", "seconds")

# config-file keys and flag names -> SolverConfig / PotentialSpec fields
_SOLVER_KEYS = {"lambda": "lam", "lam": "lam", "omega1": "omega1", "omega2": "omega2",
                "theta": "theta", "beta": "beta", "rho": "rho", "tau": "tau", "tol": "tol",
                "max_iters": "max_iters", "min_iters": "min_iters", "init": "init_mode",
                "init_mode": "init_mode", "seed": "rng_seed", "rng_seed": "rng_seed"}
_POTENTIAL_KEYS = {"potential": "family", "family": "family", "p": "p", "alpha": "alpha",
                   "beta_pot": "beta_pot", "epsilon": "epsilon"}
_INIT_ALIASES = {"f": "observed"}


class UsageError(Exception):
    """Bad flags or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------- configuration

def _coerce(name: str, value):
    kinds = {f.name: f.type for f in fields(SolverConfig)}
    kinds.update({f.name: f.type for f in fields(PotentialSpec)})
    kind = kinds[name]
    if isinstance(value, str):
        value = value.strip()
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
        if kind in ("bool", bool):
            return value.lower() in ("1", "true", "yes", "on")
    return value


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_").lower()] = value
    return out


def build_config(file_values: dict, flag_values: dict) -> SolverConfig:
    """Defaults, then config-file values, then explicit flags."""
    solver, pot = {}, {}
    for source in (file_values, flag_values):
        for key, value in source.items():
            if value is None:
                continue
            if key in _SOLVER_KEYS:
                name = _SOLVER_KEYS[key]
                if name == "init_mode":
                    value = _INIT_ALIASES.get(value, value)
                solver[name] = _coerce(name, value)
            elif key in _POTENTIAL_KEYS:
                name = _POTENTIAL_KEYS[key]
                pot[name] = _coerce(name, value)
            elif key in ("track_lagrangian", "couple_init"):
                solver[key] = _coerce(key, value)
            else:
                raise UsageError(f"unknown configuration key {key!r}")
    try:
        base = SolverConfig()
        potential = PotentialSpec(**{**_potential_dict(base.potential), **pot})
        return SolverConfig(**{**_config_dict(base), **solver, "potential": potential})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _potential_dict(spec: PotentialSpec) -> dict:
    return {f.name: getattr(spec, f.name) for f in fields(spec)}


def _config_dict(cfg: SolverConfig) -> dict:
    return {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "potential"}


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--config", help="key=value file; flags override it")
    g.add_argument("--potential", choices=("power", "log", "rational"))
    g.add_argument("--p", type=float, help="exponent of the power potential")
    g.add_argument("--alpha", type=float, help="log potential parameter")
    g.add_argument("--beta-pot", dest="beta_pot", type=float,
                   help="rational potential parameter")
    g.add_argument("--lambda", dest="lam", type=float, help="fidelity weight")
    g.add_argument("--omega1", type=float, help="illumination (Hessian) weight")
    g.add_argument("--omega2", type=float, help="reflectance (gradient) weight")
    g.add_argument("--theta", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--tau", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iters", dest="max_iters", type=int)
    g.add_argument("--init", choices=("zeros", "ones", "random", "f"))
    g.add_argument("--score", choices=("exp", "u"), default="exp",
                   help="restored image: exp(i + r) (default) or the split variable u")


def _config_from_args(args) -> SolverConfig:
    file_values = read_config_file(args.config) if args.config else {}
    flags = {k: getattr(args, k) for k in
             ("potential", "p", "alpha", "beta_pot", "lam", "omega1", "omega2", "theta",
              "beta", "rho", "tau", "tol", "max_iters", "init", "seed")}
    return build_config(file_values, flags)


def _noise_seed(args) -> int:
    return 0 if args.seed is None else args.seed


# ---------------------------------------------------------------- helpers

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    data = buf.getvalue()
    if path is None or str(path) == "-":
        sys.stdout.write(data)
    else:
        Path(path).write_text(data, encoding="utf-8", newline="")


def write_diagnostics(path, trace: Sequence[IterationDiagnostics]) -> None:
    write_csv(path, IterationDiagnostics.COLUMNS,
              ([_fmt(getattr(d, c)) for c in IterationDiagnostics.COLUMNS] for d in trace))


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _quality_dict(q: QualityReport | None):
    if q is None:
        return None
    return {"psnr": q.psnr, "mssim": None if math.isnan(q.mssim) else q.mssim}


def _quality(channels, refs) -> QualityReport:
    # MSSIM needs an 11x11 window; tiny images only get a PSNR
    if min(refs[0].shape) < 11:
        return QualityReport(float(np.mean([psnr(c, r) for c, r in zip(channels, refs)])),
                             math.nan)
    return quality(channels, refs)


def _display_range(x: np.ndarray) -> np.ndarray:
    lo, hi = float(x.min()), float(x.max())
    if hi - lo <= 0.0:
        return np.full_like(x, 0.5)
    return (x - lo) / (hi - lo)


def _provenance(**items) -> str:
    return "erd " + " ".join(f"{k}={v}" for k, v in items.items())


def denoise_channels(channels, config: SolverConfig, refs=None, score="exp"):
    """Solve each channel independently; returns ``(states, traces)``."""
    states, traces = [], []
    for k, ch in enumerate(channels):
        ref = None if refs is None else refs[k]
        state, trace = run(ch, config, reference=ref, score=score)
        states.append(state)
        traces.append(trace)
    return states, traces


def _restored(state, score: str) -> np.ndarray:
    return np.exp(state.i + state.r) if score == "exp" else state.u


# ---------------------------------------------------------------- subcommands

def cmd_add_noise(args) -> int:
    img = imgio.load(args.input)
    noisy = imgio.add_gaussian_noise(img, args.sigma, _noise_seed(args))
    out = Path(args.out)
    imgio.save(noisy, out)
    stored = imgio.load(out)
    q = _quality(stored.channels, img.channels)
    _write_json(out.with_name(out.name + ".json"), {
        "command": "add-noise", "input": str(args.input), "output": str(out),
        "sigma": args.sigma, "seed": _noise_seed(args), "generator": imgio.NOISE_GENERATOR,
        "quality_vs_input": _quality_dict(q), "version": __version__,
    })
    print(f"{out}: PSNR {q.psnr:.2f} dB  MSSIM {q.mssim:.4f}")
    return EXIT_OK


def cmd_denoise(args) -> int:
    config = _config_from_args(args)
    t0 = time.perf_counter()
    img = imgio.load(args.input)
    ref = imgio.load(args.reference) if args.reference else None
    if args.sigma is not None:
        noisy = imgio.add_gaussian_noise(img, args.sigma, _noise_seed(args))
        ref = img if ref is None else ref
    else:
        noisy = img
    if ref is not None and (ref.shape != noisy.shape
                            or len(ref.channels) != len(noisy.channels)):
        raise UsageError("reference and input differ in shape or channel count")
    refs = ref.channels if ref is not None else None

    states, traces = denoise_channels(noisy.channels, config, refs, args.score)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    parts = [decompose_outputs(s, f) for s, f in zip(states, noisy.channels)]
    restored = [_restored(s, args.score) for s in states]
    tag = _provenance(score=args.score, seed=_noise_seed(args))
    imgio.save(imgio.LoadedImage(restored), out / "u.png", comments=[tag])
    imgio.save(imgio.LoadedImage([np.clip(p.reflectance, 0, 1) for p in parts]),
               out / "R.png")
    imgio.save(imgio.LoadedImage([_display_range(p.illumination) for p in parts]),
               out / "I.png")
    imgio.save(imgio.LoadedImage([p.noise + 0.5 for p in parts]), out / "noise.png")
    if len(traces) == 1:
        write_diagnostics(out / "diagnostics.csv", traces[0])
    else:
        for name, trace in zip("rgb", traces):
            write_diagnostics(out / f"diagnostics_{name}.csv", trace)
    if args.dump_raw:
        for key, arrs in (("u", restored), ("R", [p.reflectance for p in parts]),
                          ("I", [p.illumination for p in parts]),
                          ("noise", [p.noise for p in parts]),
                          ("u_split", [p.u for p in parts])):
            np.save(out / f"{key}.npy", np.stack(arrs) if len(arrs) > 1 else arrs[0])

    q_noisy = q_rest = None
    if refs is not None:
        q_noisy = _quality(noisy.channels, refs)
        q_rest = _quality(restored, refs)
        print(f"noisy:    PSNR {q_noisy.psnr:.2f} dB  MSSIM {q_noisy.mssim:.4f}")
        print(f"restored: PSNR {q_rest.psnr:.2f} dB  MSSIM {q_rest.mssim:.4f}")
    _write_json(out / "manifest.json", {
        "command": "denoise", "input": str(args.input),
        "reference": str(args.reference) if args.reference else None,
        "sigma": args.sigma, "seed": _noise_seed(args), "score": args.score,
        "config": config.to_dict(), "output_dir": str(out),
        "iterations": [len(t) for t in traces],
        "split_gap": [p.split_gap for p in parts],
        # operator norm entering the penalty threshold on rho
        "inverse_laplacian_norm": inverse_laplacian_norm(*noisy.shape),
        "quality_noisy": _quality_dict(q_noisy), "quality": _quality_dict(q_rest),
        "backend": kernels.BACKEND, "version": __version__,
        "wall_clock_seconds": time.perf_counter() - t0,
    })
    return EXIT_OK


def _benchmark_one(task):
    path, sigma, seed, config, score = task
    t0 = time.perf_counter()
    try:
        clean = imgio.load(path)
    except (OSError, ValueError) as exc:
        return {"file": path.name, "sigma": sigma, "error": str(exc)}
    noisy = imgio.add_gaussian_noise(clean, sigma, seed)
    try:
        states, traces = denoise_channels(noisy.channels, config, score=score)
    except (SolverDivergence, ValueError) as exc:
        return {"file": path.name, "sigma": sigma, "error": str(exc)}
    restored = [_restored(s, score) for s in states]
    qn = _quality(noisy.channels, clean.channels)
    qr = _quality(restored, clean.channels)
    return {"file": path.name, "sigma": sigma, "psnr_noisy": qn.psnr,
            "psnr_restored": qr.psnr, "mssim_noisy": qn.mssim, "mssim_restored": qr.mssim,
            "iters": max(len(t) for t in traces), "seconds": time.perf_counter() - t0}


def _benchmark_rows(results, sigmas, timing: bool):
    rows, failed = [], 0
    metric_cols = BENCHMARK_COLUMNS[2:]
    for res in results:
        if "error" in res:
            failed += 1
            print(f"failed: {res['file']} (sigma {res['sigma']:g}): {res['error']}",
                  file=sys.stderr)
            rows.append([res["file"], f"{res['sigma']:g}"] + ["failed"] * len(metric_cols))
            continue
        secs = res["seconds"] if timing else 0.0
        rows.append([res["file"], f"{res['sigma']:g}", f"{res['psnr_noisy']:.6f}",
                     f"{res['psnr_restored']:.6f}", f"{res['mssim_noisy']:.6f}",
                     f"{res['mssim_restored']:.6f}", str(res["iters"]), f"{secs:.3f}"])
    for sigma in sigmas:
        ok = [r for r in results if r["sigma"] == sigma and "error" not in r]
        if not ok:
            continue
        mean = {c: float(np.mean([r[c] for r in ok])) for c in metric_cols}
        secs = mean["seconds"] if timing else 0.0
        rows.append(["MEAN", f"{sigma:g}", f"{mean['psnr_noisy']:.6f}",
                     f"{mean['psnr_restored']:.6f}", f"{mean['mssim_noisy']:.6f}",
                     f"{mean['mssim_restored']:.6f}", f"{mean['iters']:g}", f"{secs:.3f}"])
    return rows, failed


def cmd_benchmark(args) -> int:
    config = _config_from_args(args)
    folder = Path(args.dir)
    if not folder.is_dir():
        raise FileNotFoundError(f"not a directory: {folder}")
    files = sorted(p for p in folder.iterdir() if p.is_file() and not p.name.startswith("."))
    tasks = [(p, float(s), _noise_seed(args), config, args.score) for p in files for s in args.sigma]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_benchmark_one, tasks))
    else:
        results = [_benchmark_one(t) for t in tasks]
    # map() preserves submission order, which is filename order
    rows, failed = _benchmark_rows(results, [float(s) for s in args.sigma], not args.no_timing)
    write_csv(args.out, BENCHMARK_COLUMNS, rows)
    return EXIT_IO if failed else EXIT_OK


def hminus_demo_rows(n_max: int, width: int):
    """``(n, ||w||^2_{H^-1}, ||w||^2)`` for ``w = sin(2 pi n x / width)``."""
    x = np.arange(width)
    rows = []
    for n in range(1, n_max + 1):
        w = np.sin(2.0 * math.pi * n * x / width)[None, :]
        rows.append((n, hminus_norm_sq(w), float(np.vdot(w, w))))
    return rows


def cmd_hminus_demo(args) -> int:
    if args.n_max < 1:
        raise UsageError("--n-max must be at least 1")
    if args.width < 2 or 2 * args.n_max >= args.width:
        raise UsageError("--width must exceed 2 * n-max so every sine is resolved")
    rows = hminus_demo_rows(args.n_max, args.width)
    write_csv(args.out, ("n", "hminus_norm_sq", "l2_norm_sq"),
              ([n, _fmt(h), _fmt(l2)] for n, h, l2 in rows))
    return EXIT_OK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="erd", allow_abbrev=False,
                     description="Exponential Retinex denoising and decomposition.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("add-noise", allow_abbrev=False, help="add seeded Gaussian noise to an image")
    p.add_argument("input")
    p.add_argument("--sigma", type=float, required=True, help="noise level on the 0-255 scale")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output .png or .pgm")
    p.set_defaults(func=cmd_add_noise)

    p = sub.add_parser("denoise", allow_abbrev=False, help="decompose and denoise one image")
    p.add_argument("input")
    p.add_argument("--reference", help="clean image used for PSNR/MSSIM")
    p.add_argument("--sigma", type=float,
                   help="inject noise first; the input then serves as reference")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-raw", dest="dump_raw", action="store_true",
                   help="also write float arrays as .npy")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("benchmark", allow_abbrev=False, help="denoise every image in a directory")
    p.add_argument("dir")
    p.add_argument("--sigma", type=float, nargs="+", default=[10.0, 15.0])
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.add_argument("--no-timing", dest="no_timing", action="store_true",
                   help="write 0 in the seconds column for byte-stable output")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("hminus-demo", allow_abbrev=False, help="H^-1 vs L2 norms of sines of rising frequency")
    p.add_argument("--n-max", dest="n_max", type=int, default=8)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--out", default="-", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_hminus_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(f"erd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDivergence as exc:
        print(f"erd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, imgio.ImageFormatError) as exc:
        print(f"erd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        # remaining ValueErrors come from argument validation downstream
        print(f"erd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
