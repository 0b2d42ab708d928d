"""``pathid-sim`` command line front end.

Exit codes: 0 success, 1 numerical failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, entmetrics, expdsl, noisemc, tomography
from .elements import PerturbativeOverflow
from .fockcore import ket_to_records
from .postselect import EmptyPostSelection, term_report

EXIT_NUMERICAL = 1
EXIT_INPUT = 2

NUMERICAL_ERRORS = (
    EmptyPostSelection,
    PerturbativeOverflow,
    entmetrics.NumericalError,
    noisemc.FitError,
    tomography.ConvergenceError,
    FloatingPointError,
)


class InputError(Exception):
    pass


def bundled_specs() -> list[str]:
    return sorted(p.name for p in resources.files("pathid").joinpath("data").iterdir()
                  if p.name.endswith(".exp"))


def resolve_spec(path: str) -> tuple[str, str]:
    """(display path, text). ``-`` reads stdin; bare bundled names resolve to package data."""
    if path == "-":
        return "-", sys.stdin.read()
    p = Path(path)
    if p.is_file():
        return str(p), p.read_bytes().decode("utf-8")
    if p.name == path and path in bundled_specs():
        res = resources.files("pathid").joinpath("data", path)
        return f"<bundled>/{path}", res.read_text(encoding="utf-8")
    raise InputError(f"{path}: file not found")


def load_spec(args) -> expdsl.ExperimentSpec:
    shown, text = resolve_spec(args.spec)
    args.spec_display = shown
    spec = expdsl.parse(text, name=Path(shown).name)
    spec = spec.with_overrides(order=getattr(args, "order", None), gamma=getattr(args, "gamma", None))
    for w in expdsl.validate(spec):
        print(f"warning: {w}", file=sys.stderr)
    return spec


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def emit(args, text: str, t0: float, extra_outputs: list[str] | None = None) -> None:
    """Write the command output and its run manifest."""
    out = args.out
    manifest = {
        "command": args.command,
        "argv": sys.argv[1:],
        "spec_path": getattr(args, "spec_display", None),
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "outputs": [out] + (extra_outputs or []),
        "wall_time_s": round(time.perf_counter() - t0, 6),
    }
    if out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        print("manifest: " + json.dumps(manifest), file=sys.stderr)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))
    Path(str(path) + ".manifest.json").write_text(dumps(manifest), encoding="utf-8", newline="\n")


def _float_list(text: str, n: int, name: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise InputError(f"{name}: expected {n} comma-separated numbers") from None
    if len(vals) != n:
        raise InputError(f"{name}: expected {n} comma-separated numbers, got {len(vals)}")
    return vals


def _shots(text: str) -> float:
    value = float(text)
    if value < 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError("shots must be a finite number >= 0")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


# ---------------------------------------------------------------------------

def cmd_state(args) -> None:
    t0 = time.perf_counter()
    spec = load_spec(args)
    state = spec.build_state()
    payload = {"spec": spec.name, "max_order": spec.max_order, "n_terms": len(state),
               "terms": ket_to_records(state)}
    if spec.detection is not None:
        payload["detection"] = str(spec.detection)
        payload["term_report"] = [
            {"basis": str(v.basis), "re": v.amplitude.real, "im": v.amplitude.imag,
             "order": v.order, "kept": v.kept, "reason": v.reason}
            for v in term_report(state, spec.detection)
        ]
    emit(args, dumps(payload), t0)


def _entangle_payload(spec) -> dict:
    rho = spec.postselected()
    report = entmetrics.chsh(rho)
    joint = {f"{a}x{b}": entmetrics.joint_probabilities(rho, a, b)
             for a, b in tomography.ALL_BASIS_PAIRS}
    return {
        "spec": spec.name,
        "gamma": spec.dephasing_gamma,
        "rho": rho.to_dict(),
        "metrics": {
            "fidelity": entmetrics.fidelity_phi_plus(rho),
            "concurrence": entmetrics.concurrence(rho),
            "witness": entmetrics.witness_value(rho),
            "S": report.s_value,
            "relative_phase": rho.relative_phase,
            "success_weight": rho.success_weight,
        },
        "chsh": report.to_dict(),
        "joint_probabilities": joint,
    }


def cmd_entangle(args) -> None:
    t0 = time.perf_counter()
    spec = load_spec(args)
    emit(args, dumps(_entangle_payload(spec)), t0)


def cmd_chsh(args) -> None:
    t0 = time.perf_counter()
    spec = load_spec(args)
    rho = spec.postselected()
    settings = entmetrics.CHSH_SETTINGS
    if args.angles:
        settings = entmetrics.chsh_settings_from_angles(*_float_list(args.angles, 4, "--angles"))
    exact = entmetrics.chsh(rho, settings)
    payload = {"spec": spec.name, "gamma": spec.dephasing_gamma, "exact": exact.to_dict()}
    if args.shots:
        ests, records = [], []
        for k, s in enumerate(settings):
            rec = noisemc.simulate_counts(rho, s, args.shots, args.seed, stream=k)
            records.append(rec.to_dict())
            ests.append(noisemc.estimate_correlation(rec))
        s_val = abs(sum(sign * e.value for sign, e in zip(entmetrics.CHSH_SIGNS, ests)))
        payload["sampled"] = {
            "shots_per_setting": args.shots,
            "seed": args.seed,
            "E": [e.value for e in ests],
            "sigma_E": [e.sigma for e in ests],
            "degenerate": any(e.degenerate for e in ests),
            "S": s_val,
            "sigma_S": math.sqrt(sum(e.sigma**2 for e in ests)),
            "records": records,
        }
    emit(args, dumps(payload), t0)


def cmd_sweep(args) -> None:
    t0 = time.perf_counter()
    spec = load_spec(args)
    rho = spec.postselected()
    grid = np.linspace(0.0, 180.0, args.steps)
    emit(args, entmetrics.correlation_sweep_csv(rho, grid), t0)


def cmd_scan(args) -> None:
    t0 = time.perf_counter()
    spec = load_spec(args)
    if args.steps < 2:
        raise InputError("--steps must be >= 2")
    grid = np.linspace(args.phase_from, args.phase_to, args.steps)
    scan = noisemc.phase_scan(spec, grid, mean_total=args.shots or None, seed=args.seed)
    try:
        fits = scan.fits(noisy=scan.counts is not None)
        for name, fit in fits.items():
            print(f"{name}: V = {fit.visibility:.4f}, delta0 = {fit.delta0:.4f} rad, "
                  f"rms residual = {fit.residual_rms:.4g}", file=sys.stderr)
    except noisemc.FitError as exc:
        print(f"visibility fit skipped: {exc}", file=sys.stderr)
    emit(args, scan.to_csv(), t0)


def cmd_tomo(args) -> None:
    t0 = time.perf_counter()
    spec = load_spec(args)
    if args.shots <= 0:
        raise InputError("--shots must be > 0")
    rho = spec.postselected()
    settings = tomography.TomoSettings(args.shots, args.mc, args.seed)
    result = tomography.mc_errorbars(rho.entries, settings, workers=args.workers)
    payload = {"spec": spec.name, "gamma": spec.dephasing_gamma, **result.to_dict()}
    emit(args, dumps(payload), t0)


def cmd_ratio(args) -> None:
    t0 = time.perf_counter()
    rates = _float_list(args.cc, 4, "--cc")
    try:
        cal = noisemc.RateCalibration(tuple(rates))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    emit(args, dumps({"cc_hz": list(cal.pair_rates_hz), "ratio": noisemc.efficiency_ratio(cal)}), t0)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pathid-sim",
        description="Simulate entanglement of independent photons by path identity.",
        epilog="bundled specs: " + ", ".join(bundled_specs()),
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, spec=True):
        p = sub.add_parser(name, help=help_text, description=help_text)
        if spec:
            p.add_argument("spec", help="experiment file (.exp), bundled name, or - for stdin")
            p.add_argument("--order", type=int, help="override perturbative order")
            p.add_argument("--gamma", type=float, help="override HH/VV coherence factor in [0,1]")
        p.add_argument("--out", default="-", help="output path, - for stdout (default)")
        p.set_defaults(func=func)
        return p

    add("state", cmd_state, "final ket and per-term post-selection audit (JSON)")
    add("entangle", cmd_entangle, "post-selected density matrix and entanglement metrics (JSON)")

    p = add("chsh", cmd_chsh, "CHSH report, exact and optionally Poisson-sampled (JSON)")
    p.add_argument("--shots", type=_shots, default=0.0, help="mean coincidences per setting (0: exact only)")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--angles", help="a,a',b,b' in degrees (default 0,45,22.5,67.5)")

    p = add("sweep", cmd_sweep, "E(thetaA in {0,45}, thetaB) over 0..180 deg (CSV)")
    p.add_argument("--steps", type=int, default=37)

    p = add("scan", cmd_scan, "D/A coincidence probabilities versus the first phase element (CSV)")
    p.add_argument("--phase-from", type=float, default=0.0, help="radians")
    p.add_argument("--phase-to", type=float, default=2 * math.pi, help="radians")
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--shots", type=_shots, default=0.0, help="mean coincidences per phase point (0: none)")
    p.add_argument("--seed", type=_seed, default=0)

    p = add("tomo", cmd_tomo, "simulated tomography with MLE and Monte Carlo error bars (JSON)")
    p.add_argument("--shots", type=_shots, default=1e5, help="mean coincidences per basis pair")
    p.add_argument("--mc", type=int, default=100, help="Monte Carlo trials (0: point estimate only)")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--workers", type=int, default=1, help="processes for MC trials")

    p = add("ratio", cmd_ratio, "eps'/eps from four source coincidence rates", spec=False)
    p.add_argument("--cc", required=True, help="r1,r2,r3,r4 in Hz")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (InputError, expdsl.ParseError, expdsl.ValidationError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
