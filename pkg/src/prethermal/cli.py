"""Command-line experiment runner.

Usage examples::

    prethermal spectrum --drive fibonacci --iters 20 --bins 96
    prethermal flow --class stretch --b 1 --lambda-sweep 1e2:1e4:20
    prethermal recipe table1-lrt
    prethermal check

Every run resolves its parameters from defaults, an optional ``key = value``
config file and command-line flags, in that order.  Unknown keys are
rejected.  Each run writes a ``manifest.txt`` with the tool version, a hash
of the resolved config and every resolved value.  Floats in CSV output use
17 significant digits.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path

import numpy as np

from . import checks, evolve, fer, flow, linres, spectra
from .arithmetic import make_class
from .drives import fibonacci_word, random_rmd, sequence_to_text, thue_morse_word
from .errors import ConfigError, PrethermalError

EXIT_OK = 0
EXIT_CRITERION = 1
EXIT_ERROR = 2

# Per-command schema: key -> (type, default, help).
_SEED = {"seed": (int, 0, "64-bit seed for every random draw")}
SCHEMAS: dict[str, dict[str, tuple]] = {
    "spectrum": {
        "drive": (str, "thue-morse", "thue-morse, rmd or fibonacci"),
        "depth": (int, 14, "Thue-Morse depth"),
        "iters": (int, 20, "Fibonacci iterations"),
        "r": (int, 3, "n-RMD order"),
        "n_steps": (int, 1 << 16, "n-RMD length"),
        "bins": (int, spectra.DEFAULT_BINS_PER_DECADE, "envelope bins per decade"),
        "omega_max": (float, spectra.DEFAULT_OMEGA_MAX, "envelope upper frequency"),
        **_SEED,
    },
    "fer": {
        "drive": (str, "rmd", "rmd or thue-morse"),
        "r": (int, 3, "n-RMD order"),
        "depth": (int, 14, "Thue-Morse depth"),
        "n_steps": (int, 1 << 14, "n-RMD length"),
        "J": (float, 1.0, "static field"),
        "g": (float, 0.05, "drive amplitude"),
        "dt": (float, 0.05, "step length"),
        "q_max": (int, 2, "number of Fer iterations"),
        **_SEED,
    },
    "linres": {
        "class": (str, "stretch", "poly, quasipoly or stretch"),
        "b": (float, 1.0, "class exponent"),
        "J": (float, 1.0, "local energy scale"),
        "g": (float, 1.0, "drive amplitude"),
        "lambda_sweep": (str, "1e2:1e4:20", "lo:hi:n log-spaced drive rates"),
        **_SEED,
    },
    "flow": {
        "class": (str, "stretch", "poly, quasipoly or stretch"),
        "b": (float, 1.0, "class exponent"),
        "kappa0": (float, 1.0, "initial decay exponent"),
        "J": (float, 1.0, "local energy scale"),
        "c": (float, flow.STRETCH_C_DEFAULT, "stretch prefactor constant"),
        "lambda_sweep": (str, "1e5:1e9:20", "lo:hi:n log-spaced drive rates"),
        **_SEED,
    },
    "evolve": {
        "L": (int, 8, "chain length"),
        "zz": (float, 1.0, "nearest-neighbour ZZ coupling"),
        "hz": (float, 0.9, "longitudinal field"),
        "hx": (float, 0.8, "static transverse field"),
        "g": (float, 0.5, "drive amplitude"),
        "dt": (float, 0.05, "step length"),
        "drive": (str, "thue-morse", "thue-morse or rmd"),
        "r": (int, 1, "n-RMD order"),
        "n_steps": (int, 1 << 17, "number of steps (power of two for thue-morse)"),
        "record_every": (int, 20, "record stride"),
        "threshold": (float, checks.EVOLVE_THRESHOLD, "heating threshold fraction"),
        "periodic": (bool, False, "periodic boundary"),
        "initial": (str, "up", "up or down product state"),
        **_SEED,
    },
    "check": {**_SEED},
}
RECIPES = ("fig-fibonacci", "fig-thuemorse", "fig-fer-loss", "table1-lrt", "table1-np", "fig-mori-magnus")


# ---------------------------------------------------------------------------
# Config handling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    command: str
    parameters: dict
    seed: int
    output_dir: Path

    def lines(self) -> list[str]:
        return [f"{k} = {_render(v)}" for k, v in sorted(self.parameters.items())]

    def digest(self) -> str:
        body = "\n".join([f"command = {self.command}", *self.lines()])
        return hashlib.sha256(body.encode()).hexdigest()


def _render(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _convert(key: str, kind, raw):
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is int:
            value = int(float(text)) if any(ch in text for ch in "eE.") else int(text, 0)
            if not (-(1 << 63) <= value < (1 << 64)):
                raise ValueError(text)
            return value
        return kind(text)
    except ValueError as exc:
        raise ConfigError("cannot parse value", key=key, value=text, expected=kind.__name__) from exc


def parse_config_text(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_config(command: str, file_values: dict, cli_values: dict, output_dir: str | Path) -> RunConfig:
    schema = SCHEMAS[command]
    unknown = sorted(set(file_values) - set(schema))
    if unknown:
        raise ConfigError("unknown configuration keys", command=command, keys=",".join(unknown))
    params = {k: entry[1] for k, entry in schema.items()}
    for source in (file_values, cli_values):
        for key, raw in source.items():
            if raw is None:
                continue
            params[key] = _convert(key, schema[key][0], raw)
    seed = int(params["seed"])
    if not (0 <= seed < (1 << 64)):
        raise ConfigError("seed must be a non-negative 64-bit integer", seed=seed)
    return RunConfig(command, params, seed, Path(output_dir))


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def write_manifest(cfg: RunConfig, extra: dict | None = None) -> Path:
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    lines = [
        "tool = prethermal",
        f"version = {tool_version()}",
        f"command = {cfg.command}",
        f"config_hash = {cfg.digest()}",
        *cfg.lines(),
    ]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {_render(v)}")
    path = cfg.output_dir / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def parse_sweep(text: str) -> np.ndarray:
    """``lo:hi:n`` as ``n`` log-spaced values."""
    try:
        lo, hi, n = text.split(":")
        lo_f, hi_f, count = float(lo), float(hi), int(n)
    except ValueError as exc:
        raise ConfigError("sweep must look like lo:hi:n", value=text) from exc
    if not (0 < lo_f <= hi_f and count >= 1):
        raise ConfigError("sweep needs 0 < lo <= hi and n >= 1", value=text)
    return np.geomspace(lo_f, hi_f, count)


def worker_count() -> int:
    raw = os.environ.get("PRETHERMAL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError("PRETHERMAL_THREADS must be an integer", value=raw) from exc


def _pool_map(fn, items):
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))


def _csv(header: str, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(",".join(_render(v) if not isinstance(v, (bool, np.bool_)) else str(bool(v)).lower() for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _sequence(p: dict, dt: float = 1.0):
    drive = p["drive"]
    if drive == "thue-morse":
        return thue_morse_word(p["depth"], dt)
    if drive == "rmd":
        return random_rmd(p["r"], p["n_steps"], p["seed"], dt)
    if drive == "fibonacci":
        return fibonacci_word(p["iters"], dt)
    raise ConfigError("unknown drive", drive=drive)


def cmd_spectrum(cfg: RunConfig, out=None) -> int:
    p = cfg.parameters
    seq = _sequence(p)
    spec = spectra.dft(seq)
    env = spectra.binned_median_envelope(spec, omega_max=p["omega_max"], bins=p["bins"])
    fit = spectra.fit_power_law(env)
    d = cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    (d / "spectrum.csv").write_text(spectra.spectrum_to_csv(spec))
    (d / "envelope.csv").write_text(spectra.envelope_to_csv(env))
    (d / "envelope.dat").write_text(spectra.envelope_to_gnuplot(env))
    (d / "sequence.txt").write_text(sequence_to_text(seq))
    report = {"slope": fit.slope, "intercept": fit.intercept, "rms_residual": fit.rms_residual, "n_points": fit.n_points}
    for name in ("poly", "quasipoly", "stretch"):
        try:
            cf = spectra.fit_suppression_class(env, make_class(name, 2.0 if name == "quasipoly" else 1.0))
            report[f"{name}_b"] = cf.b_hat
            report[f"{name}_rms"] = cf.rms_residual
        except PrethermalError:
            pass
    (d / "fit.txt").write_text("".join(f"{k} = {_render(v)}\n" for k, v in report.items()))
    write_manifest(cfg, {"length": seq.values.size})
    print(f"slope = {_render(fit.slope)}", file=out)
    return EXIT_OK


def cmd_fer(cfg: RunConfig, out=None) -> int:
    p = cfg.parameters
    seq = _sequence(p, p["dt"])
    states = fer.fer_sequence(fer.step_hamiltonians(seq, p["J"], p["g"]), p["q_max"])
    d = cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    summary = []
    for s in states:
        rows = ((n, *s.V[n]) for n in range(s.n_steps))
        (d / f"fer_q{s.q}_series.csv").write_text(_csv("n,c0,cx,cy,cz", rows))
        comp = fer.plot_component(s.q)
        spec = fer.dressed_spectrum(s, comp)
        (d / f"fer_q{s.q}_spectrum.csv").write_text(spectra.spectrum_to_csv(spec))
        fit, _ = fer.dressed_slope(s, comp)
        summary.append((s.q, comp, fit.slope, s.max_V_norm(), *s.D.to_array()))
    (d / "fer_summary.csv").write_text(_csv("q,component,slope,max_V_norm,D_c0,D_cx,D_cy,D_cz", summary))
    write_manifest(cfg)
    for row in summary:
        print(f"q = {row[0]} component = {row[1]} slope = {_render(row[2])} max_V_norm = {_render(row[3])}", file=out)
    return EXIT_OK


def cmd_linres(cfg: RunConfig, out=None) -> int:
    p = cfg.parameters
    cls = make_class(p["class"], p["b"])
    lams = parse_sweep(p["lambda_sweep"])
    base = linres.HeatingParams(cls, p["J"], float(lams[0]), p["g"])
    rows = _pool_map(lambda lam: linres.sweep_rows(base, [lam])[0], lams)
    keys = ("lambda", "rate_quadrature", "rate_laplace", "omega0", "phi0", "ln_tau_star")
    d = cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    (d / "linres.csv").write_text(_csv(",".join(keys), ([r[k] for k in keys] for r in rows)))
    extra = {}
    if lams.size >= 5:
        fit = linres.lrt_scaling_exponent(cls, lams, p["J"], p["g"])
        extra = {"exponent": fit.exponent, "model": fit.model}
        print(f"exponent = {_render(fit.exponent)} model = {fit.model}", file=out)
    write_manifest(cfg, extra)
    return EXIT_OK


def cmd_flow(cfg: RunConfig, out=None) -> int:
    p = cfg.parameters
    cls = make_class(p["class"], p["b"])
    lams = parse_sweep(p["lambda_sweep"])
    kw = {"c": p["c"]} if cls.name == "stretch" else {}
    rows = _pool_map(lambda lam: flow.sweep(cls, p["kappa0"], p["J"], [lam], **kw)[0], lams)
    d = cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    (d / "flow.csv").write_text(_csv("lambda,q_star,ln_tau_star,valid", rows))
    write_manifest(cfg)
    valid = sum(1 for r in rows if r[3])
    print(f"rows = {len(rows)} valid = {valid}", file=out)
    return EXIT_OK


def cmd_evolve(cfg: RunConfig, out=None) -> int:
    p = cfg.parameters
    if p["initial"] not in ("up", "down"):
        raise ConfigError("initial must be 'up' or 'down'", initial=p["initial"])
    spec = evolve.ChainSpec(
        L=p["L"], D_terms=(("zz", p["zz"]), ("z", p["hz"]), ("x", p["hx"])), g=p["g"], periodic=p["periodic"]
    )
    if p["drive"] == "thue-morse":
        depth = int(round(math.log2(p["n_steps"])))
        if 1 << depth != p["n_steps"]:
            raise ConfigError("thue-morse drives need a power-of-two n_steps", n_steps=p["n_steps"])
        seq = thue_morse_word(depth, p["dt"])
    elif p["drive"] == "rmd":
        seq = random_rmd(p["r"], p["n_steps"], p["seed"], p["dt"])
    else:
        raise ConfigError("unknown drive", drive=p["drive"])
    traj = evolve.run_fixture(seq, spec, record_every=p["record_every"], up=p["initial"] == "up")
    tau = evolve.heating_time(traj, p["threshold"])
    d = cfg.output_dir
    d.mkdir(parents=True, exist_ok=True)
    (d / "evolve.csv").write_text(traj.to_csv())
    write_manifest(cfg, {"heating_time": tau, "e_infty": traj.e_infty, "norm_drift": traj.norm_drift})
    print(f"heating_time = {_render(tau)} norm_drift = {_render(traj.norm_drift)}", file=out)
    return EXIT_OK


def cmd_check(cfg: RunConfig, out=None) -> int:
    results = checks.quick_suite()
    for r in results:
        print(r.line(), file=out)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(cfg, {"passed": sum(r.passed for r in results), "total": len(results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_CRITERION


# ---------------------------------------------------------------------------
# Recipes
# ---------------------------------------------------------------------------


def _recipe_result(d: Path, name: str, ok: bool, measured: dict, out, t0: float) -> int:
    res = checks.CheckResult(name, ok, measured, time.perf_counter() - t0)
    (d / "result.txt").write_text(res.line() + "\n")
    print(res.line(), file=out)
    return EXIT_OK if ok else EXIT_CRITERION


def run_recipe(name: str, output_dir: Path, out=None) -> int:
    if name not in RECIPES:
        raise ConfigError("unknown recipe", name=name, known=",".join(RECIPES))
    t0 = time.perf_counter()
    d = Path(output_dir)
    d.mkdir(parents=True, exist_ok=True)
    cfg = RunConfig(f"recipe:{name}", {}, 0, d)
    write_manifest(cfg)
    if name == "fig-fibonacci":
        spec = spectra.dft(fibonacci_word(20))
        env = spectra.binned_median_envelope(spec)
        (d / "envelope.csv").write_text(spectra.envelope_to_csv(env))
        slope = spectra.fit_power_law(env).slope
        return _recipe_result(d, "criterion-3 fibonacci slope", abs(slope - 1.0) <= 0.15, {"slope": slope}, out, t0)
    if name == "fig-thuemorse":
        env = spectra.binned_median_envelope(spectra.dft(thue_morse_word(14)))
        (d / "envelope.csv").write_text(spectra.envelope_to_csv(env))
        rows = []
        for r in (1, 2, 3, 4):
            e = spectra.binned_median_envelope(spectra.dft(random_rmd(r, 1 << 16, 0)))
            (d / f"rmd{r}_envelope.csv").write_text(spectra.envelope_to_csv(e))
            rows.append(spectra.fit_power_law(e).slope)
        poly, qp = checks.measure_thue_morse_classes(14)
        return _recipe_result(
            d, "criterion-5 thue-morse class", qp < poly, {"poly_rms": poly, "quasipoly_rms": qp, "rmd_slopes": rows}, out
        )
    if name == "fig-fer-loss":
        slopes, norms, states = checks.measure_fer_loss()
        (d / "fer_loss.csv").write_text(_csv("q,slope,max_V_norm", ((s.q, sl, nm) for s, sl, nm in zip(states, slopes, norms))))
        ok = all(abs(s - t) <= 0.4 for s, t in zip(slopes, (3, 2, 1))) and all(b <= 0.5 * a for a, b in zip(norms, norms[1:]))
        return _recipe_result(d, "criterion-9 fer suppression loss", ok, {"slopes": slopes, "norms": norms}, out, t0)
    if name == "table1-lrt":
        m = checks.measure_lrt_exponents()
        (d / "table1_lrt.csv").write_text(_csv("class,exponent", m.items()))
        ok = abs(m["poly2"] - 5) <= 0.1 and abs(m["quasipoly2"] - 2) <= 0.1 and abs(m["stretch1"] - 0.5) <= 0.03
        return _recipe_result(d, "criterion-7 lrt exponents", ok, m, out, t0)
    if name == "table1-np":
        m = checks.measure_np_scaling()
        (d / "table1_np.csv").write_text(_csv("quantity,value", m.items()))
        ok = abs(m["poly3"] - 2) <= 0.1 and abs(m["stretch1"] - 0.5) <= 0.03 and m["quasipoly_margin"] >= 0
        return _recipe_result(d, "criterion-8 np scaling", ok, m, out, t0)
    # fig-mori-magnus
    D = fer.Su2Operator(0, 0, 0, 1.0)
    Va = fer.Su2Operator(0, 0.5, 0, 0)
    table = fer.mori_magnus_terms(D, Va, 4, 2, checks.MM_DT_FIT)
    rows = [(r, m, *h.to_array()) for r, hs in table.h.items() for m, h in hs.items()]
    (d / "mori_magnus.csv").write_text(_csv("r,m,c0,cx,cy,cz", rows))
    err = checks.measure_mori_magnus()
    return _recipe_result(d, "criterion-11 mori-magnus", err < 1e-5, {"max_relative_error": err}, out, t0)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prethermal", description="Aperiodic-drive prethermalization toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {tool_version()}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--output-dir", default=f"prethermal-out/{name}")
        for key, (kind, _default, help_text) in schema.items():
            flag = "--" + key.replace("_", "-")
            dest = key
            if key == "class":
                dest = "class_"
            sp.add_argument(flag, dest=dest, default=None, help=help_text)
    rp = sub.add_parser("recipe")
    rp.add_argument("name", choices=RECIPES)
    rp.add_argument("--output-dir", default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "recipe":
            return run_recipe(args.name, Path(args.output_dir or f"prethermal-out/{args.name}"))
        file_values = {}
        if args.config:
            try:
                file_values = parse_config_text(Path(args.config).read_text())
            except OSError as exc:
                raise ConfigError("cannot read config file", path=args.config) from exc
        cli_values = {k: getattr(args, "class_" if k == "class" else k) for k in SCHEMAS[args.command]}
        cfg = resolve_config(args.command, file_values, cli_values, args.output_dir)
        handler = {
            "spectrum": cmd_spectrum,
            "fer": cmd_fer,
            "linres": cmd_linres,
            "flow": cmd_flow,
            "evolve": cmd_evolve,
            "check": cmd_check,
        }[args.command]
        return handler(cfg)
    except PrethermalError as exc:
        print(exc.machine_line(), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
