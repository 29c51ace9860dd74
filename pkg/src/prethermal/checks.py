"""Named numerical checks shared by the command-line runner and recipes.

Each check returns a :class:`CheckResult` holding the measured quantities,
a pass flag and the wall time.  The checks are deterministic: every random
draw uses a pinned seed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import evolve, fer, flow, linres, spectra
from .arithmetic import (
    DyadicLabel,
    FactorialLabel,
    Penalty,
    Poly,
    Quasipoly,
    StretchExpt,
    check_subadditivity,
    default_oracle_grid,
    dyadic_depth,
    factorial_depth,
    intvec_pairs_random,
    small_divisor_h,
    small_divisor_sup_oracle,
    ultra_subadditivity_violations,
    Counterexample,
)
from .drives import fibonacci_word, random_rmd, thue_morse_word

FIXTURE_SEED = 2
EVOLVE_THRESHOLD = 0.1
MM_DT_FIT = tuple(np.geomspace(1e-3, 1e-2, 12))


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        items = " ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"{status} {self.name} ({self.seconds:.2f} s) {items}".rstrip()


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def _timed(name: str, fn: Callable[[], tuple[bool, dict]]) -> CheckResult:
    t0 = time.perf_counter()
    ok, measured = fn()
    return CheckResult(name, bool(ok), measured, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# Spectral checks
# ---------------------------------------------------------------------------


def measure_riesz_identity(depths=range(2, 13)) -> float:
    """Largest ``|N dft - riesz_product|`` over all grid frequencies and depths."""
    worst = 0.0
    for r in depths:
        seq = thue_morse_word(r)
        spec = spectra.dft(seq, subtract_mean=False)
        n = seq.values.size
        err = np.abs(n * spec.values - spectra.riesz_product(r, spec.omega)).max()
        worst = max(worst, float(err))
    return worst


def measure_riesz_bound(samples: int = 10_000, max_r: int = 12, seed: int = 0) -> tuple[int, float]:
    """Violations of ``|f_r| <= 2**(r(r-1)/2) |Omega|**r`` and the largest ratio."""
    rng = np.random.default_rng(seed)
    r = rng.integers(1, max_r + 1, size=samples)
    om = rng.uniform(-math.pi, math.pi, size=samples)
    lhs = np.empty(samples)
    rhs = np.empty(samples)
    for rr in np.unique(r):
        sel = r == rr
        lhs[sel] = np.abs(spectra.riesz_product(int(rr), om[sel]))
        rhs[sel] = spectra.riesz_bound(int(rr), om[sel])
    ratio = lhs / rhs
    return int(np.count_nonzero(lhs > rhs * (1 + 1e-12))), float(ratio.max())


def measure_fibonacci_slope(iterations: int = 20) -> float:
    env = spectra.binned_median_envelope(spectra.dft(fibonacci_word(iterations)))
    return spectra.fit_power_law(env).slope


def measure_rmd_slopes(rs=(1, 2, 3, 4), n_steps: int = 1 << 16, seed: int = 0) -> list[float]:
    out = []
    for r in rs:
        env = spectra.binned_median_envelope(spectra.dft(random_rmd(r, n_steps, seed)))
        out.append(spectra.fit_power_law(env).slope)
    return out


def measure_thue_morse_classes(depth: int = 14) -> tuple[float, float]:
    """``(poly_rms, quasipoly_rms)`` for the depth-``depth`` Thue-Morse envelope."""
    env = spectra.binned_median_envelope(spectra.dft(thue_morse_word(depth)))
    poly = spectra.fit_suppression_class(env, Poly(1.0))
    qp = spectra.fit_suppression_class(env, Quasipoly(2.0))
    return poly.rms_residual, qp.rms_residual


# ---------------------------------------------------------------------------
# Linear response and plans
# ---------------------------------------------------------------------------


def measure_laplace_ratios() -> dict:
    st = StretchExpt(1.0)
    ratios = {
        f"stretch@{lam:g}": linres.laplace_quadrature_ratio(linres.HeatingParams(st, 1.0, lam, 1.0))
        for lam in (1e2, 1e3, 1e4)
    }
    ratios["quasipoly@e10"] = linres.laplace_quadrature_ratio(linres.HeatingParams(Quasipoly(2.0), 1.0, math.exp(10.0), 1.0))
    return ratios


def measure_lrt_exponents() -> dict:
    return {
        "poly2": linres.lrt_scaling_exponent(Poly(2.0), np.geomspace(10.0, 1e3, 9)).exponent,
        "quasipoly2": linres.lrt_scaling_exponent(Quasipoly(2.0), np.exp(np.linspace(8.0, 60.0, 27))).exponent,
        "stretch1": linres.lrt_scaling_exponent(StretchExpt(1.0), np.geomspace(1e3, 1e6, 16)).exponent,
    }


def measure_np_scaling() -> dict:
    poly = flow.np_scaling_exponent(Poly(3), np.geomspace(1e6, 1e12, 13)).exponent
    stretch = flow.np_scaling_exponent(StretchExpt(1.0), np.geomspace(1e6, 1e12, 25)).exponent
    L = np.linspace(26.0, 200.0, 30)
    rows = flow.sweep(Quasipoly(2.0), 1.0, 1.0, np.exp(L))
    margin = min(r[2] - (math.log(r[0])) ** 2 / 128.0 for r in rows) if all(r[3] for r in rows) else -math.inf
    return {"poly3": poly, "stretch1": stretch, "quasipoly_margin": margin}


# ---------------------------------------------------------------------------
# Fer and Mori-Magnus
# ---------------------------------------------------------------------------


def measure_fer_loss(r: int = 3, J: float = 1.0, g: float = 0.05, dt: float = 0.05, n_steps: int = 1 << 14, seed: int = 0, q_max: int = 2):
    """Per-order dressed-spectrum slopes and max step norms."""
    states = fer.fer_sequence(fer.step_hamiltonians(random_rmd(r, n_steps, seed, dt), J, g), q_max)
    slopes = [fer.dressed_slope(s)[0].slope for s in states]
    norms = [s.max_V_norm() for s in states]
    return slopes, norms, states


FRAME_CONFIGS = (
    ("rmd", 3, 1.0, 0.05, 0.05, 1 << 12, 0),
    ("rmd", 2, 1.0, 0.3, 0.1, 1 << 10, 1),
    ("rmd", 4, 0.7, 0.5, 0.2, 1 << 10, 2),
    ("thue-morse", 10, 1.0, 0.1, 0.05, 0, 0),
    ("fibonacci", 14, 1.0, 0.2, 0.1, 0, 0),
)


def measure_frame_change(configs=FRAME_CONFIGS, q_max: int = 3) -> float:
    worst = 0.0
    for kind, r, J, g, dt, n, seed in configs:
        if kind == "rmd":
            seq = random_rmd(r, n, seed, dt)
        elif kind == "thue-morse":
            seq = thue_morse_word(r, dt)
        else:
            seq = fibonacci_word(r, dt)
        state = fer.step_hamiltonians(seq, J, g)
        for _ in range(q_max):
            nxt = fer.fer_iterate(state)
            worst = max(worst, fer.frame_change_residual(state, nxt))
            state = nxt
    return worst


MM_CONFIGS = (
    (fer.Su2Operator(0, 0, 0, 1.0), fer.Su2Operator(0, 0.5, 0, 0)),
    (fer.Su2Operator(0.2, 0.3, 0, 0.8), fer.Su2Operator(0, 0.1, 0.4, 0)),
)


def measure_mori_magnus(r_max: int = 4, m_max: int = 2, configs=MM_CONFIGS, dt_fit=MM_DT_FIT) -> float:
    """Worst relative coefficient error of the recursion against direct extraction."""
    worst = 0.0
    for D, Va in configs:
        scale = D.norm() + Va.norm()
        table = fer.mori_magnus_terms(D, Va, r_max, m_max, dt_fit)
        for r in range(1, r_max + 1):
            plus, minus = fer.mori_magnus_direct(D, Va, r, min(m_max, r - 1), dt_fit)
            for m, value in table.h[r].items():
                for direct in (plus[m], minus[m]):
                    worst = max(worst, fer.coefficient_relative_error(value, direct, scale ** (m + 1)))
    return worst


# ---------------------------------------------------------------------------
# Arithmetic
# ---------------------------------------------------------------------------


def measure_subadditivity(random_pairs: int = 100_000, seed: int = 0) -> dict:
    exhaustive = ultra_subadditivity_violations("dyadic", 10) + ultra_subadditivity_violations("factorial", 7)
    rng = np.random.default_rng(seed)
    bad = 0
    d = rng.integers(0, 31, size=(random_pairs, 2))
    k = rng.integers(-(1 << 20), (1 << 20) + 1, size=(random_pairs, 2))
    for (d1, d2), (k1, k2) in zip(d.tolist(), k.tolist()):
        a, b = DyadicLabel(k1, d1), DyadicLabel(k2, d2)
        if dyadic_depth((a + b).value()) > max(dyadic_depth(a.value()), dyadic_depth(b.value())):
            bad += 1
    f = rng.integers(1, 13, size=(random_pairs, 2))
    n = rng.integers(-(1 << 20), (1 << 20) + 1, size=(random_pairs, 2))
    for (f1, f2), (n1, n2) in zip(f.tolist(), n.tolist()):
        a, b = FactorialLabel(n1, f1), FactorialLabel(n2, f2)
        if factorial_depth((a + b).value()) > max(factorial_depth(a.value()), factorial_depth(b.value())):
            bad += 1
    result = check_subadditivity(Penalty("QF_NormAlpha", 2.0), intvec_pairs_random(seed), 10)
    found = isinstance(result, Counterexample)
    return {"exhaustive_violations": exhaustive, "random_violations": bad, "qf_alpha2_counterexample_trial": result.trial if found else -1}


def poly_divergence_detected(b: float, delta_kappa: float) -> bool:
    """Closed form is infinite and the oracle grows as the grid extends toward zero."""
    cls = Poly(b)
    coarse = small_divisor_sup_oracle(cls, delta_kappa, default_oracle_grid(1e-6, 1e3, 500))
    fine = small_divisor_sup_oracle(cls, delta_kappa, default_oracle_grid(1e-12, 1e3, 500))
    return math.isinf(small_divisor_h(cls, delta_kappa)) and fine > 1.5 * coarse


def measure_small_divisors() -> dict:
    grid = default_oracle_grid()
    dk = np.linspace(0.05, 1.0, 20)
    worst = 0.0
    for cls in (Quasipoly(2.0), Quasipoly(3.0), StretchExpt(1.0), StretchExpt(2.0)):
        for d in dk:
            h = small_divisor_h(cls, float(d))
            o = small_divisor_sup_oracle(cls, float(d), grid)
            worst = max(worst, abs(h - o) / o)
    detected = all(poly_divergence_detected(b, frac * (1.0 / b)) for b in (2.0, 3.0) for frac in (0.5, 0.9))
    no_false_alarm = not any(poly_divergence_detected(b, frac / b) for b in (2.0, 3.0) for frac in (1.0, 1.5))
    detected = detected and no_false_alarm
    return {"worst_relative": worst, "poly_divergence_detected": detected}


# ---------------------------------------------------------------------------
# Chain evolution
# ---------------------------------------------------------------------------


def measure_evolve(L: int = 8, dt: float = 0.05, n_steps: int = 1 << 17, seed: int = FIXTURE_SEED, threshold: float = EVOLVE_THRESHOLD) -> dict:
    static = evolve.ChainSpec(L=L, g=0.0)
    D0, V0 = evolve.build_chain(static)
    traj0 = evolve.evolve_step_drive(D0, V0, random_rmd(1, 100_000, seed, dt), dt, evolve.product_state(L), record_every=100)
    drift_energy = float(np.abs(traj0.energy_density - traj0.energy_density[0]).max())
    spec = evolve.ChainSpec(L=L, g=0.5)
    tm = evolve.run_fixture(thue_morse_word(int(math.log2(n_steps)), dt), spec)
    rmd = evolve.run_fixture(random_rmd(1, n_steps, seed, dt), spec)
    return {
        "g0_density_drift": drift_energy,
        "norm_drift": float(max(tm.norm_drift, rmd.norm_drift)),
        "tau_tm": evolve.heating_time(tm, threshold),
        "tau_rmd1": evolve.heating_time(rmd, threshold),
    }


# ---------------------------------------------------------------------------
# Aggregates used by the runner
# ---------------------------------------------------------------------------


def quick_suite() -> list[CheckResult]:
    """Fast invariant checks run by the ``check`` command."""
    out = []
    out.append(_timed("riesz-identity", lambda: (lambda e: (e < 1e-10, {"max_abs_error": e}))(measure_riesz_identity())))
    out.append(_timed("riesz-bound", lambda: (lambda v: (v[0] == 0, {"violations": v[0], "max_ratio": v[1]}))(measure_riesz_bound())))

    def sub():
        m = measure_subadditivity(random_pairs=20_000)
        ok = m["exhaustive_violations"] == 0 and m["random_violations"] == 0 and 1 <= m["qf_alpha2_counterexample_trial"] <= 10
        return ok, m

    out.append(_timed("subadditivity", sub))

    def sd():
        m = measure_small_divisors()
        return m["worst_relative"] < 0.05 and m["poly_divergence_detected"], m

    out.append(_timed("small-divisors", sd))
    out.append(_timed("fer-frame-change", lambda: (lambda e: (e < 1e-9, {"max_residual": e}))(measure_frame_change())))
    out.append(_timed("mori-magnus", lambda: (lambda e: (e < 1e-5, {"max_relative_error": e}))(measure_mori_magnus())))

    def plans():
        ok = True
        for lam in (1e5, 1e7, 1e9):
            p = flow.plan_stretch(1.0, 1.0, 1.0, lam)
            ok &= bool(p.valid and np.all(np.diff(p.kappa_seq) < 0) and p.r_bounds.max() <= 0.5)
        for L in (30.0, 60.0):
            p = flow.plan_quasipoly(2.0, 1.0, 1.0, math.exp(L))
            ok &= bool(p.valid and np.all(np.diff(p.kappa_seq) < 0) and p.r_bounds.max() <= 0.5)
        p = flow.plan_poly(3, 1.0, 1.0, 1e6)
        ok &= bool(p.valid and p.r_bounds.max() <= 0.5)
        return ok, {}

    out.append(_timed("plan-invariants", plans))

    def lap():
        m = measure_laplace_ratios()
        ok = 0.8 <= m["stretch@1000"] <= 1.25 and 0.8 <= m["quasipoly@e10"] <= 1.25
        ok &= abs(m["stretch@10000"] - 1) < abs(m["stretch@100"] - 1)
        return ok, m

    out.append(_timed("laplace-vs-quadrature", lap))
    return out
