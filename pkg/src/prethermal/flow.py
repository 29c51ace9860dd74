"""Renormalization plans for the decay sequence and non-perturbative heating bounds.

A plan is a decreasing ladder ``kappa_0 > kappa_1 > ... > kappa_{q*}`` of
locality-weight exponents together with a bound ``r_q`` on the ratio of the
dressed drive norms across each step.  The heating time is bounded by the
product of those ratios, so every evaluator works with
``ln tau* = -sum_q ln r_q`` to avoid overflow.

Three families are covered:

* polynomial suppression, a fixed ``b - 1`` step ladder with ``r`` of order ``J / lambda``;
* stretched-exponential suppression, a ladder following the solution of the
  saturated step equation;
* quasipolynomial suppression, a uniformly spaced ladder whose length grows
  like ``(ln lambda)**(b - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.special import lambertw

from .arithmetic import Poly, Quasipoly, StretchExpt, SuppressionClass
from .errors import FitError, InvalidPlanError, ParameterError, SolverError
from .linres import ScalingFit

STRETCH_C_DEFAULT = 144.0
QUASIPOLY_C_FLOOR = 288.0


@dataclass(frozen=True)
class KappaPlan:
    """A decay-sequence plan and its per-step ratio bounds.

    Attributes
    ----------
    cls : SuppressionClass
    kappa_seq : ndarray
        ``kappa_0 .. kappa_{q*}``, strictly decreasing.
    kappa_prime_seq : ndarray
        Intermediate exponents ``kappa'_q`` for ``q < q*``.
    q_star : int
    lambda_min : float
        Smallest drive rate for which every ``r_q <= 1/2``.
    constants : dict
        Named constants of the construction.
    r_bounds : ndarray
        Per-step ratio bounds ``r_0 .. r_{q*-1}``.
    valid : bool
    thresholds : dict
        Individual validity thresholds on ``lambda``.
    """

    cls: SuppressionClass
    kappa_seq: np.ndarray
    kappa_prime_seq: np.ndarray
    q_star: int
    lambda_min: float
    constants: dict
    r_bounds: np.ndarray
    valid: bool
    J: float
    lam: float
    thresholds: dict = field(default_factory=dict)

    @property
    def family(self) -> str:
        return self.cls.name


def _check_common(kappa0: float, J: float, lam: float) -> None:
    for name, v in (("kappa0", kappa0), ("J", J), ("lambda", lam)):
        if not (math.isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be positive and finite", **{name: v})


# ---------------------------------------------------------------------------
# Polynomial class
# ---------------------------------------------------------------------------


def _poly_ratio(b: int, J: float, lam: float) -> float:
    eps = 1.0 / (2.0 * b * b)
    return 288.0 * b * J / (eps * lam)


def plan_poly(b: int, kappa0: float, J: float, lam: float) -> KappaPlan:
    """Fixed ladder of ``b - 1`` steps for polynomial suppression.

    Each step drops ``kappa`` by ``1/b`` (small-divisor loss) and then by
    ``eps = 1/(2 b**2)`` (frame-change loss).  The ratio bound is the same at
    every step, ``r = 576 b**3 J / lambda``, so the plan is valid from
    ``lambda = 1152 b**3 J``.
    """
    if int(b) != b or b < 2:
        raise ParameterError("poly plans need an integer b >= 2", b=b)
    b = int(b)
    _check_common(kappa0, J, lam)
    eps = 1.0 / (2.0 * b * b)
    q_star = b - 1
    q = np.arange(q_star + 1)
    kappa = kappa0 - q * (1.0 / b + eps)
    kappa_prime = kappa[:-1] - 1.0 / b
    r = np.full(q_star, _poly_ratio(b, J, lam))
    lam_min = 1152.0 * b**3 * J
    floor_ok = bool(kappa[-1] >= 1.0 / (2 * b) - 1e-12)
    return KappaPlan(
        Poly(b), kappa, kappa_prime, q_star, lam_min,
        {"epsilon": eps, "c": 288.0}, r,
        bool(lam >= lam_min * (1 - 1e-12) and floor_ok), J, lam,
        {"lambda_min": lam_min, "kappa_floor_ok": floor_ok},
    )


# ---------------------------------------------------------------------------
# Stretched-exponential class
# ---------------------------------------------------------------------------


def stretch_constants(b: float, kappa0: float, J: float, c: float = STRETCH_C_DEFAULT) -> dict:
    mu = (2.0 * b + 1.0) / (b + 1.0)
    c2 = 2.0 ** (1.0 / mu + 1.0) * c
    k1 = kappa0 / 2.0
    lam1 = 2.0 ** (3.0 + 1.0 / b) * c * J / kappa0 ** (2.0 + 1.0 / b)
    lam2 = (2.0**mu * mu / k1) ** ((b + 1.0) / b) * c2 * J / k1
    return {"mu": mu, "c": c, "c_double_prime": c2, "kappa1": k1, "lambda_1": lam1, "lambda_2": lam2}


def stretch_q_star(b: float, kappa0: float, J: float, lam: float, c: float = STRETCH_C_DEFAULT) -> int:
    """Length of the stretched-exponential ladder.

    ``q* = floor((kappa_1**mu - (kappa0/4)**mu) (lambda / (c'' J))**(b/(b+1)) / mu + 1)``.
    """
    k = stretch_constants(b, kappa0, J, c)
    mu = k["mu"]
    s = (k["c_double_prime"] * J / lam) ** (b / (b + 1.0))
    return int(math.floor((k["kappa1"] ** mu - (kappa0 / 4.0) ** mu) / (mu * s) + 1.0))


def _stretch_ratios(kappa: np.ndarray, b: float, c: float, J: float, lam: float) -> np.ndarray:
    d = kappa[:-1] - kappa[1:]
    return c * J / (lam * kappa[1:] * d ** ((b + 1.0) / b))


def plan_stretch(b: float, kappa0: float, J: float, lam: float, c: float = STRETCH_C_DEFAULT, max_steps: int = 10_000_000) -> KappaPlan:
    """Ladder for stretched-exponential suppression.

    ``kappa_1 = kappa0 / 2``.  Later steps follow the curve
    ``kappa_q**mu = kappa_1**mu - mu (c'' J / lambda)**(b/(b+1)) (q - 1)`` with
    ``mu = (2b+1)/(b+1)``.  This curve solves
    ``-d kappa/dq = (c'' J / (lambda kappa))**(b/(b+1))`` exactly.  The ladder
    stops at the last ``q`` with ``kappa_q >= kappa0 / 4``.
    """
    if not (math.isfinite(b) and b > 0):
        raise ParameterError("stretch plans need b > 0", b=b)
    _check_common(kappa0, J, lam)
    if not (c > 0):
        raise ParameterError("c must be positive", c=c)
    k = stretch_constants(b, kappa0, J, c)
    mu = k["mu"]
    s = (k["c_double_prime"] * J / lam) ** (b / (b + 1.0))
    q_star = stretch_q_star(b, kappa0, J, lam, c)
    if q_star > max_steps:
        raise ParameterError("ladder too long; raise max_steps", q_star=q_star, max_steps=max_steps)
    q = np.arange(1, q_star + 1)
    base = np.maximum(k["kappa1"] ** mu - mu * s * (q - 1), 0.0)
    kappa = np.concatenate([[kappa0], base ** (1.0 / mu)])
    kappa_prime = 0.5 * (kappa[:-1] + kappa[1:])
    r = _stretch_ratios(kappa, b, c, J, lam)
    lam_min = max(k["lambda_1"], k["lambda_2"])
    valid = bool(lam >= lam_min * (1 - 1e-12) and q_star >= 1)
    k["s"] = s
    return KappaPlan(
        StretchExpt(b), kappa, kappa_prime, q_star, lam_min, k, r, valid, J, lam,
        {"lambda_1": k["lambda_1"], "lambda_2": k["lambda_2"]},
    )


# ---------------------------------------------------------------------------
# Quasipolynomial class
# ---------------------------------------------------------------------------


def quasipoly_constants(b: float, kappa0: float, J: float = 1.0, c_b: float | None = None) -> dict:
    """Constants of the explicit quasipolynomial construction.

    At ``b = 2`` and ``kappa0 = 1``: ``c_b = 1/4``, ``K' = 1/8`` and ``K'' = 1/128``.
    """
    if c_b is None:
        c_b = Quasipoly(b).c_b
    c = max(6.0 * kappa0, QUASIPOLY_C_FLOOR)
    A = 2.0 ** (1.0 / (b - 1.0)) * c_b
    delta = kappa0 / 4.0
    Kp = delta / (4.0 * A) ** (b - 1.0)
    C_log = (b - 1.0) * (math.log(4.0 * (b - 1.0)) - 1.0)
    B = math.log(32.0 * c * Kp / kappa0**2) + C_log + math.log(2.0)
    K_base = 8.0 * c / kappa0**2 * math.exp(2.0 ** (2.0 / (b - 1.0)) * c_b / kappa0 ** (1.0 / (b - 1.0)))
    X0 = max(2.0, (2.0 / Kp) ** (1.0 / (b - 1.0)))
    ln_K = max(math.log(K_base), B + X0, 2.0 * B)
    return {
        "c": c, "c_b": c_b, "A": A, "Delta": delta, "K_prime": Kp, "C_log": C_log,
        "B": B, "K_base": K_base, "X0": X0, "ln_K": ln_K, "K": math.exp(ln_K),
        "K_double_prime": Kp / 2.0 ** (b + 2.0),
    }


def quasipoly_step_ratio(kappa_q, kappa_next, b: float, J: float, lam: float, constants: dict):
    """``r_q <= 2 c J exp(A / delta**(1/(b-1))) / (lambda kappa_{q+1} delta)``."""
    kq = np.asarray(kappa_q, dtype=float)
    kn = np.asarray(kappa_next, dtype=float)
    d = kq - kn
    ln_r = (
        math.log(2.0 * constants["c"] * J / lam)
        - np.log(kn * d)
        + constants["A"] / d ** (1.0 / (b - 1.0))
    )
    return np.exp(ln_r)


def plan_quasipoly(b: float, kappa0: float, J: float, lam: float, max_steps: int = 10_000_000) -> KappaPlan:
    """Uniformly spaced ladder for quasipolynomial suppression.

    ``kappa_1 = kappa0/2`` and ``n = floor(K' x**(b-1))`` equal steps bring
    ``kappa`` down to ``kappa0/4``, where ``x = ln(lambda/J) - B``.
    """
    if not (math.isfinite(b) and b > 1):
        raise ParameterError("quasipoly plans need b > 1", b=b)
    _check_common(kappa0, J, lam)
    k = quasipoly_constants(b, kappa0, J)
    L = math.log(lam / J)
    x = L - k["B"]
    k["L"], k["x"] = L, x
    # r_0 = K_base J / lambda, so r_0 <= 1/2 needs twice the base threshold.
    ln_lam_min = max(k["ln_K"], math.log(2.0 * k["K_base"]))
    lam_min = J * math.exp(ln_lam_min)
    thresholds = {"K_base": k["K_base"], "exp_B_plus_X0": math.exp(k["B"] + k["X0"]), "exp_2B": math.exp(2 * k["B"])}
    n = int(math.floor(k["K_prime"] * x ** (b - 1.0))) if x > 0 else 0
    if n > max_steps:
        raise ParameterError("ladder too long; raise max_steps", n=n, max_steps=max_steps)
    kappa_star = kappa0 / 4.0
    if n >= 1:
        q = np.arange(1, n + 2)
        tail = kappa_star + k["Delta"] * (1.0 - (q - 1.0) / n)
    else:
        tail = np.array([kappa0 / 2.0])
    kappa = np.concatenate([[kappa0], tail])
    kappa_prime = 0.5 * (kappa[:-1] + kappa[1:])
    r = quasipoly_step_ratio(kappa[:-1], kappa[1:], b, J, lam, k)
    valid = bool(n >= 1 and math.log(lam / J) >= ln_lam_min - 1e-12)
    return KappaPlan(Quasipoly(b), kappa, kappa_prime, n + 1 if n >= 1 else 1, lam_min, k, r, valid, J, lam, thresholds)


# ---------------------------------------------------------------------------
# Bounds and evaluators
# ---------------------------------------------------------------------------


def adhh_bound(kappa: float, kappa_prime: float, norm_A: float, norm_O: float) -> tuple[float, bool]:
    """Cluster-expansion estimate ``18 |A| |O| / (kappa' (kappa - kappa'))``.

    Returns the bound and whether ``3 |A| <= kappa - kappa'`` holds.
    """
    if not (0 < kappa_prime < kappa):
        raise ParameterError("need 0 < kappa' < kappa", kappa=kappa, kappa_prime=kappa_prime)
    if norm_A < 0 or norm_O < 0:
        raise ParameterError("norms must be non-negative")
    gap = kappa - kappa_prime
    bound = 18.0 * norm_A * norm_O / (kappa_prime * gap)
    return bound, bool(3.0 * norm_A <= gap * (1 + 1e-12))


def step_ratio_bound(plan: KappaPlan, q: int, J: float | None = None, lam: float | None = None) -> float:
    """Bound on ``|V^(q+1)| / |V^(q)|`` for step ``q`` of a plan at the given ``J``, ``lambda``."""
    if not (0 <= q < plan.q_star):
        raise ParameterError("step index out of range", q=q, q_star=plan.q_star)
    J = plan.J if J is None else J
    lam = plan.lam if lam is None else lam
    kq, kn = plan.kappa_seq[q], plan.kappa_seq[q + 1]
    fam = plan.family
    if fam == "poly":
        return _poly_ratio(int(plan.cls.b), J, lam)
    if fam == "stretch":
        return float(_stretch_ratios(np.array([kq, kn]), plan.cls.b, plan.constants["c"], J, lam)[0])
    return float(quasipoly_step_ratio(kq, kn, plan.cls.b, J, lam, plan.constants))


def tau_star_np(plan: KappaPlan) -> float:
    """``ln tau* = -sum_q ln r_q`` for a valid plan.

    Raises
    ------
    InvalidPlanError
        If ``lambda`` is below the plan's validity threshold.
    """
    if not plan.valid:
        raise InvalidPlanError(
            "plan is not valid at this lambda",
            lam=plan.lam, lambda_min=plan.lambda_min, **{k: float(v) for k, v in plan.thresholds.items()},
        )
    return float(-np.sum(np.log(plan.r_bounds)))


def quasipoly_log_reduction(deltas, b: float, kappa0: float, J: float, lam: float, kappa_floor: float | None = None) -> float:
    """``-sum ln r_q`` over the post-initial steps with spacings ``deltas``.

    The denominator uses ``kappa_floor`` (default ``kappa0/4``) for every
    step.  The sum is then concave in the spacings, so equal spacing is
    optimal at fixed total drop.
    """
    k = quasipoly_constants(b, kappa0, J)
    d = np.asarray(deltas, dtype=float)
    if np.any(d <= 0):
        raise ParameterError("spacings must be positive")
    kf = kappa0 / 4.0 if kappa_floor is None else kappa_floor
    ln_r = math.log(2.0 * k["c"] * J / lam) - np.log(kf * d) + k["A"] / d ** (1.0 / (b - 1.0))
    return float(-ln_r.sum())


# ---------------------------------------------------------------------------
# Beta functions
# ---------------------------------------------------------------------------


def lambert_w(x: float, tol: float = 1e-12, max_iter: int = 50) -> float:
    """Principal-branch Lambert W for ``x >= 0`` with a Halley polish.

    Raises
    ------
    SolverError
        If ``w exp(w) = x`` is not met to relative tolerance ``tol``.
    """
    if not (math.isfinite(x) and x >= 0):
        raise ParameterError("lambert_w needs a finite x >= 0", x=x)
    if x == 0:
        return 0.0
    w = float(lambertw(x).real)
    if not math.isfinite(w):
        w = math.log(x) - math.log(math.log(x)) if x > math.e else 0.5
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol * x:
            return w
        wp1 = w + 1.0
        w = w - f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
    if abs(w * math.exp(w) - x) <= tol * x:
        return w
    raise SolverError("Lambert W iteration did not converge", x=x, w=w)


def beta_function(cls: SuppressionClass, kappa: float, J: float, lam: float, c: float = QUASIPOLY_C_FLOOR) -> float:
    """Rate ``d kappa / d q`` of the continuous ladder.

    * Poly: ``-1/b``.
    * StretchExpt: ``-(J / (lambda kappa))**(b/(b+1))``.
    * Quasipoly: ``-[A / ((b-1) W(A k**(1/(b-1)) / (b-1)))]**(b-1)`` with
      ``k = lambda kappa / (2 c J)``.
    """
    if not (kappa > 0 and lam > 0 and J > 0):
        raise ParameterError("kappa, J and lambda must be positive", kappa=kappa, J=J, lam=lam)
    b = cls.b
    if cls.name == "poly":
        if b <= 0:
            raise ParameterError("poly beta function needs b > 0", b=b)
        return -1.0 / b
    if cls.name == "stretch":
        return -((J / (lam * kappa)) ** (b / (b + 1.0)))
    if cls.name == "quasipoly":
        A = 2.0 ** (1.0 / (b - 1.0)) * cls.c_b
        k = lam * kappa / (2.0 * c * J)
        W = lambert_w(A / (b - 1.0) * k ** (1.0 / (b - 1.0)))
        return -((A / ((b - 1.0) * W)) ** (b - 1.0))
    raise ParameterError("unknown class", cls=cls.name)


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def make_plan(cls: SuppressionClass, kappa0: float, J: float, lam: float, **kw) -> KappaPlan:
    if cls.name == "poly":
        return plan_poly(int(cls.b), kappa0, J, lam)
    if cls.name == "stretch":
        return plan_stretch(cls.b, kappa0, J, lam, **kw)
    if cls.name == "quasipoly":
        return plan_quasipoly(cls.b, kappa0, J, lam)
    raise ParameterError("unknown class", cls=cls.name)


def sweep(cls: SuppressionClass, kappa0: float, J: float, lambdas, **kw) -> list[tuple[float, int, float, bool]]:
    """Rows ``(lambda, q_star, ln_tau_star, valid)``; invalid rows carry ``nan``."""
    rows = []
    for lam in np.asarray(lambdas, dtype=float):
        plan = make_plan(cls, kappa0, J, float(lam), **kw)
        ln_tau = tau_star_np(plan) if plan.valid else float("nan")
        rows.append((float(lam), plan.q_star, ln_tau, plan.valid))
    return rows


def np_scaling_exponent(cls: SuppressionClass, lambdas, kappa0: float = 1.0, J: float = 1.0, **kw) -> ScalingFit:
    """Fitted ``lambda``-scaling of ``ln tau*`` over the valid sweep points.

    * Poly: slope of ``ln tau*`` against ``ln lambda``.
    * StretchExpt: ``ln tau* = a lambda**beta + c ln lambda + d``; reports ``beta``.
    * Quasipoly: ``ln tau* = a L**beta + c L + d`` with ``L = ln(lambda/J)``;
      reports ``beta``.

    The logarithmic term absorbs the first step ``kappa_0 -> kappa_0/2``,
    whose ratio bound scales like ``1/lambda``.
    """
    rows = [r for r in sweep(cls, kappa0, J, lambdas, **kw) if r[3]]
    if len(rows) < 4:
        raise ParameterError("need at least four valid sweep points", valid=len(rows))
    lam = np.array([r[0] for r in rows])
    lt = np.array([r[2] for r in rows])
    x = np.log(lam / J)
    if cls.name == "poly":
        slope, intercept = np.polyfit(x, lt, 1)
        return ScalingFit(float(slope), "ln tau = s ln lam + c", (float(slope), float(intercept)))
    if cls.name == "stretch":

        def model(x, a, beta, c, d):
            return a * np.exp(beta * x) + c * x + d

        p0 = [1e-2, cls.b / (cls.b + 1.0), 1.0, 0.0]
        name = "ln tau = a lam^beta + c ln lam + d"
    else:

        def model(x, a, beta, c, d):
            return a * x**beta + c * x + d

        p0 = [1e-2, cls.b, 1.0, 0.0]
        name = "ln tau = a L^beta + c L + d, L = ln(lam/J)"
    try:
        coef, _ = curve_fit(model, x, lt, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise FitError("scaling fit did not converge", detail=str(exc)) from exc
    return ScalingFit(float(coef[1]), name, tuple(map(float, coef)))
