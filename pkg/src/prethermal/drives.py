"""Drive generators: step sequences and multi-tone continuous drives.

Binary words use the sign map ``0 -> +1`` and ``1 -> -1``.  Step sequences
are stored as read-only ``int8`` arrays so that words of length ``2**24``
stay cheap to pass around.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .arithmetic import FactorialLabel, FrequencyLabel, IntVecLabel, label_from_string
from .errors import CapacityError, ParameterError

MAX_TM_DEPTH = 26
MAX_FIBONACCI_ITERATIONS = 34
MAX_COMPONENTS = 200_000


@dataclass(frozen=True)
class StepSequence:
    """Finite ±1 drive with its construction recipe.

    Attributes
    ----------
    values : np.ndarray
        ``int8`` array of +1/-1 entries (read-only).
    dt : float
        Duration of one step, ``1/lambda``.
    rule : str
        ``"thue_morse"``, ``"rmd"``, ``"fibonacci"`` or ``"custom"``.
    depth : int or None
        Thue-Morse depth ``r`` (or Fibonacci iteration count).
    block_signs : tuple of int
        Block signs ``b_l`` for ``rule == "rmd"``.
    """

    values: np.ndarray
    dt: float = 1.0
    rule: str = "custom"
    depth: int | None = None
    block_signs: tuple[int, ...] = ()

    def __post_init__(self):
        arr = np.asarray(self.values)
        if arr.ndim != 1 or arr.size == 0:
            raise ParameterError("a step sequence needs at least one entry")
        if not np.all(np.abs(arr) == 1):
            raise ParameterError("step sequence entries must be exactly +1 or -1")
        if not self.dt > 0:
            raise ParameterError("dt must be positive", dt=self.dt)
        arr = arr.astype(np.int8, copy=True)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "block_signs", tuple(int(s) for s in self.block_signs))

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def random_signed(self) -> bool:
        """True for block-sign (n-RMD) sequences with more than one block."""
        return self.rule == "rmd" and len(self.block_signs) > 1

    def as_float(self) -> np.ndarray:
        return self.values.astype(float)

    def with_dt(self, dt: float) -> "StepSequence":
        return StepSequence(self.values, dt, self.rule, self.depth, self.block_signs)


def _check_depth(depth: int, cap: int, what: str) -> int:
    depth = int(depth)
    if depth < 0:
        raise ParameterError(f"{what} must be non-negative", value=depth)
    if depth > cap:
        raise CapacityError(f"{what} exceeds the cap", value=depth, cap=cap)
    return depth


def _thue_morse_signs(depth: int) -> np.ndarray:
    out = np.ones(1, dtype=np.int8)
    for _ in range(depth):
        out = np.concatenate([out, -out])
    return out


def thue_morse_word(depth: int, dt: float = 1.0) -> StepSequence:
    """Thue-Morse word of length ``2**depth`` as ±1 values."""
    depth = _check_depth(depth, MAX_TM_DEPTH, "depth")
    return StepSequence(_thue_morse_signs(depth), dt, "thue_morse", depth)


def rmd_sequence(r: int, block_signs: Sequence[int], dt: float = 1.0) -> StepSequence:
    """Concatenate depth-``r`` Thue-Morse blocks multiplied by ``block_signs``."""
    r = _check_depth(r, MAX_TM_DEPTH, "r")
    signs = np.asarray(block_signs, dtype=np.int64)
    if signs.ndim != 1 or signs.size == 0:
        raise ParameterError("block_signs must be a non-empty list")
    if not np.all(np.abs(signs) == 1):
        raise ParameterError("block signs must be +1 or -1")
    if signs.size * 2**r > 2 ** (MAX_TM_DEPTH + 1):
        raise CapacityError("sequence too long", length=int(signs.size * 2**r))
    block = _thue_morse_signs(r)
    values = (signs[:, None].astype(np.int8) * block[None, :]).ravel()
    return StepSequence(values, dt, "rmd", r, tuple(signs.tolist()))


def random_block_signs(count: int, seed: int) -> tuple[int, ...]:
    """``count`` independent fair ±1 signs from a seeded generator."""
    if count < 1:
        raise ParameterError("count must be >= 1", count=count)
    rng = np.random.default_rng(seed)
    return tuple((1 - 2 * rng.integers(0, 2, size=count)).tolist())


def random_rmd(r: int, n_steps: int, seed: int, dt: float = 1.0) -> StepSequence:
    """n-RMD sequence with about ``n_steps`` steps and seeded block signs."""
    blocks = max(1, int(n_steps) // 2**r)
    return rmd_sequence(r, random_block_signs(blocks, seed), dt)


def fibonacci_word(iterations: int, dt: float = 1.0) -> StepSequence:
    """Fibonacci word ``W_n`` from ``W_0 = "0"``, ``W_1 = "01"``, ``W_{n+1} = W_n W_{n-1}``."""
    iterations = _check_depth(iterations, MAX_FIBONACCI_ITERATIONS, "iterations")
    prev = np.array([1], dtype=np.int8)
    if iterations == 0:
        return StepSequence(prev, dt, "fibonacci", 0)
    cur = np.array([1, -1], dtype=np.int8)
    for _ in range(iterations - 1):
        prev, cur = cur, np.concatenate([cur, prev])
    return StepSequence(cur, dt, "fibonacci", iterations)


def fibonacci_length(iterations: int) -> int:
    """Length of ``W_n``; equals the ``(n+2)``-th Fibonacci number."""
    a, b = 1, 2
    for _ in range(iterations):
        a, b = b, a + b
    return a


# ---------------------------------------------------------------------------
# Continuous drives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyB:
    b: float


@dataclass(frozen=True)
class QuasipolyB:
    b: float


@dataclass(frozen=True)
class StretchB:
    b: float


@dataclass(frozen=True)
class PolyAlpha:
    alpha: float


@dataclass(frozen=True)
class LogSq:
    pass


@dataclass(frozen=True)
class ExpAlpha:
    alpha: float


@dataclass(frozen=True)
class Component:
    label: FrequencyLabel
    freq: float
    amp: float
    phase: float = 0.0


@dataclass(frozen=True)
class ContinuousDrive:
    """Sum of sine components ``amp * sin(freq * t + phase)``."""

    components: tuple[Component, ...]
    lam: float
    claimed_gamma: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        labels = [c.label for c in comps]
        if len(set(labels)) != len(labels):
            raise ParameterError("component labels must be unique")
        for c in comps:
            if not (math.isfinite(c.amp) and c.amp >= 0):
                raise ParameterError("amplitudes must be finite and non-negative", label=str(c.label))
        object.__setattr__(self, "components", comps)

    @property
    def freqs(self) -> np.ndarray:
        return np.array([c.freq for c in self.components])

    @property
    def amps(self) -> np.ndarray:
        return np.array([c.amp for c in self.components])

    @property
    def phases(self) -> np.ndarray:
        return np.array([c.phase for c in self.components])


def _factorial_amp(law, k: int) -> float:
    lnf = math.lgamma(k + 1)
    if isinstance(law, PolyB):
        return math.exp(-law.b * lnf)
    if isinstance(law, QuasipolyB):
        return math.exp(-(lnf**law.b))
    if isinstance(law, StretchB):
        return math.exp(-math.exp(law.b * lnf))
    raise ParameterError("unknown factorial decay law", law=repr(law))


def factorial_drive(decay_law, k_max: int, lam: float) -> ContinuousDrive:
    """Factorial drive: component ``k`` has frequency ``lam / k!``."""
    if k_max < 1:
        raise ParameterError("k_max must be >= 1", k_max=k_max)
    if k_max > 20:
        raise CapacityError("k_max is capped at 20", k_max=k_max)
    if not lam > 0:
        raise ParameterError("lambda must be positive", lam=lam)
    b = getattr(decay_law, "b", None)
    if b is None or not b > 0 or (isinstance(decay_law, PolyB) and not b > 1):
        raise ParameterError("decay exponent b outside the valid range", law=repr(decay_law))
    comps = []
    for k in range(1, k_max + 1):
        fk = math.factorial(k)
        comps.append(Component(FactorialLabel(1, k), lam / fk, _factorial_amp(decay_law, k)))
    return ContinuousDrive(tuple(comps), lam)


def _qf_amp(law, norm: int) -> float:
    if isinstance(law, PolyAlpha):
        return float(norm) ** (-law.alpha)
    if isinstance(law, LogSq):
        return math.exp(-math.log(norm) ** 2)
    if isinstance(law, ExpAlpha):
        return math.exp(-(float(norm) ** law.alpha))
    raise ParameterError("unknown quasi-Floquet decay law", law=repr(law))


def quasi_floquet_drive(
    omega: Sequence[float],
    fourier_decay,
    n_max: int,
    lam: float = 1.0,
    claimed_gamma: float | None = None,
) -> ContinuousDrive:
    """Quasi-periodic drive over integer vectors with ``0 < |n|_1 <= n_max``.

    ``n`` and ``-n`` describe the same real sine mode, so only the
    representative whose first nonzero entry is positive is kept.
    """
    w = np.asarray(omega, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ParameterError("omega must be a non-empty vector")
    if n_max < 1:
        raise ParameterError("n_max must be >= 1", n_max=n_max)
    m = w.size
    if (2 * n_max + 1) ** m > 50 * MAX_COMPONENTS:
        raise CapacityError("component count over cap", dim=m, n_max=n_max)
    axes = np.meshgrid(*[np.arange(-n_max, n_max + 1)] * m, indexing="ij")
    vecs = np.stack([a.ravel() for a in axes], axis=1)
    l1 = np.abs(vecs).sum(axis=1)
    keep = (l1 > 0) & (l1 <= n_max)
    vecs, l1 = vecs[keep], l1[keep]
    first = vecs[np.arange(len(vecs)), np.argmax(vecs != 0, axis=1)]
    vecs, l1 = vecs[first > 0], l1[first > 0]
    if len(vecs) > MAX_COMPONENTS:
        raise CapacityError("component count over cap", count=len(vecs))
    order = np.lexsort(tuple(vecs.T[::-1]) + (l1,))
    comps = []
    for i in order:
        n = tuple(int(v) for v in vecs[i])
        comps.append(Component(IntVecLabel(n), lam * float(np.dot(vecs[i], w)), _qf_amp(fourier_decay, int(l1[i]))))
    return ContinuousDrive(tuple(comps), lam, claimed_gamma)


def sample(drive: ContinuousDrive, t_grid: Iterable[float]) -> np.ndarray:
    """Evaluate ``V(t) = sum_k amp_k sin(freq_k t + phase_k)`` on ``t_grid``."""
    t = np.asarray(list(t_grid) if not isinstance(t_grid, np.ndarray) else t_grid, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ParameterError("time grid must be finite")
    if not drive.components:
        return np.zeros_like(t)
    arg = np.outer(t, drive.freqs) + drive.phases[None, :]
    return np.sin(arg) @ drive.amps


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def sequence_to_text(seq: StepSequence) -> str:
    return "\n".join(str(int(v)) for v in seq.values) + "\n"


def sequence_from_text(text: str, dt: float = 1.0) -> StepSequence:
    vals = [int(line) for line in text.split() if line.strip()]
    return StepSequence(np.array(vals), dt)


def drive_to_csv(drive: ContinuousDrive) -> str:
    buf = io.StringIO()
    buf.write("label,freq,amp,phase\n")
    for c in drive.components:
        buf.write(f"{c.label},{c.freq:.17g},{c.amp:.17g},{c.phase:.17g}\n")
    return buf.getvalue()


def drive_from_csv(text: str, lam: float = 1.0) -> ContinuousDrive:
    rows = csv.DictReader(io.StringIO(text))
    comps = [
        Component(label_from_string(r["label"]), float(r["freq"]), float(r["amp"]), float(r["phase"]))
        for r in rows
    ]
    return ContinuousDrive(tuple(comps), lam)
