"""Weight and multiplier law abstractions with reproducible sampling.

A *weight law* is the distribution of the (possibly signed) factors X of a
randomly weighted sum; a *multiplier law* is the distribution of the
non-negative factors Y.  Both are immutable records bundling the analytic
descriptors needed downstream (CDF or survival function, truncated and
fractional moments, norming sequence) together with an exact inverse-transform
style sampler driven by a :class:`SeedStream`.

All built-in samplers are pure functions of ``(master_seed, stream_index,
count)``: the same stream always reproduces the same draws bit for bit,
independent of thread count or call order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special
from scipy.integrate import quad


class ParameterError(ValueError):
    """A law or operation parameter is outside its admissible range."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge; carries the partial bracket."""

    def __init__(self, message: str, partial: float = math.nan, err: float = math.nan):
        super().__init__(f"{message} (partial={partial!r}, abserr={err!r})")
        self.partial = partial
        self.err = err


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeedStream:
    """Named, splittable random stream.

    ``(master_seed, stream_index)`` maps to a generator state through
    :class:`numpy.random.SeedSequence`, so distinct stream indices give
    statistically independent streams and the mapping is a pure function.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self) -> None:
        if not (0 <= int(self.master_seed) < 2**64):
            raise ParameterError("master_seed must be a 64-bit unsigned integer")
        if int(self.stream_index) < 0:
            raise ParameterError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(entropy=int(self.master_seed),
                                     spawn_key=(int(self.stream_index),))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, k: int) -> "SeedStream":
        """Derive substream ``k`` (k < 2**32) without state sharing."""
        if k < 0 or k >= 2**32:
            raise ParameterError("substream index must be in [0, 2**32)")
        return SeedStream(self.master_seed, (int(self.stream_index) << 32) + int(k))


# ---------------------------------------------------------------------------
# Law records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailClass:
    """Upper-tail regime label: 'pareto' (with index), 'slowly_varying',
    'finite_mean' or 'custom'."""

    kind: str
    beta: Optional[float] = None


@dataclass(frozen=True)
class WeightLaw:
    """Distribution of the weight factor X.

    ``beta_moment_pos(b)`` is the fractional moment of the positive part,
    the integral of x**b over (0, inf); ``beta_moment_neg`` mirrors it on the
    negative half line.  ``pdf`` is the density of the continuous part, zero
    outside ``support``; ``pdf_breaks`` lists points where the density is
    kinked or discontinuous (quadrature split points).  ``atoms`` holds the
    discrete part as (location, mass) pairs.
    """

    label: str
    cdf: Callable[[float], float]
    sampler: Callable[[SeedStream, int], np.ndarray]
    mean: float
    abs_mean: float
    beta_moment_pos: Callable[[float], float]
    beta_moment_neg: Callable[[float], float]
    atoms: tuple = ()
    degenerate: bool = False
    pdf: Optional[Callable[[float], float]] = None
    pdf_breaks: tuple = ()
    support: tuple = (-math.inf, math.inf)

    def atom_mass(self, x: float) -> float:
        for loc, m in self.atoms:
            if loc == x:
                return m
        return 0.0

    def cdf_left(self, x: float) -> float:
        """Left limit F(x-)."""
        return self.cdf(x) - self.atom_mass(x)

    def sf(self, x):
        return 1.0 - self.cdf(x)


def vec_eval(fn: Callable, arr: np.ndarray) -> np.ndarray:
    """Evaluate fn over an array, falling back to a scalar loop when the
    callable is not vectorized."""
    arr = np.asarray(arr, dtype=float)
    try:
        out = np.asarray(fn(arr), dtype=float)
        if out.shape == arr.shape:
            return out
    except Exception:
        pass
    return np.asarray([float(fn(t)) for t in arr.ravel()]).reshape(arr.shape)


@dataclass(frozen=True)
class MultiplierLaw:
    """Distribution of the non-negative multiplier Y.

    ``survival`` is P{Y > y}, ``trunc_mean(x)`` is E[Y 1{Y <= x}] and
    ``trunc_second(x)`` is E[Y^2 1{Y <= x}].  ``norming(n)`` is the sequence
    a_n used to rescale partial sums.  ``survival_logarg`` and ``log_norming``
    are optional log-space companions (P{Y > e^t} and log a_n) that keep tail
    evaluations finite when a_n overflows a double, as it does for the
    slowly varying law.  ``log_sampler`` draws log Y coupled to the same
    uniforms as ``sampler``; scale-free engines use it so that laws whose
    raw draws overflow a double still sum correctly.  ``tail_sampler(stream,
    count, y0)`` draws from the conditional law of Y given Y > y0 exactly; it
    powers low-variance estimators of rare product-tail events.
    """

    label: str
    survival: Callable[[float], float]
    sampler: Callable[[SeedStream, int], np.ndarray]
    trunc_mean: Callable[[float], float]
    trunc_second: Callable[[float], float]
    norming: Callable[[int], float]
    mean: float
    tail_class: TailClass
    log_norming: Optional[Callable[[int], float]] = None
    survival_logarg: Optional[Callable[[float], float]] = None
    log_sampler: Optional[Callable[[SeedStream, int], np.ndarray]] = None
    tail_sampler: Optional[Callable[[SeedStream, int, float], np.ndarray]] = None


# ---------------------------------------------------------------------------
# Quadrature against a weight law
# ---------------------------------------------------------------------------

_QUAD_LIMIT = 300


def _quad_piece(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    res = quad(f, lo, hi, epsabs=tol, epsrel=1e-9, limit=_QUAD_LIMIT, full_output=1)
    if len(res) > 3:
        # QUADPACK flags slow convergence even when the absolute target was
        # reached (e.g. the relative goal is unattainable for near-zero
        # values); accept results whose error bound meets the tolerance.
        if res[1] <= tol:
            return res[0]
        raise QuadratureError(str(res[3]), partial=res[0], err=res[1])
    return res[0]


def _piece(f: Callable[[float], float], a: float, b: float, tol: float) -> float:
    """One quadrature piece; infinite edges are folded to finite intervals
    by the reciprocal substitution u = 1/t, which turns slowly decaying
    power-law tails into integrable endpoint singularities (QAGS territory)
    instead of stressing the infinite-range extrapolation."""
    if a == -math.inf and b == math.inf:
        return _piece(f, a, 0.0, tol) + _piece(f, 0.0, b, tol)
    if b == math.inf:
        c = max(a, 1.0)
        head = _quad_piece(f, a, c, tol) if c > a else 0.0
        return head + _quad_piece(lambda t: f(1.0 / t) / (t * t), 0.0, 1.0 / c, tol)
    if a == -math.inf:
        c = min(b, -1.0)
        head = _quad_piece(f, c, b, tol) if b > c else 0.0
        return head + _quad_piece(lambda t: f(1.0 / t) / (t * t), 1.0 / c, 0.0, tol)
    return _quad_piece(f, a, b, tol)


def quad_segments(f: Callable[[float], float], lo: float, hi: float,
                  points: Sequence[float] = (), tol: float = 1e-10) -> float:
    """Adaptive quadrature of ``f`` over (lo, hi), split at interior points."""
    if hi <= lo:
        return 0.0
    inner = sorted({p for p in points if lo < p < hi and math.isfinite(p)})
    edges = [lo, *inner, hi]
    return sum(_piece(f, a, b, tol) for a, b in zip(edges[:-1], edges[1:]))


def expect_weight(law: WeightLaw, g: Callable[[float], float],
                  lo: float = -math.inf, hi: float = math.inf,
                  include_lo: bool = True, include_hi: bool = True,
                  points: Sequence[float] = (), tol: float = 1e-10) -> float:
    """Integral of g against the law of X over the interval (lo, hi).

    Atom endpoints enter according to ``include_lo`` / ``include_hi``; the
    continuous part is integrated with splits at declared density breaks and
    any caller-supplied points (integrand kinks).
    """
    total = 0.0
    for loc, m in law.atoms:
        if lo < loc < hi or (include_lo and loc == lo) or (include_hi and loc == hi):
            total += m * g(loc)
    if law.pdf is not None:
        a = max(lo, law.support[0])
        b = min(hi, law.support[1])
        if b > a:
            pdf = law.pdf
            total += quad_segments(lambda x: g(x) * pdf(x), a, b,
                                   points=list(points) + list(law.pdf_breaks), tol=tol)
    return total


# ---------------------------------------------------------------------------
# Built-in weight laws
# ---------------------------------------------------------------------------

_norm_cdf = special.ndtr


def _uniform01_weight() -> WeightLaw:
    def cdf(x):
        return np.clip(x, 0.0, 1.0)

    return WeightLaw(
        label="uniform01",
        cdf=cdf,
        sampler=lambda stream, count: stream.generator().random(count),
        mean=0.5,
        abs_mean=0.5,
        beta_moment_pos=lambda b: 1.0 / (1.0 + b),
        beta_moment_neg=lambda b: 0.0,
        pdf=lambda x: 1.0 if 0.0 <= x <= 1.0 else 0.0,
        pdf_breaks=(0.0, 1.0),
        support=(0.0, 1.0),
    )


def _gaussian_weight() -> WeightLaw:
    def beta_moment(b):
        return 2.0 ** ((b - 1.0) / 2.0) * math.gamma((b + 1.0) / 2.0) / math.sqrt(2.0 * math.pi)

    return WeightLaw(
        label="standard_gaussian",
        cdf=_norm_cdf,
        sampler=lambda stream, count: stream.generator().standard_normal(count),
        mean=0.0,
        abs_mean=math.sqrt(2.0 / math.pi),
        beta_moment_pos=beta_moment,
        beta_moment_neg=beta_moment,
        pdf=lambda x: math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi),
        support=(-math.inf, math.inf),
    )


def _atomic_weight(label: str, atoms: Sequence, degenerate: bool = False) -> WeightLaw:
    atoms = tuple(sorted(atoms))
    mean = sum(m * loc for loc, m in atoms)
    abs_mean = sum(m * abs(loc) for loc, m in atoms)

    def cdf(x):
        return sum(m * (np.asarray(x) >= loc) for loc, m in atoms)

    def bmp(b):
        return sum(m * loc ** b for loc, m in atoms if loc > 0)

    def bmn(b):
        return sum(m * (-loc) ** b for loc, m in atoms if loc < 0)

    def sampler(stream, count):
        gen = stream.generator()
        locs = np.array([loc for loc, _ in atoms])
        probs = np.array([m for _, m in atoms])
        return locs[gen.choice(len(atoms), size=count, p=probs)]

    return WeightLaw(
        label=label, cdf=cdf, sampler=sampler, mean=mean, abs_mean=abs_mean,
        beta_moment_pos=bmp, beta_moment_neg=bmn, atoms=atoms,
        degenerate=degenerate, pdf=None,
        support=(atoms[0][0], atoms[-1][0]),
    )


def _symmetric_pareto_weight(gamma: float) -> WeightLaw:
    # P{|X| > x} = x^-gamma on [1, inf), sign is an independent fair coin
    def cdf(x):
        x = np.asarray(x, dtype=float)
        mag = np.maximum(np.abs(x), 1.0)
        return np.where(x <= -1.0, 0.5 * mag ** (-gamma),
                        np.where(x < 1.0, 0.5, 1.0 - 0.5 * mag ** (-gamma)))

    def sampler(stream, count):
        gen = stream.generator()
        mag = (1.0 - gen.random(count)) ** (-1.0 / gamma)
        sign = gen.integers(0, 2, size=count) * 2.0 - 1.0
        return sign * mag

    def half_moment(b):
        return gamma / (2.0 * (gamma - b)) if b < gamma else math.inf

    finite_mean = gamma > 1.0
    return WeightLaw(
        label=f"symmetric_pareto({gamma:g})",
        cdf=cdf,
        sampler=sampler,
        mean=0.0 if finite_mean else math.nan,
        abs_mean=gamma / (gamma - 1.0) if finite_mean else math.inf,
        beta_moment_pos=half_moment,
        beta_moment_neg=half_moment,
        pdf=lambda x: 0.5 * gamma * abs(x) ** (-gamma - 1.0) if abs(x) >= 1.0 else 0.0,
        pdf_breaks=(-1.0, 1.0),
        support=(-math.inf, math.inf),
    )


def _abs_pareto_weight(gamma: float) -> WeightLaw:
    # |symmetric_pareto(gamma)|: one-sided Pareto on [1, inf)
    def cdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 1.0, 1.0 - np.maximum(x, 1.0) ** (-gamma), 0.0)

    return WeightLaw(
        label=f"abs_pareto({gamma:g})",
        cdf=cdf,
        sampler=lambda stream, count: (1.0 - stream.generator().random(count)) ** (-1.0 / gamma),
        mean=gamma / (gamma - 1.0) if gamma > 1.0 else math.inf,
        abs_mean=gamma / (gamma - 1.0) if gamma > 1.0 else math.inf,
        beta_moment_pos=lambda b: gamma / (gamma - b) if b < gamma else math.inf,
        beta_moment_neg=lambda b: 0.0,
        pdf=lambda x: gamma * x ** (-gamma - 1.0) if x >= 1.0 else 0.0,
        pdf_breaks=(1.0,),
        support=(1.0, math.inf),
    )


def make_weight_law(kind: str, *, c: float = 1.0, p: float = 0.5,
                    x0: float = 0.0, x1: float = 1.0,
                    gamma: float = 0.5) -> WeightLaw:
    """Construct one of the built-in weight laws.

    Kinds: ``uniform01``, ``standard_gaussian``, ``rademacher``,
    ``point_mass`` (location ``c``), ``bernoulli`` (mass ``p`` at ``x1``,
    mass ``1-p`` at ``x0``), ``symmetric_pareto`` and ``abs_pareto``
    (tail index ``gamma`` in (0, 2)).
    """
    if kind == "uniform01":
        return _uniform01_weight()
    if kind == "standard_gaussian":
        return _gaussian_weight()
    if kind == "rademacher":
        return _atomic_weight("rademacher", [(-1.0, 0.5), (1.0, 0.5)])
    if kind == "point_mass":
        return _atomic_weight(f"point_mass({c:g})", [(float(c), 1.0)], degenerate=True)
    if kind == "bernoulli":
        if not 0.0 < p < 1.0:
            raise ParameterError("bernoulli p must lie in (0, 1)")
        if x0 == x1:
            raise ParameterError("bernoulli locations must differ")
        return _atomic_weight(f"bernoulli({p:g},{x0:g},{x1:g})",
                              [(float(x0), 1.0 - p), (float(x1), p)])
    if kind == "symmetric_pareto":
        if not 0.0 < gamma < 2.0:
            raise ParameterError("symmetric_pareto gamma must lie in (0, 2)")
        return _symmetric_pareto_weight(float(gamma))
    if kind == "abs_pareto":
        if not 0.0 < gamma < 2.0:
            raise ParameterError("abs_pareto gamma must lie in (0, 2)")
        return _abs_pareto_weight(float(gamma))
    raise ParameterError(f"unknown weight law kind {kind!r}")


# ---------------------------------------------------------------------------
# Built-in multiplier laws
# ---------------------------------------------------------------------------


def make_pareto_multiplier(beta: float) -> MultiplierLaw:
    """Pareto multiplier, P{Y > y} = y^-beta on [1, inf), beta in (0, 2).

    The norming sequence is the upper 1/n quantile, a_n = n**(1/beta), which
    makes n * P{Y > a_n v} = v^-beta exactly whenever a_n v >= 1.
    """
    if not 0.0 < beta < 2.0:
        raise ParameterError("pareto beta must lie in (0, 2)")
    b = float(beta)

    def survival(y):
        return 1.0 if y <= 1.0 else y ** (-b)

    def trunc_mean(x):
        if x <= 1.0:
            return 0.0
        return math.log(x) if b == 1.0 else b * (x ** (1.0 - b) - 1.0) / (1.0 - b)

    def trunc_second(x):
        return 0.0 if x <= 1.0 else b * (x ** (2.0 - b) - 1.0) / (2.0 - b)

    def tail_sampler(stream, count, y0):
        lo = max(1.0, y0)
        return lo * (1.0 - stream.generator().random(count)) ** (-1.0 / b)

    return MultiplierLaw(
        label=f"pareto(beta={b:g})",
        survival=survival,
        sampler=lambda stream, count: (1.0 - stream.generator().random(count)) ** (-1.0 / b),
        trunc_mean=trunc_mean,
        trunc_second=trunc_second,
        norming=lambda n: float(n) ** (1.0 / b),
        mean=b / (b - 1.0) if b > 1.0 else math.inf,
        tail_class=TailClass("pareto", b),
        log_norming=lambda n: math.log(n) / b,
        survival_logarg=lambda t: 1.0 if t <= 0.0 else math.exp(-b * t),
        tail_sampler=tail_sampler,
    )


def make_slowly_varying_multiplier() -> MultiplierLaw:
    """Multiplier with slowly varying tail, P{Y > y} = 1/log(y) on [e, inf).

    Truncated moments come from the closed forms
    E[Y 1{Y<=x}]   = Ei(log x) - x/log x + e - Ei(1),
    E[Y^2 1{Y<=x}] = 2 Ei(2 log x) - x^2/log x + e^2 - 2 Ei(2),
    where Ei is the exponential integral.  The quantile norming a_n = e^n
    overflows doubles for n > 709, so the log-space hooks are essential here.
    """
    e = math.e

    def survival(y):
        return 1.0 if y <= e else 1.0 / math.log(y)

    def trunc_mean(x):
        if x <= e:
            return 0.0
        return float(special.expi(math.log(x))) - x / math.log(x) + e - float(special.expi(1.0))

    def trunc_second(x):
        if x <= e:
            return 0.0
        return (2.0 * float(special.expi(2.0 * math.log(x))) - x * x / math.log(x)
                + e * e - 2.0 * float(special.expi(2.0)))

    def sampler(stream, count):
        u = 1.0 - stream.generator().random(count)  # (0, 1]
        with np.errstate(over="ignore"):
            return np.exp(1.0 / u)  # inf beyond e^709; see log_sampler

    def log_sampler(stream, count):
        u = 1.0 - stream.generator().random(count)
        return 1.0 / u

    def tail_sampler(stream, count, y0):
        cap = 1.0 / math.log(max(y0, e))  # P{Y > y0} in uniform units
        u = (1.0 - stream.generator().random(count)) * cap
        with np.errstate(over="ignore"):
            return np.exp(1.0 / u)

    return MultiplierLaw(
        label="slowly_varying",
        survival=survival,
        sampler=sampler,
        trunc_mean=trunc_mean,
        trunc_second=trunc_second,
        norming=lambda n: math.exp(n) if n < 709 else math.inf,
        mean=math.inf,
        tail_class=TailClass("slowly_varying"),
        log_norming=lambda n: float(n),
        survival_logarg=lambda t: 1.0 if t <= 1.0 else 1.0 / t,
        log_sampler=log_sampler,
        tail_sampler=tail_sampler,
    )


def make_finite_mean_multiplier(kind: str, rate: float = 1.0) -> MultiplierLaw:
    """Finite-mean multiplier: ``exponential`` (with ``rate``) or ``uniform01``.

    For these laws the norming is the law-of-large-numbers scale a_n = n E Y;
    the upper-quantile choice used for heavy tails is bounded for uniform01
    and would violate a_n -> inf.
    """
    if kind == "exponential":
        if not rate > 0.0:
            raise ParameterError("exponential rate must be positive")
        r = float(rate)

        def trunc_mean(x):
            if x <= 0.0:
                return 0.0
            return (1.0 - math.exp(-r * x)) / r - x * math.exp(-r * x)

        def trunc_second(x):
            if x <= 0.0:
                return 0.0
            return 2.0 * trunc_mean(x) / r - x * x * math.exp(-r * x)

        return MultiplierLaw(
            label=f"exponential(rate={r:g})",
            survival=lambda y: 1.0 if y <= 0.0 else math.exp(-r * y),
            sampler=lambda stream, count: stream.generator().standard_exponential(count) / r,
            trunc_mean=trunc_mean,
            trunc_second=trunc_second,
            norming=lambda n: n / r,
            mean=1.0 / r,
            tail_class=TailClass("finite_mean"),
            tail_sampler=lambda stream, count, y0: (
                max(y0, 0.0) + stream.generator().standard_exponential(count) / r),
        )
    if kind == "uniform01":
        def tail_sampler(stream, count, y0):
            lo = max(0.0, min(y0, 1.0))
            return lo + (1.0 - lo) * stream.generator().random(count)

        return MultiplierLaw(
            label="uniform01",
            survival=lambda y: float(np.clip(1.0 - y, 0.0, 1.0)),
            sampler=lambda stream, count: stream.generator().random(count),
            trunc_mean=lambda x: 0.5 * min(max(x, 0.0), 1.0) ** 2,
            trunc_second=lambda x: min(max(x, 0.0), 1.0) ** 3 / 3.0,
            norming=lambda n: 0.5 * n,
            mean=0.5,
            tail_class=TailClass("finite_mean"),
            tail_sampler=tail_sampler,
        )
    raise ParameterError(f"unknown finite-mean multiplier kind {kind!r}")


def make_multiplier_law(kind: str, *, beta: float = 0.5, rate: float = 1.0) -> MultiplierLaw:
    """Dispatch helper used by configuration records."""
    if kind == "pareto":
        return make_pareto_multiplier(beta)
    if kind == "slowly_varying":
        return make_slowly_varying_multiplier()
    if kind in ("exponential", "uniform01"):
        return make_finite_mean_multiplier(kind, rate=rate)
    raise ParameterError(f"unknown multiplier law kind {kind!r}")


# ---------------------------------------------------------------------------
# Positive stable sampling (Kanter's exact method)
# ---------------------------------------------------------------------------


def sample_positive_stable(beta: float, stream: SeedStream, count: int) -> np.ndarray:
    """Exact draws from the positive stable law with Laplace transform
    exp(-lambda**beta), 0 < beta < 1.

    Uses Kanter's representation Z = (A(U)/E)**((1-beta)/beta) with U uniform
    on (0, pi), E unit exponential and
    A(u) = [sin(beta u)^beta sin((1-beta) u)^(1-beta) / sin(u)]^(1/(1-beta)).
    For beta = 1/2 the output follows the Levy(0, 1/2) law, with CDF
    2 * (1 - Phi(1/sqrt(2 z))).
    """
    if not 0.0 < beta < 1.0:
        raise ParameterError("positive stable index beta must lie in (0, 1)")
    if count < 1:
        raise ParameterError("count must be at least 1")
    gen = stream.generator()
    u = gen.uniform(0.0, math.pi, count)
    e = gen.standard_exponential(count)
    a = (np.sin(beta * u) ** beta * np.sin((1.0 - beta) * u) ** (1.0 - beta)
         / np.sin(u)) ** (1.0 / (1.0 - beta))
    return (a / e) ** ((1.0 - beta) / beta)


def levy_cdf(z, c: float):
    """CDF of the Levy(0, c) law, 2 * (1 - Phi(sqrt(c/z))) for z > 0.

    This is the beta = 1/2 positive stable family: ``sample_positive_stable``
    draws follow Levy(0, 1/2); the limit of Pareto(1/2) partial sums under
    a_n = n^2 follows Levy(0, pi/2).
    """
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    pos = z > 0.0
    out[pos] = 2.0 * (1.0 - _norm_cdf(np.sqrt(c / z[pos])))
    if out.ndim == 0:
        return float(out)
    return out
