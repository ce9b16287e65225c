"""Kernel functions, convolutions and twicing-built higher-order kernels.

Three kernel forms are supported:

* :class:`PlainKernel` -- the Gaussian or Epanechnikov density.
* :class:`GaussianMixture` -- a signed sum ``sum_i c_i * phi_{s_i}(u)`` of
  centred normal densities. Coefficients and variances are held as exact
  rationals so that convolution and the twicing recursion stay exact.
* :class:`TabulatedKernel` -- values on a uniform grid, evaluated by linear
  interpolation and zero outside the grid.

Gaussian convolutions are symbolic; everything else goes through grid
quadrature.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np
from scipy.signal import fftconvolve

__all__ = [
    "KernelSpec",
    "PlainKernel",
    "GaussianMixture",
    "TabulatedKernel",
    "ScaledKernel",
    "GAUSSIAN",
    "EPANECHNIKOV",
    "get_kernel",
    "eval_kernel",
    "convolve",
    "higher_order_kernel",
    "kernel_moment",
]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Gaussian components are treated as zero beyond this many standard deviations.
GAUSS_TRUNCATION = 8.0
# Default tabulation resolution: support width / TABLE_POINTS.
TABLE_POINTS = 4096
# Above this coefficient mass the direct mixture sum loses more than ~1e-12
# to cancellation and evaluation switches to a Fourier-inverted table.
_DIRECT_MASS_LIMIT = 1e4
_STEP_RTOL = 1e-9


class KernelSpec:
    """Base class of all kernels. Instances are immutable."""

    base: str
    form: str

    def __call__(self, u):
        raise NotImplementedError

    @property
    def half_width(self) -> float:
        """Half-width of the (effective) support, symmetric about 0."""
        raise NotImplementedError

    @property
    def is_nonnegative(self) -> bool:
        return False


class PlainKernel(KernelSpec):
    """A symmetric probability density: ``"gaussian"`` or ``"epanechnikov"``."""

    form = "plain"

    def __init__(self, base: str):
        base = base.lower()
        if base not in ("gaussian", "epanechnikov"):
            raise ValueError(f"unknown kernel {base!r}; expected 'gaussian' or 'epanechnikov'")
        self.base = base

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.base == "gaussian":
            out = _INV_SQRT_2PI * np.exp(-0.5 * u * u)
            return np.where(np.abs(u) <= GAUSS_TRUNCATION, out, 0.0)
        return 0.75 * np.maximum(0.0, 1.0 - u * u)

    @property
    def half_width(self) -> float:
        return GAUSS_TRUNCATION if self.base == "gaussian" else 1.0

    @property
    def is_nonnegative(self) -> bool:
        return True

    def __repr__(self):
        return f"PlainKernel({self.base!r})"

    def __eq__(self, other):
        return isinstance(other, PlainKernel) and other.base == self.base

    def __hash__(self):
        return hash(("plain", self.base))


class GaussianMixture(KernelSpec):
    """Signed mixture of centred normal densities.

    Parameters
    ----------
    terms : iterable of (coefficient, variance)
        Exact values are kept as :class:`fractions.Fraction`; floats are
        converted without rounding. Terms with equal variance are merged and
        zero coefficients dropped.
    """

    base = "gaussian"
    form = "mixture"

    def __init__(self, terms):
        merged: dict[Fraction, Fraction] = {}
        for coef, var in terms:
            coef, var = Fraction(coef), Fraction(var)
            if var <= 0:
                raise ValueError("mixture variances must be positive")
            merged[var] = merged.get(var, Fraction(0)) + coef
        self.terms = tuple((c, v) for v, c in sorted(merged.items()) if c != 0)
        if not self.terms:
            raise ValueError("mixture has no nonzero terms")
        if sum(c for c, _ in self.terms) != 1:
            total = float(sum(c for c, _ in self.terms))
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"mixture coefficients sum to {total}, expected 1")

    @classmethod
    def from_scales(cls, pairs) -> "GaussianMixture":
        """Build from (coefficient, standard deviation) pairs."""
        return cls((c, Fraction(float(s)) ** 2) for c, s in pairs)

    @cached_property
    def coefficients(self) -> np.ndarray:
        return np.array([float(c) for c, _ in self.terms])

    @cached_property
    def scales(self) -> np.ndarray:
        return np.sqrt(np.array([float(v) for _, v in self.terms]))

    @property
    def pairs(self) -> list[tuple[float, float]]:
        """(coefficient, scale) pairs as floats."""
        return list(zip(self.coefficients.tolist(), self.scales.tolist()))

    @property
    def half_width(self) -> float:
        return GAUSS_TRUNCATION * float(self.scales.max())

    @property
    def coefficient_mass(self) -> float:
        return float(np.abs(self.coefficients).sum())

    @property
    def is_nonnegative(self) -> bool:
        return all(c > 0 for c, _ in self.terms)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.coefficient_mass > _DIRECT_MASS_LIMIT:
            return self._stable_table(u)
        out = np.zeros_like(u)
        for c, s in zip(self.coefficients, self.scales):
            out += (c * _INV_SQRT_2PI / s) * np.exp(-0.5 * (u / s) ** 2)
        return np.where(np.abs(u) <= self.half_width, out, 0.0)

    def fourier(self, t, dps: int = 15):
        """Fourier transform ``sum_i c_i exp(-v_i t^2 / 2)`` at ``t`` (mpmath)."""
        with mpmath.workdps(dps):
            terms = [(mpmath.mpf(c.numerator) / c.denominator,
                      mpmath.mpf(v.numerator) / v.denominator) for c, v in self.terms]
            return [float(mpmath.fsum(c * mpmath.exp(-v * tk * tk / 2) for c, v in terms))
                    for tk in t]

    @cached_property
    def _stable_table(self) -> "_HalfTable":
        # Coefficients of twicing kernels grow like binomial(2^r, 2^(r-1)), so
        # the direct sum cancels catastrophically. The Fourier transform is
        # evaluated in extended precision and inverted by FFT instead.
        mass = self.coefficient_mass
        dps = 20 + int(math.ceil(math.log10(mass)))
        vmin = float(self.terms[0][1])
        smin = math.sqrt(vmin)
        t_max = math.sqrt(2.0 * math.log(mass * 1e20) / vmin)
        u_max = self.half_width
        dt = 2.0 * math.pi / (2.5 * u_max)
        du_target = smin / 2000.0
        n_fft = 1 << int(math.ceil(math.log2(2.0 * math.pi / (dt * du_target))))
        n_t = int(math.ceil(t_max / dt)) + 1
        ft = np.zeros(n_fft)
        ft[:n_t] = self.fourier(np.arange(n_t) * dt, dps=dps)
        ft[0] *= 0.5
        du = 2.0 * math.pi / (n_fft * dt)
        n_u = int(math.ceil(u_max / du)) + 2
        values = (dt / math.pi) * np.fft.rfft(ft).real[:n_u]
        return _HalfTable(du, values, u_max)

    def __repr__(self):
        return f"GaussianMixture({self.pairs})"

    def __eq__(self, other):
        return isinstance(other, GaussianMixture) and other.terms == self.terms

    def __hash__(self):
        return hash(self.terms)


class _HalfTable:
    """Linear interpolation of a symmetric function tabulated on [0, u_max]."""

    def __init__(self, step, values, u_max):
        self.step = step
        self.values = np.asarray(values, dtype=float)
        self.u_max = u_max

    def __call__(self, u):
        a = np.abs(np.asarray(u, dtype=float)) / self.step
        a = np.minimum(a, len(self.values) - 1.0)
        i = np.minimum(a.astype(np.intp), len(self.values) - 2)
        frac = a - i
        out = self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
        return np.where(np.abs(u) <= self.u_max, out, 0.0)


class TabulatedKernel(KernelSpec):
    """Kernel values on the uniform grid ``lo + k * step``, k = 0..len-1.

    Values are symmetrised on construction; the grid must be symmetric about 0.
    """

    form = "tabulated"

    def __init__(self, base: str, lo: float, step: float, values):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or len(values) < 3:
            raise ValueError("tabulated kernel needs at least 3 values")
        if step <= 0:
            raise ValueError("step must be positive")
        hi = lo + step * (len(values) - 1)
        if abs(hi + lo) > 1e-9 * max(1.0, abs(lo)):
            raise ValueError("tabulation grid must be symmetric about 0")
        self.base = base
        self.lo = float(lo)
        self.step = float(step)
        self.values = 0.5 * (values + values[::-1])
        self.values.setflags(write=False)

    @property
    def grid(self) -> np.ndarray:
        return self.lo + self.step * np.arange(len(self.values))

    @property
    def half_width(self) -> float:
        return -self.lo

    @property
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=self.step))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        # evaluate at |u| on the right half so that K(u) == K(-u) exactly
        mid = (len(self.values) - 1) // 2
        right = self.values[mid:]
        a = np.abs(u) / self.step
        a = np.minimum(a, len(right) - 1.0)
        i = np.minimum(a.astype(np.intp), len(right) - 2)
        frac = a - i
        out = right[i] * (1.0 - frac) + right[i + 1] * frac
        return np.where(np.abs(u) <= self.half_width, out, 0.0)

    def __repr__(self):
        return f"TabulatedKernel({self.base!r}, lo={self.lo}, step={self.step}, n={len(self.values)})"


class ScaledKernel:
    """``K_h(u) = K(u / h) / h``."""

    def __init__(self, kernel: KernelSpec, h: float):
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {h}")
        self.kernel = kernel
        self.h = float(h)

    def __call__(self, u):
        return self.kernel(np.asarray(u, dtype=float) / self.h) / self.h


GAUSSIAN = PlainKernel("gaussian")
EPANECHNIKOV = PlainKernel("epanechnikov")


def get_kernel(name) -> KernelSpec:
    """Resolve ``"gaussian"`` / ``"epanechnikov"`` (or pass a kernel through)."""
    if isinstance(name, KernelSpec):
        return name
    return PlainKernel(str(name))


def eval_kernel(k: KernelSpec, u):
    return k(u)


def _as_mixture(k: KernelSpec) -> GaussianMixture | None:
    if isinstance(k, GaussianMixture):
        return k
    if isinstance(k, PlainKernel) and k.base == "gaussian":
        return GaussianMixture([(1, 1)])
    return None


def _tabulate(k: KernelSpec, step: float | None = None) -> TabulatedKernel:
    if isinstance(k, TabulatedKernel):
        return k
    half = k.half_width
    if step is None:
        step = 2.0 * half / TABLE_POINTS
    n_half = int(math.ceil(half / step))
    grid = step * np.arange(-n_half, n_half + 1)
    return TabulatedKernel(k.base, grid[0], step, k(grid))


def convolve(a: KernelSpec, b: KernelSpec, method: str = "auto") -> KernelSpec:
    """Convolution ``a * b``.

    Gaussian mixtures convolve in closed form (variances add). Otherwise, or
    with ``method="grid"``, both operands are tabulated on a common step and
    the convolution integral is done by trapezoid quadrature.
    """
    if method not in ("auto", "grid"):
        raise ValueError(f"unknown method {method!r}")
    ma, mb = _as_mixture(a), _as_mixture(b)
    if method == "auto" and ma is not None and mb is not None:
        return GaussianMixture(
            (ca * cb, va + vb) for ca, va in ma.terms for cb, vb in mb.terms
        )

    steps = [k.step for k in (a, b) if isinstance(k, TabulatedKernel)]
    if len(steps) == 2 and abs(steps[0] - steps[1]) > _STEP_RTOL * max(steps):
        raise ValueError(
            f"tabulated kernels have incompatible steps {steps[0]:g} and {steps[1]:g}"
        )
    if steps:
        step = steps[0]
    else:
        step = min(2.0 * a.half_width, 2.0 * b.half_width) / TABLE_POINTS
    ta, tb = _tabulate(a, step), _tabulate(b, step)
    # both tables vanish at their ends, so the Riemann sum is the trapezoid rule
    values = fftconvolve(ta.values, tb.values) * step
    return TabulatedKernel(a.base, ta.lo + tb.lo, step, values)


def _twice_minus_square(k: KernelSpec) -> KernelSpec:
    kk = convolve(k, k)
    if isinstance(kk, GaussianMixture):
        mk = _as_mixture(k)
        return GaussianMixture([(2 * c, v) for c, v in mk.terms] + [(-c, v) for c, v in kk.terms])
    tk = _tabulate(k, kk.step)
    pad = (len(kk.values) - len(tk.values)) // 2
    doubled = np.pad(2.0 * tk.values, pad)
    return TabulatedKernel(k.base, kk.lo, kk.step, doubled - kk.values)


def higher_order_kernel(base: KernelSpec, r: int) -> KernelSpec:
    """Order-2(r+1) kernel from ``K_r = 2 K_{r-1} - K_{r-1} * K_{r-1}``, ``K_0 = base``."""
    if r < 0 or int(r) != r:
        raise ValueError(f"r must be a nonnegative integer, got {r}")
    if not isinstance(base, PlainKernel):
        raise ValueError("higher_order_kernel needs a plain base kernel")
    k: KernelSpec = base
    for _ in range(int(r)):
        k = _twice_minus_square(k)
    return k


def _double_factorial(n: int) -> int:
    return math.prod(range(n, 0, -2)) if n > 0 else 1


def _adaptive_trapezoid(f, lo, hi, tol=1e-13, max_level=22):
    n = 64
    x = np.linspace(lo, hi, n + 1)
    prev = np.trapezoid(f(x), x)
    while n < (1 << max_level):
        n *= 2
        x = np.linspace(lo, hi, n + 1)
        cur = np.trapezoid(f(x), x)
        if abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    return cur


def kernel_moment(k: KernelSpec, p: int) -> float:
    """``int u^p K(u) du``; exact for Gaussian mixtures, quadrature otherwise."""
    if p < 0 or p > 8 and not isinstance(_as_mixture(k), GaussianMixture):
        raise ValueError(f"moment order must be in 0..8, got {p}")
    mix = _as_mixture(k)
    if mix is not None:
        if p % 2:
            return 0.0
        dfact = _double_factorial(p - 1)
        return float(sum(c * v ** (p // 2) for c, v in mix.terms) * dfact)
    if isinstance(k, TabulatedKernel):
        grid = k.grid
        return float(np.trapezoid(grid**p * k.values, grid))
    if p % 2:
        return 0.0
    return float(_adaptive_trapezoid(lambda u: u**p * k(u), -k.half_width, k.half_width))
