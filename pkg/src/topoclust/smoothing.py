"""Weighted Fourier series (heat-kernel) smoothing and dynamic correlation.

A signal on ``[0, 1]`` is expanded in the cosine basis ``psi_0 = 1``,
``psi_l = sqrt(2) cos(l pi t)`` and each coefficient is attenuated by
``exp(-l^2 pi^2 s)``. The result solves the heat equation with the signal as
initial condition, both on the interval and, equivalently, on the circle of
circumference 2 after mirror reflection, which is why no explicit padding
is needed at the ends.

``T`` samples are placed at the cell midpoints ``(i + 0.5) / T``. On that
grid the cosine basis up to degree ``T - 1`` is discretely orthogonal, the
zeroth coefficient is the plain sample mean, and infinite bandwidth reduces
the dynamic correlation to the ordinary Pearson correlation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateVariance, NoRoot, RankDeficient, ShapeMismatch, ValidationError, ZeroBandwidth

VARIANCE_FLOOR = 1e-12


def sample_grid(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


def cosine_basis(t, degree: int) -> np.ndarray:
    """Matrix ``B[i, l] = psi_l(t_i)`` for ``l = 0..degree``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ell = np.arange(degree + 1)
    basis = np.sqrt(2.0) * np.cos(np.pi * np.outer(t, ell))
    basis[:, 0] = 1.0
    return basis


def attenuation(degree: int, s: float) -> np.ndarray:
    ell = np.arange(degree + 1)
    return np.exp(-(ell**2) * np.pi**2 * s)


def fit_coefficients(signal, degree: int, t=None) -> np.ndarray:
    """Least-squares cosine coefficients of ``signal`` (one column per channel)."""
    y = np.asarray(signal, dtype=float)
    n = y.shape[0]
    if n < degree + 1:
        raise RankDeficient(f"{n} samples cannot determine {degree + 1} coefficients")
    t = sample_grid(n) if t is None else np.asarray(t, dtype=float)
    coef, *_ = np.linalg.lstsq(cosine_basis(t, degree), y, rcond=None)
    return coef


def rescale_unit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Affinely map each column onto ``[0, 1]``; constant columns become 0.

    Returns ``(scaled, offset, span)`` with ``x = offset + span * scaled``.
    """
    x = np.asarray(x, dtype=float)
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    return (x - lo) / safe, lo, span


@dataclass
class SmoothedSeries:
    """Cosine-series fit of one or more channels sampled on a uniform grid.

    ``samples`` are the (possibly rescaled) values that were fitted; they are
    kept because kernel correlations need the series of products of channels.
    """

    coefficients: np.ndarray
    degree: int
    sample_grid: np.ndarray
    samples: np.ndarray
    bandwidth: float = 0.0
    offset: np.ndarray | None = None
    span: np.ndarray | None = None
    names: list[str] = field(default_factory=list)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def constant_channels(self) -> np.ndarray:
        return np.ptp(self.samples, axis=0) == 0

    def evaluate(self, t, s: float | None = None) -> np.ndarray:
        s = self.bandwidth if s is None else s
        return cosine_basis(t, self.degree) @ (attenuation(self.degree, s)[:, None] * self.coefficients)

    def channel(self, i: int) -> "SmoothedSeries":
        sel = slice(i, i + 1)
        return SmoothedSeries(
            self.coefficients[:, sel],
            self.degree,
            self.sample_grid,
            self.samples[:, sel],
            self.bandwidth,
            None if self.offset is None else self.offset[sel],
            None if self.span is None else self.span[sel],
            self.names[sel],
        )


def fit_series(signals, degree: int | None = None, rescale: bool = True, names=None) -> SmoothedSeries:
    """Fit every channel of a ``T x p`` array (or a 1-D signal).

    ``degree`` defaults to ``T - 1``, the largest degree the samples determine.
    """
    x = np.asarray(signals, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    degree = n - 1 if degree is None else degree
    offset = span = None
    if rescale:
        x, offset, span = rescale_unit(x)
    grid = sample_grid(n)
    coef = fit_coefficients(x, degree, grid)
    names = list(names) if names is not None else [str(i) for i in range(x.shape[1])]
    return SmoothedSeries(coef, degree, grid, x, 0.0, offset, span, names)


def smooth(series: SmoothedSeries, t, s: float) -> np.ndarray:
    """Heat-diffused value of every channel at times ``t`` and diffusion time ``s``."""
    if s < 0:
        raise ValidationError("bandwidth must be non-negative")
    return series.evaluate(t, s)


def diffuse(coefficients, degree: int, s: float) -> np.ndarray:
    """Attenuate coefficients by diffusion time ``s`` (composes additively in ``s``)."""
    c = np.asarray(coefficients, dtype=float)
    att = attenuation(degree, s)
    return att.reshape((-1,) + (1,) * (c.ndim - 1)) * c


def heat_kernel(t, t_prime, s: float, degree: int):
    """Truncated series ``K_s(t, t') = sum_l exp(-l^2 pi^2 s) psi_l(t) psi_l(t')``."""
    if s <= 0:
        raise ZeroBandwidth("heat kernel needs s > 0 for pointwise evaluation")
    a = cosine_basis(t, degree) * attenuation(degree, s)
    b = cosine_basis(t_prime, degree)
    k = a @ b.T
    if np.ndim(t) == 0 and np.ndim(t_prime) == 0:
        return float(k[0, 0])
    if np.ndim(t_prime) == 0:
        return k[:, 0]
    if np.ndim(t) == 0:
        return k[0]
    return k


def smoothing_operator(n: int, t_eval, s: float, degree: int | None = None) -> np.ndarray:
    """Matrix ``S`` with ``S @ samples`` = heat-smoothed values at ``t_eval``."""
    degree = n - 1 if degree is None else degree
    if n < degree + 1:
        raise RankDeficient(f"{n} samples cannot determine {degree + 1} coefficients")
    fit = np.linalg.pinv(cosine_basis(sample_grid(n), degree))
    return (cosine_basis(t_eval, degree) * attenuation(degree, s)) @ fit


def boxcar_operator(n: int, t_eval, window: int) -> np.ndarray:
    """Uniform weights over ``window`` consecutive samples around each ``t``.

    The window is centred on the sample nearest ``t`` and shifted inwards at
    the ends so it always holds exactly ``window`` samples.
    """
    if not 1 <= window <= n:
        raise ValidationError(f"window must lie in 1..{n}")
    t_eval = np.atleast_1d(np.asarray(t_eval, dtype=float))
    centre = np.clip(np.rint(t_eval * n - 0.5).astype(int), 0, n - 1)
    start = np.clip(centre - window // 2, 0, n - window)
    op = np.zeros((t_eval.size, n))
    for g, a in enumerate(start):
        op[g, a : a + window] = 1.0 / window
    return op


@dataclass
class CorrelationField:
    """Kernel correlation evaluated on a time grid.

    ``degenerate`` marks grid points where a variance fell below the floor;
    the correlation there is reported as 0.
    """

    values: np.ndarray
    t_grid: np.ndarray
    bandwidth: float
    degenerate: np.ndarray


def _weighted_correlation(op: np.ndarray, x: np.ndarray, floor: float):
    """Correlation matrices ``(G, p, p)`` under the weights in ``op`` rows."""
    mu = op @ x
    second = np.einsum("gt,ti,tj->gij", op, x, x)
    cov = second - mu[:, :, None] * mu[:, None, :]
    var = np.diagonal(cov, axis1=1, axis2=2)
    bad = var < floor
    sd = np.sqrt(np.where(bad, 1.0, var))
    corr = cov / (sd[:, :, None] * sd[:, None, :])
    mask = bad[:, :, None] | bad[:, None, :]
    corr[mask] = 0.0
    return corr, mask


def _check_degenerate(mask: np.ndarray, max_fraction: float | None):
    if max_fraction is None or mask.size == 0:
        return
    frac = float(mask.mean())
    if frac > max_fraction:
        raise DegenerateVariance(f"variance below floor on {frac:.1%} of the grid")


def _operator(n, t_grid, s, kernel, window, degree):
    if kernel == "heat":
        return smoothing_operator(n, t_grid, s, degree)
    if kernel == "boxcar":
        if window is None:
            raise ValidationError("boxcar kernel needs a window length")
        return boxcar_operator(n, t_grid, window)
    raise ValidationError(f"unknown kernel {kernel!r}")


def dynamic_correlation(
    x: SmoothedSeries,
    y: SmoothedSeries,
    t_grid,
    s: float,
    *,
    kernel: str = "heat",
    window: int | None = None,
    floor: float = VARIANCE_FLOOR,
    max_degenerate_fraction: float | None = None,
) -> CorrelationField:
    """Window-free correlation of two single-channel series at times ``t_grid``.

    With the heat kernel the products ``x*y``, ``x*x`` and ``y*y`` are
    expanded in the cosine basis to the same degree as the inputs and
    diffused with them. ``kernel="boxcar"`` swaps in uniform weights over
    ``window`` samples, which reproduces a sliding-window Pearson correlation.
    """
    if x.samples.shape[0] != y.samples.shape[0] or x.degree != y.degree:
        raise ShapeMismatch("series must share the sample grid and degree")
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    xs, ys = x.samples[:, 0], y.samples[:, 0]
    if kernel == "heat":
        prods = np.column_stack([xs, ys, xs * ys, xs * xs, ys * ys])
        coef = fit_coefficients(prods, x.degree, x.sample_grid)
        mx, my, mxy, mxx, myy = (cosine_basis(t_grid, x.degree) @ diffuse(coef, x.degree, s)).T
    else:
        op = _operator(len(xs), t_grid, s, kernel, window, x.degree)
        mx, my, mxy, mxx, myy = (op @ np.column_stack([xs, ys, xs * ys, xs * xs, ys * ys])).T
    vx, vy = mxx - mx**2, myy - my**2
    bad = (vx < floor) | (vy < floor)
    denom = np.sqrt(np.where(bad, 1.0, vx * vy))
    w = np.where(bad, 0.0, (mxy - mx * my) / denom)
    _check_degenerate(bad, max_degenerate_fraction)
    return CorrelationField(w, t_grid, s, bad)


def correlation_matrices(
    samples,
    t_grid,
    s: float,
    *,
    kernel: str = "heat",
    window: int | None = None,
    degree: int | None = None,
    floor: float = VARIANCE_FLOOR,
    max_degenerate_fraction: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """All pairwise kernel correlations of a ``T x p`` array at once.

    Returns ``(corr, degenerate)`` of shape ``(len(t_grid), p, p)``. Equal to
    :func:`dynamic_correlation` pair by pair, but the smoothing is applied as
    a single linear operator on the samples.
    """
    x = np.asarray(samples, dtype=float)
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    op = _operator(x.shape[0], t_grid, s, kernel, window, degree)
    corr, mask = _weighted_correlation(op, x, floor)
    corr = 0.5 * (corr + corr.transpose(0, 2, 1))
    off = ~np.eye(x.shape[1], dtype=bool)
    _check_degenerate(mask[:, off], max_degenerate_fraction)
    return corr, mask


def kernel_fwhm(s: float, degree: int, centre: float = 0.5) -> float:
    """Full width at half maximum of ``K_s(., centre)``.

    Returns ``inf`` when the kernel never drops to half its peak inside the
    interval (the nearly uniform regime).
    """
    reach = min(centre, 1.0 - centre)
    u = np.linspace(0.0, reach, max(4 * degree, 2048) + 1)
    k = heat_kernel(centre + u, centre, s, degree)
    half = k[0] / 2.0
    below = np.flatnonzero(k <= half)
    if below.size == 0:
        return np.inf
    i = below[0]
    f = lambda v: heat_kernel(centre + v, centre, s, degree) - half  # noqa: E731
    return 2.0 * brentq(f, u[i - 1], u[i], xtol=1e-15)


def bandwidth_from_window(window_trs: int, total_trs: int, degree: int | None = None) -> float:
    """Diffusion time whose kernel FWHM equals a sliding window's width.

    The window spans ``window_trs / total_trs`` of the unit interval. The
    kernel is truncated at ``degree`` (default ``total_trs - 1``) and the
    width matched by root finding on its numerically measured FWHM.
    """
    if not 0 < window_trs <= total_trs:
        raise ValidationError("need 0 < window_trs <= total_trs")
    degree = total_trs - 1 if degree is None else degree
    width = window_trs / total_trs
    # The kernel flattens out completely once exp(-4 pi^2 s) < 1/6 or so.
    lo, hi = 1e-9, 0.1

    def gap(log_s):
        fw = kernel_fwhm(np.exp(log_s), degree)
        return (fw if np.isfinite(fw) else 2.0) - width

    a, b = np.log(lo), np.log(hi)
    ga, gb = gap(a), gap(b)
    if ga > 0 or gb < 0:
        raise NoRoot(f"no bandwidth in [{lo:g}, {hi:g}] gives FWHM {width:.4g} at degree {degree}")
    return float(np.exp(brentq(gap, a, b, xtol=1e-12)))
