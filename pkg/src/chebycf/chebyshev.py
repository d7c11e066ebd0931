"""Chebyshev polynomials, interpolation, the plateau target and polynomial graph filters."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from chebycf.sparse import NormalizedGraph, apply_rescaled_laplacian


def chebyshev_T(k: int, x):
    """First-kind Chebyshev polynomial ``T_k(x)`` by the three-term recurrence.

    Works elementwise on arrays.
    """
    if k < 0:
        raise ValueError("k must be non-negative")
    x = np.asarray(x, dtype=np.float64)
    t_prev, t = np.ones_like(x), x
    if k == 0:
        return t_prev if t_prev.ndim else float(t_prev)
    for _ in range(k - 1):
        t_prev, t = t, 2.0 * x * t - t_prev
    return t if t.ndim else float(t)


def chebyshev_nodes(k: int) -> np.ndarray:
    """The ``k`` roots of ``T_k``, in increasing order."""
    if k < 1:
        raise ValueError("need at least one node")
    i = np.arange(1, k + 1)
    return np.cos((2 * k + 1 - 2 * i) / (2 * k) * np.pi)


def plateau(lam, phi: float):
    """Plateau transfer function on the rescaled spectrum [-1, 1].

    Equals 1 at -1, 1/2 at 0 and 0 at 1; ``phi`` sets how flat the middle is.
    """
    if not phi > 0:
        raise ValueError(f"phi must be positive, got {phi}")
    lam = np.asarray(lam, dtype=np.float64)
    # np.abs keeps non-integer powers on the real branch
    mag = 0.5 * np.abs(lam) ** phi
    out = np.where(lam < 0, 0.5 + mag, 0.5 - mag)
    return out if out.ndim else float(out)


def interpolation_coefficients(target: Callable, order: int) -> np.ndarray:
    """Coefficients ``c_0..c_K`` of the order-``K`` Chebyshev interpolant of ``target``.

    ``target`` is sampled at the ``K + 1`` roots of ``T_{K+1}``; the resulting
    polynomial agrees with it exactly at those points.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    nodes = chebyshev_nodes(order + 1)
    try:
        values = np.asarray(target(nodes), dtype=np.float64)
    except TypeError:
        values = None
    if values is None or values.shape != nodes.shape:
        values = np.array([float(target(x)) for x in nodes])

    coeffs = np.empty(order + 1)
    for k in range(order + 1):
        a_k = 1.0 if k == 0 else 2.0
        coeffs[k] = a_k / (order + 1) * np.sum(values * chebyshev_T(k, nodes))
    return coeffs


def chebyshev_eval(coeffs, x):
    """Evaluate ``sum_k c_k T_k(x)`` at scalar or array ``x``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    t_prev, t = np.ones_like(x), x
    for k, c in enumerate(coeffs):
        if k == 0:
            out = out + c * t_prev
        elif k == 1:
            out = out + c * t
        else:
            t_prev, t = t, 2.0 * x * t - t_prev
            out = out + c * t
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChebyFilterSpec:
    """A polynomial filter ``sum_k c_k T_k(2 L* - I)``.

    ``target`` records what the coefficients were fitted to, e.g.
    ``"plateau(phi=4)"``.
    """

    coefficients: np.ndarray
    target: str = "custom"
    phi: float | None = None

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty vector")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def transfer(self, lam_rescaled):
        """Filter response at rescaled frequencies in [-1, 1]."""
        return chebyshev_eval(self.coefficients, lam_rescaled)


def plateau_filter_spec(phi: float, order: int = 8) -> ChebyFilterSpec:
    coeffs = interpolation_coefficients(lambda x: plateau(x, phi), order)
    return ChebyFilterSpec(coefficients=coeffs, target=f"plateau(phi={phi:g})", phi=float(phi))


def chebyshev_terms(g: NormalizedGraph, x, order: int) -> Iterator[np.ndarray]:
    """Yield ``T_k(L~) x`` for ``k = 0..order``, keeping three signals alive.

    Uses exactly ``order`` applications of the rescaled Laplacian.
    """
    x = np.asarray(x, dtype=np.float64)
    t_prev = x
    yield t_prev
    if order == 0:
        return
    t = apply_rescaled_laplacian(g, x)
    yield t
    for _ in range(order - 1):
        t_prev, t = t, 2.0 * apply_rescaled_laplacian(g, t) - t_prev
        yield t


def combine_terms(coeffs, terms) -> np.ndarray:
    """``sum_k c_k t_k`` accumulated in index order."""
    out = None
    for c, t in zip(coeffs, terms):
        out = c * t if out is None else out + c * t
    return out


def apply_chebyshev_filter(spec: ChebyFilterSpec, g: NormalizedGraph, x) -> np.ndarray:
    """Apply the polynomial filter to item signal(s) ``x`` in ``O(K nnz(R))``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[0] != g.num_items:
        raise ValueError(f"expected leading dimension {g.num_items}, got shape {x.shape}")
    return combine_terms(spec.coefficients, chebyshev_terms(g, x, spec.order))


def transfer_samples(spec: ChebyFilterSpec, points: int = 1001) -> tuple[np.ndarray, np.ndarray]:
    """Uniform samples of the filter response over [-1, 1]."""
    lam = np.linspace(-1.0, 1.0, points)
    return lam, np.asarray(spec.transfer(lam))


def format_transfer_csv(lam, weight) -> str:
    lines = ["lambda,weight"]
    lines += [f"{a:.12g},{_fmt(b)}" for a, b in zip(lam, weight)]
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    # round-off below 1e-12 is noise from the interpolation sums
    s = f"{v:.12g}"
    return "0" if s in ("-0", "0") or (abs(v) < 1e-13 and not math.isnan(v)) else s
