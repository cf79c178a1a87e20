"""Sphere/cube intersection geometry used by the volume quadrature paths.

For a diagonal form the box constraint separates from the radial variables
of the positive and negative eigenspaces, so shell volumes reduce to a 2-D
integral of the product of two "sphere cap area" profiles:

    A_p(rho) = surface area of the sphere of radius rho in R^p clipped to
               the unit cube [-1, 1]^p.

A_p is built once per dimension on a dense radial grid by the slice
recursion A_p(rho) = 2 rho Int_0^phimax A_{p-1}(rho cos phi) dphi and
cached at module level (it is scale invariant: the cube [-r, r]^p version
is r^(p-1) A_p(rho/r)).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

_GRID_N = 8192
_GL_NODES = 64


def _gl(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=16)
def area_grid(p: int) -> tuple[np.ndarray, np.ndarray]:
    """(rho, A_p(rho)) for the unit cube, rho on [0, sqrt(p)].

    The phi-integral of the slice recursion is split at the kinks of
    A_{p-1}(rho cos phi) (rho cos phi = sqrt(k)) so Gauss-Legendre sees a
    smooth integrand on every piece.
    """
    if p < 1:
        raise ValueError("dimension must be >= 1")
    kinks = np.sqrt(np.arange(1, p + 1, dtype=float))
    rho = np.unique(np.concatenate([
        np.linspace(0.0, math.sqrt(p), _GRID_N + 1),
        np.concatenate([k + np.array([-1e-9, 0.0, 1e-9]) for k in kinks]),
    ]))
    rho = rho[(rho >= 0) & (rho <= math.sqrt(p) + 1e-15)]
    if p == 1:
        return rho, np.where(rho <= 1.0, 2.0, 0.0)
    prev_rho, prev_a = area_grid(p - 1)
    x, w = _gl(_GL_NODES)
    safe = np.maximum(rho, 1e-300)
    phimax = np.where(rho <= 1.0, math.pi / 2.0, np.arcsin(np.minimum(1.0, 1.0 / safe)))
    # breakpoints where rho*cos(phi) crosses sqrt(k), clipped to [0, phimax]
    cuts = [np.zeros_like(rho)]
    for k in range(p - 1, 0, -1):
        cuts.append(np.clip(np.arccos(np.minimum(1.0, math.sqrt(k) / safe)), 0.0, phimax))
    cuts.append(phimax)
    cuts = np.sort(np.stack(cuts, axis=1), axis=1)
    integral = np.zeros_like(rho)
    for i in range(cuts.shape[1] - 1):
        lo, hi = cuts[:, i], cuts[:, i + 1]
        width = hi - lo
        phi = lo[:, None] + 0.5 * width[:, None] * (x[None, :] + 1.0)
        vals = np.interp((rho[:, None] * np.cos(phi)).ravel(), prev_rho, prev_a,
                         right=0.0).reshape(phi.shape)
        integral += 0.5 * width * (vals * w[None, :]).sum(axis=1)
    return rho, 2.0 * rho * integral


@lru_cache(maxsize=16)
def cumulative_grid(p: int) -> tuple[np.ndarray, np.ndarray]:
    """(rho, G_p(rho)) with G_p = Int_0^rho A_p, so G_p(sqrt(p)) = 2^p."""
    rho, a = area_grid(p)
    g = np.concatenate([[0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * np.diff(rho))])
    return rho, g


def ball_cube_volume(p: int, rho: np.ndarray, r: float) -> np.ndarray:
    """vol(ball of radius rho  intersect  cube [-r, r]^p), vectorized in rho."""
    grid, g = cumulative_grid(p)
    rho = np.asarray(rho, dtype=float)
    return r ** p * np.interp(np.clip(rho / r, 0.0, math.sqrt(p)), grid, g)


def sphere_cube_area(p: int, rho: np.ndarray, r: float) -> np.ndarray:
    grid, a = area_grid(p)
    rho = np.asarray(rho, dtype=float)
    return r ** (p - 1) * np.interp(rho / r, grid, a, right=0.0)


def mixed_shell_volume(p: int, q: int, a: float, b: float, r: float,
                       n_grid: int = 32769) -> float:
    """vol{y in [-r,r]^(p+q) : a < |y_+|^2 - |y_-|^2 < b} for signature (p, q).

    Definite cases (q == 0 or p == 0) reduce to radial differences; the
    mixed case integrates the negative-radius profile against the clipped
    positive-radius cumulative volume.
    """
    if b <= a:
        return 0.0
    if q == 0:
        hi = math.sqrt(max(min(b, p * r * r), 0.0)) if b > 0 else 0.0
        lo = math.sqrt(max(a, 0.0))
        if hi <= lo:
            return 0.0
        return float(ball_cube_volume(p, np.array([hi]), r) - ball_cube_volume(p, np.array([lo]), r))
    if p == 0:
        return mixed_shell_volume(q, 0, -b, -a, r, n_grid)

    vmax = math.sqrt(q) * r
    v = np.linspace(0.0, vmax, n_grid)
    aq = sphere_cube_area(q, v, r)
    v2 = v * v
    hi = np.sqrt(np.maximum(v2 + b, 0.0))
    lo = np.sqrt(np.maximum(v2 + a, 0.0))
    inner = ball_cube_volume(p, hi, r) - ball_cube_volume(p, lo, r)
    return float(np.trapezoid(aq * inner, v))


def cone_coefficient(p: int, q: int) -> float:
    """Int A_p(s) A_q(s) / (2s) ds over the unit cube profiles (p, q >= 1).

    This is the light-cone surface integral of 1/|grad| for the normalized
    signature form on the unit box; divergent for p + q < 3.
    """
    grid_p, ap = area_grid(p)
    grid_q, aq = area_grid(q)
    smax = min(grid_p[-1], grid_q[-1])
    s = np.linspace(0.0, smax, 200001)[1:]
    f = np.interp(s, grid_p, ap, right=0.0) * np.interp(s, grid_q, aq, right=0.0) / (2.0 * s)
    return float(np.trapezoid(f, s) + 0.5 * f[0] * s[0])  # s^(d-3) integrand, finite at 0 for d>=3


def interval_intersection_length(lo1, hi1, lo2, hi2):
    """Length of [lo1,hi1] cap [lo2,hi2], vectorized."""
    return np.maximum(0.0, np.minimum(hi1, hi2) - np.maximum(lo1, lo2))
