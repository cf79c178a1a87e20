"""Lattice point counts and volumes of quadric shells inside boxes.

The shell is {x : a < Q[x+xi] < b} intersected with the box
C_r = {x : |L(x+xi)|_inf <= r}, L = Q+^(1/2).  Counts are exact for
rational forms (integer arithmetic after clearing denominators) and
guard-band bracketed otherwise: points whose value or box coordinate sits
within 1e-9 of a boundary are counted under both conventions, giving
(count_lo, count_hi).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _geometry, rng
from .errors import BoxTooLarge, BudgetExceeded, DivergentIntegral, MethodUnavailable, ZeroVolume
from .forms import GUARD_BAND, QuadForm, classify_rationality
from .lattices import enumerate_shifted

DEFAULT_COUNT_BUDGET = 2_000_000_000
MC_STRATA = 64
MC_BATCH = 1 << 20


@dataclass(frozen=True)
class ShellSpec:
    form: QuadForm
    a: float
    b: float
    r: float
    c0: float = 0.125

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("need a < b")
        if self.r < 0:
            raise ValueError("need r >= 0")
        if not 0 < self.c0 <= 0.125:
            raise ValueError("c0 must lie in (0, 1/8]")

    @property
    def admissible(self) -> bool:
        """Width condition |a|+|b| < c0 r^2 required by the error bounds."""
        return abs(self.a) + abs(self.b) < self.c0 * self.r ** 2


@dataclass(frozen=True)
class CountResult:
    count_lo: int
    count_hi: int
    volume: float = 0.0
    volume_ci: float = 0.0
    delta: float = float("nan")


# ------------------------------------------------------------- counting

def _diag_ranges(ell: np.ndarray, xi: np.ndarray, r: float) -> list[np.ndarray] | None:
    """Integer candidates per coordinate for |ell_i (m_i + xi_i)| <= r."""
    out = []
    for li, x in zip(ell, xi):
        half = r / li
        lo = math.ceil(-half - x)
        hi = math.floor(half - x)
        if hi < lo:
            return None
        out.append(np.arange(lo, hi + 1, dtype=np.int64))
    return out


def _split_coords(sizes: list[int]) -> tuple[list[int], list[int]]:
    """Partition coordinates into two groups with balanced grid sizes."""
    order = sorted(range(len(sizes)), key=lambda i: -sizes[i])
    ga, gb = [], []
    la = lb = 0.0
    for i in order:
        if la <= lb:
            ga.append(i)
            la += math.log(sizes[i])
        else:
            gb.append(i)
            lb += math.log(sizes[i])
    if not gb:
        gb.append(ga.pop())
    return ga, gb


def _group_values(coeffs: np.ndarray, xi: np.ndarray, ranges: list[np.ndarray],
                  budget: int) -> np.ndarray:
    """All values sum_i coeffs_i (m_i + xi_i)^2 over the grid of ranges."""
    vals = np.zeros(1)
    total = 1
    for c, x, rng_i in zip(coeffs, xi, ranges):
        total *= len(rng_i)
        if total > budget:
            raise BoxTooLarge(f"candidate grid exceeds budget {budget}")
        vals = (vals[:, None] + c * (rng_i[None, :] + x) ** 2).ravel()
    return vals


def _count_window(sorted_b: np.ndarray, vals_a: np.ndarray, lo: float, hi: float) -> int:
    """#{(va, vb) : lo < va + vb < hi} with strict inequalities."""
    hi_idx = np.searchsorted(sorted_b, hi - vals_a, side="left")
    lo_idx = np.searchsorted(sorted_b, lo - vals_a, side="right")
    return int(np.sum(hi_idx - lo_idx))


def _count_diagonal(spec: ShellSpec, budget: int) -> tuple[int, int]:
    form = spec.form
    diag = form.diag_entries
    ell = np.sqrt(np.abs(diag))
    xi = form.shift
    g = GUARD_BAND

    def run(r_eff: float, lo: float, hi: float) -> int:
        ranges = _diag_ranges(ell, xi, r_eff)
        if ranges is None:
            return 0
        sizes = [len(x) for x in ranges]
        ga, gb = _split_coords(sizes)
        va = _group_values(diag[ga], xi[ga], [ranges[i] for i in ga], budget)
        vb = _group_values(diag[gb], xi[gb], [ranges[i] for i in gb], budget)
        vb.sort()
        return _count_window(vb, va, lo, hi)

    # exact integer path: rational diagonal form, integer-compatible window
    rep = classify_rationality(form, 10**6)
    if rep.scale_to_integer is not None and np.all(xi == 0):
        t = rep.scale_to_integer
        coeffs = np.array([round(float(t) * v) for v in diag], dtype=np.int64)
        ranges = []
        for q_i in np.abs(diag):
            # |q_i| m^2 <= r^2 exactly, endpoints checked in exact arithmetic
            half = int(math.floor(spec.r / math.sqrt(q_i))) + 2
            while half >= 0 and Fraction(q_i) * half * half > Fraction(spec.r) ** 2:
                half -= 1
            if half < 0:
                return 0, 0
            ranges.append(np.arange(-half, half + 1, dtype=np.int64))
        sizes = [len(x) for x in ranges]
        ga, gb = _split_coords(sizes)

        def ivals(ids, rs):
            vals = np.zeros(1, dtype=np.int64)
            total = 1
            for i, rr in zip(ids, rs):
                total *= len(rr)
                if total > budget:
                    raise BoxTooLarge(f"candidate grid exceeds budget {budget}")
                vals = (vals[:, None] + coeffs[i] * rr[None, :] ** 2).ravel()
            return vals

        va = ivals(ga, [ranges[i] for i in ga])
        vb = ivals(gb, [ranges[i] for i in gb])
        vb.sort()
        # strict a < v < b for integer v: v > floor(t a) and v < ceil(t b)
        ilo = math.floor(Fraction(spec.a) * t)
        ihi = math.ceil(Fraction(spec.b) * t)
        hi_idx = np.searchsorted(vb, ihi - va, side="left")
        lo_idx = np.searchsorted(vb, ilo - va, side="right")
        n = int(np.sum(hi_idx - lo_idx))
        return n, n

    lo = run(spec.r - g, spec.a + g, spec.b - g)
    hi = run(spec.r + g, spec.a - g, spec.b + g)
    return lo, hi


def _count_general(spec: ShellSpec, budget: int) -> tuple[int, int]:
    form = spec.form
    d = form.dim
    g = GUARD_BAND
    radius2 = d * (spec.r + g) ** 2
    try:
        vecs, _ = enumerate_shifted(form.positive_part, radius2, shift=form.shift,
                                    budget=budget)
    except BudgetExceeded as exc:
        raise BoxTooLarge(str(exc))
    if vecs.size == 0:
        return 0, 0
    x = vecs.astype(float) + form.shift
    y = np.abs(x @ form.sqrt_positive.T).max(axis=1)
    v = np.einsum("ij,jk,ik->i", x, form.matrix, x)
    lo = int(np.sum((y <= spec.r - g) & (v > spec.a + g) & (v < spec.b - g)))
    hi = int(np.sum((y <= spec.r + g) & (v > spec.a - g) & (v < spec.b + g)))
    return lo, hi


def count_shell(spec: ShellSpec, budget: int = DEFAULT_COUNT_BUDGET) -> CountResult:
    """Exact/bracketed count of integer points in the shell inside the box."""
    if spec.r == 0:
        inside = 1 if (np.all(spec.form.shift == 0) and spec.a < 0 < spec.b) else 0
        return CountResult(count_lo=inside, count_hi=inside)
    if spec.form.is_diagonal:
        lo, hi = _count_diagonal(spec, budget)
    else:
        lo, hi = _count_general(spec, budget)
    return CountResult(count_lo=lo, count_hi=hi)


# ------------------------------------------------------------- volumes

def _mc_volume(spec: ShellSpec, budget: int, seed: int, threads: int = 1) -> tuple[float, float]:
    """Uniform sampling of the box, stratified over the first coordinate.

    Returns (volume, 95% Bernoulli CI half-width).  Deterministic for a
    given seed regardless of thread count.
    """
    form = spec.form
    d = form.dim
    r = spec.r
    n_total = int(budget)
    per = [n_total // MC_STRATA + (1 if k < n_total % MC_STRATA else 0)
           for k in range(MC_STRATA)]
    signs = np.sign(form.eigenvalues) if form.is_diagonal else None
    edges = np.linspace(-r, r, MC_STRATA + 1)

    def one_stratum(k: int) -> int:
        gen = rng.stream(seed, k)
        hits = 0
        left = per[k]
        while left > 0:
            n = min(left, MC_BATCH)
            y = gen.uniform(-r, r, size=(n, d))
            y[:, 0] = gen.uniform(edges[k], edges[k + 1], size=n)
            if signs is not None:
                sgn = np.sign(np.diag(form.matrix))
                vals = (y * y) @ sgn
            else:
                vals = np.einsum("ij,jk,ik->i", y, form.reflection, y)
            hits += int(np.sum((vals > spec.a) & (vals < spec.b)))
            left -= n
        return hits

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(one_stratum, range(MC_STRATA)))
    else:
        hits = sum(one_stratum(k) for k in range(MC_STRATA))

    boxvol = (2.0 * r) ** d / math.sqrt(form.det_abs)
    p = hits / n_total
    ci = 1.96 * math.sqrt(max(p * (1.0 - p), 0.0) / n_total)
    return boxvol * p, boxvol * ci


def _slice_volume_general(spec: ShellSpec, n_grid: int = 1025) -> float:
    """Direct slice integration for general forms, d <= 3.

    Integrates, over a grid of the outer coordinates, the closed-form
    length of the x_d section of the shell-and-box region.
    """
    form = spec.form
    d = form.dim
    if d > 3:
        raise MethodUnavailable("slice quadrature only for d <= 3")
    L = form.sqrt_positive
    Linv = np.linalg.inv(L)
    bounds = spec.r * np.sum(np.abs(Linv), axis=1) * (1 + 1e-12)
    q = form.matrix

    def section_len(outer: np.ndarray) -> np.ndarray:
        # outer: (N, d-1) values of x_1..x_{d-1}; returns section lengths in x_d
        n = outer.shape[0]
        lo = np.full(n, -bounds[d - 1])
        hi = np.full(n, bounds[d - 1])
        # box rows: |sum_j L[i,j] x_j| <= r  ->  linear in x_d
        for i in range(d):
            cj = L[i, d - 1]
            rest = outer @ L[i, : d - 1]
            if abs(cj) < 1e-300:
                feas = np.abs(rest) <= spec.r
                lo = np.where(feas, lo, 1.0)
                hi = np.where(feas, hi, 0.0)
                continue
            l1 = (-spec.r - rest) / cj
            l2 = (spec.r - rest) / cj
            lo = np.maximum(lo, np.minimum(l1, l2))
            hi = np.minimum(hi, np.maximum(l1, l2))
        # value: alpha t^2 + beta t + gamma in (a, b) with t = x_d
        alpha = q[d - 1, d - 1]
        beta = 2.0 * outer @ q[d - 1, : d - 1]
        gamma = np.einsum("ij,jk,ik->i", outer, q[: d - 1, : d - 1], outer)
        total = np.zeros(n)
        # solve on the two roots structure: measure {t in [lo,hi]: a < f(t) < b}
        tgrid_needed = np.maximum(hi - lo, 0.0) > 0
        idx = np.nonzero(tgrid_needed)[0]
        for i in idx:
            total[i] = _quad_window_length(alpha, beta[i], gamma[i], spec.a, spec.b,
                                           lo[i], hi[i])
        return total

    if d == 1:
        return _quad_window_length(float(q[0, 0]), 0.0, 0.0, spec.a, spec.b,
                                   -bounds[0], bounds[0])

    prev = None
    n = n_grid
    for _ in range(6):
        axes = [np.linspace(-bounds[i], bounds[i], n) for i in range(d - 1)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d - 1)
        vals = section_len(mesh).reshape([n] * (d - 1))
        out = vals
        for i in range(d - 1):
            out = np.trapezoid(out, axes[d - 2 - i], axis=-1)
        if prev is not None and abs(out - prev) <= 1e-6 * max(abs(out), 1e-12):
            return float(out)
        prev = out
        n = 2 * n - 1
    return float(prev)


def _quad_window_length(alpha: float, beta: float, gamma: float, a: float, b: float,
                        lo: float, hi: float) -> float:
    """Length of {t in [lo, hi] : a < alpha t^2 + beta t + gamma < b}."""
    if hi <= lo:
        return 0.0
    if alpha == 0.0:
        if beta == 0.0:
            return (hi - lo) if a < gamma < b else 0.0
        t1, t2 = (a - gamma) / beta, (b - gamma) / beta
        return float(_geometry.interval_intersection_length(lo, hi, min(t1, t2), max(t1, t2)))

    def below(c: float) -> list[tuple[float, float]]:
        # {t: alpha t^2 + beta t + gamma < c}
        disc = beta * beta - 4.0 * alpha * (gamma - c)
        if disc <= 0.0:
            return [] if alpha > 0 else [(lo, hi)]
        s = math.sqrt(disc)
        r1, r2 = (-beta - s) / (2 * alpha), (-beta + s) / (2 * alpha)
        r1, r2 = min(r1, r2), max(r1, r2)
        if alpha > 0:
            return [(r1, r2)]
        return [(-math.inf, r1), (r2, math.inf)]

    total = 0.0
    for lb, hb in below(b):
        seg_lo, seg_hi = max(lo, lb), min(hi, hb)
        if seg_hi <= seg_lo:
            continue
        length = seg_hi - seg_lo
        for la, ha in below(a):
            length -= max(0.0, min(seg_hi, ha) - max(seg_lo, la))
        total += max(length, 0.0)
    return total


def shell_volume(spec: ShellSpec, method: str = "quadrature",
                 budget: int = 10**7, seed: int = 0, threads: int = 1) -> tuple[float, float]:
    """Volume of the shell-in-box region; returns (volume, ci_half_width)."""
    if spec.r == 0:
        return 0.0, 0.0
    form = spec.form
    if method == "montecarlo":
        return _mc_volume(spec, budget, seed, threads)
    if method != "quadrature":
        raise MethodUnavailable(f"unknown volume method {method!r}")
    if form.is_diagonal:
        diag = form.diag_entries
        p = int(np.sum(diag > 0))
        qn = int(np.sum(diag < 0))
        w = _geometry.mixed_shell_volume(p, qn, spec.a, spec.b, spec.r)
        return w / math.sqrt(form.det_abs), 0.0
    if form.dim <= 3:
        return _slice_volume_general(spec), 0.0
    raise MethodUnavailable("quadrature path needs a diagonal form or d <= 3")


def relative_remainder(spec: ShellSpec, method: str = "auto", budget: int = 10**7,
                       seed: int = 0, threads: int = 1,
                       count_budget: int = DEFAULT_COUNT_BUDGET) -> CountResult:
    """Delta(r) = |count - volume| / volume with both ingredients stored."""
    if method == "auto":
        method = "quadrature" if (spec.form.is_diagonal or spec.form.dim <= 3) else "montecarlo"
    vol, ci = shell_volume(spec, method=method, budget=budget, seed=seed, threads=threads)
    if vol <= 0.0:
        raise ZeroVolume("shell volume vanishes; delta undefined")
    counts = count_shell(spec, budget=count_budget)
    delta = abs(counts.count_lo - vol) / vol
    return CountResult(count_lo=counts.count_lo, count_hi=counts.count_hi,
                       volume=vol, volume_ci=ci, delta=delta)


# ------------------------------------------------ light-cone coefficient

def lambda_coefficient(form: QuadForm, method: str = "cone-param",
                       budget: int = 10**7, seed: int = 0, omega: str = "box") -> float:
    """Leading volume coefficient: surface integral of 1/|grad Q| over the
    light cone inside the unit region (box C_1 by default)."""
    if form.is_definite:
        return 0.0
    if form.dim < 3:
        raise DivergentIntegral("light-cone integral diverges for d < 3")
    if method == "cone-param":
        if omega == "box":
            if not form.is_diagonal:
                raise MethodUnavailable("cone-param needs a diagonal form")
            diag = form.diag_entries
            p = int(np.sum(diag > 0))
            qn = int(np.sum(diag < 0))
            return _geometry.cone_coefficient(p, qn) / math.sqrt(form.det_abs)
        if omega == "ball":
            absw = np.abs(form.eigenvalues)
            if np.max(absw) - np.min(absw) > 1e-12 * np.max(absw):
                raise MethodUnavailable("ball cone-param needs equal |eigenvalues|")
            c = float(absw[0])
            p, qn = form.signature
            sp = _sphere_area(p)
            sq = _sphere_area(qn)
            d = form.dim
            return c ** (-d / 2.0) * sp * sq * (c / 2.0) ** ((d - 2) / 2.0) / (2.0 * (d - 2))
        raise MethodUnavailable(f"unknown omega {omega!r}")
    if method == "finite-difference":
        if omega != "box":
            raise MethodUnavailable("finite-difference implemented for the box")
        vols = {}
        for ridx, r in enumerate((8.0, 16.0)):
            lam_h = []
            for h in (0.04, 0.02):
                sp = ShellSpec(form, -h, h, r)
                if form.is_diagonal or form.dim <= 3:
                    v, _ = shell_volume(sp, "quadrature")
                else:
                    v, _ = shell_volume(sp, "montecarlo", budget=budget, seed=seed + ridx)
                lam_h.append(v / (2 * h * r ** (form.dim - 2)))
            vols[r] = (4 * lam_h[1] - lam_h[0]) / 3.0
        return 2 * vols[16.0] - vols[8.0]
    raise MethodUnavailable(f"unknown method {method!r}")


def _sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^(n-1)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
