"""Lattice bases, LLL reduction, exact successive minima, alpha-characteristics.

Everything works on generator matrices whose *columns* span the lattice.
Enumeration is Fincke-Pohst on the Cholesky factor of the Gram matrix,
preceded by LLL so that search radii stay tight.  Witness vectors are
integer coordinates with respect to the original generators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, NumericalBreakdown

DEFAULT_ENUM_BUDGET = 20_000_000


@dataclass(frozen=True)
class LatticeBasis:
    generators: np.ndarray    # (n, k) columns
    gram: np.ndarray          # (k, k)
    det_lattice: float

    def __post_init__(self):
        self.generators.setflags(write=False)
        self.gram.setflags(write=False)

    @property
    def ambient_dim(self) -> int:
        return self.generators.shape[0]

    @property
    def rank(self) -> int:
        return self.generators.shape[1]


def basis_from_columns(cols) -> LatticeBasis:
    g = np.array(cols, dtype=float)
    gram = g.T @ g
    sign, logdet = np.linalg.slogdet(gram)
    if sign <= 0:
        raise NumericalBreakdown("generators are not linearly independent")
    return LatticeBasis(generators=g, gram=0.5 * (gram + gram.T),
                        det_lattice=float(math.exp(0.5 * logdet)))


def basis_from_rows(rows) -> LatticeBasis:
    return basis_from_columns(np.array(rows, dtype=float).T)


@dataclass(frozen=True)
class MinimaProfile:
    minima: tuple            # M_1 <= ... <= M_l
    witnesses: np.ndarray    # (k, l) integer coordinate columns

    def __post_init__(self):
        self.witnesses.setflags(write=False)


@dataclass(frozen=True)
class AlphaProfile:
    alphas: tuple            # alpha_0 .. alpha_k  (alpha_0 = 1)
    alpha_max: float
    mode: str


# ---------------------------------------------------------------- LLL

def _gso(b: np.ndarray):
    """Gram-Schmidt data of columns: orthogonal norms^2 and mu coefficients."""
    n, k = b.shape
    bstar = np.zeros((n, k))
    mu = np.zeros((k, k))
    norms2 = np.zeros(k)
    for i in range(k):
        v = b[:, i].copy()
        for j in range(i):
            mu[i, j] = (b[:, i] @ bstar[:, j]) / norms2[j]
            v -= mu[i, j] * bstar[:, j]
        bstar[:, i] = v
        norms2[i] = v @ v
        if norms2[i] < 1e-200:
            raise NumericalBreakdown("Gram-Schmidt norm collapsed")
    return bstar, mu, norms2


def lll_reduce(basis: LatticeBasis, delta: float = 0.99) -> LatticeBasis:
    """LLL reduction of the same lattice (size-reduced, Lovasz condition).

    Falls back to exact rational arithmetic if floating point breaks down.
    """
    b, _ = _lll_with_transform(basis, delta)
    return basis_from_columns(b)


def _lll_with_transform(basis: LatticeBasis, delta: float = 0.99):
    """Return (reduced_columns, U) with reduced = generators @ U, U unimodular."""
    if not 0.25 < delta < 1.0:
        raise ValueError("delta must lie in (0.25, 1)")
    try:
        return _lll_float(basis.generators, delta)
    except NumericalBreakdown:
        return _lll_exact(basis.generators, delta)


def _lll_float(gens: np.ndarray, delta: float):
    b = gens.astype(float).copy()
    n, k = b.shape
    u = np.eye(k, dtype=np.int64)
    _, mu, norms2 = _gso(b)
    i = 1
    guard = 0
    while i < k:
        guard += 1
        if guard > 100_000:
            raise NumericalBreakdown("LLL failed to terminate")
        for j in range(i - 1, -1, -1):
            if abs(mu[i, j]) > 0.5:
                r = round(mu[i, j])
                b[:, i] -= r * b[:, j]
                u[:, i] -= r * u[:, j]
                _, mu, norms2 = _gso(b)
        if norms2[i] >= (delta - mu[i, i - 1] ** 2) * norms2[i - 1]:
            i += 1
        else:
            b[:, [i - 1, i]] = b[:, [i, i - 1]]
            u[:, [i - 1, i]] = u[:, [i, i - 1]]
            _, mu, norms2 = _gso(b)
            i = max(i - 1, 1)
    return b, u


def _lll_exact(gens: np.ndarray, delta: float):
    """Textbook LLL over Fractions; slow but exact (floats are rationals)."""
    n, k = gens.shape
    b = [[Fraction(x) for x in gens[:, i]] for i in range(k)]
    u = [[Fraction(int(i == j)) for j in range(k)] for i in range(k)]
    deltaf = Fraction(delta).limit_denominator(10**6)

    def dot(x, y):
        return sum(a * c for a, c in zip(x, y))

    def gso():
        bstar, mu, norms = [], [[Fraction(0)] * k for _ in range(k)], []
        for i in range(k):
            v = list(b[i])
            for j in range(i):
                mu[i][j] = dot(b[i], bstar[j]) / norms[j]
                v = [a - mu[i][j] * c for a, c in zip(v, bstar[j])]
            bstar.append(v)
            norms.append(dot(v, v))
            if norms[i] == 0:
                raise NumericalBreakdown("dependent generators in exact LLL")
        return mu, norms

    mu, norms = gso()
    i = 1
    while i < k:
        for j in range(i - 1, -1, -1):
            if abs(mu[i][j]) > Fraction(1, 2):
                r = round(mu[i][j])
                b[i] = [a - r * c for a, c in zip(b[i], b[j])]
                u[i] = [a - r * c for a, c in zip(u[i], u[j])]
                mu, norms = gso()
        if norms[i] >= (deltaf - mu[i][i - 1] ** 2) * norms[i - 1]:
            i += 1
        else:
            b[i - 1], b[i] = b[i], b[i - 1]
            u[i - 1], u[i] = u[i], u[i - 1]
            mu, norms = gso()
            i = max(i - 1, 1)
    bout = np.array([[float(x) for x in col] for col in b]).T
    uout = np.array([[int(x) for x in col] for col in u]).T
    return bout, uout


# ------------------------------------------------- Fincke-Pohst enumeration

def _cholesky_upper(gram: np.ndarray) -> np.ndarray:
    try:
        low = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"Gram matrix not positive definite: {exc}")
    return low.T


def enumerate_shifted(gram: np.ndarray, radius2: float, shift: np.ndarray | None = None,
                      budget: int = DEFAULT_ENUM_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """All integer m with (m+shift)^T gram (m+shift) <= radius2, and the values.

    Includes m = 0.  Raises BudgetExceeded if the visited node count passes
    the budget.
    """
    r = _cholesky_upper(np.asarray(gram, dtype=float))
    k = r.shape[0]
    ofs = np.zeros(k) if shift is None else np.asarray(shift, dtype=float)
    out_vecs: list[np.ndarray] = []
    out_norms: list[np.ndarray] = []
    nodes = 0
    c = np.zeros(k, dtype=np.int64)
    eps = 1e-12 * max(radius2, 1.0)
    cap = radius2 + eps

    def descend(j: int, tail2: float):
        nonlocal nodes
        # sigma = sum_{l>=j, l>j contributions} R[j,l] (c[l]+ofs[l]), plus own offset
        sigma = float(r[j, j + 1:] @ (c[j + 1:] + ofs[j + 1:])) + r[j, j] * ofs[j]
        rem = cap - tail2
        if rem < 0:
            return
        half = math.sqrt(rem) / r[j, j]
        lo = math.ceil((-half) - sigma / r[j, j])
        hi = math.floor(half - sigma / r[j, j])
        if hi < lo:
            return
        nodes += hi - lo + 1
        if nodes > budget:
            raise BudgetExceeded(f"enumeration visited more than {budget} nodes")
        if j == 0:
            vals = np.arange(lo, hi + 1, dtype=np.int64)
            y = r[0, 0] * vals + sigma
            norms = tail2 + y * y
            keep = norms <= cap
            vals = vals[keep]
            if vals.size:
                block = np.tile(c, (vals.size, 1))
                block[:, 0] = vals
                out_vecs.append(block)
                out_norms.append(norms[keep])
            return
        for cj in range(lo, hi + 1):
            c[j] = cj
            y = r[j, j] * cj + sigma
            descend(j - 1, tail2 + y * y)
        c[j] = 0

    descend(k - 1, 0.0)
    if not out_vecs:
        return np.zeros((0, k), dtype=np.int64), np.zeros(0)
    return np.concatenate(out_vecs), np.concatenate(out_norms)


def enumerate_within(gram: np.ndarray, radius2: float,
                     budget: int = DEFAULT_ENUM_BUDGET) -> tuple[np.ndarray, np.ndarray]:
    """All integer c != 0 with c^T gram c <= radius2, and their norms^2.

    Both sign representatives are returned.
    """
    vecs, norms = enumerate_shifted(gram, radius2, shift=None, budget=budget)
    nz = np.any(vecs != 0, axis=1)
    return vecs[nz], norms[nz]


def _canonical_sign(vecs: np.ndarray) -> np.ndarray:
    """Flip each row so its first nonzero entry is positive."""
    out = vecs.copy()
    for i in range(out.shape[0]):
        row = out[i]
        nz = np.nonzero(row)[0]
        if nz.size and row[nz[0]] < 0:
            out[i] = -row
    return out


def _independent_greedy(vecs: np.ndarray, norms: np.ndarray, need: int):
    """Greedy independent selection by ascending (norm, lex) over exact integers."""
    order = sorted(range(len(norms)), key=lambda i: (round(norms[i], 12), tuple(vecs[i])))
    rows: list[list[Fraction]] = []  # row echelon over Q
    pivots: list[int] = []
    chosen: list[int] = []
    for idx in order:
        v = [Fraction(int(x)) for x in vecs[idx]]
        for row, piv in zip(rows, pivots):
            if v[piv] != 0:
                f = v[piv] / row[piv]
                v = [a - f * b for a, b in zip(v, row)]
        piv = next((j for j, x in enumerate(v) if x != 0), None)
        if piv is None:
            continue
        rows.append(v)
        pivots.append(piv)
        chosen.append(idx)
        if len(chosen) == need:
            break
    return chosen


def successive_minima(basis: LatticeBasis, norm: np.ndarray | None = None,
                      upto: int | None = None,
                      budget: int = DEFAULT_ENUM_BUDGET) -> MinimaProfile:
    """Exact successive minima M_1 <= ... (and witnesses) of the lattice.

    norm: optional positive matrix H; minima are then taken for sqrt(H[x]).
    upto: stop after this many minima (default: full rank).
    """
    k = basis.rank
    if k > 12:
        raise BudgetExceeded("successive minima enumeration capped at rank 12")
    need = k if upto is None else min(upto, k)
    gens = basis.generators
    if norm is not None:
        w = _cholesky_upper(np.asarray(norm, dtype=float))
        gens = w @ gens
        basis = basis_from_columns(gens)
    reduced, u = _lll_with_transform(basis)
    rnorms = np.sort(np.linalg.norm(reduced, axis=0))
    radius2 = float(rnorms[need - 1] ** 2) * (1 + 1e-12)
    red_basis = basis_from_columns(reduced)
    vecs, norms2 = enumerate_within(red_basis.gram, radius2, budget=budget)
    vecs = _canonical_sign(vecs)
    vecs, idx = np.unique(vecs, axis=0, return_index=True)
    norms2 = norms2[idx]
    chosen = _independent_greedy(vecs, norms2, need)
    if len(chosen) < need:
        raise NumericalBreakdown("enumeration radius missed the minima")  # unreachable
    minima = tuple(float(math.sqrt(max(norms2[i], 0.0))) for i in chosen)
    witnesses = (u @ vecs[chosen].T.astype(np.int64))
    return MinimaProfile(minima=minima, witnesses=witnesses)


def minima_surrogate_alpha(basis: LatticeBasis, l: int,
                           budget: int = DEFAULT_ENUM_BUDGET) -> float:
    """(M_1 ... M_l)^(-1), the standard stand-in for alpha_l."""
    prof = successive_minima(basis, upto=l, budget=budget)
    prod = 1.0
    for m in prof.minima[:l]:
        prod *= m
    return 1.0 / prod


def alpha_characteristic(basis: LatticeBasis, l: int, mode: str = "minima-surrogate",
                         budget: int = DEFAULT_ENUM_BUDGET) -> AlphaProfile:
    """alpha_l of the lattice: sup of 1/det over l-dimensional sublattices.

    minima-surrogate is exact up to a dimensional constant; exact-small
    brute-forces sublattices spanned by short vectors (rank <= 6 only) and
    exists to calibrate that constant.
    """
    k = basis.rank
    if not 0 <= l <= k:
        raise ValueError("l out of range")
    if l == 0:
        return AlphaProfile(alphas=(1.0,), alpha_max=1.0, mode=mode)
    if mode == "minima-surrogate":
        prof = successive_minima(basis, budget=budget)
        alphas = [1.0]
        prod = 1.0
        for m in prof.minima:
            prod *= m
            alphas.append(1.0 / prod)
        return AlphaProfile(alphas=tuple(alphas[:l + 1]), alpha_max=max(alphas[:l + 1]),
                            mode=mode)
    if mode == "exact-small":
        if k > 6:
            raise BudgetExceeded("exact-small alpha is restricted to rank <= 6")
        return _alpha_exact_small(basis, l, budget)
    raise ValueError(f"unknown mode {mode!r}")


def _alpha_exact_small(basis: LatticeBasis, l: int, budget: int) -> AlphaProfile:
    prof = successive_minima(basis, budget=budget)
    radius2 = (3.0 * prof.minima[min(l, len(prof.minima)) - 1]) ** 2
    vecs, norms2 = enumerate_within(basis.gram, radius2, budget=budget)
    vecs = _canonical_sign(vecs)
    vecs, idx = np.unique(vecs, axis=0, return_index=True)
    norms2 = norms2[idx]
    order = np.argsort(norms2)[:24]
    shorts = vecs[order]
    best = None
    gens = basis.generators
    for combo in itertools.combinations(range(len(shorts)), l):
        sub = gens @ shorts[list(combo)].T.astype(float)
        g = sub.T @ sub
        det = np.linalg.det(g)
        if det > 1e-18:
            d = math.sqrt(det)
            if best is None or d < best:
                best = d
    if best is None:
        raise NumericalBreakdown("no independent l-subset found")
    return AlphaProfile(alphas=(1.0,) * l + (1.0 / best,), alpha_max=1.0 / best,
                        mode="exact-small")


def dual_lattice(basis: LatticeBasis) -> LatticeBasis:
    """Dual basis D with generators^T @ D = identity (full rank only)."""
    g = basis.generators
    if g.shape[0] != g.shape[1]:
        raise NumericalBreakdown("dual lattice needs a full-rank square basis")
    return basis_from_columns(np.linalg.inv(g).T)


def count_in_ball(basis: LatticeBasis, mu: float,
                  budget: int = DEFAULT_ENUM_BUDGET) -> int:
    """Number of lattice vectors with Euclidean norm <= mu (zero included)."""
    if mu < 0:
        return 0
    vecs, _ = enumerate_within(basis.gram, float(mu) ** 2, budget=budget)
    return int(len(vecs)) + 1


def hermite_constant(d: int) -> float:
    """Hermite's constant, exact for d <= 8, Minkowski upper bound beyond."""
    exact_pow = {1: 1.0, 2: 4.0 / 3.0, 3: 2.0, 4: 4.0, 5: 8.0, 6: 64.0 / 3.0,
                 7: 64.0, 8: 256.0}
    if d in exact_pow:
        return exact_pow[d] ** (1.0 / d)
    return 4.0 / unit_ball_volume(d) ** (2.0 / d)


def unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def minkowski_constants(n: int) -> tuple[float, float]:
    """(c_minus, c_plus) with c_minus*det <= prod M_j <= c_plus*det."""
    omega = unit_ball_volume(n)
    return 2.0 ** n / (math.factorial(n) * omega), 2.0 ** n / omega
