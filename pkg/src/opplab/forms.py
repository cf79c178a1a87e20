"""Nondegenerate quadratic forms and their spectral companions.

A form is the symmetric matrix Q acting as Q[x] = <x, Qx>.  Everything
downstream consumes the derived objects built here: the positive part
Q+ (unique positive symmetric matrix with Q+^2 = Q^2), its square root
L = Q+^(1/2) defining the box coordinates, and the commuting reflection
S = Q Q+^(-1) with eigenvalues +-1.

Eigendecomposition is done with cyclic Jacobi rotations: dimensions stay
tiny (<= 12) and the quadratic convergence gives full double precision
without pulling in LAPACK behaviour differences across platforms.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np

from .errors import DegenerateForm, NotSymmetric

SYM_TOL = 1e-12
DEGENERACY_TOL = 1e-10
GUARD_BAND = 1e-9  # half-width of the boundary ambiguity band for counting

_SQRT_RE = re.compile(r"^([+-]?)sqrt\((\d+)\)$")


def jacobi_eigh(matrix: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and orthonormal eigenvectors of a symmetric matrix.

    Cyclic Jacobi iteration; returns (w, V) with matrix = V @ diag(w) @ V.T.
    Not sorted.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.array([a[0, 0]]), v
    scale = max(np.max(np.abs(a)), 1e-300)
    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * sum(a[p, q] ** 2 for p in range(n) for q in range(p + 1, n)))
        if off <= 1e-15 * scale * n:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    w = np.diag(a).copy()
    return w, v


@dataclass(frozen=True)
class QuadForm:
    """A nondegenerate symmetric form with its spectral data, immutable."""

    matrix: np.ndarray
    dim: int
    eigenvalues: np.ndarray       # sorted by |.| descending
    eigenvectors: np.ndarray      # columns matching eigenvalues
    signature: tuple[int, int]    # (positive count, negative count)
    q0: float                     # smallest |eigenvalue|
    q_max: float                  # largest |eigenvalue|
    det_abs: float
    positive_part: np.ndarray     # Q+
    sqrt_positive: np.ndarray     # L = Q+^(1/2)
    reflection: np.ndarray        # S = Q Q+^(-1)
    shift: np.ndarray             # xi, inhomogeneous offset (default 0)
    tags: tuple = ()              # ((i, j, "sqrt(2)"), ...) symbolic entry tags

    def __post_init__(self):
        self.matrix.setflags(write=False)
        self.positive_part.setflags(write=False)
        self.sqrt_positive.setflags(write=False)
        self.reflection.setflags(write=False)
        self.shift.setflags(write=False)

    # -- evaluation helpers (x may be a single vector or a (..., d) batch) --

    def value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.matrix, x)

    def plus_value(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.positive_part, x)

    def box_coords(self, x: np.ndarray) -> np.ndarray:
        """L x, the coordinates in which the box C_r is |.|_inf <= r."""
        return np.asarray(x, dtype=float) @ self.sqrt_positive.T

    @property
    def is_diagonal(self) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.all(off == 0.0))

    @property
    def diag_entries(self) -> np.ndarray:
        return np.diag(self.matrix)

    @property
    def is_definite(self) -> bool:
        return self.signature[0] == 0 or self.signature[1] == 0

    @property
    def is_indefinite(self) -> bool:
        return not self.is_definite

    def scaled(self, c: float) -> "QuadForm":
        return decompose(c * self.matrix, shift=self.shift, tags=self.tags)


@dataclass(frozen=True)
class SpectralReport:
    rationality_hint: str                      # integer-entries | rational-entries | irrational-or-unknown
    scale_to_integer: Fraction | None
    denominator_cap: int
    norm_used: str = "frobenius"


def decompose(matrix, shift=None, tags=()) -> QuadForm:
    """Build a QuadForm from a symmetric matrix; raises on asymmetry/degeneracy."""
    m = np.array(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotSymmetric("expected a square matrix")
    d = m.shape[0]
    scale = max(np.max(np.abs(m)), 1e-300)
    if np.max(np.abs(m - m.T)) > SYM_TOL * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-12")
    m = 0.5 * (m + m.T)

    if np.all(m == np.diag(np.diag(m))):
        # diagonal fast path keeps irrational entries bit-exact
        w = np.diag(m).copy()
        v = np.eye(d)
    else:
        w, v = jacobi_eigh(m)

    order = np.argsort(-np.abs(w), kind="stable")
    w = w[order]
    v = v[:, order]

    absw = np.abs(w)
    q_max = float(absw[0])
    q0 = float(absw[-1])
    if q0 < DEGENERACY_TOL * q_max or q_max == 0.0:
        raise DegenerateForm(f"smallest |eigenvalue| {q0:.3e} below threshold")

    signs = np.sign(w)
    positive_part = (v * absw) @ v.T
    sqrt_positive = (v * np.sqrt(absw)) @ v.T
    reflection = (v * signs) @ v.T
    det_abs = float(np.prod(absw))

    p = int(np.sum(w > 0))
    q_neg = int(np.sum(w < 0))

    if shift is None:
        xi = np.zeros(d)
    else:
        xi = np.array(shift, dtype=float)
        if xi.shape != (d,):
            raise NotSymmetric(f"shift must have length {d}")

    return QuadForm(
        matrix=m, dim=d, eigenvalues=w, eigenvectors=v, signature=(p, q_neg),
        q0=q0, q_max=q_max, det_abs=det_abs, positive_part=0.5 * (positive_part + positive_part.T),
        sqrt_positive=0.5 * (sqrt_positive + sqrt_positive.T),
        reflection=0.5 * (reflection + reflection.T), shift=xi, tags=tuple(tags),
    )


def _as_fraction(x: float, max_den: int) -> Fraction | None:
    """Reconstruct x as p/q with q <= max_den, or None.

    Accepts only reconstructions within a few ulps: a float that genuinely
    holds a rational with bounded denominator is recovered exactly, while
    quadratic irrationals miss by >= 1/(c q^2) >> ulp for the caps in use.
    """
    f = Fraction(x).limit_denominator(max_den)
    if abs(float(f) - x) <= 64 * np.finfo(float).eps * max(1.0, abs(x)):
        return f
    return None


def classify_rationality(form: QuadForm, denominator_cap: int) -> SpectralReport:
    """Decide whether the form is (a rescaling of) an integer form.

    Continued-fraction reconstruction of every entry with denominators up
    to the cap.  Never claims irrationality as proven, only as unknown.
    """
    if denominator_cap < 1:
        raise ValueError("denominator_cap must be >= 1")
    entries = {}
    for i in range(form.dim):
        for j in range(i, form.dim):
            x = float(form.matrix[i, j])
            if x == 0.0:
                continue
            f = _as_fraction(x, denominator_cap)
            if f is None:
                return SpectralReport("irrational-or-unknown", None, denominator_cap)
            entries[(i, j)] = f
    if not entries:
        raise DegenerateForm("zero matrix")
    lcm_den = 1
    for f in entries.values():
        lcm_den = lcm_den * f.denominator // math.gcd(lcm_den, f.denominator)
    gcd_num = 0
    for f in entries.values():
        gcd_num = math.gcd(gcd_num, abs(f.numerator) * (lcm_den // f.denominator))
    t = Fraction(lcm_den, gcd_num)
    if t.denominator > denominator_cap:
        return SpectralReport("irrational-or-unknown", None, denominator_cap)
    if t == 1 and all(f.denominator == 1 for f in entries.values()):
        return SpectralReport("integer-entries", Fraction(1), denominator_cap)
    return SpectralReport("rational-entries", t, denominator_cap)


def _eval_entry(text: str) -> tuple[float, str | None]:
    """Evaluate a whitelisted symbolic entry at 30 significant digits."""
    s = text.strip().replace(" ", "")
    getcontext().prec = 30
    neg = False
    if s.startswith("-golden") or s == "golden" or s == "+golden":
        neg = s.startswith("-")
        val = (1 + Decimal(5).sqrt()) / 2
        return (-float(val) if neg else float(val)), "golden"
    m = _SQRT_RE.match(s)
    if m:
        neg = m.group(1) == "-"
        k = int(m.group(2))
        val = Decimal(k).sqrt()
        return (-float(val) if neg else float(val)), f"sqrt({k})"
    raise ValueError(f"entry {text!r} not in the symbolic whitelist {{sqrt(k), golden}}")


def form_from_dict(spec: dict) -> QuadForm:
    """Parse the JSON form format.

    Either {"dim": d, "entries": [[...]], "shift": [...]} with full rows,
    or the diagonal shorthand {"diag": [...]}.  Entries may be numbers or
    whitelisted strings like "sqrt(2)", "-sqrt(3)", "golden".
    """
    tags = []

    def conv(x, i, j):
        if isinstance(x, str):
            val, tag = _eval_entry(x)
            tags.append((i, j, tag))
            return val
        return float(x)

    if "diag" in spec:
        diag = [conv(x, i, i) for i, x in enumerate(spec["diag"])]
        m = np.diag(np.array(diag, dtype=float))
    elif "entries" in spec:
        rows = spec["entries"]
        m = np.array([[conv(x, i, j) for j, x in enumerate(row)] for i, row in enumerate(rows)],
                     dtype=float)
        if "dim" in spec and int(spec["dim"]) != m.shape[0]:
            raise NotSymmetric("dim field disagrees with entries shape")
    else:
        raise NotSymmetric("form JSON needs 'entries' or 'diag'")
    shift = spec.get("shift")
    return decompose(m, shift=shift, tags=tags)


def form_from_json(path) -> QuadForm:
    import json

    with open(path) as fh:
        return form_from_dict(json.load(fh))
