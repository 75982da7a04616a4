"""
Polynomial and rational-function arithmetic in the Laplace variable ``s``.

Every transfer function in the package is carried as a
:class:`RationalFunction` over real-coefficient :class:`Polynomial` objects.
Coefficients are stored in ascending powers, ``coeffs[k]`` multiplies
``s**k``.  Arithmetic never cancels common factors on its own; cancellation
is an explicit step (:func:`rf_reduce`) so that pole counts stay
reproducible.

Root finding rescales the variable before forming the companion matrix.
Filter parameters in the micro-henry/micro-farad range give coefficients
spanning more than twenty decades, which the raw companion matrix cannot
resolve in double precision.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
import mpmath
from numpy.polynomial import polynomial as npoly

from .errors import DomainError, InputError

__all__ = [
    "Polynomial",
    "RationalFunction",
    "PoleSet",
    "S",
    "poly_roots",
    "rf_arith",
    "rf_reduce",
    "rf_eval",
    "pade_delay",
    "exact_delay",
]

Scalar = Union[int, float]


@dataclass(frozen=True, eq=True)
class Polynomial:
    """Real polynomial with ascending coefficients.

    Trailing zeros are stripped on construction; the zero polynomial has an
    empty coefficient tuple and degree ``-1``.
    """

    coeffs: tuple

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1:
            raise InputError("polynomial coefficients must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise InputError(f"non-finite polynomial coefficient in {c.tolist()}")
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        object.__setattr__(self, "coeffs", tuple(float(x) for x in c))

    @classmethod
    def from_roots(cls, roots, leading: float = 1.0) -> "Polynomial":
        """Expand ``leading * prod(s - r)``; conjugate pairs give real coefficients."""
        roots = np.asarray(roots, dtype=complex)
        if roots.size == 0:
            return cls((leading,))
        c = npoly.polyfromroots(roots)
        return cls(np.real(c) * leading)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1] if self.coeffs else 0.0

    def is_zero(self) -> bool:
        return not self.coeffs

    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def monic(self) -> "Polynomial":
        if self.is_zero():
            raise DomainError("the zero polynomial has no monic form")
        return Polynomial(self.array() / self.leading)

    def __call__(self, s):
        """Horner evaluation; ``s`` may be a scalar or an array."""
        s = np.asarray(s, dtype=complex)
        acc = np.zeros_like(s)
        for c in reversed(self.coeffs):
            acc = acc * s + c
        return acc[()] if acc.ndim == 0 else acc

    def deriv(self) -> "Polynomial":
        return Polynomial(npoly.polyder(self.array())) if self.degree > 0 else Polynomial(())

    def _coerce(self, other):
        if isinstance(other, Polynomial):
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial((float(other),))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Polynomial(npoly.polyadd(self.array(), other.array()) if self.coeffs or other.coeffs else ())

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(-self.array())

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero() or other.is_zero():
            return Polynomial(())
        return Polynomial(npoly.polymul(self.array(), other.array()))

    __rmul__ = __mul__

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)})"


S = Polynomial((0.0, 1.0))
"""The Laplace variable as a degree-one polynomial."""


@dataclass(frozen=True, eq=False)
class PoleSet:
    """Roots of a real polynomial together with a residual bound.

    ``residual_bound`` is ``max |p(root)| / ||p||`` evaluated on the scaled
    monic polynomial after polishing.
    """

    values: np.ndarray
    residual_bound: float

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    @property
    def max_real(self) -> float:
        return float(self.values.real.max())


def _to_poly(x) -> Polynomial:
    if isinstance(x, Polynomial):
        return x
    return Polynomial((float(x),))


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """Ratio ``num / den`` of real polynomials.

    The denominator is never zero and its leading coefficient is kept
    positive.  Two instances compare equal only when their coefficient tuples
    are identical; use :meth:`is_identically_zero` or evaluation to compare
    values.
    """

    num: Polynomial
    den: Polynomial = Polynomial((1.0,))

    def __post_init__(self):
        num, den = _to_poly(self.num), _to_poly(self.den)
        if den.is_zero():
            raise DomainError("rational function with zero denominator")
        if den.leading < 0:
            num, den = -num, -den
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __eq__(self, other):
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    __hash__ = None

    @classmethod
    def constant(cls, value: float) -> "RationalFunction":
        return cls(Polynomial((value,)), Polynomial((1.0,)))

    @property
    def degree(self) -> tuple[int, int]:
        return self.num.degree, self.den.degree

    def poles(self, polish_iters: int = 3) -> PoleSet:
        return poly_roots(self.den, polish_iters)

    def zeros(self, polish_iters: int = 3) -> PoleSet:
        return poly_roots(self.num, polish_iters)

    def __call__(self, s):
        return rf_eval(self, s)

    def _coerce(self, other):
        if isinstance(other, RationalFunction):
            return other
        if isinstance(other, Polynomial):
            return RationalFunction(other)
        if isinstance(other, (int, float, np.floating, np.integer)):
            return RationalFunction.constant(float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(self, other, "add")

    def __radd__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(other, self, "add")

    def __sub__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(self, other, "sub")

    def __rsub__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(other, self, "sub")

    def __mul__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(self, other, "mul")

    def __rmul__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(other, self, "mul")

    def __truediv__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(self, other, "div")

    def __rtruediv__(self, other):
        other = self._coerce(other)
        return other if other is NotImplemented else rf_arith(other, self, "div")

    def __neg__(self):
        return RationalFunction(-self.num, self.den)

    def __repr__(self):
        return f"RationalFunction(num={list(self.num.coeffs)}, den={list(self.den.coeffs)})"


def rf_arith(
    a: RationalFunction,
    b: RationalFunction,
    op: Literal["add", "sub", "mul", "div"],
) -> RationalFunction:
    """Exact coefficient arithmetic on two rational functions.

    Sums use ``a.den`` directly when both denominators are coefficient-wise
    identical, otherwise the product of denominators.  No pole-zero
    cancellation is performed.
    """
    if op in ("add", "sub"):
        bn = b.num if op == "add" else -b.num
        if a.den == b.den:
            return RationalFunction(a.num + bn, a.den)
        return RationalFunction(a.num * b.den + bn * a.den, a.den * b.den)
    if op == "mul":
        return RationalFunction(a.num * b.num, a.den * b.den)
    if op == "div":
        if b.num.is_zero():
            raise DomainError("division by the zero rational function")
        return RationalFunction(a.num * b.den, a.den * b.num)
    raise InputError(f"unknown rational operation {op!r}")


def rf_eval(r: RationalFunction, s) -> complex:
    """Evaluate ``r`` at a complex point by Horner's rule on both polynomials."""
    s = complex(s)
    den = r.den(s)
    scale = sum(abs(c) * abs(s) ** k for k, c in enumerate(r.den.coeffs))
    if den == 0 or abs(den) <= np.finfo(float).eps * scale:
        raise DomainError(f"evaluation at a pole: s = {s!r}")
    return complex(r.num(s) / den)


def _scaled_monic(q: np.ndarray) -> tuple[np.ndarray, float]:
    """Return monic coefficients of ``q(sigma t)`` and ``sigma``.

    ``sigma`` is the geometric mean of the consecutive coefficient magnitude
    ratios, i.e. ``(|q0| / |qn|)**(1/n)``.  Assumes ``q[0] != 0``.
    """
    n = q.size - 1
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(q))
    log_sigma = (logs[0] - logs[-1]) / n
    k = np.arange(n + 1)
    mag = np.exp(logs + k * log_sigma - (logs[-1] + n * log_sigma))
    b = np.sign(q) * np.sign(q[-1]) * mag
    b[q == 0] = 0.0
    return b, float(np.exp(log_sigma))


def _polish(b: np.ndarray, t: np.ndarray, iters: int) -> np.ndarray:
    db = npoly.polyder(b)
    t = t.copy()
    for _ in range(iters):
        pv = npoly.polyval(t, b)
        dv = npoly.polyval(t, db)
        ok = dv != 0
        step = np.zeros_like(t)
        step[ok] = pv[ok] / dv[ok]
        cand = t - step
        better = np.abs(npoly.polyval(cand, b)) < np.abs(pv)
        t = np.where(better, cand, t)
    return t


CLUSTER_REL = 1e-3


def _clusters(roots: np.ndarray, rel: float) -> list:
    """Groups (index arrays) of roots linked by relative gaps below ``rel``."""
    n = roots.size
    scale = np.maximum(np.abs(roots), np.finfo(float).tiny)
    near = np.abs(roots[:, None] - roots[None, :]) < rel * np.minimum(scale[:, None], scale[None, :])
    label = list(range(n))

    def find(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i, j in zip(*np.nonzero(np.triu(near, 1))):
        label[find(i)] = find(j)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(g) for g in groups.values() if len(g) > 1]


def _refine_clusters(q: np.ndarray, roots: np.ndarray, rel: float = CLUSTER_REL) -> np.ndarray:
    """Re-solve roots that have a neighbour within ``rel`` (relative) in extended precision.

    Closely spaced roots are poorly resolved by the double-precision
    companion eigenproblem even when the coefficients determine them well.
    Each cluster is re-seeded on a small circle around its centroid (which
    breaks the conjugate symmetry of the companion estimates) and solved by
    Aberth iteration at 40 digits with the remaining roots held fixed.
    """
    clusters = _clusters(roots, rel)
    if not clusters:
        return roots
    n = roots.size
    out = roots.copy()
    with mpmath.workdps(40):
        coeffs = [mpmath.mpf(float(x)) for x in q[::-1]]
        z = [mpmath.mpc(complex(r)) for r in roots]
        for idx in clusters:
            c = roots[idx].mean()
            rad = max(float(np.max(np.abs(roots[idx] - c))), rel * abs(c)) * 2
            for k, i in enumerate(idx):
                z[i] = mpmath.mpc(complex(c + rad * np.exp(1j * (2 * np.pi * k / idx.size + 0.4))))
            for _ in range(100):
                moved = 0.0
                for i in idx:
                    pv, dv = mpmath.polyval(coeffs, z[i], derivative=True)
                    if pv == 0:
                        continue
                    w = pv / dv
                    acc = mpmath.fsum(1 / (z[i] - z[j]) for j in range(n) if j != i)
                    step = w / (1 - w * acc)
                    z[i] -= step
                    moved = max(moved, float(abs(step) / abs(z[i])))
                if moved < 1e-25:
                    break
            else:
                continue  # no convergence: keep the companion estimates
            cand = np.array([complex(z[i]) for i in idx])
            # Real polynomial: snap numerically real roots and pair the rest.
            cand = np.where(np.abs(cand.imag) < 1e-14 * np.abs(cand), cand.real + 0j, cand)
            out[idx] = cand
    if not np.all(np.isfinite(out)):
        return roots
    return out


def poly_roots(p: Polynomial, polish_iters: int = 3) -> PoleSet:
    """All complex roots of ``p``.

    Zero roots are split off exactly.  The rest come from the eigenvalues of
    the companion matrix of the rescaled monic polynomial, then Newton steps
    on the same scaled polynomial (a step is kept only if it lowers the
    residual).  Clustered roots are finally re-solved in extended precision.

    Raises
    ------
    DomainError
        If ``p`` is constant or zero.
    """
    if p.degree < 1:
        raise DomainError(f"root finding needs degree >= 1, got {p!r}")
    c = p.array()
    lo = int(np.flatnonzero(c)[0])
    q = c[lo:]
    zeros = np.zeros(lo, dtype=complex)
    n = q.size - 1
    if n == 0:
        return PoleSet(zeros, 0.0)
    b, sigma = _scaled_monic(q)
    comp = np.zeros((n, n))
    comp[1:, :-1] = np.eye(n - 1)
    comp[:, -1] = -b[:-1]
    t = np.linalg.eigvals(comp).astype(complex)
    t = _polish(b, t, polish_iters)
    residual = float(np.max(np.abs(npoly.polyval(t, b))) / np.linalg.norm(b))
    roots = np.concatenate([zeros, _refine_clusters(q, sigma * t)])
    roots = roots[np.lexsort((roots.imag, roots.real))]
    return PoleSet(roots, residual)


def _pair_cancellations(zr: np.ndarray, pr: np.ndarray, rel_tol: float):
    """Greedy nearest-neighbour pairing of zeros with poles within tolerance."""
    if zr.size == 0 or pr.size == 0:
        return [], []
    dist = np.abs(zr[:, None] - pr[None, :])
    scale = np.maximum(np.maximum(np.abs(zr)[:, None], np.abs(pr)[None, :]), 1.0)
    ok = dist < rel_tol * scale
    cand = [
        (dist[i, j], zr[i].imag, zr[i].real, i, j)
        for i, j in zip(*np.nonzero(ok))
    ]
    cand.sort()
    used_z, used_p = set(), set()
    for _, _, _, i, j in cand:
        if i in used_z or j in used_p:
            continue
        used_z.add(i)
        used_p.add(j)
    return sorted(used_z), sorted(used_p)


def rf_reduce(r: RationalFunction, rel_tol: float = 1e-7) -> RationalFunction:
    """Cancel numerator/denominator root pairs closer than ``rel_tol * max(|root|, 1)``.

    Pairs are taken greedily by increasing distance, ties broken by the
    smaller imaginary part and then the smaller real part of the zero.  The
    surviving roots are re-expanded with the original leading coefficients.
    Returns ``r`` itself when nothing cancels.
    """
    if not (0 < rel_tol <= 1e-2):
        raise InputError(f"rel_tol must lie in (0, 1e-2], got {rel_tol}")
    if r.num.degree < 1 or r.den.degree < 1:
        return r
    zr = poly_roots(r.num).values
    pr = poly_roots(r.den).values
    iz, ip = _pair_cancellations(zr, pr, rel_tol)
    if not iz:
        return r
    keep_z = np.delete(zr, iz)
    keep_p = np.delete(pr, ip)
    return RationalFunction(
        Polynomial.from_roots(keep_z, r.num.leading),
        Polynomial.from_roots(keep_p, r.den.leading),
    )


def pade_delay(Td: float) -> RationalFunction:
    """Second-order Padé model of ``exp(-s Td)``.

    ``(Td^2 s^2 - 6 Td s + 12) / (Td^2 s^2 + 6 Td s + 12)``; the constant 1
    for ``Td == 0``.
    """
    if not np.isfinite(Td) or Td < 0:
        raise InputError(f"delay must be a finite non-negative time, got {Td}")
    if Td == 0:
        return RationalFunction.constant(1.0)
    return RationalFunction(
        Polynomial((12.0, -6.0 * Td, Td * Td)),
        Polynomial((12.0, 6.0 * Td, Td * Td)),
    )


def exact_delay(Td: float, omega) -> complex:
    """Frequency response ``exp(-j omega Td)`` of an ideal delay."""
    if Td < 0:
        raise InputError(f"delay must be non-negative, got {Td}")
    return np.exp(-1j * np.asarray(omega, dtype=float) * Td)
