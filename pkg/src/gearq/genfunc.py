"""Matrix generating functions evaluated with forward-mode derivatives.

A matrix MGF Phi(z) built from branch gains of the form ``A * z**n`` is
evaluated as a :class:`DualMatrix` carrying (Phi(z), dPhi/dz(z)) through
products, geometric closures and truncated series.  Evaluating at z = 1
yields the total-probability check and the mean; evaluating at z != 1
supports finite-difference cross-checks of the dual derivative.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np


class NonConvergenceError(ArithmeticError):
    """A geometric closure or truncated series failed to converge."""


class ImproperMGFError(ArithmeticError):
    """phi(1) deviated from 1 beyond tolerance; the model leaks probability."""


@dataclass(frozen=True)
class DualMatrix:
    """Value and first z-derivative of a matrix-valued function at one point."""

    val: np.ndarray
    der: np.ndarray

    def __post_init__(self):
        if self.val.shape != self.der.shape:
            raise ValueError("val and der shapes differ")

    @property
    def n(self) -> int:
        return self.val.shape[0]


def dual_term(coeff: np.ndarray, z_power: int, z: float = 1.0) -> DualMatrix:
    """Branch gain ``coeff * z**z_power`` as a dual at evaluation point z."""
    if z_power < 0:
        raise ValueError("z_power must be >= 0")
    coeff = np.asarray(coeff, dtype=float)
    if z == 1.0:
        return DualMatrix(coeff.copy(), z_power * coeff)
    val = coeff * z**z_power
    der = np.zeros_like(coeff) if z_power == 0 else z_power * coeff * z ** (z_power - 1)
    return DualMatrix(val, der)


def dual_identity(n: int) -> DualMatrix:
    return DualMatrix(np.eye(n), np.zeros((n, n)))


def dual_zero(n: int) -> DualMatrix:
    return DualMatrix(np.zeros((n, n)), np.zeros((n, n)))


def dual_add(a: DualMatrix, b: DualMatrix) -> DualMatrix:
    return DualMatrix(a.val + b.val, a.der + b.der)


def dual_mul(a: DualMatrix, b: DualMatrix) -> DualMatrix:
    """Product along the signal path: (ab)' = a'b + ab'.  Order matters."""
    if a.val.shape[1] != b.val.shape[0]:
        raise ValueError("dimension mismatch")
    return DualMatrix(a.val @ b.val, a.der @ b.val + a.val @ b.der)


def spectral_radius(A: np.ndarray, iters: int = 200) -> float:
    """Power-iteration estimate of the spectral radius of a nonnegative matrix."""
    v = np.ones(A.shape[0])
    rho = 0.0
    for _ in range(iters):
        w = v @ A
        nw = np.max(np.abs(w))
        if nw == 0.0:
            return 0.0
        rho = nw / np.max(np.abs(v))
        v = w / nw
    return rho


def dual_geo(a: DualMatrix, slack: float = 1e-9) -> DualMatrix:
    """Geometric closure sum_{j>=0} a^j = (I - a)^(-1) with derivative.

    The self-loop gain must be a strict contraction; the guard rejects
    spectral radius >= 1 - slack, which in protocol terms means an
    erasure rate too close to 1 or a degenerate timer.
    """
    if spectral_radius(a.val) >= 1.0 - slack:
        raise NonConvergenceError("self-loop spectral radius too close to 1")
    inv = np.linalg.inv(np.eye(a.n) - a.val)
    return DualMatrix(inv, inv @ a.der @ inv)


def dual_sum_truncated(
    terms: Iterable[DualMatrix], tol: float = 1e-12, max_terms: int = 10**6
) -> DualMatrix:
    """Sum a decaying series of duals until both increments drop below tol.

    Truncation uses the max-norm of the value and derivative increments.
    Raises NonConvergenceError if max_terms accumulate without reaching
    tol.
    """
    it: Iterator[DualMatrix] = iter(terms)
    try:
        first = next(it)
    except StopIteration:
        raise ValueError("empty series") from None
    val = first.val.copy()
    der = first.der.copy()
    for count, term in enumerate(it, start=2):
        val += term.val
        der += term.der
        if max(np.max(np.abs(term.val)), np.max(np.abs(term.der))) < tol:
            break
        if count >= max_terms:
            raise NonConvergenceError(f"series did not converge in {max_terms} terms")
    return DualMatrix(val, der)


def scalarize(
    pi_I: np.ndarray,
    Phi: DualMatrix,
    *,
    check: bool = True,
    tol: float = 1e-6,
) -> tuple[float, float]:
    """Reduce a matrix MGF to (phi(z), phi'(z)) for a start vector pi_I.

    phi(z) = pi_I Phi(z) 1 / (pi_I 1); the derivative is the mean when
    z = 1.  With check=True (evaluation at z = 1), a deviation of phi(1)
    from 1 beyond tol raises ImproperMGFError: the protocol model or a
    series truncation lost probability mass.
    """
    if np.min(pi_I) < 0:
        raise ValueError("pi_I must be non-negative")
    norm = float(np.sum(pi_I))
    ones = np.ones(Phi.n)
    value = float(pi_I @ Phi.val @ ones) / norm
    mean = float(pi_I @ Phi.der @ ones) / norm
    if check and abs(value - 1.0) > tol:
        raise ImproperMGFError(f"phi(1) = {value!r} deviates from 1 beyond {tol}")
    return value, mean
