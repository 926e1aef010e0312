"""Scalar injection terms of the generalized super-twisting algorithm.

``phi1`` feeds the measured channel, ``phi2`` the unmeasured one. They are
linked by ``phi2(z) == phi1_prime(z) * phi1(z)`` for every ``z != 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Lower clamp on |z| when phi1_prime is needed on the sliding surface.
EPS_CLAMP = 1e-12


@dataclass(frozen=True)
class MuPair:
    """Gains of the square-root term (``mu1``) and the linear term (``mu2``)."""

    mu1: float
    mu2: float

    def __post_init__(self):
        for name in ("mu1", "mu2"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")

    @property
    def is_hgo(self) -> bool:
        return self.mu1 == 0.0


def _check(z: float) -> float:
    if not math.isfinite(z):
        raise ValueError(f"non-finite argument {z!r}")
    return z


def sign(z: float) -> int:
    """Single-valued sign with ``sign(0) == 0``."""
    _check(z)
    if z > 0:
        return 1
    if z < 0:
        return -1
    return 0


def phi1(z: float, mu: MuPair) -> float:
    _check(z)
    s = sign(z)
    return mu.mu1 * math.sqrt(abs(z)) * s + mu.mu2 * z


def phi1_prime(z: float, mu: MuPair, clamp: float | None = None) -> float:
    """Derivative of :func:`phi1`.

    Singular at ``z == 0`` whenever ``mu1 > 0``; pass ``clamp`` to evaluate
    with ``|z|`` floored at that value instead of raising.
    """
    _check(z)
    a = abs(z)
    if clamp is not None:
        a = max(a, clamp)
    if a == 0.0:
        if mu.mu1 == 0.0:
            return mu.mu2
        raise ZeroDivisionError("phi1_prime is singular at z = 0")
    return 0.5 * mu.mu1 / math.sqrt(a) + mu.mu2


def phi2(z: float, mu: MuPair) -> float:
    _check(z)
    s = sign(z)
    m1, m2 = mu.mu1, mu.mu2
    return 0.5 * m1 * m1 * s + 1.5 * m1 * m2 * math.sqrt(abs(z)) * s + m2 * m2 * z


def phi1_inverse(v: float, mu: MuPair) -> float:
    """Inverse of :func:`phi1` (strictly increasing when ``mu`` is nonzero).

    Writing ``s = sqrt(|z|)`` turns ``|v| = mu1*s + mu2*s**2`` into a quadratic.
    """
    _check(v)
    m1, m2 = mu.mu1, mu.mu2
    a = abs(v)
    if m2 == 0.0:
        if m1 == 0.0:
            raise ValueError("phi1 is identically zero, no inverse")
        s = a / m1
    elif m1 == 0.0:
        s = math.sqrt(a / m2)
    else:
        # Rationalized root; avoids cancellation for small |v|.
        s = 2.0 * a / (m1 + math.sqrt(m1 * m1 + 4.0 * m2 * a))
    return sign(v) * s * s
