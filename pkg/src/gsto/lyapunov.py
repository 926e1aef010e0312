"""Quadratic Lyapunov certificates for the GSTO error dynamics.

Per subsystem the error ``e_i = (e_i1, e_i2)`` is mapped to
``eps_i = (phi1(e_i1), e_i2)`` and then to ``xi_i = (eps_i1, eps_i2 / gamma_i)``.
``V_i = xi_i' P_i xi_i`` with ``P_i`` solving

    (A0 - L_i C0)' P_i + P_i (A0 - L_i C0) = -Q_i.

The module also estimates the interconnection constants that bound the
residuals ``rho_i1, rho_i2`` along a simulated trajectory and turns them into
gain-feasibility verdicts and decrease monitoring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gsto.observer import ObserverGains, ObserverPlant, rho_terms
from gsto.sta_core import MuPair, phi1
from gsto.system_model import InterconnectedSystem

A0 = np.array([[0.0, 1.0], [0.0, 0.0]])
C0 = np.array([[1.0, 0.0]])
B1 = np.array([1.0, 0.0])
B0 = np.array([0.0, 1.0])

DEFAULT_ETA = 0.5
GAMMA_SEARCH = (1e-3, 1e6)
GAMMA_BISECT_ITERS = 60
MIN_SAMPLES = 10


class InfeasibleError(ValueError):
    """No symmetric positive definite certificate exists for these gains."""


class InsufficientDataError(ValueError):
    pass


def closed_loop_matrix(L, gamma: float = 1.0) -> np.ndarray:
    """``A0 - Gamma L C0`` with ``Gamma = diag(gamma, gamma**2)``."""
    l1, l2 = float(L[0]), float(L[1])
    return np.array([[-gamma * l1, 1.0], [-gamma * gamma * l2, 0.0]])


def solve_ale_2x2(L, Q=None) -> np.ndarray:
    """Closed-form solution of the 2x2 Lyapunov equation for ``A0 - L C0``.

    Matching entries of ``A'P + PA = -Q`` with ``A = [[-l1, 1], [-l2, 0]]``
    gives ``p12 = -q22/2``, ``p11 = (q11 + l2 q22) / (2 l1)`` and
    ``p22 = (p11 + l1 q22/2 + q12) / l2``.
    """
    l1, l2 = float(L[0]), float(L[1])
    if not (l1 > 0 and l2 > 0):
        raise InfeasibleError(f"A0 - L C0 is not Hurwitz for L = ({l1}, {l2}); need l1, l2 > 0")
    Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
    if Q.shape != (2, 2) or not np.allclose(Q, Q.T, rtol=0, atol=1e-14 * (1 + np.abs(Q).max())):
        raise ValueError("Q must be a symmetric 2x2 matrix")
    if np.linalg.eigvalsh(Q)[0] <= 0:
        raise ValueError("Q must be positive definite")
    q11, q12, q22 = Q[0, 0], Q[0, 1], Q[1, 1]
    p12 = -0.5 * q22
    p11 = (q11 + l2 * q22) / (2.0 * l1)
    p22 = (p11 - l1 * p12 + q12) / l2
    P = np.array([[p11, p12], [p12, p22]])
    if not np.all(np.isfinite(P)):
        raise ArithmeticError(f"non-finite Lyapunov solution for L = ({l1}, {l2})")
    return P


def ale_residual(L, P, Q) -> float:
    A = closed_loop_matrix(L)
    return float(np.linalg.norm(A.T @ P + P @ A + Q, "fro"))


@dataclass(frozen=True)
class LyapunovCertificate:
    L: np.ndarray
    Q: np.ndarray
    P: np.ndarray
    lambda_min_Q: float
    lambda_max_P: float
    lambda_min_P: float
    g_min: float = 1.0

    @classmethod
    def build(cls, l1: float, l2: float, Q=None, g_min: float = 1.0) -> "LyapunovCertificate":
        Q = np.eye(2) if Q is None else np.asarray(Q, dtype=float)
        L = np.array([l1, l2], dtype=float)
        P = solve_ale_2x2(L, Q)
        ev = np.linalg.eigvalsh(P)
        if ev[0] <= 0:
            raise InfeasibleError(f"Lyapunov solution is not positive definite (eigenvalues {ev})")
        return cls(L, Q, P, float(np.linalg.eigvalsh(Q)[0]), float(ev[1]), float(ev[0]), float(g_min))

    @property
    def residual(self) -> float:
        return ale_residual(self.L, self.P, self.Q)

    def to_dict(self) -> dict:
        return {
            "L": self.L.tolist(),
            "Q": self.Q.tolist(),
            "P": self.P.tolist(),
            "lambda_min_Q": self.lambda_min_Q,
            "lambda_max_P": self.lambda_max_P,
            "lambda_min_P": self.lambda_min_P,
            "g_min": self.g_min,
            "ale_residual": self.residual,
        }


def build_certificates(gains: ObserverGains, sys: InterconnectedSystem | None = None, Q=None):
    """One certificate per subsystem; ``g_min`` comes from the declared bounds of ``sys``."""
    out = []
    for i, gs in enumerate(gains.subsystems):
        g_min = sys.subsystems[i].g_bounds[0] if sys is not None else 1.0
        out.append(LyapunovCertificate.build(gs.l1, gs.l2, Q, g_min))
    return out


@dataclass
class ScalingVerdict:
    ok: bool
    base: np.ndarray
    scaled: np.ndarray
    max_rel_error: float


def _sorted_eigs(M):
    ev = np.linalg.eigvals(M)
    return ev[np.lexsort((ev.imag, ev.real))]


def eigenvalue_scaling_check(L, gamma: float, rtol: float = 1e-10) -> ScalingVerdict:
    """Check ``eig(A0 - Gamma L C0) == gamma * eig(A0 - L C0)``."""
    base = _sorted_eigs(closed_loop_matrix(L))
    scaled = _sorted_eigs(closed_loop_matrix(L, gamma))
    ref = gamma * base
    err = float(np.max(np.abs(scaled - ref) / np.maximum(np.abs(ref), np.finfo(float).tiny)))
    return ScalingVerdict(err <= rtol, base, scaled, err)


def epsilon_vec(e_i, mu: MuPair) -> np.ndarray:
    return np.array([phi1(float(e_i[0]), mu), float(e_i[1])])


def xi_vec(epsilon_i, gamma: float) -> np.ndarray:
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return np.array([epsilon_i[0], epsilon_i[1] / gamma])


def lyap_value(cert: LyapunovCertificate, xi_i) -> float:
    xi_i = np.asarray(xi_i, dtype=float)
    return float(xi_i @ cert.P @ xi_i)


def lyap_total(certs, xis) -> float:
    return sum(lyap_value(c, x) for c, x in zip(certs, xis))


def xi_samples(error: np.ndarray, gains: ObserverGains) -> np.ndarray:
    """Map an ``(K, 2N)`` error history to ``(K, N, 2)`` xi coordinates."""
    error = np.atleast_2d(error)
    K, n = error.shape
    out = np.empty((K, n // 2, 2))
    for i, gs in enumerate(gains.subsystems):
        e1 = error[:, 2 * i]
        out[:, i, 0] = gs.mu.mu1 * np.sqrt(np.abs(e1)) * np.sign(e1) + gs.mu.mu2 * e1
        out[:, i, 1] = error[:, 2 * i + 1] / gs.gamma
    return out


def lyap_series(error: np.ndarray, certs, gains: ObserverGains) -> np.ndarray:
    """``V_i`` per sample, shape ``(K, N)``."""
    xi = xi_samples(error, gains)
    P = np.stack([c.P for c in certs])
    return np.einsum("kia,iab,kib->ki", xi, P, xi)


# ---------------------------------------------------------------- bounds


@dataclass
class InterconnectionBounds:
    """Constants such that, for every subsystem ``i``::

        |rho_i1| <= sum_j alpha_tilde[i, j] |e_j1| + beta_tilde[i, j] |e_j2|
        |rho_i2| <= alpha0 + sum_j alpha[i, j] |e_j1| + beta[i, j] |e_j2|
    """

    alpha0: float
    alpha: np.ndarray
    beta: np.ndarray
    alpha_tilde: np.ndarray
    beta_tilde: np.ndarray
    n_samples: int = 0
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in ("alpha", "beta", "alpha_tilde", "beta_tilde"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.alpha0 < 0 or any(np.any(getattr(self, k) < 0) for k in ("alpha", "beta", "alpha_tilde", "beta_tilde")):
            raise ValueError("interconnection constants must be nonnegative")
        up = np.triu(np.ones_like(self.alpha_tilde, dtype=bool))
        if np.any(self.alpha_tilde[up] != 0) or np.any(self.beta_tilde[up] != 0):
            raise ValueError("measured channels must be interconnected in cascade (j >= i entries zero)")

    @classmethod
    def zeros(cls, n: int) -> "InterconnectionBounds":
        z = np.zeros((n, n))
        return cls(0.0, z, z.copy(), z.copy(), z.copy())

    @property
    def N(self) -> int:
        return self.alpha.shape[0]

    def bound_rho1(self, e: np.ndarray) -> np.ndarray:
        a, b = np.abs(e[..., 0::2]), np.abs(e[..., 1::2])
        return a @ self.alpha_tilde.T + b @ self.beta_tilde.T

    def bound_rho2(self, e: np.ndarray) -> np.ndarray:
        a, b = np.abs(e[..., 0::2]), np.abs(e[..., 1::2])
        return self.alpha0 + a @ self.alpha.T + b @ self.beta.T

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0,
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "alpha_tilde": self.alpha_tilde.tolist(),
            "beta_tilde": self.beta_tilde.tolist(),
            "n_samples": self.n_samples,
            "notes": list(self.notes),
        }


def _rho_history(traj, sys: InterconnectedSystem):
    K = len(traj)
    r1 = np.empty((K, sys.N))
    r2 = np.empty((K, sys.N))
    dl = np.empty((K, sys.N))
    u_hist = traj.u if traj.u is not None else np.zeros((K, 0))
    w_hist = traj.w if traj.w is not None else np.zeros((K, sys.N))
    for k in range(K):
        x, xh, u, w, t = traj.x[k], traj.xhat[k], u_hist[k], w_hist[k], traj.times[k]
        r1[k], r2[k] = rho_terms(sys, x, xh, u, w, t)
        for i, s in enumerate(sys.subsystems):
            dl[k, i] = s.delta(x, u, w, t)
    return r1, r2, dl


def _probe_dependencies(sys: InterconnectedSystem, traj, n_probe: int = 16):
    """Which error components each residual can depend on, by perturbation.

    Returns boolean masks over flat state indices: ``dep1[i]`` for ``rho_i1``
    (upstream unmeasured states only) and ``dep2[i]`` for ``rho_i2``.
    """
    N, n = sys.N, sys.n_states
    dep1 = np.zeros((N, n), dtype=bool)
    dep2 = np.zeros((N, n), dtype=bool)
    u_hist = traj.u if traj.u is not None else np.zeros((len(traj), 0))
    picks = np.unique(np.linspace(0, len(traj) - 1, n_probe).astype(int))
    for k in picks:
        x, u, t = traj.x[k], u_hist[k], traj.times[k]
        y = x[0::2]
        for i, s in enumerate(sys.subsystems):
            up = x[1:2 * i:2]
            base1 = s.f1(y, u, up, t)
            for j in range(i):
                for h in (1e-6 * (1 + abs(up[j])), 1e-2 * (1 + abs(up[j]))):
                    p = up.copy()
                    p[j] += h
                    if s.f1(y, u, p, t) != base1:
                        dep1[i, 2 * j + 1] = True
            base2 = s.f2(x, u, t)
            for q in range(n):
                for h in (1e-6 * (1 + abs(x[q])), 1e-2 * (1 + abs(x[q]))):
                    p = x.copy()
                    p[q] += h
                    if s.f2(p, u, t) != base2:
                        dep2[i, q] = True
    return dep1, dep2


def _envelope(resid: np.ndarray, e_abs: np.ndarray, active: np.ndarray):
    """Max-ratio envelope: spread ``|resid|`` evenly over active ``|e|`` terms.

    Returns the coefficient vector and the largest residual left uncovered
    (samples where every active error is zero).
    """
    coef = np.zeros(e_abs.shape[1])
    leftover = 0.0
    if not np.any(active):
        return coef, float(np.max(np.abs(resid), initial=0.0))
    s = e_abs[:, active].sum(axis=1)
    r = np.abs(resid)
    ok = s > 0
    if np.any(ok):
        coef[active] = float(np.max(r[ok] / s[ok]))
    if np.any(~ok):
        leftover = float(np.max(r[~ok], initial=0.0))
    return coef, leftover


def estimate_interconnection_bounds(traj, sys: InterconnectedSystem, obs: ObserverPlant | None = None) -> InterconnectionBounds:
    """Fit the smallest envelope constants that hold at every trajectory sample.

    ``rho`` is recomputed from the true and estimated states (truth side, so
    ``delta`` is visible here). ``alpha0`` absorbs ``max |delta_i|``.
    """
    K = len(traj)
    if K < MIN_SAMPLES:
        raise InsufficientDataError(f"need at least {MIN_SAMPLES} samples, got {K}")
    N = sys.N
    r1, r2, dl = _rho_history(traj, sys)
    e = traj.xhat - traj.x
    e_abs = np.abs(e)
    dep1, dep2 = _probe_dependencies(sys, traj)
    at = np.zeros((N, N))
    bt = np.zeros((N, N))
    al = np.zeros((N, N))
    be = np.zeros((N, N))
    notes = []
    alpha0 = float(np.max(np.abs(dl), initial=0.0))
    extra0 = 0.0
    for i in range(N):
        coef, left = _envelope(r1[:, i], e_abs, dep1[i])
        if left > 0:
            # cascade rows have no constant term; widen to every upstream channel
            mask = np.zeros(2 * N, dtype=bool)
            mask[1:2 * i:2] = True
            coef, left = _envelope(r1[:, i], e_abs, mask)
            notes.append(f"rho_{i + 1}1: dependency probe incomplete, used all upstream channels")
        if left > 0:
            notes.append(f"rho_{i + 1}1: {left:.3e} not coverable by cascade terms")
        at[i] = coef[0::2]
        bt[i] = coef[1::2]
        df = r2[:, i] + dl[:, i]  # f2(xhat) - f2(x)
        coef2, left2 = _envelope(df, e_abs, dep2[i])
        al[i] = coef2[0::2]
        be[i] = coef2[1::2]
        extra0 = max(extra0, left2)
    if extra0 > 0:
        notes.append(f"alpha0 widened by {extra0:.3e} for residual change with all active errors zero")
    b = InterconnectionBounds(alpha0 + extra0, al, be, at, bt, K, notes)
    return b


def bound_violations(bounds: InterconnectionBounds, traj, sys: InterconnectedSystem, rtol: float = 1e-12) -> int:
    """Count samples where a residual exceeds its envelope (a posteriori check)."""
    r1, r2, _ = _rho_history(traj, sys)
    e = traj.xhat - traj.x
    b1 = bounds.bound_rho1(e)
    b2 = bounds.bound_rho2(e)
    slack1 = rtol * (1 + b1)
    slack2 = rtol * (1 + b2)
    bad = (np.abs(r1) > b1 + slack1) | (np.abs(r2) > b2 + slack2)
    return int(np.count_nonzero(np.any(bad, axis=1)))


# ---------------------------------------------------------- feasibility


def decrease_coefficients(certs, bounds: InterconnectionBounds, gains: ObserverGains, gamma: float, eta: float = DEFAULT_ETA):
    """Coefficients ``(c_i, ctilde_i)`` of the ``||xi_i||`` and ``||xi_i||^2`` terms at a common ``gamma``."""
    N = len(certs)
    c = np.empty(N)
    ct = np.empty(N)
    g2 = gamma * gamma
    for i in range(N):
        ci, gi = certs[i], gains.subsystems[i]
        base = eta * ci.g_min * ci.lambda_min_Q
        c[i] = 0.5 * gamma * base * gi.mu.mu1 ** 2 - 2.0 * ci.lambda_max_P * bounds.alpha0 / gamma
        self_term = bounds.alpha[i, i] / gi.mu.mu2 + bounds.beta[i, i] * gamma
        cross = 0.0
        for j in range(N):
            cj, gj = certs[j], gains.subsystems[j]
            cross += ci.lambda_max_P / g2 * (bounds.alpha[i, j] / gj.mu.mu2 + bounds.beta[i, j] * gamma)
            cross += cj.lambda_max_P / g2 * self_term
        ct[i] = gamma * (base * gi.mu.mu2 - cross)
    return c, ct


def omega_coefficients(certs, bounds: InterconnectionBounds, gains: ObserverGains, gamma, eta: float = DEFAULT_ETA) -> np.ndarray:
    """Matrix ``K`` with ``Omega = {xi : ||xi_i|| >= sum_j K[i, j] ||xi_j|| for all i}``.

    ``gamma`` may be a scalar or one value per subsystem (row ``i`` uses ``gamma_i``).
    """
    N = len(certs)
    gam = np.broadcast_to(np.asarray(gamma, dtype=float), (N,))
    K = np.zeros((N, N))
    for i in range(N):
        ci = certs[i]
        lead = 2.0 * ci.lambda_max_P / ((1.0 - eta) * ci.g_min * ci.lambda_min_Q) / gam[i]
        for j in range(N):
            if j == i:
                continue
            mu_j2 = gains.subsystems[j].mu.mu2
            K[i, j] = lead * (bounds.alpha_tilde[i, j] / mu_j2 + bounds.beta_tilde[i, j] * gam[i])
    return K


@dataclass
class FeasibilityReport:
    eta: float
    gamma_eval: float
    c: np.ndarray
    c_tilde: np.ndarray
    feasible_at_gains: bool
    gamma_min: float | None
    omega: np.ndarray
    grid: list[tuple[float, bool]]

    @property
    def monotone_on_grid(self) -> bool:
        seen = False
        for _, ok in self.grid:
            if seen and not ok:
                return False
            seen = seen or ok
        return True

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "gamma_eval": self.gamma_eval,
            "c": self.c.tolist(),
            "c_tilde": self.c_tilde.tolist(),
            "feasible_at_gains": self.feasible_at_gains,
            "gamma_min": self.gamma_min,
            "omega_coefficients": self.omega.tolist(),
            "grid": [[g, ok] for g, ok in self.grid],
            "monotone_on_grid": self.monotone_on_grid,
        }


def _feasible(certs, bounds, gains, gamma, eta) -> bool:
    c, ct = decrease_coefficients(certs, bounds, gains, gamma, eta)
    return bool(np.all(c > 0) and np.all(ct > 0))


def gain_feasibility(certs, bounds: InterconnectionBounds, gains: ObserverGains, eta: float = DEFAULT_ETA, grid=None) -> FeasibilityReport:
    """Evaluate the decrease coefficients and search the smallest admissible ``gamma``.

    The analysis uses one common ``gamma``; with per-subsystem values the
    smallest one is evaluated.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    gamma_eval = min(g.gamma for g in gains.subsystems)
    c, ct = decrease_coefficients(certs, bounds, gains, gamma_eval, eta)
    feasible = bool(np.all(c > 0) and np.all(ct > 0))
    lo, hi = GAMMA_SEARCH
    if _feasible(certs, bounds, gains, lo, eta):
        gamma_min = lo
    elif not _feasible(certs, bounds, gains, hi, eta):
        gamma_min = None
    else:
        a, b = math.log(lo), math.log(hi)
        for _ in range(GAMMA_BISECT_ITERS):
            mid = 0.5 * (a + b)
            if _feasible(certs, bounds, gains, math.exp(mid), eta):
                b = mid
            else:
                a = mid
        gamma_min = math.exp(b)
    if grid is None:
        grid = np.logspace(-3, 6, 91)
    sweep = [(float(g), _feasible(certs, bounds, gains, float(g), eta)) for g in grid]
    omega = omega_coefficients(certs, bounds, gains, [g.gamma for g in gains.subsystems], eta)
    return FeasibilityReport(eta, gamma_eval, c, ct, feasible, gamma_min, omega, sweep)


# ----------------------------------------------------------- monitoring


@dataclass
class DecreaseReport:
    times: np.ndarray
    V: np.ndarray
    V_i: np.ndarray
    in_omega: np.ndarray
    violations: np.ndarray

    @property
    def n_violations(self) -> int:
        return int(self.violations.size)

    def to_dict(self) -> dict:
        return {
            "n_samples": int(self.times.size),
            "n_in_omega": int(np.count_nonzero(self.in_omega)),
            "n_violations": self.n_violations,
            "violation_times": self.times[self.violations].tolist()[:50],
            "V_initial": float(self.V[0]),
            "V_final": float(self.V[-1]),
            "V_min": float(self.V.min()),
            "V_max": float(self.V.max()),
        }


def tol_v(V):
    return 1e-9 + 1e-6 * V


def monitor_decrease(traj, certs, gains: ObserverGains, bounds: InterconnectionBounds, eta: float = DEFAULT_ETA) -> DecreaseReport:
    """Flag sample steps that start inside Omega yet increase ``V`` beyond ``tol_v``."""
    e = traj.xhat - traj.x
    Vi = lyap_series(e, certs, gains)
    V = Vi.sum(axis=1)
    norms = np.linalg.norm(xi_samples(e, gains), axis=2)
    K = omega_coefficients(certs, bounds, gains, [g.gamma for g in gains.subsystems], eta)
    in_omega = np.all(norms >= norms @ K.T, axis=1)
    dV = np.diff(V)
    bad = in_omega[:-1] & (dV > tol_v(V[:-1]))
    return DecreaseReport(traj.times, V, Vi, in_omega, np.flatnonzero(bad))
