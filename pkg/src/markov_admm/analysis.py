"""Optimality certificates, certified contraction constants, and diagnostics.

The reference optimum (x*, z*, beta*) anchors every error metric.  The
contraction margin ``c`` depends only on the problem curvature, the penalty,
and the incidence spectra; the chain contributes mixing constants that
determine the burn-in ``k_prime`` after which the expected per-step
contraction factor ``1 - alpha_kprime`` is certified below one.  Constants
that cannot be certified are reported as such, never fabricated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .admm import AlgState, hypothetical_full_update
from .errors import (
    DegenerateSeries,
    InconsistentKKT,
    InvalidDual,
    PeriodicChainError,
    ValidationError,
)
from .graph import incidence
from .markov import K_CHECK_DEFAULT, MarkovChain, mixing_constants
from .objective import ProblemInstance, centralized_solve

__all__ = [
    "OptimalCertificate",
    "CertifiedConstants",
    "MetricsRow",
    "metrics_rows",
    "ContractionCheck",
    "kkt_certificate",
    "g_norm_sq",
    "contraction_margin",
    "contraction_constants",
    "contraction_test",
    "fit_linear_rate",
    "edge_update_probability",
    "trigger_probability_bounds",
    "kprime_bound",
    "kprime_bound_complete",
]

_KKT_TOL = 1e-6
_RANGE_TOL = 1e-8
_CONTRACTION_SLACK = 1e-9
_KAPPA_LO = 1.0 + 1e-9
_KAPPA_HI = 1e6


@dataclass(frozen=True)
class OptimalCertificate:
    """Reference primal-dual optimum with its residual norms."""

    x_star: np.ndarray      # (d,)
    z_star: np.ndarray      # (2|E|, d), every row equals x_star
    beta_star: np.ndarray   # (2|E|, d), minimum-norm dual
    kkt_residuals: dict


@dataclass(frozen=True)
class MetricsRow:
    k: int
    g_err: float
    x_err: float
    obj_gap: float
    consensus_res: float


def metrics_rows(record) -> list[MetricsRow]:
    """Row view of a run record's metric arrays."""
    m = record.metrics
    return [MetricsRow(k=int(m["k"][i]), g_err=float(m["g_err"][i]),
                       x_err=float(m["x_err"][i]), obj_gap=float(m["obj_gap"][i]),
                       consensus_res=float(m["consensus_res"][i]))
            for i in range(len(m["k"]))]


class ContractionCheck(NamedTuple):
    lhs: float
    rhs: float
    holds: bool


def kkt_certificate(p: ProblemInstance) -> OptimalCertificate:
    """Compute (x*, z*, beta*) and the three stationarity/feasibility residuals.

    beta* is the minimum-norm solution of ``I_minus beta = -grad``, which
    automatically lies in the range of the transposed oriented incidence
    matrix; the gradients of the local objectives at x* sum to zero, so the
    system is consistent up to solver precision.
    """
    x_star = centralized_solve(p)
    inc = incidence(p.graph)
    grads = np.array([o.grad(x_star) for o in p.objectives])  # (N, d)
    beta_star, *_ = np.linalg.lstsq(inc.I_minus, -grads, rcond=None)
    r_stationarity = float(np.linalg.norm(grads + inc.I_minus @ beta_star))
    if r_stationarity > _KKT_TOL:
        raise InconsistentKKT(
            f"dual reconstruction residual {r_stationarity:.3e} exceeds {_KKT_TOL}")
    x_rep = np.tile(x_star, (p.num_nodes, 1))
    r_consensus = float(np.linalg.norm(inc.I_minus.T @ x_rep))
    z_star = np.tile(x_star, (p.graph.num_arcs, 1))
    r_aux = float(np.linalg.norm(z_star - 0.5 * inc.I_plus.T @ x_rep))
    return OptimalCertificate(
        x_star=x_star,
        z_star=z_star,
        beta_star=beta_star,
        kkt_residuals={
            "stationarity": r_stationarity,
            "primal_consensus": r_consensus,
            "auxiliary": r_aux,
        },
    )


def g_norm_sq(z_dev, beta_dev, rho: float) -> float:
    """Weighted squared norm: rho ||z_dev||^2 + (1/rho) ||beta_dev||^2."""
    z_dev = np.asarray(z_dev, dtype=np.float64)
    beta_dev = np.asarray(beta_dev, dtype=np.float64)
    if z_dev.shape != beta_dev.shape:
        raise ValidationError(
            f"shape mismatch: {z_dev.shape} vs {beta_dev.shape}")
    return rho * float((z_dev ** 2).sum()) + (1.0 / rho) * float((beta_dev ** 2).sum())


def _margin_branches(p: ProblemInstance, rho: float):
    inc = incidence(p.graph)
    s2_minus = inc.sigma_min_minus ** 2
    s2_plus = inc.sigma_max_plus ** 2
    nu, L = p.nu, p.L

    def branch1(kappa):
        return (kappa - 1.0) / kappa * s2_minus / s2_plus

    def branch2(kappa):
        return nu / (kappa * L ** 2 / (rho * s2_minus) + rho * s2_plus / 4.0)

    return branch1, branch2


def contraction_margin(p: ProblemInstance, rho: float):
    """Best contraction margin c and its maximizer kappa_star.

    c(kappa) is the minimum of an increasing and a decreasing branch, hence
    unimodal; golden-section search over (1, 1e6) finds the crossing.
    """
    b1, b2 = _margin_branches(p, rho)

    def f(kappa):
        return min(b1(kappa), b2(kappa))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    lo, hi = _KAPPA_LO, _KAPPA_HI
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(300):
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = f(x1)
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    kappa_star = 0.5 * (lo + hi)
    return f(kappa_star), kappa_star


def kprime_bound(c, b, gamma, p_min, p_max, pi_min, pi_max) -> float:
    """Real-valued burn-in threshold; k' is any integer strictly above it.

    Requires a positive log argument, i.e. ``(1+c) p_min pi_min`` must
    exceed ``p_max pi_max``; otherwise the expected contraction can never
    be certified and ValueError is raised.
    """
    num = (1.0 + c) * p_min * pi_min - p_max * pi_max
    den = b * (p_max + (1.0 + c) * p_min)
    if num <= 0.0:
        raise ValueError("nonpositive log argument: bound cannot activate")
    return 1.0 + math.log(num / den) / math.log(gamma)


def kprime_bound_complete(c, b, gamma, N) -> float:
    """Burn-in threshold specialized to the uniform complete-graph chain."""
    return 1.0 + math.log(c / (b * N * (2.0 + c))) / math.log(gamma)


def _alpha_at(kprime, c, b, gamma, p_min, p_max, pi_min, pi_max):
    decay = b * gamma ** (kprime - 1)
    return 2.0 * p_min * (pi_min - decay) \
        - (2.0 / (1.0 + c)) * (p_max * (pi_max + decay))


@dataclass(frozen=True)
class CertifiedConstants:
    """Everything the linear-rate certificate needs, or the reason it fails."""

    rho: float
    nu: float
    L: float
    sigma_max_plus: float
    sigma_min_minus: float
    kappa_star: float
    c: float
    p_min: float
    p_max: float
    pi_min: float
    pi_max: float
    b: float | None
    gamma: float | None
    k_prime: int | None
    alpha_kprime: float | None
    contraction_factor: float | None
    certifiable: bool
    reason: str | None

    def as_dict(self):
        return {
            "rho": self.rho, "nu": self.nu, "L": self.L,
            "sigma_max_plus": self.sigma_max_plus,
            "sigma_min_minus": self.sigma_min_minus,
            "kappa_star": self.kappa_star, "c": self.c,
            "p_min": self.p_min, "p_max": self.p_max,
            "pi_min": self.pi_min, "pi_max": self.pi_max,
            "b": self.b, "gamma": self.gamma,
            "k_prime": self.k_prime, "alpha_kprime": self.alpha_kprime,
            "contraction_factor": self.contraction_factor,
            "certifiable": self.certifiable, "reason": self.reason,
        }


def contraction_constants(p: ProblemInstance, rho: float, mc: MarkovChain,
                          K_check: int = K_CHECK_DEFAULT) -> CertifiedConstants:
    """Assemble the certified constants for an instance/chain pair.

    Non-certifiability (periodic chain, nonpositive log argument, or a
    per-step contraction outside (0, 1)) is a reported outcome, not an
    error.
    """
    inc = incidence(p.graph)
    c, kappa_star = contraction_margin(p, rho)
    pi_min = float(mc.pi.min())
    pi_max = float(mc.pi.max())
    base = dict(
        rho=float(rho), nu=float(p.nu), L=float(p.L),
        sigma_max_plus=inc.sigma_max_plus, sigma_min_minus=inc.sigma_min_minus,
        kappa_star=kappa_star, c=c,
        p_min=mc.p_min, p_max=mc.p_max, pi_min=pi_min, pi_max=pi_max,
    )

    def fail(reason, gamma=None, b=None):
        return CertifiedConstants(**base, gamma=gamma, b=b, k_prime=None,
                                  alpha_kprime=None, contraction_factor=None,
                                  certifiable=False, reason=reason)

    try:
        gamma, b = mixing_constants(mc, K_check)
    except PeriodicChainError:
        return fail("chain is periodic: no geometric mixing rate below one")

    try:
        bound = kprime_bound(c, b, gamma, mc.p_min, mc.p_max, pi_min, pi_max)
    except ValueError:
        return fail(
            "(1+c) p_min pi_min <= p_max pi_max: the burn-in bound never activates",
            gamma=gamma, b=b)

    k_prime = max(1, math.floor(bound) + 1)
    alpha = _alpha_at(k_prime, c, b, gamma, mc.p_min, mc.p_max, pi_min, pi_max)
    if not 0.0 < alpha < 1.0:
        return fail(f"alpha_kprime={alpha!r} outside (0, 1)", gamma=gamma, b=b)
    return CertifiedConstants(**base, gamma=gamma, b=b, k_prime=int(k_prime),
                              alpha_kprime=float(alpha),
                              contraction_factor=float(1.0 - alpha),
                              certifiable=True, reason=None)


def _check_beta_in_range(p, beta):
    inc = incidence(p.graph)
    y, *_ = np.linalg.lstsq(inc.I_minus.T, beta, rcond=None)
    resid = float(np.linalg.norm(inc.I_minus.T @ y - beta))
    scale = max(1.0, float(np.abs(beta).max()))
    if resid > _RANGE_TOL * scale:
        raise InvalidDual(
            f"state dual outside the oriented-incidence range (residual {resid:.3e})")


def contraction_test(p: ProblemInstance, rho: float, state: AlgState,
                           *, c: float | None = None,
                           certificate: OptimalCertificate | None = None) -> ContractionCheck:
    """Check the one-step contraction of the full update in the weighted norm.

    Computes the uncommitted synchronous image w_hat of the state and tests
    ``||w_hat - w*||^2 <= (1/(1+c)) ||w - w*||^2`` with slack 1e-9, where the
    right-hand side is evaluated at the current state.  The state's dual
    must lie in the oriented-incidence range.
    """
    _check_beta_in_range(p, state.beta)
    if c is None:
        c, _ = contraction_margin(p, rho)
    if certificate is None:
        certificate = kkt_certificate(p)
    _, z_hat, beta_hat = hypothetical_full_update(p, rho, state)
    lhs = g_norm_sq(z_hat - certificate.z_star, beta_hat - certificate.beta_star, rho)
    rhs = g_norm_sq(state.z - certificate.z_star,
                    state.beta - certificate.beta_star, rho) / (1.0 + c)
    return ContractionCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + _CONTRACTION_SLACK)


def fit_linear_rate(series, burn_in: int):
    """Least-squares geometric rate of a positive error series after burn-in.

    Returns ``(rate, r_squared)`` with ``rate = exp(slope)`` of the
    log-linear fit.  A flat series fits exactly with rate 1.0; callers flag
    rates at or above one as non-contractive.
    """
    series = np.asarray(series, dtype=np.float64)
    if burn_in < 0:
        raise ValidationError("burn_in must be nonnegative")
    tail = series[burn_in:]
    if tail.size < 10:
        raise DegenerateSeries(
            f"only {tail.size} points after burn-in {burn_in}; need at least 10")
    y = np.log(np.maximum(tail, 1e-300))
    k = np.arange(burn_in, burn_in + tail.size, dtype=np.float64)
    slope, intercept = np.polyfit(k, y, 1)
    pred = slope * k + intercept
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot <= 1e-30 else 1.0 - ss_res / ss_tot
    return float(np.exp(slope)), r2


def edge_update_probability(mc: MarkovChain, i0: int, k: int, arc) -> float:
    """Exact probability that the dual on edge {i, j} is refreshed at step k.

    Equals ``P[i][j] P^(k-1)[i0][i] + P[j][i] P^(k-1)[i0][j]``, the chance
    that the chain traverses the edge in either direction at that step.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    i, j = arc
    Pk = np.linalg.matrix_power(mc.P, k - 1)
    return float(mc.P[i, j] * Pk[i0, i] + mc.P[j, i] * Pk[i0, j])


def trigger_probability_bounds(mc: MarkovChain, k: int,
                               K_check: int = K_CHECK_DEFAULT):
    """Mixing-based bracket (lower, upper) for the edge-trigger probability.

    ``lower = 2 p_min (pi_min - b gamma^(k-1))`` and
    ``upper = 2 p_max (pi_max + b gamma^(k-1))``; the lower bound is only
    informative once it turns positive.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    gamma, b = mixing_constants(mc, K_check)
    decay = b * gamma ** (k - 1)
    lower = 2.0 * mc.p_min * (float(mc.pi.min()) - decay)
    upper = 2.0 * mc.p_max * (float(mc.pi.max()) + decay)
    return lower, upper
