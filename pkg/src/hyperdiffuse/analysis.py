"""Stability-bound calculators, empirical lemma checks and the spectral view of SHKC."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diffusion import DiffusionOperator, apply_diffusion
from .errors import BoundViolation, KTooLarge
from .model import ShkcModel, forward, loss_and_grads
from .transition import l1_norm

log = logging.getLogger(__name__)

MAX_FILTER_ORDER = 60


def c_alpha_beta_l(alpha: float, beta: float, L: int, d_T: float) -> float:
    """``beta/L * sum_{l=1..L} (alpha*d_T)**l + (1 - beta)``."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    r = alpha * d_T
    return beta / L * math.fsum(r**l for l in range(1, L + 1)) + (1.0 - beta)


@dataclass
class TheoryConstants:
    C_x: float
    C_theta: float
    d_T: float
    alpha: float
    beta: float
    L: int
    eta: float
    T_steps: int
    m: int
    n: int
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("C_x", "C_theta", "d_T", "alpha", "beta", "eta", "kappa"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if self.L < 1 or self.T_steps < 1:
            raise ValueError("L and T_steps must be >= 1")


@dataclass
class GapTerms:
    K: float
    stability_term: float  # mu*kappa*(1 + 2*sqrt(2 K ln(1/delta)))
    sample_term: float  # (m+n)/(mn) * sqrt(2 K ln(1/delta))
    total: float
    delta: float
    indicative: bool = True  # big-O constants set to 1


@dataclass
class LemmaCheck:
    name: str
    empirical: float
    bound: float
    ok: bool


@dataclass
class StabilityReport:
    C_alpha_beta_L: float
    h_max_bound: float
    L_M: float
    G_M: float
    S_M: float
    G_M_kappa: float
    S_M_kappa: float
    mu: Optional[float] = None
    mu_kappa: Optional[float] = None
    mu_overflow: bool = False
    gap: Optional[GapTerms] = None
    empirical_h_max: Optional[float] = None
    empirical_l1: Optional[float] = None
    lemma_checks: list[LemmaCheck] = field(default_factory=list)
    constants: Optional[dict] = None

    @property
    def all_lemmas_ok(self) -> bool:
        return all(c.ok for c in self.lemma_checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["all_lemmas_ok"] = self.all_lemmas_ok
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), allow_nan=True, **kw)


def theorem1_constants(c: TheoryConstants) -> StabilityReport:
    """Lipschitz, gradient and smoothness constants of SHKC.

    The plain constants follow the theorem statement; the ``*_kappa``
    variants carry the loss Lipschitz constant through the gradient bounds.
    """
    C = c_alpha_beta_l(c.alpha, c.beta, c.L, c.d_T)
    cx, ct = c.C_x, c.C_theta
    L_M = cx * C * max(1.0, ct)
    G_M = cx * C * (1.0 + ct)
    S_M = cx**2 * C**2 * max(1.0, ct) ** 2 + cx**2 * C**2 * ct + cx * C
    return StabilityReport(
        C_alpha_beta_L=C,
        h_max_bound=C * cx * ct,
        L_M=L_M,
        G_M=G_M,
        S_M=S_M,
        G_M_kappa=c.kappa * G_M,
        S_M_kappa=c.kappa * S_M,
        constants=asdict(c),
    )


def mu_shkc(L_M: float, G_M: float, S_M: float, eta: float, m: int, T_steps: int) -> float:
    """Uniform stability ``2 eta L_M G_M / m * sum_{t=1..T} (1 + eta S_M)**(t-1)``.

    Returns ``inf`` when the sum leaves the float range.
    """
    if m < 1 or T_steps < 1:
        raise ValueError("m and T_steps must be >= 1")
    prefactor = 2.0 * eta * L_M * G_M / m
    if prefactor == 0:
        return 0.0
    r = 1.0 + eta * S_M
    try:
        total = math.fsum(r**k for k in range(T_steps))
    except OverflowError:
        total = math.inf
    with np.errstate(over="ignore"):
        mu = float(np.float64(prefactor) * np.float64(total))
    if math.isinf(mu):
        log.warning("stability sum overflowed for eta=%g, S_M=%g, T=%d", eta, S_M, T_steps)
    return mu


def k_mn(m: int, n: int) -> float:
    """``K(m, n) = sum_{i=1..m} n^2 / (n + i)^2``."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    return math.fsum(n * n / ((n + i) * (n + i)) for i in range(1, m + 1))


def usb_gap(mu: float, kappa: float, m: int, n: int, delta: float = 0.05) -> GapTerms:
    """Transductive generalization-gap bound with unit big-O constants (indicative only)."""
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    K = k_mn(m, n)
    root = math.sqrt(2.0 * K * math.log(1.0 / delta))
    stability = mu * kappa * (1.0 + 2.0 * root) if mu else 0.0
    sample = (m + n) / (m * n) * root
    return GapTerms(K=K, stability_term=stability, sample_term=sample, total=stability + sample, delta=delta)


def stability_report(c: TheoryConstants, delta: float = 0.05) -> StabilityReport:
    report = theorem1_constants(c)
    report.mu = mu_shkc(report.L_M, report.G_M, report.S_M, c.eta, c.m, c.T_steps)
    report.mu_kappa = mu_shkc(report.L_M, report.G_M_kappa, report.S_M_kappa, c.eta, c.m, c.T_steps)
    report.mu_overflow = math.isinf(report.mu)
    report.gap = usb_gap(report.mu, c.kappa, c.m, c.n, delta)
    return report


# ------------------------------------------------------------ lemma checks
def head_lipschitz(num_outputs: int) -> float:
    """Bound on ``|dLoss/dlogits|_2`` for the cross-entropy head.

    Sigmoid with binary cross-entropy gives ``|p - y| <= 1``; softmax gives
    ``|p - e_y|_2 <= sqrt(2)`` for any number of classes.
    """
    return 1.0 if num_outputs == 1 else math.sqrt(2.0)


def max_row_norm(A) -> float:
    A = np.asarray(A, dtype=np.float64)
    return float(np.sqrt((A**2).sum(axis=1)).max()) if A.size else 0.0


def spectral_norm(A) -> float:
    A = np.asarray(A, dtype=np.float64)
    return float(np.linalg.norm(A, 2)) if A.size else 0.0


def verify_lemma_bounds(
    op: DiffusionOperator,
    X,
    model: ShkcModel,
    labels=None,
    rows=None,
    theta_tilde=None,
    d_T: float | None = None,
    tol: float = 1e-8,
    strict: bool = False,
) -> StabilityReport:
    """Compare measured hidden-representation and gradient norms with their bounds.

    ``C_x`` is the largest feature row norm and ``C_theta`` the spectral norm
    of ``model.theta``. ``d_T`` defaults to the l1 bound stored on the
    transition matrix. Gradient checks use the data loss (no weight decay)
    on ``rows`` and need ``labels``; the classifier-norm assumption
    ``|omega| <= 1`` is generalized to a ``max(1, |omega|)`` factor.
    With ``strict`` a :class:`BoundViolation` lists every failed check.
    """
    X = np.asarray(X, dtype=np.float64)
    T = op.transition
    if d_T is None:
        d_T = T.l1_bound
        if d_T is None:
            raise ValueError("d_T is required for a non-renormalized transition matrix")
    p = op.params
    C = c_alpha_beta_l(p.alpha, p.beta, p.steps, d_T)
    C_x = max_row_norm(X)
    C_theta = spectral_norm(model.theta)
    C_omega = spectral_norm(model.classifier)
    kappa = head_lipschitz(model.num_outputs)

    S = apply_diffusion(op, X)
    H, _ = forward(model, S)
    checks = []

    def check(name, empirical, bound):
        checks.append(LemmaCheck(name, float(empirical), float(bound), bool(empirical <= bound + tol)))

    check("l1_norm", l1_norm(T), d_T)
    h_max = max_row_norm(H)
    check("h_max", h_max, C * C_x * C_theta)
    if theta_tilde is not None:
        theta_tilde = np.asarray(theta_tilde, dtype=np.float64)
        H2, _ = forward(ShkcModel(theta_tilde, model.classifier, model.bias), S)
        check("delta_h_max", max_row_norm(H - H2), C * C_x * spectral_norm(model.theta - theta_tilde))
    if labels is not None:
        if rows is None:
            rows = np.flatnonzero(np.asarray(labels) >= 0)
        _, g_theta, g_classifier, _ = loss_and_grads(model, S, labels, rows)
        check("grad_theta", spectral_norm(g_theta), kappa * C_x * C * max(1.0, C_omega))
        check("grad_classifier", spectral_norm(g_classifier), kappa * C_x * C * C_theta)

    report = theorem1_constants(
        TheoryConstants(C_x=C_x, C_theta=C_theta, d_T=d_T, alpha=p.alpha, beta=p.beta,
                        L=p.steps, eta=0.0, T_steps=1, m=1, n=1, kappa=kappa)
    )
    report.empirical_h_max = h_max
    report.empirical_l1 = l1_norm(T)
    report.lemma_checks = checks
    if strict and not report.all_lemmas_ok:
        bad = [c for c in checks if not c.ok]
        raise BoundViolation("; ".join(f"{c.name}: {c.empirical:.6g} > {c.bound:.6g}" for c in bad))
    return report


# ---------------------------------------------------------- spectral view
def filter_coefficients(alpha: float, K: int) -> np.ndarray:
    """Coefficients ``alpha**k / K`` of the powers ``T**k``, k = 0..K (``0**0 = 1``)."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    return np.array([alpha**k / K for k in range(K + 1)])


def spectral_coefficients(alpha: float, K: int) -> np.ndarray:
    """Coefficients of the same filter written in powers of the Laplacian ``I - T``.

    ``xi_i = (-1)**i * sum_{k=i..K} binom(k, i) * alpha**k / K``.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > MAX_FILTER_ORDER:
        raise KTooLarge(f"K={K} exceeds the supported maximum {MAX_FILTER_ORDER}")
    theta = filter_coefficients(alpha, K)
    xi = np.empty(K + 1)
    for i in range(K + 1):
        s = math.fsum(math.comb(k, i) * theta[k] for k in range(i, K + 1))
        xi[i] = -s if i % 2 else s
    return xi


def spectrum(op: DiffusionOperator) -> np.ndarray:
    """Eigenvalues of the dense diffusion operator in ascending order."""
    return np.linalg.eigvalsh(op.dense())


def spectrum_histogram(op: DiffusionOperator, thresholds: Sequence[float]) -> list[int]:
    """Number of eigenvalues ``>= threshold`` for each threshold."""
    eig = spectrum(op)
    return [int(np.count_nonzero(eig >= t)) for t in thresholds]
