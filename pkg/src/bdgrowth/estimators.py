"""Point estimators of the net growth rate from coalescence times.

Four families:

  pairwise      r_hat = c(n) * (n-1)(n-2) / sum_{i,j} (H_i - H_j)^+, the
                order-statistic estimator; the double sum equals the sum of
                |H_i - H_j| over unordered pairs and is evaluated with a
                sorted prefix-sum identity in O(n log n).

  lengths       r_hat = n / L_in, where L_in is the total internal branch
                length. On branch-ordered times
                L_in = (max_i H_i - H_1) + sum_{i<=n-2} (H_i - H_{i+1})^+;
                on a real tree the topology-true edge sum is used instead,
                since files carry no branch order.

  mle           fit H_i = a + b*U_i with U_i standard logistic by maximum
                likelihood (damped Newton on (a, log b), bisection fallback)
                and report r_hat = 1/b.

  raw (c = 1)   the pairwise estimator without calibration, used as the
                pivot for confidence intervals.

Pairwise and MLE estimates are permutation invariant; the branch-order
internal length deliberately is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coalescent import CoalescenceTimes
from .errors import BranchOrderUnknown, DegenerateTimes, NonConvergence, SampleTooSmall
from .treeio import SampleTree, tree_internal_branch_length

METHODS = ("MSE", "Bias", "Inv", "Lengths", "MLE", "RawUnitConstant")

_GRAD_TOL = 1e-8  # on the dimensionless gradient in (a, log b)
_SQRT3_OVER_PI = math.sqrt(3.0) / math.pi


@dataclass(frozen=True)
class Estimate:
    method: str
    point: float
    ci: tuple[float, float] | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if not (self.point > 0 and math.isfinite(self.point)):
            raise ValueError("estimate must be positive and finite")
        if self.ci is not None:
            lo, hi = self.ci
            if not (0 < lo < hi):
                raise ValueError("confidence interval must satisfy 0 < lower < upper")


@dataclass(frozen=True)
class PairwiseStatistic:
    n: int
    d_sum: float  # sum over ordered pairs of (H_i - H_j)^+


@dataclass(frozen=True)
class MleFit:
    a: float
    b: float
    loglik: float
    converged: bool


def pairwise_abs_sum(values: np.ndarray) -> float:
    """Sum of |v_i - v_j| over unordered pairs.

    Sorted prefix-sum identity: with v_(1) <= ... <= v_(m), the sum equals
    sum_k (2k - m - 1) * v_(k). The test suite checks this against the
    O(m^2) double loop, exactly on integer-valued instances.
    """
    m = values.size
    srt = np.sort(values)
    if srt[0] == srt[-1]:
        return 0.0
    coef = 2.0 * np.arange(1, m + 1) - m - 1
    return float(coef @ srt)


def pairwise_abs_sum_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise pairwise_abs_sum for a (replicates, m) matrix."""
    m = matrix.shape[1]
    srt = np.sort(matrix, axis=1)
    coef = 2.0 * np.arange(1, m + 1) - m - 1
    out = srt @ coef
    out[srt[:, 0] == srt[:, -1]] = 0.0
    return out


def pairwise_statistic(times: CoalescenceTimes) -> PairwiseStatistic:
    if times.n < 3:
        raise SampleTooSmall("pairwise statistic needs n >= 3")
    d_sum = pairwise_abs_sum(times.as_array())
    if d_sum == 0.0:
        raise DegenerateTimes("all coalescence times are equal")
    return PairwiseStatistic(n=times.n, d_sum=d_sum)


def raw_pairwise_point(times: CoalescenceTimes) -> float:
    """The c = 1 pairwise estimate (n-1)(n-2) / d_sum."""
    stat = pairwise_statistic(times)
    return (stat.n - 1) * (stat.n - 2) / stat.d_sum


def estimate_pairwise(times: CoalescenceTimes, c: float = 1.0,
                      method: str = "RawUnitConstant") -> Estimate:
    """Pairwise estimate with constant c; exactly c times the raw estimate."""
    if not (c > 0 and math.isfinite(c)):
        raise ValueError("constant must be positive and finite")
    return Estimate(method=method, point=c * raw_pairwise_point(times))


def internal_branch_length(times: CoalescenceTimes) -> float:
    """Total internal branch length from branch-ordered times.

    (max_i H_i - H_1) plus the positive parts of consecutive differences;
    order-sensitive by design, so order-statistic inputs are rejected.
    """
    if times.n < 3:
        raise SampleTooSmall("internal branch length needs n >= 3")
    if not times.branch_order:
        raise BranchOrderUnknown(
            "times carry only order statistics; use the tree-based internal length"
        )
    h = times.as_array()
    d = h[:-1] - h[1:]
    return float((h.max() - h[0]) + d[d > 0].sum())


def internal_branch_length_rows(matrix: np.ndarray) -> np.ndarray:
    """Row-wise internal_branch_length for a (replicates, m) matrix."""
    d = matrix[:, :-1] - matrix[:, 1:]
    return (matrix.max(axis=1) - matrix[:, 0]) + np.where(d > 0, d, 0.0).sum(axis=1)


def estimate_lengths(source: CoalescenceTimes | SampleTree) -> Estimate:
    """Lengths-based estimate n / L_in.

    Accepts branch-ordered times (point-process formula) or a parsed tree
    (topology-true edge sum); real trees never come with branch order.
    """
    if isinstance(source, SampleTree):
        n = source.n_tips
        if n < 3:
            raise SampleTooSmall("lengths estimator needs n >= 3")
        length = tree_internal_branch_length(source)
    else:
        n = source.n
        length = internal_branch_length(source)
    if length <= 0:
        raise DegenerateTimes("internal branch length is zero")
    return Estimate(method="Lengths", point=n / length)


# ---------------------------------------------------------------------------
# Logistic location-scale maximum likelihood
# ---------------------------------------------------------------------------


def _loglik_and_derivs(h: np.ndarray, a: float, s: float):
    """Log-likelihood plus gradient and Hessian pieces at (a, log b = s).

    With z = (h - a)/b and t = tanh(z/2):
      loglik     = sum(-s - z - 2*log(1 + exp(-z)))
      b * dl/da  = sum(t)
      dl/ds      = sum(z*t) - m
      d2l/da2    = -sum(w)/b^2,          w = (1 - t^2)/2
      d2l/dads   = -(sum(t) + sum(w*z))/b
      d2l/ds2    = -sum(z*t) - sum(w*z^2)
    """
    b = math.exp(s)
    z = (h - a) / b
    t = np.tanh(0.5 * z)
    w = 0.5 * (1.0 - t * t)
    ll = float(np.sum(-z - 2.0 * np.logaddexp(0.0, -z))) - h.size * s
    sum_t = float(np.sum(t))
    sum_zt = float(np.sum(z * t))
    sum_w = float(np.sum(w))
    sum_wz = float(np.sum(w * z))
    sum_wzz = float(np.sum(w * z * z))
    ga_scaled = sum_t
    gs = sum_zt - h.size
    h_aa = -sum_w / (b * b)
    h_as = -(sum_t + sum_wz) / b
    h_ss = -sum_zt - sum_wzz
    return ll, ga_scaled, gs, h_aa, h_as, h_ss


def _loglik(h: np.ndarray, a: float, s: float) -> float:
    z = (h - a) / math.exp(s)
    return float(np.sum(-z - 2.0 * np.logaddexp(0.0, -z))) - h.size * s


def _solve_location(h: np.ndarray, b: float) -> float:
    # sum tanh((h - a)/(2b)) is strictly decreasing in a with a sign change
    # inside [min h, max h]
    lo, hi = float(h.min()), float(h.max())
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if np.sum(np.tanh((h - mid) / (2.0 * b))) >= 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _solve_scale(h: np.ndarray, a: float, b_start: float) -> float:
    # sum z*tanh(z/2) - m is strictly decreasing in b; positive as b -> 0
    def phi(b):
        z = (h - a) / b
        return float(np.sum(z * np.tanh(0.5 * z))) - h.size

    lo = hi = b_start
    for _ in range(200):
        if phi(lo) > 0.0:
            break
        lo *= 0.25
    for _ in range(200):
        if phi(hi) < 0.0:
            break
        hi *= 4.0
    for _ in range(120):
        mid = math.sqrt(lo * hi)
        if phi(mid) >= 0.0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def fit_logistic(h: np.ndarray) -> MleFit:
    """Maximum-likelihood (a, b) for h_i = a + b*U_i, U_i standard logistic.

    Moment initialization (b0 = sd * sqrt(3)/pi), damped Newton on
    (a, log b), and a coordinate-bisection fallback on the stationarity
    equations if Newton stalls. Convergence means the dimensionless gradient
    (sum tanh(z/2), sum z*tanh(z/2) - m) has max-norm below 1e-8.
    """
    h = np.asarray(h, dtype=float)
    a = float(np.mean(h))
    sd = float(np.std(h, ddof=1))
    s = math.log(sd * _SQRT3_OVER_PI)

    ll, ga, gs, h_aa, h_as, h_ss = _loglik_and_derivs(h, a, s)
    converged = False
    for _ in range(60):
        if max(abs(ga), abs(gs)) < _GRAD_TOL:
            converged = True
            break
        b = math.exp(s)
        g1, g2 = ga / b, gs
        det = h_aa * h_ss - h_as * h_as
        if not (det > 0.0 and h_aa < 0.0):
            break
        da = -(h_ss * g1 - h_as * g2) / det
        ds = -(h_aa * g2 - h_as * g1) / det
        if not (math.isfinite(da) and math.isfinite(ds)):
            break
        step = 1.0
        improved = False
        for _ in range(40):
            trial = _loglik(h, a + step * da, s + step * ds)
            if math.isfinite(trial) and trial >= ll:
                a, s = a + step * da, s + step * ds
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        ll, ga, gs, h_aa, h_as, h_ss = _loglik_and_derivs(h, a, s)

    if not converged:
        # coordinate bisection on the two stationarity equations
        b = math.exp(s)
        for _ in range(100):
            a = _solve_location(h, b)
            b = _solve_scale(h, a, b)
            s = math.log(b)
            ll, ga, gs, *_ = _loglik_and_derivs(h, a, s)
            if max(abs(ga), abs(gs)) < _GRAD_TOL:
                converged = True
                break

    b = math.exp(s)
    if not (math.isfinite(ll) and math.isfinite(b) and b > 0):
        raise NonConvergence(f"optimizer left the feasible region (a={a}, b={b})")
    return MleFit(a=a, b=b, loglik=ll, converged=converged)


def estimate_mle(times: CoalescenceTimes) -> tuple[Estimate, MleFit]:
    """Logistic-fit estimate of the growth rate, r_hat = 1/b."""
    if times.n < 3:
        raise SampleTooSmall("MLE needs n >= 3")
    h = times.as_array()
    if h.min() == h.max():
        raise DegenerateTimes("all coalescence times are equal")
    fit = fit_logistic(h)
    return Estimate(method="MLE", point=1.0 / fit.b), fit
