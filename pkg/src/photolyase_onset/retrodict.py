"""Retrodiction of the binding onset ``t0`` from aliquot measurements.

Three estimators, from cheapest to most general:

* :func:`two_point_estimate` inverts the pseudo-first-order curve exactly
  from any two aliquots.
* :func:`fit_pseudo_first` least-squares fits (S0 k, t0) to many aliquots.
* :func:`fit_second_order` fits the exact bimolecular curve, with S0 either
  known or estimated alongside (k, t0).

Both fits use the same damped Gauss-Newton driver and report a
linearized confidence interval; :func:`bootstrap_ci` gives the
parametric-bootstrap alternative driven by Poisson counting noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .assay import AliquotMeasurement
from .errors import (
    ConvergenceError,
    DegenerateRateError,
    EstimationError,
    InputError,
    SaturationError,
    UncertaintyError,
)
from .kinetics import ReactionParams, pseudo_first_curve, second_order_curve

MAX_ITER = 100
STEP_RTOL = 1e-10
# condition number of the scaled Jacobian above which a fit is indeterminate
MAX_CONDITION = 1e10
PS_FLOOR_REL = 1e-6


@dataclass(frozen=True)
class RetrodictionResult:
    """Fitted onset and rates.

    ``rate_hat`` is always the apparent first-order rate S0*k (s^-1). The
    second-order fit additionally fills ``k_hat`` and ``s0_hat`` (the
    latter echoes the supplied S0 when it was held fixed).
    """

    model: str
    t0_hat: float
    rate_hat: float
    residual_norm: float
    ci_t0: tuple
    confidence: float
    n_points: int
    p0: float
    k_hat: float | None = None
    s0_hat: float | None = None
    s0_fitted: bool = False
    n_iter: int = 0

    def predict(self, t):
        """Model complex concentration at time(s) ``t``."""
        if self.model == "pseudo_first":
            return pseudo_first_curve(t, self.p0, self.rate_hat, self.t0_hat)
        return second_order_curve(t, self.p0, self.s0_hat, self.k_hat, self.t0_hat)

    def reaction_params(self) -> ReactionParams | None:
        if self.k_hat is None:
            return None
        return ReactionParams(self.p0, self.s0_hat, self.k_hat, self.t0_hat)

    def as_dict(self) -> dict:
        out = {
            "model": self.model,
            "n_points": self.n_points,
            "t0_hat": self.t0_hat,
            "rate_hat": self.rate_hat,
        }
        if self.k_hat is not None:
            out["k_hat"] = self.k_hat
            out["s0_hat"] = self.s0_hat
            out["s0_fitted"] = self.s0_fitted
        out.update(
            residual_norm=self.residual_norm,
            confidence=self.confidence,
            ci_t0_low=self.ci_t0[0],
            ci_t0_high=self.ci_t0[1],
            iterations=self.n_iter,
        )
        return out


def two_point_estimate(m1, m2, p0: float) -> tuple[float, float]:
    """Closed-form (S0 k, t0) from two aliquots.

    ln[(p0 - ps1) / (p0 - ps2)] = S0 k (t2 - t1) gives the rate, and the
    first point placed on the curve gives the onset. Works for any pair
    of instants; on exact pseudo-first-order data every pair agrees.
    """
    t1, t2 = m1.gel_time, m2.gel_time
    if not t1 < t2:
        raise InputError(f"gel times must be increasing, got {t1!r} then {t2!r}")
    ps1, ps2 = m1.ps_estimate, m2.ps_estimate
    for ps in (ps1, ps2):
        if ps < 0:
            raise InputError(f"negative ps estimate {ps!r}")
        if ps >= p0:
            raise SaturationError(f"ps estimate {ps!r} reaches the bound-photolyase ceiling {p0!r}")
    if ps1 == ps2:
        raise DegenerateRateError(f"aliquots at t={t1!r} and t={t2!r} carry the same signal")
    l1 = math.log1p(-ps1 / p0)
    l2 = math.log1p(-ps2 / p0)
    rate = (l1 - l2) / (t2 - t1)
    if not rate > 0:
        raise DegenerateRateError(f"signal decreases between t={t1!r} and t={t2!r}; apparent rate {rate!r}")
    return rate, t1 + l1 / rate


def fit_pseudo_first(
    measurements: Sequence[AliquotMeasurement],
    p0: float,
    confidence: float = 0.95,
    weights: str = "none",
) -> RetrodictionResult:
    """Least-squares fit of the pseudo-first-order curve.

    Unknowns are the apparent rate S0*k and the onset ``t0``. The
    iteration starts from the two-point estimate on the first and last
    usable aliquots (0 < ps < p0) and falls back to a log-linear
    regression when that pair is degenerate.
    """
    t, y = _prepare(measurements, p0, minimum=2)
    _check_confidence(confidence)
    w = _weights(y, p0, weights)
    rate0, t00 = _initial_pseudo(measurements, t, y, p0)
    tau = 1.0 / rate0

    def unpack(theta):
        return math.exp(theta[0]), float(theta[1] * tau)

    def residual(theta):
        rate, t0 = unpack(theta)
        return (pseudo_first_curve(t, p0, rate, t0) - y) * w

    def jacobian(theta):
        rate, t0 = unpack(theta)
        dt = t - t0
        live = dt > 0
        decay = np.where(live, np.exp(-rate * np.where(live, dt, 0.0)), 0.0)
        j = np.empty((t.size, 2))
        j[:, 0] = p0 * rate * np.where(live, dt, 0.0) * decay
        j[:, 1] = -p0 * rate * decay * tau
        return j * w[:, None]

    theta, n_iter, jac = _damped_gauss_newton(residual, jacobian, np.array([math.log(rate0), t00 / tau]))
    rate, t0 = unpack(theta)
    res = pseudo_first_curve(t, p0, rate, t0) - y
    ci = _linear_ci(residual(theta), jac, index=1, scale=tau, centre=t0, confidence=confidence)
    return RetrodictionResult(
        model="pseudo_first",
        t0_hat=t0,
        rate_hat=rate,
        residual_norm=float(np.linalg.norm(res / p0)),
        ci_t0=ci,
        confidence=confidence,
        n_points=t.size,
        p0=p0,
        n_iter=n_iter,
    )


def fit_second_order(
    measurements: Sequence[AliquotMeasurement],
    p0: float,
    s0: float | None = None,
    confidence: float = 0.95,
    weights: str = "none",
) -> RetrodictionResult:
    """Fit the exact bimolecular curve.

    With ``s0`` given the unknowns are (k, t0) and two aliquots suffice;
    with ``s0=None`` it is estimated too and at least three are needed.
    Starts from the pseudo-first-order fit, with S0 seeded at twice the
    largest observed complex concentration when unknown.
    """
    fit_s0 = s0 is None
    t, y = _prepare(measurements, p0, minimum=3 if fit_s0 else 2)
    _check_confidence(confidence)
    if not fit_s0 and not (s0 > 0 and math.isfinite(s0)):
        raise InputError(f"s0 must be positive, got {s0!r}")
    w = _weights(y, p0, weights)

    try:
        start = fit_pseudo_first(measurements, p0, confidence, weights)
        rate0, t00 = start.rate_hat, start.t0_hat
    except EstimationError:
        try:
            rate0, t00 = _pseudo_start(measurements, t, y, p0)
        except EstimationError as exc:
            raise ConvergenceError(f"cannot initialize second-order fit: {exc}") from exc
    s0_init = 2.0 * float(y.max()) if fit_s0 else s0
    if not s0_init > 0:
        raise ConvergenceError("no bound signal in any aliquot; S0 cannot be initialized")
    tau = 1.0 / rate0

    def unpack(theta):
        k = math.exp(theta[0])
        if fit_s0:
            return k, math.exp(theta[1]), float(theta[2] * tau)
        return k, s0, float(theta[1] * tau)

    def residual(theta):
        k, s, t0 = unpack(theta)
        return (second_order_curve(t, p0, s, k, t0) - y) * w

    def jacobian(theta):
        # central differences; scaled coordinates are all O(1)
        j = np.empty((t.size, theta.size))
        for i in range(theta.size):
            h = 1e-6 * max(1.0, abs(theta[i]))
            up, dn = theta.copy(), theta.copy()
            up[i] += h
            dn[i] -= h
            j[:, i] = (residual(up) - residual(dn)) / (2 * h)
        return j

    theta0 = [math.log(rate0 / s0_init)]
    if fit_s0:
        theta0.append(math.log(s0_init))
    theta0.append(t00 / tau)
    theta, n_iter, jac = _damped_gauss_newton(residual, jacobian, np.array(theta0))
    k, s, t0 = unpack(theta)
    if fit_s0 and not s > y.max():
        raise ConvergenceError(f"fitted s0={s!r} does not exceed the largest observed complex {y.max()!r}")
    res = second_order_curve(t, p0, s, k, t0) - y
    ci = _linear_ci(residual(theta), jac, index=theta.size - 1, scale=tau, centre=t0, confidence=confidence)
    return RetrodictionResult(
        model="second_order",
        t0_hat=t0,
        rate_hat=k * s,
        residual_norm=float(np.linalg.norm(res / p0)),
        ci_t0=ci,
        confidence=confidence,
        n_points=t.size,
        p0=p0,
        k_hat=k,
        s0_hat=s,
        s0_fitted=fit_s0,
        n_iter=n_iter,
    )


def bootstrap_ci(
    measurements: Sequence[AliquotMeasurement],
    fit_fn: Callable[[Sequence[AliquotMeasurement]], RetrodictionResult],
    n_resamples: int = 1000,
    confidence: float = 0.95,
    seed: int = 0,
    counts_per_molar: float | None = None,
) -> dict:
    """Parametric-bootstrap percentile intervals for every fitted parameter.

    Each resample redraws both band counts of every aliquot from Poisson
    laws centred on the base fit, then refits with ``fit_fn``. When
    ``counts_per_molar`` is not given it is recovered from the data as
    mean total counts per aliquot divided by p0. Resample ``b`` uses a
    generator seeded with ``(seed, b)``.

    Returns a dict mapping ``"t0"``, ``"rate"`` (and ``"k"``, ``"s0"`` for
    second-order fits) to ``(low, high)``.
    """
    if n_resamples < 100:
        raise InputError(f"n_resamples must be at least 100, got {n_resamples!r}")
    _check_confidence(confidence)
    base = fit_fn(measurements)
    p0 = base.p0
    if counts_per_molar is None:
        totals = [m.total_counts for m in measurements]
        counts_per_molar = sum(totals) / (len(totals) * p0)
    if not counts_per_molar > 0:
        raise InputError("measurements carry no counts; pass counts_per_molar explicitly")

    times = np.array([m.gel_time for m in measurements], dtype=float)
    mu_bound = counts_per_molar * base.predict(times)
    mu_unbound = counts_per_molar * p0 - mu_bound
    mu_unbound = np.maximum(mu_unbound, 0.0)

    draws = {"t0": [], "rate": []}
    if base.k_hat is not None:
        draws.update(k=[], s0=[])
    failures = 0
    for b in range(n_resamples):
        rng = np.random.default_rng([seed, b])
        bound = rng.poisson(mu_bound)
        unbound = rng.poisson(mu_unbound)
        total = bound + unbound
        ps = np.where(total > 0, p0 * bound / np.maximum(total, 1), 0.0)
        sample = [
            AliquotMeasurement(float(tt), int(bb), int(uu), float(pp), p0)
            for tt, bb, uu, pp in zip(times, bound, unbound, ps)
        ]
        try:
            fit = fit_fn(sample)
        except EstimationError:
            failures += 1
            continue
        draws["t0"].append(fit.t0_hat)
        draws["rate"].append(fit.rate_hat)
        if "k" in draws:
            draws["k"].append(fit.k_hat)
            draws["s0"].append(fit.s0_hat)

    if failures > 0.2 * n_resamples:
        raise UncertaintyError(f"{failures} of {n_resamples} bootstrap refits failed")
    lo_q, hi_q = (1.0 - confidence) / 2.0, (1.0 + confidence) / 2.0
    return {
        name: (float(np.quantile(vals, lo_q)), float(np.quantile(vals, hi_q)))
        for name, vals in draws.items()
    }


def retrodict(
    measurements: Sequence[AliquotMeasurement],
    p0: float,
    model: str = "pseudo_first",
    s0: float | None = None,
    confidence: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
    weights: str = "none",
    counts_per_molar: float | None = None,
) -> tuple[RetrodictionResult, dict]:
    """Fit ``model`` and replace its linearized t0 interval by a bootstrap one.

    ``n_resamples=0`` skips the bootstrap. The reported interval is
    widened if needed so that it always contains ``t0_hat``.
    """
    if model == "pseudo_first":

        def fit_fn(ms):
            return fit_pseudo_first(ms, p0, confidence, weights)

    elif model == "second_order":

        def fit_fn(ms):
            return fit_second_order(ms, p0, s0, confidence, weights)

    else:
        raise InputError(f"unknown estimator {model!r}; expected 'pseudo_first' or 'second_order'")

    result = fit_fn(measurements)
    if n_resamples == 0:
        return result, {"t0": result.ci_t0}
    ci = bootstrap_ci(measurements, fit_fn, n_resamples, confidence, seed, counts_per_molar)
    lo, hi = ci["t0"]
    result = replace(result, ci_t0=(min(lo, result.t0_hat), max(hi, result.t0_hat)))
    return result, ci


def _prepare(measurements, p0, minimum):
    if not (p0 > 0 and math.isfinite(p0)):
        raise InputError(f"p0 must be positive, got {p0!r}")
    if len(measurements) < minimum:
        raise InputError(f"need at least {minimum} measurements, got {len(measurements)}")
    t = np.array([m.gel_time for m in measurements], dtype=float)
    y = np.array([m.ps_estimate for m in measurements], dtype=float)
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise InputError("measurements contain non-finite values")
    if np.unique(t).size != t.size:
        raise InputError("duplicate gel times")
    order = np.argsort(t)
    return t[order], y[order]


def _check_confidence(confidence):
    if not 0 < confidence < 1:
        raise InputError(f"confidence must lie in (0, 1), got {confidence!r}")


def _weights(y, p0, scheme):
    # square roots of the least-squares weights
    if scheme == "none":
        return np.ones_like(y)
    if scheme == "poisson":
        return 1.0 / np.sqrt(np.maximum(y, p0 * PS_FLOOR_REL) / p0)
    raise InputError(f"unknown weighting {scheme!r}; expected 'none' or 'poisson'")


def _initial_pseudo(measurements, t, y, p0):
    try:
        return _pseudo_start(measurements, t, y, p0)
    except EstimationError as exc:
        raise ConvergenceError(f"cannot initialize pseudo-first-order fit: {exc}") from exc


def _pseudo_start(measurements, t, y, p0):
    usable = [m for m in sorted(measurements, key=lambda m: m.gel_time) if 0 < m.ps_estimate < p0]
    if len(usable) >= 2:
        try:
            return two_point_estimate(usable[0], usable[-1], p0)
        except DegenerateRateError:
            pass
    # log-linear regression: -ln(1 - ps/p0) = rate (t - t0)
    mask = (y > 0) & (y < p0)
    if mask.sum() < 2:
        raise DegenerateRateError("fewer than two aliquots lie strictly between 0 and p0")
    z = -np.log1p(-y[mask] / p0)
    slope, intercept = np.polyfit(t[mask], z, 1)
    if not slope > 0:
        raise DegenerateRateError("signal does not increase over the sampled window")
    return float(slope), float(-intercept / slope)


def _damped_gauss_newton(residual, jacobian, theta):
    """Minimize ||residual(theta)||^2 by Gauss-Newton with Levenberg damping.

    The undamped step is tried first; damping grows tenfold whenever a
    step fails to reduce the cost and shrinks after a success. Stops when
    the step falls below STEP_RTOL (coordinates are pre-scaled to O(1))
    or when no damping can reduce the cost any further.
    """
    trace = []
    r = residual(theta)
    cost = float(r @ r)
    lam = 0.0
    for it in range(1, MAX_ITER + 1):
        jac = jacobian(theta)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.diag(np.diag(jtj))
        while True:
            try:
                step = np.linalg.solve(jtj + lam * diag, -grad)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                cand = theta + step
                r_new = residual(cand)
                cost_new = float(r_new @ r_new)
                if np.isfinite(cost_new) and cost_new <= cost:
                    break
            lam = max(lam * 10.0, 1e-6)
            if lam > 1e12:
                # no descent direction left at floating-point resolution
                _check_identifiable(jac, trace)
                return theta, it, jac
        trace.append({"iteration": it, "theta": cand.tolist(), "cost": cost_new, "damping": lam})
        small = np.all(np.abs(step) <= STEP_RTOL * np.maximum(1.0, np.abs(theta)))
        theta, r, cost = cand, r_new, cost_new
        lam = lam / 10.0 if lam > 1e-9 else 0.0
        if small or cost == 0.0:
            jac = jacobian(theta)
            _check_identifiable(jac, trace)
            return theta, it, jac
    raise ConvergenceError(f"no convergence after {MAX_ITER} iterations", trace)


def _check_identifiable(jac, trace):
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 0 or sv[0] / sv[-1] > MAX_CONDITION:
        raise ConvergenceError("normal equations are singular; the data do not determine the parameters", trace)


def _linear_ci(res, jac, index, scale, centre, confidence):
    dof = res.size - jac.shape[1]
    if dof <= 0:
        return (-math.inf, math.inf)
    s2 = float(res @ res) / dof
    cov = s2 * np.linalg.inv(jac.T @ jac)
    half = stats.t.ppf(0.5 + confidence / 2.0, dof) * math.sqrt(max(cov[index, index], 0.0)) * scale
    return (float(centre - half), float(centre + half))
