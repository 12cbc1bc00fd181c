"""Virtual aliquot/gel assay with radioactive band counting.

Binding keeps going inside a withdrawn aliquot until it is loaded on the
gel, so every measurement is taken at ``gel_time = withdrawal + delay``.
Each band is counted as an independent Poisson draw with mean
``counts_per_molar * concentration``; aliquot volume and detector
efficiency are folded into that single calibration constant, and
withdrawals do not deplete the bulk solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kinetics
from .errors import EstimationError, InputError, ParameterDomainError
from .kinetics import ReactionParams

MODELS = ("pseudo_first", "second_exact")


@dataclass(frozen=True)
class AliquotMeasurement:
    gel_time: float
    bound_counts: int
    unbound_counts: int
    ps_estimate: float
    p0_assumed: float

    @property
    def total_counts(self) -> int:
        return self.bound_counts + self.unbound_counts


@dataclass(frozen=True)
class AssayProtocol:
    """Reaction, sampling schedule and counting calibration for one assay.

    ``gel_delay`` is either one delay for all aliquots or one per aliquot.
    """

    params: ReactionParams
    withdrawal_times: tuple
    counts_per_molar: float
    seed: int = 0
    gel_delay: float | tuple = 0.0

    def __post_init__(self):
        times = tuple(float(t) for t in self.withdrawal_times)
        object.__setattr__(self, "withdrawal_times", times)
        if not times:
            raise InputError("at least one withdrawal time is required")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise InputError("withdrawal times must be strictly increasing")
        if not (self.counts_per_molar > 0):
            raise ParameterDomainError(f"counts_per_molar must be positive, got {self.counts_per_molar!r}")
        delays = self.delays
        if len(delays) != len(times):
            raise InputError(f"got {len(delays)} gel delays for {len(times)} withdrawals")
        if any(not (d >= 0 and math.isfinite(d)) for d in delays):
            raise ParameterDomainError("gel delays must be finite and >= 0")
        if self.seed < 0:
            raise InputError(f"seed must be unsigned, got {self.seed!r}")

    @property
    def delays(self) -> tuple:
        if np.ndim(self.gel_delay) == 0:
            return (float(self.gel_delay),) * len(self.withdrawal_times)
        return tuple(float(d) for d in self.gel_delay)

    @property
    def gel_times(self) -> list:
        return [t + d for t, d in zip(self.withdrawal_times, self.delays)]


def ps_from_counts(bound: int, unbound: int, p0: float) -> float:
    """Complex concentration implied by the two band counts."""
    if bound < 0 or unbound < 0:
        raise InputError("counts must be non-negative")
    if not p0 > 0:
        raise ParameterDomainError(f"p0 must be positive, got {p0!r}")
    total = bound + unbound
    if total == 0:
        raise EstimationError("aliquot has zero counts in both bands; it carries no information")
    return p0 * bound / total


def expected_counts(params: ReactionParams, gel_time: float, counts_per_molar: float, model: str) -> tuple:
    """Mean (bound, unbound) counts for an aliquot loaded at ``gel_time``."""
    ps = _model_fn(model)(params, gel_time)
    return counts_per_molar * ps, counts_per_molar * (params.p0 - ps)


def run_assay(protocol: AssayProtocol, model: str = "pseudo_first") -> list[AliquotMeasurement]:
    """Simulate every aliquot of ``protocol``.

    Aliquot ``i`` draws its counts from a generator seeded with
    ``(seed, i)``, so results do not depend on evaluation order.
    """
    _model_fn(model)
    p0 = protocol.params.p0
    out = []
    for i, gel_time in enumerate(protocol.gel_times):
        mu_bound, mu_unbound = expected_counts(protocol.params, gel_time, protocol.counts_per_molar, model)
        rng = np.random.default_rng([protocol.seed, i])
        bound = int(rng.poisson(mu_bound))
        unbound = int(rng.poisson(mu_unbound))
        total = bound + unbound
        ps = p0 * bound / total if total else 0.0
        out.append(AliquotMeasurement(gel_time, bound, unbound, ps, p0))
    return out


def schedule_withdrawals(params: ReactionParams, n: int, horizon_halflives: float = 3.0) -> list[float]:
    """``n`` sampling times spread evenly in exp(-S0 k (t - t0)).

    Equal steps in the decaying exponential put equal expected signal
    change between neighbouring aliquots. The window ends after
    ``horizon_halflives`` half-lives and excludes ``t0`` itself.
    """
    if n < 2:
        raise InputError(f"need at least 2 withdrawals, got {n!r}")
    if not 0 < horizon_halflives <= 5:
        raise InputError(f"horizon_halflives must lie in (0, 5], got {horizon_halflives!r}")
    rate = params.pseudo_rate
    u_end = 2.0 ** -horizon_halflives
    step = (1.0 - u_end) / n
    times = []
    for i in range(1, n + 1):
        u = 1.0 - i * step if i < n else u_end
        times.append(params.t0 - math.log(u) / rate)
    return times


def _model_fn(model):
    if model == "pseudo_first":
        return kinetics.ps_pseudo_first_order
    if model == "second_exact":
        return kinetics.ps_second_order_exact
    raise InputError(f"unknown model {model!r}; expected one of {MODELS}")
