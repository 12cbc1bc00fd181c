"""Forward models for photolyase binding to uv-damaged DNA sites.

The complex concentration ``ps`` obeys the bimolecular rate law

    d[PS]/dt = k (P0 - [PS]) (S0 - [PS]),    [PS](t0) = 0

Two closed forms are provided (the exact integrated solution and the
pseudo-first-order limit S0 >> P0) together with two independent
numerical oracles: an adaptive RK4 integrator and a Gillespie
simulation of individual binding events.

Units are fixed throughout: seconds, molar, liters, M^-1 s^-1.
The femtosecond-scale dimer formation time is taken as exactly zero,
so binding starts at ``t0`` itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputError, ParameterDomainError

AVOGADRO = 6.02214076e23

# |P0 - S0| <= DEGENERATE_RTOL * max(P0, S0) switches to the equal-concentration form
DEGENERATE_RTOL = 1e-9


@dataclass(frozen=True)
class ReactionParams:
    """Kinetic model state: initial concentrations, rate constant and onset."""

    p0: float
    s0: float
    k: float
    t0: float = 0.0

    def __post_init__(self):
        for name in ("p0", "s0", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterDomainError(f"{name} must be positive and finite, got {value!r}")
        if not math.isfinite(self.t0):
            raise ParameterDomainError(f"t0 must be finite, got {self.t0!r}")

    @property
    def pseudo_rate(self) -> float:
        """Apparent first-order rate S0*k in s^-1."""
        return self.s0 * self.k

    @property
    def plateau(self) -> float:
        return min(self.p0, self.s0)

    def shifted(self, dt: float) -> ReactionParams:
        return ReactionParams(self.p0, self.s0, self.k, self.t0 + dt)


@dataclass(frozen=True)
class KineticsSample:
    t: float
    ps: float


@dataclass(frozen=True)
class StochasticTrajectory:
    """One Gillespie realization.

    ``events`` is a tuple of ``(time, bound_count)`` with the count
    increasing by one at every event.
    """

    volume: float
    events: tuple
    seed: int
    t0: float
    n_p: int
    n_s: int

    def count_at(self, t: float) -> int:
        """Bound molecule count at time ``t`` (right-continuous)."""
        times = [e[0] for e in self.events]
        return int(np.searchsorted(times, t, side="right"))


def half_life_pseudo_first(s0: float, k: float) -> float:
    """Half-life ln2/(S0 k) of the pseudo-first-order approach, in seconds."""
    if not (s0 > 0 and k > 0 and math.isfinite(s0) and math.isfinite(k)):
        raise ParameterDomainError(f"s0 and k must be positive and finite, got s0={s0!r}, k={k!r}")
    return math.log(2.0) / (s0 * k)


def ps_pseudo_first_order(params: ReactionParams, t: float) -> float:
    """Complex concentration when free sites are in large excess.

    P0 (1 - exp(-S0 k (t - t0))), zero up to and including the onset.
    """
    dt = t - params.t0
    if dt <= 0:
        return 0.0
    return -params.p0 * math.expm1(-params.pseudo_rate * dt)


def ps_second_order_exact(params: ReactionParams, t: float) -> float:
    """Exact solution of the bimolecular rate law.

    Inverting the integrated form gives
    PS = P0 S0 (E - 1) / (P0 E - S0) with E = exp((P0 - S0) k dt).
    The expression is symmetric under P0 <-> S0 with dt -> -dt in the
    exponent, so the smaller concentration is always put first to keep
    E <= 1 and avoid overflow.
    """
    dt = t - params.t0
    if dt <= 0:
        return 0.0
    a, b = sorted((params.p0, params.s0))
    k = params.k
    if b - a <= DEGENERATE_RTOL * b:
        x = a * k * dt
        return a * x / (1.0 + x)
    em1 = math.expm1((a - b) * k * dt)
    return a * b * em1 / (a * em1 + (a - b))


def pseudo_first_curve(t, p0, rate, t0):
    """Vectorized pseudo-first-order curve for an apparent rate S0*k."""
    dt = np.maximum(np.asarray(t, dtype=float) - t0, 0.0)
    return -p0 * np.expm1(-rate * dt)


def second_order_curve(t, p0, s0, k, t0):
    """Vectorized counterpart of :func:`ps_second_order_exact`."""
    dt = np.maximum(np.asarray(t, dtype=float) - t0, 0.0)
    a, b = min(p0, s0), max(p0, s0)
    if b - a <= DEGENERATE_RTOL * b:
        x = a * k * dt
        return a * x / (1.0 + x)
    em1 = np.expm1((a - b) * k * dt)
    return a * b * em1 / (a * em1 + (a - b))


def integrated_rate_lhs(params: ReactionParams, ps: float) -> float:
    """Left side of the integrated rate law, equal to k (t - t0).

    (P0 - S0)^-1 ln[S0 (P0 - PS) / (P0 (S0 - PS))], written with log1p.
    """
    p0, s0 = params.p0, params.s0
    if not 0 <= ps < min(p0, s0):
        raise ParameterDomainError(f"ps must lie in [0, min(p0, s0)), got {ps!r}")
    if abs(p0 - s0) <= DEGENERATE_RTOL * max(p0, s0):
        return ps / (p0 * (p0 - ps))
    return (math.log1p(-ps / p0) - math.log1p(-ps / s0)) / (p0 - s0)


def trajectory(params: ReactionParams, times: Sequence[float], model: str = "second_exact") -> list[KineticsSample]:
    """Evaluate a closed-form model on a time grid."""
    fn = _MODELS.get(model)
    if fn is None:
        raise InputError(f"unknown model {model!r}; expected one of {sorted(_MODELS)}")
    return [KineticsSample(float(t), fn(params, t)) for t in times]


def integrate_ode(params: ReactionParams, t_grid: Sequence[float], rel_tol: float = 1e-8) -> list[KineticsSample]:
    """Integrate the rate law numerically with adaptive classic RK4.

    Each step is checked by step doubling: a full step and two half
    steps are compared, and the step is halved until the Richardson
    error estimate is below ``rel_tol`` times the current value. The
    accepted value carries the local extrapolation correction.
    Grid points at or before ``t0`` return zero.
    """
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise InputError("time grid is empty")
    if any(b <= a for a, b in zip(t_grid, t_grid[1:])):
        raise InputError("time grid must be strictly increasing")
    if not 0 < rel_tol <= 1e-2:
        raise InputError(f"rel_tol must lie in (0, 1e-2], got {rel_tol!r}")

    p0, s0, k, t0 = params.p0, params.s0, params.k, params.t0

    def f(y):
        return k * (p0 - y) * (s0 - y)

    def rk4(y, h):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        return y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    out = []
    t, y = t0, 0.0
    h = 0.05 / (k * (p0 + s0))
    for tg in t_grid:
        if tg <= t0:
            out.append(KineticsSample(tg, 0.0))
            continue
        while t < tg:
            clipped = tg - t < h
            step = tg - t if clipped else h
            while True:
                full = rk4(y, step)
                half = rk4(rk4(y, 0.5 * step), 0.5 * step)
                err = abs(half - full) / 15.0
                if err <= rel_tol * abs(half) or step < 1e-300:
                    break
                step *= 0.5
            y = half + (half - full) / 15.0
            t = tg if tg - t <= step else t + step
            if err < rel_tol * abs(y) / 32.0:
                h = max(h, step * 2.0) if clipped else step * 2.0
            elif not clipped or step < h:
                h = step
        out.append(KineticsSample(tg, y))
    return out


def molecule_counts(params: ReactionParams, volume: float) -> tuple[int, int]:
    """Initial photolyase and site counts in ``volume`` liters."""
    if not (volume > 0 and math.isfinite(volume)):
        raise ParameterDomainError(f"volume must be positive, got {volume!r}")
    return round(params.p0 * volume * AVOGADRO), round(params.s0 * volume * AVOGADRO)


def gillespie_simulate(params: ReactionParams, volume: float, t_end: float, seed: int) -> StochasticTrajectory:
    """Exact stochastic simulation of single binding events.

    The propensity of the next binding is (k / (N_A V)) nP nS and waiting
    times are exponential. Same seed gives the same trajectory.
    """
    n_p, n_s = molecule_counts(params, volume)
    if n_p < 1 or n_s < 1:
        raise InputError(
            f"volume {volume!r} L holds {n_p} photolyase and {n_s} site molecules after rounding; "
            "both must be at least 1"
        )
    if not t_end >= params.t0:
        raise InputError(f"t_end ({t_end!r}) must not precede t0 ({params.t0!r})")
    rng = np.random.default_rng(seed)
    c = params.k / (AVOGADRO * volume)
    t, bound = params.t0, 0
    events = []
    free_p, free_s = n_p, n_s
    while free_p > 0 and free_s > 0:
        t += rng.exponential(1.0 / (c * free_p * free_s))
        if t > t_end:
            break
        bound += 1
        free_p -= 1
        free_s -= 1
        events.append((t, bound))
    return StochasticTrajectory(volume, tuple(events), seed, params.t0, n_p, n_s)


def gillespie_ensemble(
    params: ReactionParams, volume: float, times: Sequence[float], n_runs: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Mean bound count and its standard error at ``times`` over ``n_runs``.

    Run ``i`` uses seed ``seed + i``.
    """
    times = np.asarray(times, dtype=float)
    counts = np.empty((n_runs, times.size))
    t_end = max(float(times.max()), params.t0)
    for i in range(n_runs):
        traj = gillespie_simulate(params, volume, t_end, seed + i)
        ev = [e[0] for e in traj.events]
        counts[i] = np.searchsorted(ev, times, side="right")
    mean = counts.mean(axis=0)
    sem = counts.std(axis=0, ddof=1) / math.sqrt(n_runs)
    return mean, sem


_MODELS = {
    "pseudo_first": ps_pseudo_first_order,
    "second_exact": ps_second_order_exact,
}
