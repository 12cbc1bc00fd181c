"""Photon accounting from a gamma pulse to photolyase attachment sites.

Absorbance is decadic (A = eps * c * L, absorbed fraction 1 - 10**-A);
with eps = 1e5 M^-1 cm^-1, c = 1e-10 M and L = 10 cm this gives the
familiar 0.023 % absorbed. Photon counts are carried as floats and only
rounded when reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterDomainError
from .kinetics import AVOGADRO

LN10 = math.log(10.0)


def _positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise ParameterDomainError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class OpticalParams:
    epsilon: float  # M^-1 cm^-1
    c_m: float  # M
    path_length: float  # cm

    def __post_init__(self):
        for name in ("epsilon", "c_m", "path_length"):
            _positive(name, getattr(self, name))


@dataclass(frozen=True)
class PhotonBudgetInput:
    """Source, detector-solution and yield parameters for one budget.

    ``optics`` describes the absorbing solution; ``dna_concentration``
    and ``volume`` fix how many dimer sites exist in it.
    """

    optics: OpticalParams
    gamma_count: float
    dna_concentration: float
    volume: float
    quantum_yield: float = 0.015
    uv_multiplication: float = 1e6
    sites_per_molecule: float = 1

    def __post_init__(self):
        if not (self.gamma_count >= 0 and math.isfinite(self.gamma_count)):
            raise ParameterDomainError(f"gamma_count must be >= 0, got {self.gamma_count!r}")
        if not (self.uv_multiplication >= 0 and math.isfinite(self.uv_multiplication)):
            raise ParameterDomainError(f"uv_multiplication must be >= 0, got {self.uv_multiplication!r}")
        if not 0 < self.quantum_yield <= 1:
            raise ParameterDomainError(f"quantum_yield must lie in (0, 1], got {self.quantum_yield!r}")
        _positive("dna_concentration", self.dna_concentration)
        _positive("volume", self.volume)
        _positive("sites_per_molecule", self.sites_per_molecule)


@dataclass(frozen=True)
class PhotonBudgetReport:
    absorbance: float
    fraction_absorbed: float
    uv_photons: float
    total_sites: int
    required_photons: int
    conversion_fraction: float

    def as_dict(self) -> dict:
        return {
            "absorbance": self.absorbance,
            "fraction_absorbed": self.fraction_absorbed,
            "uv_photons": self.uv_photons,
            "total_sites": self.total_sites,
            "required_photons": self.required_photons,
            "conversion_fraction": self.conversion_fraction,
        }


def absorbance(op: OpticalParams) -> float:
    return op.epsilon * op.c_m * op.path_length


def fraction_absorbed(a: float) -> float:
    """Fraction 1 - 10**-A of incident photons absorbed at absorbance ``a``."""
    if not a >= 0:
        raise ParameterDomainError(f"absorbance must be >= 0, got {a!r}")
    if math.isinf(a):
        return 1.0
    return -math.expm1(-a * LN10)


def uv_pulse_from_gamma(gamma_count: float, multiplication: float) -> float:
    if gamma_count < 0 or multiplication < 0:
        raise ParameterDomainError("photon counts must be >= 0")
    return gamma_count * multiplication


def dimer_sites(c_dna: float, volume: float, sites_per_molecule: float = 1) -> int:
    """Number of potential dimer sites, c * V * N_A * sites, rounded."""
    _positive("c_dna", c_dna)
    _positive("volume", volume)
    _positive("sites_per_molecule", sites_per_molecule)
    return round(c_dna * volume * AVOGADRO * sites_per_molecule)


def required_photons(total_sites: float, fraction: float, phi: float) -> int:
    """Incident photons needed to dimerize every site: ceil(N / (f * phi))."""
    if not total_sites >= 1:
        raise ParameterDomainError(f"total_sites must be >= 1, got {total_sites!r}")
    if not 0 < fraction <= 1:
        raise ParameterDomainError(f"fraction_absorbed must lie in (0, 1], got {fraction!r}")
    if not 0 < phi <= 1:
        raise ParameterDomainError(f"quantum yield must lie in (0, 1], got {phi!r}")
    return math.ceil(total_sites / (fraction * phi))


def conversion_fraction(inp: PhotonBudgetInput) -> PhotonBudgetReport:
    """Full budget: how much of the site population one pulse can dimerize."""
    a = absorbance(inp.optics)
    f = fraction_absorbed(a)
    uv = uv_pulse_from_gamma(inp.gamma_count, inp.uv_multiplication)
    sites = dimer_sites(inp.dna_concentration, inp.volume, inp.sites_per_molecule)
    needed = required_photons(sites, f, inp.quantum_yield)
    converting = uv * f * inp.quantum_yield
    return PhotonBudgetReport(
        absorbance=a,
        fraction_absorbed=f,
        uv_photons=uv,
        total_sites=sites,
        required_photons=needed,
        conversion_fraction=min(1.0, converting / sites),
    )
