"""Cavity reflection and photon--QD scattering coefficients.

All rates and frequencies are expressed in a common unit; the rest of the
package uses units of the cavity decay rate (``kappa = 1``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DegeneratePoleError(ValueError):
    """The reflection-coefficient denominator vanishes exactly."""


@dataclass(frozen=True)
class CavityParams:
    """Physical parameters of one QD--micropillar emitter.

    Parameters
    ----------
    g : float
        Trion--cavity coupling strength.
    kappa : float
        Cavity decay rate through the input/output mirror, ``> 0``.
    kappa_s : float
        Side-leakage rate, ``>= 0``.
    gamma : float
        Trion decay rate, ``>= 0``.
    p : float
        Interaction-completeness coefficient in ``(0, 1]``.
    omega_photon, omega_cavity, omega_exciton : float
        Photon, cavity and trion transition frequencies.  Only the
        detunings from ``omega_photon`` enter.
    """

    g: float
    kappa: float = 1.0
    kappa_s: float = 0.0
    gamma: float = 0.1
    p: float = 1.0
    omega_photon: float = 0.0
    omega_cavity: float = 0.0
    omega_exciton: float = 0.0

    def __post_init__(self) -> None:
        for name in ("g", "kappa", "kappa_s", "gamma", "p",
                     "omega_photon", "omega_cavity", "omega_exciton"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)!r}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.kappa_s < 0:
            raise ValueError(f"kappa_s must be non-negative, got {self.kappa_s}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")

    @property
    def exciton_detuning(self) -> float:
        return self.omega_exciton - self.omega_photon

    @property
    def cavity_detuning(self) -> float:
        return self.omega_cavity - self.omega_photon

    @property
    def on_resonance(self) -> bool:
        return self.omega_photon == self.omega_cavity == self.omega_exciton

    def in_kappa_units(self) -> "CavityParams":
        """Same physics with every rate and frequency divided by ``kappa``."""
        k = self.kappa
        return CavityParams(
            g=self.g / k,
            kappa=1.0,
            kappa_s=self.kappa_s / k,
            gamma=self.gamma / k,
            p=self.p,
            omega_photon=self.omega_photon / k,
            omega_cavity=self.omega_cavity / k,
            omega_exciton=self.omega_exciton / k,
        )


@dataclass(frozen=True)
class EmitterCoeffs:
    """Reflection coefficients and the derived scattering amplitudes.

    ``c`` multiplies the polarization- and spin-flipping branch of a
    photon--QD scattering event, ``f`` the non-flipping (error) branch.
    """

    r0: complex
    rh: complex
    c: complex
    f: complex

    @classmethod
    def from_reflections(cls, r0: complex, rh: complex, p: float = 1.0) -> "EmitterCoeffs":
        if not 0 < p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {p}")
        r0 = complex(r0)
        rh = complex(rh)
        c = (p / 2) * (r0 - rh)
        f = (p / 2) * (r0 + rh) + math.sqrt(1 - p * p)
        return cls(r0=r0, rh=rh, c=c, f=f)


def cavity_reflection(
    exciton_detuning: float,
    cavity_detuning: float,
    g: float,
    kappa: float,
    kappa_s: float,
    gamma: float,
) -> complex:
    """Steady-state reflection of a single-sided cavity holding a two-level dot.

    Raw numeric form without parameter validation.  Detunings are
    ``omega_exciton - omega`` and ``omega_cavity - omega``.  For ``g == 0`` the
    common dipole factor is cancelled, which removes the 0/0 at
    ``gamma == exciton_detuning == 0``.
    """
    cav = 1j * cavity_detuning + kappa / 2 + kappa_s / 2
    if g == 0:
        if cav == 0:
            raise DegeneratePoleError("cold-cavity denominator is zero")
        return 1 - kappa / cav
    dip = 1j * exciton_detuning + gamma / 2
    denom = dip * cav + g * g
    if denom == 0:
        raise DegeneratePoleError(
            f"reflection denominator vanishes (g={g}, kappa={kappa}, "
            f"kappa_s={kappa_s}, gamma={gamma})"
        )
    return 1 - kappa * dip / denom


def reflection_coefficient(params: CavityParams, coupled: bool) -> complex:
    """Hot (``coupled=True``) or cold (``coupled=False``, ``g=0``) reflection."""
    return cavity_reflection(
        params.exciton_detuning,
        params.cavity_detuning,
        params.g if coupled else 0.0,
        params.kappa,
        params.kappa_s,
        params.gamma,
    )


def emitter_coefficients(params: CavityParams) -> EmitterCoeffs:
    r0 = reflection_coefficient(params, coupled=False)
    rh = reflection_coefficient(params, coupled=True)
    return EmitterCoeffs.from_reflections(r0, rh, params.p)

