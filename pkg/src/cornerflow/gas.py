"""Polytropic gas thermodynamics and Bernoulli-relation inversions.

The pressure law is p = rho**gamma with gamma > 1.  Specific enthalpy is
normalized so pi(0) = 0, giving pi(rho) = gamma/(gamma-1) * rho**(gamma-1)
and sound speed c = sqrt(gamma * rho**(gamma-1)).

A ``BernoulliState`` fixes the global constant B = q**2/2 + pi(rho) of an
irrotational flow and provides the two inversions used by the solvers:

* ``density_from_speed``: rho(q) on [0, limit_speed), the direct inverse
  of the enthalpy;
* ``density_from_flux``: rho(m) for the half-squared mass flux
  m = |grad psi|**2 / 2 = (rho*q)**2 / 2, on the subsonic branch
  [0, flux_max_m).  The branch boundary is the sonic point q = c.

All operations accept scalars or numpy arrays and are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import GasDomainError, LimitSpeedError, SonicFluxError


@dataclass(frozen=True)
class GasModel:
    """Polytropic gas with isentropic coefficient gamma > 1."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise GasDomainError(f"gamma must exceed 1, got {self.gamma}")

    def pressure(self, rho):
        rho = _check_density(rho)
        return rho ** self.gamma

    def enthalpy_pi(self, rho):
        """pi(rho) = gamma/(gamma-1) * rho**(gamma-1), with pi(0) = 0."""
        rho = _check_density(rho)
        g = self.gamma
        return g / (g - 1.0) * rho ** (g - 1.0)

    def enthalpy_pi_inverse(self, value):
        value = np.asarray(value, dtype=float)
        if np.any(value < 0):
            raise GasDomainError("enthalpy must be nonnegative")
        g = self.gamma
        out = ((g - 1.0) / g * value) ** (1.0 / (g - 1.0))
        return out if out.ndim else float(out)

    def sound_speed(self, rho):
        """c = sqrt(dp/drho) = sqrt(gamma * rho**(gamma-1)); 0 in vacuum."""
        rho = _check_density(rho)
        return np.sqrt(self.gamma * rho ** (self.gamma - 1.0))

    def mach(self, q, rho):
        rho_arr = np.asarray(rho, dtype=float)
        if np.any(rho_arr <= 0):
            raise GasDomainError("Mach number needs rho > 0")
        return np.asarray(q, dtype=float) / self.sound_speed(rho)


def _check_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise GasDomainError("density must be nonnegative")
    return rho if rho.ndim else float(rho)


class FluxInversion(NamedTuple):
    """Subsonic root of the flux form of the Bernoulli relation."""

    rho: float | np.ndarray
    h: float | np.ndarray  # inverse density 1/rho


@dataclass(frozen=True)
class BernoulliState:
    """Global Bernoulli constant B with its derived bounds.

    ``limit_speed`` is sqrt(2B), where the density reaches zero; the model
    does not extend to higher speeds.  ``flux_max_m`` is the value of
    m = (rho*q)**2/2 at the sonic point of this B; the flux inversion is
    defined on [0, flux_max_m).
    """

    gas: GasModel
    bernoulli_B: float
    limit_speed: float = field(init=False)
    stagnation_density: float = field(init=False)
    sonic_density: float = field(init=False)
    flux_max_m: float = field(init=False)

    def __post_init__(self):
        if self.bernoulli_B <= 0:
            raise GasDomainError("Bernoulli constant must be positive")
        g = self.gas.gamma
        B = self.bernoulli_B
        object.__setattr__(self, "limit_speed", float(np.sqrt(2.0 * B)))
        object.__setattr__(self, "stagnation_density",
                           float(self.gas.enthalpy_pi_inverse(B)))
        # sonic point: B = c^2/2 + pi(rho)  with  c^2 = g*rho^(g-1)
        # => rho_sonic^(g-1) = 2B(g-1) / (g(g+1))
        rho_sonic = (2.0 * B * (g - 1.0) / (g * (g + 1.0))) ** (1.0 / (g - 1.0))
        object.__setattr__(self, "sonic_density", float(rho_sonic))
        # m_sonic = (rho*c)^2/2 = g*rho^(g+1)/2
        object.__setattr__(self, "flux_max_m",
                           float(0.5 * g * rho_sonic ** (g + 1.0)))

    @classmethod
    def from_free_stream(cls, gas: GasModel, mach_inf: float,
                         rho_inf: float = 1.0) -> "BernoulliState":
        """Fix B from a prescribed free-stream Mach number at rho_inf."""
        if not (0.0 <= mach_inf < 1.0):
            raise GasDomainError("free-stream Mach must lie in [0, 1)")
        q_inf = mach_inf * gas.sound_speed(rho_inf)
        return cls(gas, 0.5 * q_inf**2 + gas.enthalpy_pi(rho_inf))

    def free_stream_speed(self, mach_inf: float, rho_inf: float = 1.0) -> float:
        return float(mach_inf * self.gas.sound_speed(rho_inf))

    def density_from_speed(self, q):
        """rho = pi^{-1}(B - q^2/2); strictly decreasing, 0 at limit speed."""
        q = np.asarray(q, dtype=float)
        if np.any(q < 0):
            raise GasDomainError("speed must be nonnegative")
        if np.any(q >= self.limit_speed):
            raise LimitSpeedError(
                f"speed {float(np.max(q))} at/above limit speed {self.limit_speed}")
        out = self.gas.enthalpy_pi_inverse(self.bernoulli_B - 0.5 * q**2)
        return out if np.ndim(out) else float(out)

    def density_from_flux(self, m) -> FluxInversion:
        """Solve B = m/rho^2 + pi(rho) for the subsonic root rho(m).

        Safeguarded Newton iteration on the bracket
        [sonic_density, stagnation_density]; relative tolerance 1e-14.
        Raises SonicFluxError for m >= flux_max_m (ellipticity guard).
        """
        m_arr = np.asarray(m, dtype=float)
        scalar = m_arr.ndim == 0
        m_arr = np.atleast_1d(m_arr)
        if np.any(m_arr < 0):
            raise GasDomainError("flux m must be nonnegative")
        if np.any(m_arr >= self.flux_max_m):
            k = int(np.argmax(m_arr))
            raise SonicFluxError(
                f"flux m={m_arr.flat[k]} at/above sonic bound {self.flux_max_m}")
        g = self.gas.gamma
        B = self.bernoulli_B
        lo = np.full_like(m_arr, self.sonic_density)
        hi = np.full_like(m_arr, self.stagnation_density)
        rho = hi.copy()
        for _ in range(200):
            f = m_arr / rho**2 + g / (g - 1.0) * rho ** (g - 1.0) - B
            lo = np.where(f < 0, rho, lo)
            hi = np.where(f > 0, rho, hi)
            fp = -2.0 * m_arr / rho**3 + g * rho ** (g - 2.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = f / fp
            cand = rho - step
            bad = ~np.isfinite(cand) | (cand <= lo) | (cand > hi)
            cand = np.where(bad, 0.5 * (lo + hi), cand)
            done = np.abs(cand - rho) <= 1e-14 * np.abs(cand)
            rho = cand
            if np.all(done):
                break
        if scalar:
            r = float(rho[0])
            return FluxInversion(r, 1.0 / r)
        return FluxInversion(rho, 1.0 / rho)

    def speed_from_flux(self, m):
        """|v| = sqrt(2m)/rho on the subsonic branch."""
        rho = self.density_from_flux(m).rho
        return np.sqrt(2.0 * np.asarray(m, dtype=float)) / rho
