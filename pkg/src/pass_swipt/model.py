"""Physical model of a waveguide-fed pinching-antenna SWIPT downlink.

All powers are kept in watts internally; dBm conversions belong to the
configuration/CLI boundary. Distances are in metres, rates in bit/s/Hz.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT_M_S = 299792458.0
TWO_PI = 2.0 * math.pi


class ConfigurationError(ValueError):
    """Raised when parameters or scenario data are inconsistent."""


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a power level from dBm to watts."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watts_to_dbm(p_w: float) -> float:
    """Convert a power level from watts to dBm."""
    if p_w <= 0.0:
        raise ValueError(f"power must be positive to express in dBm, got {p_w}")
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """Waveguide, power and noise parameters of one downlink.

    The waveguide runs along the x axis at height d, feed point at
    [-L/2, 0, d]; the service area is the L x L square centred at the origin.
    """

    carrier_frequency_hz: float = 28e9
    refractive_index: float = 1.4          # effective index of the dielectric guide
    waveguide_height_m: float = 3.0        # d
    waveguide_length_m: float = 20.0       # L, also the service square side
    total_power_w: float = 10.0            # P (40 dBm)
    noise_power_w: float = 1e-12           # sigma^2 (-90 dBm), default for IUs
    energy_conversion_eff: float = 0.5     # zeta, in (0, 1]
    num_antennas: int = 4                  # N
    min_spacing_m: float | None = None     # Delta, defaults to lambda/2

    def __post_init__(self):
        if self.carrier_frequency_hz <= 0:
            raise ConfigurationError("carrier frequency must be positive")
        if self.refractive_index <= 1.0:
            raise ConfigurationError("refractive index must exceed 1")
        if self.waveguide_height_m <= 0 or self.waveguide_length_m <= 0:
            raise ConfigurationError("waveguide height and length must be positive")
        if self.total_power_w <= 0 or self.noise_power_w <= 0:
            raise ConfigurationError("powers must be positive")
        if not 0.0 < self.energy_conversion_eff <= 1.0:
            raise ConfigurationError("energy conversion efficiency must be in (0, 1]")
        if self.num_antennas < 1:
            raise ConfigurationError("need at least one antenna")
        if self.min_spacing_m is None:
            object.__setattr__(self, "min_spacing_m", self.wavelength_m / 2.0)
        if self.min_spacing_m < 0:
            raise ConfigurationError("minimum spacing must be non-negative")
        if (self.num_antennas - 1) * self.min_spacing_m > self.waveguide_length_m:
            raise ConfigurationError(
                f"{self.num_antennas} antennas at spacing {self.min_spacing_m} m "
                f"do not fit on a {self.waveguide_length_m} m waveguide"
            )

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT_M_S / self.carrier_frequency_hz

    @property
    def guided_wavelength_m(self) -> float:
        return self.wavelength_m / self.refractive_index

    @property
    def path_loss_coeff(self) -> float:
        """Free-space coupling constant eta = c^2 / (16 pi^2 fc^2)."""
        return self.wavelength_m ** 2 / (16.0 * math.pi ** 2)

    @property
    def half_length_m(self) -> float:
        return self.waveguide_length_m / 2.0


@dataclass(frozen=True)
class UserPos:
    """A user terminal on the ground plane (z = 0)."""

    x_m: float
    y_m: float
    kind: str = "IU"                      # "IU" or "EU"
    noise_power_w: float | None = None    # per-user override, IUs only

    def __post_init__(self):
        if self.kind not in ("IU", "EU"):
            raise ConfigurationError(f"user kind must be IU or EU, got {self.kind!r}")
        if self.noise_power_w is not None and self.noise_power_w <= 0:
            raise ConfigurationError("per-user noise power must be positive")

    def lateral_offset_m(self, height_m: float) -> float:
        """Distance from the user to the waveguide axis: sqrt(y^2 + d^2)."""
        return math.hypot(self.y_m, height_m)


@dataclass(frozen=True)
class PaLayout:
    """Pinch positions along the waveguide, strictly ascending x in metres."""

    x_m: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "x_m", tuple(float(x) for x in self.x_m))
        if len(self.x_m) == 0:
            raise ConfigurationError("layout must contain at least one antenna")

    @property
    def n(self) -> int:
        return len(self.x_m)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.x_m, dtype=float)

    def validate(self, params: SystemParams, tol: float = 1e-9) -> None:
        """Check spacing and range constraints, raising on violation."""
        half = params.half_length_m
        xs = self.x_m
        for x in xs:
            if x < -half - tol or x > half + tol:
                raise ConfigurationError(f"antenna at x={x} m outside [-{half}, {half}]")
        for a, b in zip(xs, xs[1:]):
            if b - a < params.min_spacing_m - tol:
                raise ConfigurationError(
                    f"spacing {b - a:.6g} m below minimum {params.min_spacing_m:.6g} m"
                )


@dataclass(frozen=True)
class Scenario:
    """System parameters plus the served information and energy users."""

    params: SystemParams
    ius: tuple[UserPos, ...]
    eus: tuple[UserPos, ...]

    def __post_init__(self):
        object.__setattr__(self, "ius", tuple(self.ius))
        object.__setattr__(self, "eus", tuple(self.eus))
        if not self.ius:
            raise ConfigurationError("scenario needs at least one information user")
        # an empty EU list is allowed: harvest constraints are then vacuous
        half = self.params.half_length_m
        for u in self.ius + self.eus:
            if abs(u.x_m) > half or abs(u.y_m) > half:
                raise ConfigurationError(
                    f"user at ({u.x_m}, {u.y_m}) outside the {2 * half} m service square"
                )
        for u in self.ius:
            if u.kind != "IU":
                raise ConfigurationError("ius list may only contain IU entries")
        for u in self.eus:
            if u.kind != "EU":
                raise ConfigurationError("eus list may only contain EU entries")

    def iu_noise_w(self, k: int) -> float:
        u = self.ius[k]
        return u.noise_power_w if u.noise_power_w is not None else self.params.noise_power_w


def guided_phase(x_p: float, params: SystemParams) -> float:
    """In-waveguide phase (2 pi / lambda_g) * (x_p + L/2), unreduced, radians."""
    half = params.half_length_m
    if x_p < -half - 1e-9 or x_p > half + 1e-9:
        raise ValueError(f"antenna position {x_p} m outside the waveguide")
    return TWO_PI / params.guided_wavelength_m * (x_p + half)


def free_space_entry(x_p: float, user: UserPos, params: SystemParams) -> complex:
    """One antenna's free-space channel coefficient (sqrt(eta)/r) e^{-j 2 pi r / lambda}.

    The phase argument is reduced modulo one wavelength before multiplying by
    2 pi; at 28 GHz the raw argument is ~1e4 rad where double precision
    noticeably degrades trigonometry.
    """
    l_u = user.lateral_offset_m(params.waveguide_height_m)
    r = math.hypot(user.x_m - x_p, l_u)
    amp = math.sqrt(params.path_loss_coeff) / r
    frac = (r / params.wavelength_m) % 1.0
    return amp * cmath.exp(-1j * TWO_PI * frac)


def effective_gain(layout: PaLayout, user: UserPos, params: SystemParams) -> complex:
    """Combined channel after in-waveguide and free-space propagation.

    Sum over antennas of free_space_entry * exp(-j * guided phase); the
    magnitude squared of this is the power gain seen by the user.
    """
    lam_g = params.guided_wavelength_m
    half = params.half_length_m
    total = 0.0 + 0.0j
    for x_p in layout.x_m:
        gfrac = ((x_p + half) / lam_g) % 1.0
        total += free_space_entry(x_p, user, params) * cmath.exp(-1j * TWO_PI * gfrac)
    return total


def effective_gains(positions: np.ndarray, users, params: SystemParams) -> np.ndarray:
    """Vectorized effective gains.

    positions: (..., N) array of antenna x coordinates.
    Returns complex gains of shape (..., U) for the U users, matching
    effective_gain antenna by antenna.
    """
    pos = np.asarray(positions, dtype=float)
    lam = params.wavelength_m
    lam_g = params.guided_wavelength_m
    half = params.half_length_m
    sqrt_eta = math.sqrt(params.path_loss_coeff)
    out = np.empty(pos.shape[:-1] + (len(users),), dtype=complex)
    gfrac = ((pos + half) / lam_g) % 1.0
    for u_idx, user in enumerate(users):
        l_u = user.lateral_offset_m(params.waveguide_height_m)
        r = np.hypot(user.x_m - pos, l_u)
        frac = (r / lam) % 1.0
        entries = (sqrt_eta / r) * np.exp(-1j * TWO_PI * (frac + gfrac))
        out[..., u_idx] = entries.sum(axis=-1)
    return out


def channel_power_gain(layout: PaLayout, user: UserPos, params: SystemParams) -> float:
    """|effective gain|^2: the power gain between the feed and one user."""
    return abs(effective_gain(layout, user, params)) ** 2


def power_gains(positions: np.ndarray, users, params: SystemParams) -> np.ndarray:
    """|effective gain|^2 per user, vectorized over leading axes of positions."""
    return np.abs(effective_gains(positions, users, params)) ** 2


def eu_powers(positions: np.ndarray, eus, params: SystemParams) -> np.ndarray:
    """Harvested powers in watts, shape (..., J), with the transmit power
    split evenly over the antennas present in `positions`."""
    n = np.asarray(positions).shape[-1]
    scale = params.energy_conversion_eff * params.total_power_w / n
    return scale * power_gains(positions, eus, params)


def steered_power_gain(positions, phases, user: UserPos,
                       params: SystemParams) -> float:
    """Coherent power gain |sum_n h_n e^{j theta_n}|^2 of a fixed antenna row
    driven through per-branch phase weights.

    h_n is the free-space coefficient alone (radiators fed directly, no
    guided section). Pairs with the same even P/N power split as
    channel_power_gain, so the two architectures plug into identical rate
    and harvest formulas.
    """
    xs = positions.x_m if isinstance(positions, PaLayout) else positions
    if len(xs) != len(phases):
        raise ConfigurationError(
            f"{len(xs)} antennas but {len(phases)} phase weights")
    acc = 0.0 + 0.0j
    for x, theta in zip(xs, phases):
        acc += free_space_entry(float(x), user, params) * complex(
            math.cos(theta), math.sin(theta))
    return abs(acc) ** 2


def user_power_gain(layout: PaLayout, user: UserPos, params: SystemParams,
                    phases=None) -> float:
    """Power gain toward one user: the pinched placement when phases is
    None, otherwise the same positions read as a fixed row steered by the
    given branch phases."""
    if phases is None:
        return channel_power_gain(layout, user, params)
    return steered_power_gain(layout, phases, user, params)


def iu_rate_single(layout: PaLayout, iu: UserPos, params: SystemParams,
                   noise_power_w: float | None = None) -> float:
    """Rate of a lone information user with the full power budget, bit/s/Hz."""
    sigma2 = noise_power_w
    if sigma2 is None:
        sigma2 = iu.noise_power_w if iu.noise_power_w is not None else params.noise_power_w
    snr = params.total_power_w / (params.num_antennas * sigma2) * channel_power_gain(
        layout, iu, params)
    return math.log2(1.0 + snr)


def eu_power_single(layout: PaLayout, eu: UserPos, params: SystemParams) -> float:
    """Power harvested by one energy user under the linear model, watts."""
    return (params.energy_conversion_eff * params.total_power_w / params.num_antennas
            * channel_power_gain(layout, eu, params))


def uniform_layout(params: SystemParams) -> PaLayout:
    """Antennas spread evenly over the waveguide; the midpoint when N = 1."""
    n = params.num_antennas
    if n == 1:
        return PaLayout((0.0,))
    half = params.half_length_m
    return PaLayout(tuple(np.linspace(-half, half, n)))
