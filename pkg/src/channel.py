"""Finite- and infinite-blocklength upload rates over Rayleigh-faded links."""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, erfcinv

from src.errors import DomainError, ValidationError

BLOCKLENGTH_MODES = ("finite", "infinite")

# Absolute tolerance on Q(inverse_q(eps)) - eps
INVERSE_Q_TOL = 1e-10

LN2 = math.log(2.0)

# Largest double below 1
DISPERSION_MAX = float(np.nextafter(1.0, 0.0))


def dbm_to_watts(dbm: float) -> float:
    """Convert a power level in dBm to watts."""
    return 10.0 ** ((dbm - 30.0) / 10.0)


def dbm_per_hz_to_watts_per_hz(dbm_per_hz: float) -> float:
    """Convert a noise density in dBm/Hz to W/Hz."""
    return dbm_to_watts(dbm_per_hz)


# -174 dBm/Hz thermal noise floor
DEFAULT_SIGMA2 = dbm_per_hz_to_watts_per_hz(-174.0)


def channel_param_problems(
    b0, t, n_max, sigma2, epsilon, blocklength_mode
) -> List[str]:
    """Collect every range violation for a set of channel constants.

    Returns:
        List of human-readable problems, empty when the constants are valid
    """
    problems = []
    if not _is_real(b0) or not b0 > 0:
        problems.append(f"channel.b0 must be > 0, got {b0!r}")
    if not _is_real(t) or not t > 0:
        problems.append(f"channel.t must be > 0, got {t!r}")
    if not _is_int(n_max) or n_max < 1:
        problems.append(f"channel.n_max must be an integer >= 1, got {n_max!r}")
    if not _is_real(sigma2) or not sigma2 > 0:
        problems.append(f"channel.sigma2 must be > 0, got {sigma2!r}")
    if not _is_real(epsilon) or not 0.0 < epsilon < 1.0:
        problems.append(f"channel.epsilon must lie in (0, 1), got {epsilon!r}")
    if blocklength_mode not in BLOCKLENGTH_MODES:
        problems.append(
            f"channel.blocklength_mode must be one of {BLOCKLENGTH_MODES}, "
            f"got {blocklength_mode!r}"
        )
    return problems


def _is_real(value) -> bool:
    return (
        isinstance(value, (int, float, np.integer, np.floating))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants shared by every link of an instance.

    Attributes:
        b0: Bandwidth of one unit (Hz)
        t: Transmission slot duration (s)
        n_max: Total number of bandwidth units
        sigma2: Noise power spectral density (W/Hz)
        epsilon: Target decoding error probability
        blocklength_mode: "finite" or "infinite"
    """

    b0: float = 180e3
    t: float = 1e-3
    n_max: int = 64
    sigma2: float = DEFAULT_SIGMA2
    epsilon: float = 1e-3
    blocklength_mode: str = "finite"

    def __post_init__(self) -> None:
        problems = channel_param_problems(
            self.b0, self.t, self.n_max, self.sigma2, self.epsilon, self.blocklength_mode
        )
        if not problems:
            return
        message = "; ".join(problems)
        if len(problems) == 1 and "epsilon" in problems[0]:
            raise DomainError(message)
        raise ValidationError(message)

    @property
    def unit_noise_power(self) -> float:
        """Noise power over one bandwidth unit, B0 * sigma2 (W)."""
        return self.b0 * self.sigma2

    def blocklength(self, n_units: int) -> float:
        """Channel uses L = n * B0 * T for a link holding n units."""
        return n_units * self.b0 * self.t

    @property
    def is_finite(self) -> bool:
        return self.blocklength_mode == "finite"


@dataclass(frozen=True)
class LinkState:
    """One vehicle-to-cluster-head upload link.

    Build it through ``LinkState.for_params`` so the normalized gain is
    computed from the instance's noise constants.
    """

    gain_mag_sq: float
    tx_power: float
    n_units: int
    unit_noise_power: float

    def __post_init__(self) -> None:
        if not _is_real(self.gain_mag_sq) or self.gain_mag_sq < 0:
            raise ValidationError(f"gain_mag_sq must be >= 0, got {self.gain_mag_sq!r}")
        if not _is_real(self.tx_power) or self.tx_power <= 0:
            raise ValidationError(f"tx_power must be > 0, got {self.tx_power!r}")
        if not _is_int(self.n_units) or self.n_units < 1:
            raise ValidationError(
                f"n_units must be an integer >= 1, got {self.n_units!r}"
            )
        if not _is_real(self.unit_noise_power) or self.unit_noise_power <= 0:
            raise ValidationError(
                f"unit_noise_power must be > 0, got {self.unit_noise_power!r}"
            )

    @classmethod
    def for_params(
        cls, params: ChannelParams, gain_mag_sq: float, tx_power: float, n_units: int
    ) -> "LinkState":
        return cls(
            gain_mag_sq=gain_mag_sq,
            tx_power=tx_power,
            n_units=n_units,
            unit_noise_power=params.unit_noise_power,
        )

    @property
    def normalized_gain(self) -> float:
        """g = |h|^2 / (B0 * sigma2), per watt."""
        return self.gain_mag_sq / self.unit_noise_power

    @property
    def snr_per_unit(self) -> float:
        """P * g / n."""
        return self.tx_power * self.normalized_gain / self.n_units


def q_function(x):
    """Gaussian tail probability Q(x) = P[Z > x] for a standard normal Z.

    Negative arguments go through 1 - Q(-x) so the value near 1 keeps its
    full precision for the inverse round trip.
    """
    x = np.asarray(x, dtype=float)
    upper = 0.5 * erfc(x / math.sqrt(2.0))
    lower = 1.0 - 0.5 * erfc(-x / math.sqrt(2.0))
    result = np.where(x < 0, lower, upper)
    return float(result) if result.ndim == 0 else result


@lru_cache(maxsize=4096)
def inverse_q(eps: float) -> float:
    """Inverse of the Gaussian Q-function.

    Starts from scipy's erfcinv and refines with Brent's method whenever
    the first guess misses the target by more than ``INVERSE_Q_TOL``.

    Args:
        eps: Tail probability in the open interval (0, 1)

    Returns:
        x with |Q(x) - eps| <= 1e-10

    Raises:
        DomainError: eps is not a finite number strictly inside (0, 1)
    """
    if not _is_real(eps) or not 0.0 < eps < 1.0:
        raise DomainError(f"inverse_q requires 0 < eps < 1, got {eps!r}")
    eps = float(eps)
    if eps == 0.5:
        return 0.0
    if eps > 0.5:
        # 1 - eps is exact for eps in [0.5, 1)
        return -inverse_q(1.0 - eps)

    x0 = math.sqrt(2.0) * float(erfcinv(2.0 * eps))
    if abs(q_function(x0) - eps) <= INVERSE_Q_TOL:
        return x0

    lo, hi = x0 - 0.5, x0 + 0.5
    while q_function(lo) < eps:
        lo -= 1.0
    while q_function(hi) > eps:
        hi += 1.0
    return float(brentq(lambda x: q_function(x) - eps, lo, hi, xtol=1e-15, rtol=4e-16))


def shannon_capacity(snr):
    """log2(1 + snr) in bits per channel use."""
    return np.log1p(snr) / LN2


def _dispersion(snr):
    # 1 - (1 + snr)^-2 rounds to 1.0 above snr ~ 1e8; keep it strictly below 1
    dispersion = -np.expm1(-2.0 * np.log1p(snr))
    return np.minimum(dispersion, DISPERSION_MAX)


def channel_dispersion(link: LinkState) -> float:
    """U = 1 - (1 + P*g/n)^-2, always in [0, 1) for finite SNR."""
    return float(_dispersion(link.snr_per_unit))


def _rate(params: ChannelParams, snr, n_units):
    """Rate kernel shared by the scalar and matrix entry points."""
    uses = n_units * params.b0 * params.t
    capacity = shannon_capacity(snr)
    if not params.is_finite:
        return uses * capacity
    penalty = np.sqrt(_dispersion(snr) / uses) * inverse_q(params.epsilon) / LN2
    return np.maximum(0.0, uses * (capacity - penalty))


def transmission_rate(params: ChannelParams, link: LinkState) -> float:
    """Achievable upload rate of one link in bits per slot.

    Finite mode applies the normal-approximation dispersion penalty and
    clamps negative values to 0; infinite mode is plain Shannon capacity
    over n * B0 * T channel uses.
    """
    return float(_rate(params, link.snr_per_unit, link.n_units))


def rate_matrix(
    params: ChannelParams, gain_mag_sq: np.ndarray, tx_power: np.ndarray, n_units
) -> np.ndarray:
    """Vectorised ``transmission_rate`` over a vehicle x cluster gain matrix.

    Args:
        params: Channel constants
        gain_mag_sq: M x N matrix of |h|^2
        tx_power: Length-M vector of per-vehicle transmit powers (W)
        n_units: Scalar or M x N integer matrix of bandwidth units

    Returns:
        M x N matrix of rates in bits per slot
    """
    gains = np.asarray(gain_mag_sq, dtype=float)
    power = np.asarray(tx_power, dtype=float).reshape(-1, 1)
    units = np.asarray(n_units)
    if np.any(gains < 0):
        raise ValidationError("gain_mag_sq entries must be >= 0")
    if np.any(power <= 0):
        raise ValidationError("tx_power entries must be > 0")
    if not np.issubdtype(units.dtype, np.integer) or np.any(units < 1):
        raise ValidationError("n_units must be integers >= 1")
    snr = power * (gains / params.unit_noise_power) / units
    return np.asarray(_rate(params, snr, units), dtype=float)


def rate_bits_per_second(omega, params: ChannelParams):
    """Convert bits per slot to bits per second."""
    return omega / params.t


def sample_rayleigh_gain(
    rng: np.random.Generator,
    distance,
    path_loss_exp: float = 3.0,
    size: Optional[tuple] = None,
):
    """Draw |h|^2 = E * d^-eta with E a unit-mean exponential.

    ``distance`` may be a scalar or an array; an array draws one sample per
    entry in C order.
    """
    d = np.asarray(distance, dtype=float)
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise ValidationError(f"distance must be > 0, got {distance!r}")
    if size is None and d.ndim == 0:
        return float(rng.exponential(1.0)) * float(d) ** -path_loss_exp
    shape = size if size is not None else d.shape
    return rng.exponential(1.0, size=shape) * d**-path_loss_exp
