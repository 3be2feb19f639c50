"""Path-loss-and-additive-noise propagation model with power-adjustable BPSK.

A transmitted amplitude is attenuated by 1/sqrt(xi * d**alpha) at distance d
and corrupted by zero-mean Gaussian noise of variance ``sigma`` (a power, in
watts).  Scaling the transmit power with the claimed distance makes the
signal-to-noise ratio at the claimed distance a system constant, so the whole
family of claim distances maps onto one binary symmetric broadcast channel
with an "intended" error rate at the claim and a worse "blocked" error rate
at ``psi`` times the claim.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelParams",
    "BerPair",
    "ClaimRangeError",
    "PowerLimitError",
    "DEFAULT_CHANNEL",
    "watts_to_dbm",
    "dbm_to_watts",
    "snr_at_distance",
    "transmit_power_for_claim",
    "random_bits",
    "bits_to_hex",
    "hex_to_bits",
    "bpsk_modulate",
    "bpsk_demodulate",
    "propagate",
    "bit_error_prob",
    "intended_blocked_ber",
]


class ClaimRangeError(ValueError):
    """Distance claim outside (0, d0]."""


class PowerLimitError(ValueError):
    """Requested transmit power outside (0, e_max]."""


@dataclass(frozen=True)
class ChannelParams:
    """Propagation environment parameters.

    Attributes:
        xi: dimensionless system loss, >= 1.
        alpha: path loss exponent (2 free space .. 4 flat earth).
        sigma: noise power in watts.
        e_max: maximum transmit power in watts.
        d0: maximum claimable distance in meters.
    """

    xi: float = 1.0
    alpha: float = 3.0
    sigma: float = 1e-12
    e_max: float = 3e4
    d0: float = 1e5

    def __post_init__(self) -> None:
        if not self.xi >= 1:
            raise ValueError(f"system loss xi must be >= 1, got {self.xi}")
        if not self.alpha > 0:
            raise ValueError(f"path loss exponent must be > 0, got {self.alpha}")
        if not self.sigma > 0:
            raise ValueError(f"noise power must be > 0, got {self.sigma}")
        if not self.e_max > 0:
            raise ValueError(f"e_max must be > 0, got {self.e_max}")
        if not self.d0 > 0:
            raise ValueError(f"d0 must be > 0, got {self.d0}")

    @classmethod
    def from_json(cls, source: str | dict) -> "ChannelParams":
        """Build from a JSON object {"xi", "alpha", "sigma_watts", "e_max_watts", "d0_meters"}."""
        obj = json.loads(source) if isinstance(source, str) else source
        return cls(
            xi=float(obj["xi"]),
            alpha=float(obj["alpha"]),
            sigma=float(obj["sigma_watts"]),
            e_max=float(obj["e_max_watts"]),
            d0=float(obj["d0_meters"]),
        )

    def to_json(self) -> dict:
        return {
            "xi": self.xi,
            "alpha": self.alpha,
            "sigma_watts": self.sigma,
            "e_max_watts": self.e_max,
            "d0_meters": self.d0,
        }


#: Default environment: no system loss, outdoor exponent 3, 1 pW noise,
#: 30 kW power budget, 100 km maximum claim.
DEFAULT_CHANNEL = ChannelParams()


def watts_to_dbm(watts: float) -> float:
    if not watts > 0:
        raise ValueError(f"power must be > 0 W, got {watts}")
    return 10.0 * math.log10(watts / 1e-3)


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def snr_at_distance(e: float, d: float, ch: ChannelParams) -> float:
    """Signal-to-noise ratio e / (xi * d**alpha * sigma) at distance d."""
    if not e > 0:
        raise ValueError(f"transmit power must be > 0, got {e}")
    if not d > 0:
        raise ValueError(f"distance must be > 0, got {d}")
    return e / (ch.xi * d**ch.alpha * ch.sigma)


def transmit_power_for_claim(d_c: float, e0: float, ch: ChannelParams) -> float:
    """Power (d_c/d0)**alpha * e0 that keeps the SNR at d_c equal to the SNR of e0 at d0."""
    if not 0 < d_c <= ch.d0:
        raise ClaimRangeError(f"claim {d_c} m outside (0, {ch.d0}] m")
    if not 0 < e0 <= ch.e_max:
        raise PowerLimitError(f"reference power {e0} W outside (0, {ch.e_max}] W")
    return (d_c / ch.d0) ** ch.alpha * e0


def random_bits(rng: np.random.Generator, k: int) -> np.ndarray:
    """k uniform bits as a uint8 array."""
    return rng.integers(0, 2, size=int(k), dtype=np.uint8)


def bits_to_hex(bits: np.ndarray) -> str:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes().hex()


def hex_to_bits(hexstr: str, k: int) -> np.ndarray:
    raw = np.frombuffer(bytes.fromhex(hexstr), dtype=np.uint8)
    return np.unpackbits(raw)[:k]


def bpsk_modulate(bits: np.ndarray, e: float) -> np.ndarray:
    """Map bit 0 -> -sqrt(e), bit 1 -> +sqrt(e)."""
    if not e > 0:
        raise ValueError(f"transmit power must be > 0, got {e}")
    amp = math.sqrt(e)
    bits = np.asarray(bits, dtype=np.uint8)
    return np.where(bits != 0, amp, -amp).astype(np.float64)


def bpsk_demodulate(sig: np.ndarray) -> np.ndarray:
    """Decide by sign: sample < 0 -> bit 0, otherwise (including exactly 0.0) bit 1."""
    sig = np.asarray(sig, dtype=np.float64)
    if np.isnan(sig).any():
        raise ValueError("invalid signal: NaN sample")
    return (sig >= 0).astype(np.uint8)


def propagate(
    sig: np.ndarray,
    d: float,
    ch: ChannelParams,
    rng: np.random.Generator,
    *,
    noiseless: bool = False,
) -> np.ndarray:
    """Attenuate by 1/sqrt(xi * d**alpha) and add fresh Gaussian noise per sample.

    ``sigma`` is the noise power referred to the full symbol bandwidth, so
    each real sample sees variance sigma/2; with this convention the
    demodulated bit error rate is exactly bit_error_prob(snr) for
    snr = e/(xi * d**alpha * sigma).

    Each call draws independent noise: distinct receiving positions (and
    repeated receptions) see independent noise realizations.  ``noiseless``
    selects the sigma -> 0 limit, returning the attenuated signal exactly.
    """
    if not d > 0:
        raise ValueError(f"distance must be > 0, got {d}")
    sig = np.asarray(sig, dtype=np.float64)
    att = sig / math.sqrt(ch.xi * d**ch.alpha)
    if noiseless:
        return att
    return att + rng.normal(0.0, math.sqrt(ch.sigma / 2.0), size=att.shape)


def bit_error_prob(snr: float) -> float:
    """BPSK bit error probability 0.5 * erfc(sqrt(snr))."""
    if snr < 0:
        raise ValueError(f"snr must be >= 0, got {snr}")
    return 0.5 * math.erfc(math.sqrt(snr))


@dataclass(frozen=True)
class BerPair:
    """Error probabilities of the induced binary symmetric broadcast channel.

    p_i applies at distances up to the claim, p_b at the blocked region
    ``psi`` times the claim and beyond.
    """

    p_i: float
    p_b: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.p_i <= self.p_b <= 0.5):
            raise ValueError(f"need 0 <= p_i <= p_b <= 0.5, got {self.p_i}, {self.p_b}")


def intended_blocked_ber(e0: float, psi: float, ch: ChannelParams) -> BerPair:
    """BerPair for reference power e0: p_i at SNR0, p_b at SNR0 / psi**alpha."""
    if not 0 < e0 <= ch.e_max:
        raise PowerLimitError(f"reference power {e0} W outside (0, {ch.e_max}] W")
    if not psi > 1:
        raise ValueError(f"ratio psi must be > 1, got {psi}")
    snr0 = snr_at_distance(e0, ch.d0, ch)
    return BerPair(bit_error_prob(snr0), bit_error_prob(snr0 / psi**ch.alpha))
