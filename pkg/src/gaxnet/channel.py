"""Air-to-ground URLLC link budget and finite-blocklength error model.

The forward direction maps geometry to reliability:

    (ground distance d, altitude h) -> path loss -> SNR -> error rate

and the inverse solvers run the chain backwards, turning a requirement
(target error eps0, transmission duration T) into a required SNR, a
coverage radius, or a minimum latency. Every inverse is a bisection on a
monotone scalar function; no derivatives are used anywhere.

Packets are short (hundreds of bits), so decoding error is modeled with
the normal approximation for finite blocklength: with n = W*T channel
uses and dispersion V = 1 - (1+SNR)^-2,

    error = Q( sqrt(n / V) * (ln(1+SNR) - rate_nats) )

where rate_nats is the per-channel-use rate in nats. The payload rate is
taken as payload_bits / T, so rate_nats = payload_bits * ln2 / n, and a
transmission lasting exactly payload_bits / W seconds has a rate term of
exactly ln 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

LN2 = math.log(2.0)

# Default bisection window for the coverage-radius solver. Matches the
# diagonal of the 3750 m square arena the environment uses; callers that
# need the physical radius of a stronger link pass a larger limit.
DEFAULT_RANGE_LIMIT = math.hypot(3750.0, 3750.0)


class SolverError(RuntimeError):
    """A bisection could not bracket its target."""


def db_to_linear(value_db: float) -> float:
    """Power ratio from decibels, base 10, factor 10."""
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    """Decibels from a positive power ratio."""
    if value <= 0.0:
        raise ValueError(f"dB of non-positive power ratio {value!r}")
    return 10.0 * math.log10(value)


@dataclass(frozen=True)
class ChannelParams:
    """Radio constants for the UAV-to-ground link.

    alpha and beta shape the sigmoid line-of-sight probability versus
    elevation angle; eta_los and eta_nlos are the excess losses (dB) of
    the two propagation states. Powers are in dBm, so tx_power minus
    noise_power is the link budget in dB.
    """

    alpha: float = 9.61
    beta: float = 0.16
    eta_los: float = 1.0
    eta_nlos: float = 20.0
    carrier_freq: float = 2.0e9
    light_speed: float = 299_792_458.0
    tx_power: float = 46.0
    noise_power: float = -99.0
    bandwidth: float = 20.0e6
    payload_bits: float = 576.0
    altitude: float = 100.0

    def __post_init__(self) -> None:
        if not (self.bandwidth > 0 and self.payload_bits > 0):
            raise ValueError("bandwidth and payload_bits must be positive")
        if not (self.carrier_freq > 0 and self.altitude > 0):
            raise ValueError("carrier_freq and altitude must be positive")
        if self.eta_nlos < self.eta_los:
            raise ValueError("NLoS excess loss must dominate LoS excess loss")
        if self.light_speed <= 0:
            raise ValueError("light_speed must be positive")

    @property
    def t_max(self) -> float:
        """Duration (s) of a transmission using one channel use per bit."""
        return self.payload_bits / self.bandwidth


@dataclass(frozen=True)
class UrllcRequirement:
    """A joint reliability and latency requirement on the link."""

    target_error: float = 1.0e-7
    target_latency: float = 39.0e-6

    def __post_init__(self) -> None:
        if not (0.0 < self.target_error < 0.5):
            raise ValueError("target_error must lie in (0, 0.5)")
        if not (self.target_latency > 0.0):
            raise ValueError("target_latency must be positive")


def _check_geometry(d: float, h: float) -> None:
    if not (math.isfinite(d) and math.isfinite(h)):
        raise ValueError(f"non-finite geometry d={d!r} h={h!r}")
    if d < 0.0 or h <= 0.0:
        raise ValueError(f"need d >= 0 and h > 0, got d={d!r} h={h!r}")


def path_loss(d: float, h: float, p: ChannelParams) -> float:
    """Mean path loss (dB) at ground distance d and altitude h.

    Sum of a sigmoid-weighted excess term that slides between eta_los
    (overhead link) and eta_nlos (grazing link) with elevation angle,
    the free-space term 10*log10(h^2 + d^2), a carrier term
    20*log10(4*pi*f_c/c), and the NLoS excess offset.
    """
    _check_geometry(d, h)
    elevation_deg = math.degrees(math.atan2(h, d))
    los_term = (p.eta_los - p.eta_nlos) / (
        1.0 + p.alpha * math.exp(-p.beta * (elevation_deg - p.alpha))
    )
    spread_term = 10.0 * math.log10(h * h + d * d)
    carrier_term = 20.0 * math.log10(4.0 * math.pi * p.carrier_freq / p.light_speed)
    return los_term + spread_term + carrier_term + p.eta_nlos


def snr(d: float, h: float, p: ChannelParams) -> float:
    """Linear SNR at ground distance d: link budget minus path loss."""
    return db_to_linear(p.tx_power - p.noise_power - path_loss(d, h, p))


def q_function(x: float) -> float:
    """Standard Gaussian upper-tail probability Q(x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def q_function_inv(prob: float) -> float:
    """Inverse of q_function, by bisection to |dx| < 1e-9.

    Q is strictly decreasing, so the root of Q(x) - prob is bracketed by
    [-40, 40] for any prob in (0, 1) (Q(40) underflows to 0, Q(-40) is 1).
    """
    if not (0.0 < prob < 1.0):
        raise ValueError(f"q_function_inv needs prob in (0, 1), got {prob!r}")
    # Converge far below the guaranteed 1e-9 so solvers built on top of
    # this inverse keep their own error-rate identities tight.
    lo, hi = -40.0, 40.0
    while hi - lo > 1.0e-13:
        mid = 0.5 * (lo + hi)
        if q_function(mid) > prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _normal_approx_arg(s: float, t: float, p: ChannelParams) -> float:
    """The argument handed to Q in the finite-blocklength error model.

    sqrt(W*T / V) * (ln(1+SNR) - payload_bits*ln2/(W*T)), strictly
    increasing in SNR at fixed T and in T at fixed SNR.
    """
    dispersion = 1.0 - (1.0 + s) ** -2
    uses = p.bandwidth * t
    # Divide before scaling by ln2 so a transmission of exactly one
    # channel use per bit yields a rate term of exactly ln2.
    rate_nats = (p.payload_bits / uses) * LN2
    return math.sqrt(uses / dispersion) * (math.log1p(s) - rate_nats)


def error_rate(s: float, t_max: float, p: ChannelParams) -> float:
    """Decoding error probability at linear SNR s and duration t_max.

    Underflows to exactly 0.0 once the Q argument passes ~38; callers
    that care about the deep-reliability tail should compare the
    argument via required_snr instead of the probability.
    """
    if not (s > 0.0 and math.isfinite(s)):
        raise ValueError(f"error_rate needs snr > 0, got {s!r}")
    if not (t_max > 0.0):
        raise ValueError(f"error_rate needs t_max > 0, got {t_max!r}")
    return q_function(_normal_approx_arg(s, t_max, p))


def achievable_throughput(s: float, eps0: float, p: ChannelParams) -> float:
    """Rate (nats per channel use) sustainable at error target eps0.

    ln(1+SNR) minus a dispersion penalty (1 - (1+SNR)^-2) / payload_bits
    scaled by the Gaussian tail inverse of eps0.
    """
    if not (s > 0.0):
        raise ValueError(f"achievable_throughput needs snr > 0, got {s!r}")
    if not (0.0 < eps0 < 0.5):
        raise ValueError(f"eps0 must lie in (0, 0.5), got {eps0!r}")
    dispersion = 1.0 - (1.0 + s) ** -2
    return math.log1p(s) - dispersion / p.payload_bits * q_function_inv(eps0)


def required_snr(eps0: float, t_max: float, p: ChannelParams) -> float:
    """Smallest linear SNR whose error rate at duration t_max is <= eps0.

    Bisection on the monotone Q argument over [1e-6, 1e9], relative
    interval tolerance 1e-9.
    """
    if not (0.0 < eps0 < 0.5):
        raise ValueError(f"eps0 must lie in (0, 0.5), got {eps0!r}")
    if not (t_max > 0.0):
        raise ValueError(f"t_max must be positive, got {t_max!r}")
    target = q_function_inv(eps0)
    lo, hi = 1.0e-6, 1.0e9
    if _normal_approx_arg(lo, t_max, p) >= target:
        raise SolverError("requirement already met at the lower SNR bracket")
    if _normal_approx_arg(hi, t_max, p) < target:
        raise SolverError("requirement unreachable within the SNR bracket")
    # Guaranteed tolerance is 1e-9 relative; converge tighter so the
    # error rate at the returned SNR matches eps0 to ~1e-9 relative.
    while (hi - lo) > 1.0e-12 * hi:
        mid = 0.5 * (lo + hi)
        if _normal_approx_arg(mid, t_max, p) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def required_path_loss(eps0: float, t_max: float, p: ChannelParams) -> float:
    """Largest tolerable path loss (dB) for the (eps0, t_max) requirement."""
    return (p.tx_power - p.noise_power) - linear_to_db(required_snr(eps0, t_max, p))


def urllc_range(
    eps0: float,
    t_max: float,
    p: ChannelParams,
    d_max: float = DEFAULT_RANGE_LIMIT,
) -> float:
    """Coverage radius: the ground distance where the link exactly meets
    the (eps0, t_max) requirement at altitude p.altitude.

    Bisection on path loss over d in [0, d_max] to 0.01 m. Raises
    SolverError when the requirement fails even overhead (d = 0), or when
    the whole interval is in range (pass a larger d_max for the physical
    radius).
    """
    threshold = required_path_loss(eps0, t_max, p)
    if path_loss(0.0, p.altitude, p) > threshold:
        raise SolverError(
            "requirement unreachable at d=0: altitude too high or budget too small"
        )
    if path_loss(d_max, p.altitude, p) < threshold:
        raise SolverError(
            f"requirement met over all of [0, {d_max:g}] m; raise d_max"
        )
    # Guaranteed tolerance is 0.01 m; converge to 1e-7 m so the error
    # rate at the returned radius matches eps0 to better than 1e-6
    # relative even where the loss curve is shallow.
    lo, hi = 0.0, d_max
    while hi - lo > 1.0e-7:
        mid = 0.5 * (lo + hi)
        if path_loss(mid, p.altitude, p) < threshold:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def min_latency(s: float, eps0: float, p: ChannelParams) -> float:
    """Smallest transmission duration meeting error target eps0 at SNR s.

    Bisection over T in [1e-9, 1] s, relative tolerance 1e-6. Returns
    math.inf when even a 1 s transmission misses the target (callers
    report that as a violated requirement).
    """
    if not (s > 0.0):
        raise ValueError(f"min_latency needs snr > 0, got {s!r}")
    if not (0.0 < eps0 < 0.5):
        raise ValueError(f"eps0 must lie in (0, 0.5), got {eps0!r}")
    target = q_function_inv(eps0)
    lo, hi = 1.0e-9, 1.0
    if _normal_approx_arg(s, hi, p) < target:
        return math.inf
    if _normal_approx_arg(s, lo, p) >= target:
        return lo
    while (hi - lo) > 1.0e-6 * hi:
        mid = 0.5 * (lo + hi)
        if _normal_approx_arg(s, mid, p) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of searching the altitude band for a wanted coverage radius."""

    achieved: bool
    altitude: float
    range_m: float
    gap_m: float
    target_range_m: float
    threshold_pl_db: float


def _range_at_altitude(h: float, eps0: float, t_max: float, p: ChannelParams) -> float:
    # A link that fails even overhead has a coverage radius of zero.
    try:
        return urllc_range(eps0, t_max, replace(p, altitude=h), d_max=1.0e7)
    except SolverError as err:
        if "d=0" in str(err):
            return 0.0
        raise


def calibrate_altitude(
    target_range: float,
    eps0: float,
    t_max: float,
    p: ChannelParams,
    h_lo: float = 10.0,
    h_hi: float = 2000.0,
    tol_m: float = 1.0,
    scan_points: int = 256,
) -> CalibrationResult:
    """Search altitudes in [h_lo, h_hi] for one whose coverage radius is
    target_range.

    The radius is not monotone in altitude, so a geometric scan locates a
    sign change first and bisection refines it. When no altitude in the
    band reaches the target, the closest achievable point is returned
    with achieved=False so callers can report the gap.
    """
    threshold = required_path_loss(eps0, t_max, p)
    ratio = (h_hi / h_lo) ** (1.0 / (scan_points - 1))
    heights = [h_lo * ratio**i for i in range(scan_points)]
    gaps = [_range_at_altitude(h, eps0, t_max, p) - target_range for h in heights]

    for i in range(scan_points - 1):
        if gaps[i] == 0.0:
            return CalibrationResult(
                True, heights[i], target_range, 0.0, target_range, threshold
            )
        if gaps[i] * gaps[i + 1] < 0.0:
            lo, hi = heights[i], heights[i + 1]
            g_lo = gaps[i]
            while hi - lo > 1.0e-6 * hi:
                mid = 0.5 * (lo + hi)
                g_mid = _range_at_altitude(mid, eps0, t_max, p) - target_range
                if abs(g_mid) <= tol_m:
                    break
                if (g_mid < 0.0) == (g_lo < 0.0):
                    lo, g_lo = mid, g_mid
                else:
                    hi = mid
            h_star = 0.5 * (lo + hi)
            r_star = _range_at_altitude(h_star, eps0, t_max, p)
            return CalibrationResult(
                abs(r_star - target_range) <= tol_m,
                h_star,
                r_star,
                r_star - target_range,
                target_range,
                threshold,
            )

    best = min(range(scan_points), key=lambda i: abs(gaps[i]))
    return CalibrationResult(
        False,
        heights[best],
        gaps[best] + target_range,
        gaps[best],
        target_range,
        threshold,
    )
