"""Link-quality metrics, throughput objectives, and the power amplifier model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import ComplexMatrix, PaParams, db_to_linear, matmul

_LN2 = math.log(2.0)


class SaturationError(ValueError):
    """The amplifier cannot deliver the requested output power."""


def channel_gain(h: ComplexMatrix, v: ComplexMatrix) -> np.ndarray:
    """Per-link power gains |H V|^2 as a real N x N array.

    Row i, column j is the power user i receives from the beam assigned to
    user j; the diagonal carries the intended links.
    """
    t = matmul(h, v).data
    return t.real**2 + t.imag**2


def sinr_from_components(signal: np.ndarray, interference: np.ndarray, p_over_m: float) -> np.ndarray:
    """SINR given per-user signal/interference gains and the per-antenna power P/M.

    Noise power is normalized to one, so p_over_m carries the full SNR scaling.
    Shape-generic; used both for single gain matrices and batched populations.
    """
    return (p_over_m * signal) / (1.0 + p_over_m * interference)


def sinr(g: np.ndarray, p: float, m: int) -> np.ndarray:
    """Per-user SINR from a gain matrix under total transmit power p split over m antennas."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"gain matrix must be square, got shape {g.shape}")
    if np.any(g < 0):
        raise ValueError("gains are squared magnitudes and cannot be negative")
    if not p >= 0:
        raise ValueError(f"transmit power must be non-negative, got {p}")
    if m < 1:
        raise ValueError(f"antenna count must be positive, got {m}")
    signal = np.diagonal(g)
    interference = g.sum(axis=1) - signal
    return sinr_from_components(signal, interference, p / m)


def rates(sinr_values: np.ndarray) -> np.ndarray:
    """Shannon rates log2(1 + SINR) in bits per channel use.

    Uses log1p so thresholds near zero keep full relative precision.
    """
    s = np.asarray(sinr_values, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("SINR cannot be negative")
    return np.log1p(s) / _LN2


def min_rate_for_threshold(theta_dB: float) -> float:
    """Rate a user must reach so that their SINR meets the threshold theta_dB."""
    return float(math.log1p(db_to_linear(theta_dB)) / _LN2)


def delay_factor(alpha: float, k_it: int) -> float:
    """The (1 - alpha*K) fraction of the frame left for payload after K search iterations."""
    if k_it < 1:
        raise ValueError(f"iteration index is 1-based, got {k_it}")
    if not alpha >= 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    factor = 1.0 - alpha * k_it
    if factor < 0:
        raise ValueError(f"delay penalty alpha*K = {alpha * k_it} exceeds 1; no frame time is left")
    return factor


def throughput(r: np.ndarray, alpha: float, k_it: int) -> float:
    """Delay-weighted sum throughput (1 - alpha*K) * sum(r)."""
    r = np.asarray(r, dtype=np.float64)
    return float(delay_factor(alpha, k_it) * r.sum())


def outage_throughput(r: np.ndarray, alpha: float, k_it: int, theta_dB: float) -> float:
    """Delay-weighted throughput counting only users whose rate clears the threshold."""
    r = np.asarray(r, dtype=np.float64)
    served = r >= min_rate_for_threshold(theta_dB)
    return float(delay_factor(alpha, k_it) * r[served].sum())


def served_stats(r: np.ndarray, theta_dB: float) -> tuple[int, np.ndarray]:
    """Count served users and flag the ones in outage.

    Returns (served_count, outage_flags) where outage_flags[i] is True when
    user i falls below the threshold.
    """
    r = np.asarray(r, dtype=np.float64)
    flags = r < min_rate_for_threshold(theta_dB)
    return int(r.size - flags.sum()), flags


def pa_output_power(rho_cons: float, pa: PaParams) -> float:
    """Radiated power the amplifier produces when drawing rho_cons (linear scale).

    Inverts the consumption law rho_cons = rho_max^mu * rho_out^(1-mu) / epsilon.
    An ideal amplifier returns rho_cons unchanged. Raises SaturationError when
    the implied output would exceed rho_max; the onset sits at
    rho_cons = rho_max / epsilon, and that boundary itself is allowed.
    """
    if not rho_cons >= 0:
        raise ValueError(f"consumed power must be non-negative, got {rho_cons}")
    if pa.is_ideal:
        return float(rho_cons)
    if pa.mu == 1.0:
        raise ValueError("mu = 1 leaves the output power undetermined; use mu in [0, 1)")
    rho_max = pa.rho_max_linear
    if pa.mu > 0 and not math.isfinite(rho_max):
        raise ValueError("mu > 0 requires a finite saturation power rho_max_dB")
    if pa.mu == 0:
        rho_out = pa.epsilon * rho_cons
    else:
        rho_out = (pa.epsilon * rho_cons / rho_max**pa.mu) ** (1.0 / (1.0 - pa.mu))
    if rho_out > rho_max:
        # Tolerate representation error right at the saturation boundary.
        if rho_out <= rho_max * (1.0 + 1e-9):
            return float(rho_max)
        raise SaturationError(
            f"consumed power {rho_cons:g} implies output {rho_out:g} beyond saturation "
            f"{rho_max:g} (onset at rho_cons = {rho_max / pa.epsilon:g})"
        )
    return float(rho_out)


def pa_consumed_power(rho_out: float, pa: PaParams) -> float:
    """Power the amplifier draws to radiate rho_out (linear scale). Inverse of pa_output_power."""
    if not rho_out >= 0:
        raise ValueError(f"output power must be non-negative, got {rho_out}")
    if pa.is_ideal:
        return float(rho_out)
    if pa.mu == 1.0:
        raise ValueError("mu = 1 leaves the consumption law degenerate; use mu in [0, 1)")
    rho_max = pa.rho_max_linear
    if pa.mu > 0 and not math.isfinite(rho_max):
        raise ValueError("mu > 0 requires a finite saturation power rho_max_dB")
    if rho_out > rho_max * (1.0 + 1e-9):
        raise SaturationError(f"output power {rho_out:g} exceeds saturation {rho_max:g}")
    if pa.mu == 0:
        return float(rho_out / pa.epsilon)
    return float(rho_max**pa.mu * rho_out ** (1.0 - pa.mu) / pa.epsilon)


def pa_effective_efficiency(rho_out: float, pa: PaParams) -> float:
    """Ratio of radiated to consumed power at the given operating point."""
    if rho_out <= 0:
        raise ValueError(f"efficiency needs a positive output power, got {rho_out}")
    return float(rho_out / pa_consumed_power(rho_out, pa))


class ObjectiveKind(enum.Enum):
    """What the beam search tries to maximize."""

    THROUGHPUT = "throughput"
    OUTAGE_THROUGHPUT = "outage_throughput"
    OUTAGE_COUNT = "outage_count"

    @classmethod
    def from_string(cls, name: str) -> "ObjectiveKind":
        for kind in cls:
            if kind.value == name:
                return kind
        options = ", ".join(k.value for k in cls)
        raise ValueError(f"unknown objective {name!r}; expected one of: {options}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Objective:
    """Search objective plus the parameters it needs.

    alpha feeds the delay weighting; theta_dB only matters for the outage
    variants. OUTAGE_COUNT compares candidates lexicographically: served user
    count first, total sum rate as the tie-break.
    """

    kind: ObjectiveKind = ObjectiveKind.THROUGHPUT
    alpha: float = 0.001
    theta_dB: float = -100.0


def evaluate_objective(obj: Objective, r: np.ndarray, k_it: int):
    """Score a rate vector under the objective at search iteration k_it.

    Returns a float for the rate objectives and a (served_count, sum_rate)
    tuple for OUTAGE_COUNT; tuples compare lexicographically, which is the
    intended ordering.
    """
    r = np.asarray(r, dtype=np.float64)
    if obj.kind is ObjectiveKind.THROUGHPUT:
        return throughput(r, obj.alpha, k_it)
    if obj.kind is ObjectiveKind.OUTAGE_THROUGHPUT:
        return outage_throughput(r, obj.alpha, k_it, obj.theta_dB)
    served, _ = served_stats(r, obj.theta_dB)
    return served, float(r.sum())
