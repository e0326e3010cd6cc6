"""Varactor-tuned reflective element: equivalent circuit, reflection, inversion.

Each surface element is modeled as a bottom-layer inductance in parallel
with a series branch of top-layer inductance, tunable varactor capacitance
and loss resistance:

    Z(c, f) = jwL1 * (jwL2 + 1/(jwc) + R) / (jwL1 + jwL2 + 1/(jwc) + R)

with w = 2*pi*f. The reflection coefficient against the surface impedance
z0 is gamma = (Z - z0) / (Z + z0). The phase of gamma is a continuous,
monotone function of the capacitance at fixed frequency, which is what
makes bisection inversion (phase -> capacitance) well posed.

All element operations broadcast over numpy arrays of capacitances and
frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularityError

SPEED_OF_LIGHT = 299_792_458.0  # m/s
FREE_SPACE_IMPEDANCE = 376.730313668  # ohm

# Capacitance bisection stops when the bracket is narrower than this (F).
CAPACITANCE_TOL = 1e-21


@dataclass(frozen=True)
class CircuitParams:
    """Equivalent-circuit constants of one reflective element.

    Defaults describe a varactor cell usable around 2.5 GHz; every value
    can be overridden per scenario.
    """

    l_bottom: float = 2.5e-9            # H, bottom-layer inductance
    l_top: float = 0.7e-9               # H, top-layer inductance
    r_loss: float = 1.0                 # ohm, series loss
    z0: float = FREE_SPACE_IMPEDANCE    # ohm, reference impedance
    c_min: float = 0.47e-12             # F, varactor range lower edge
    c_max: float = 2.35e-12             # F, varactor range upper edge

    def __post_init__(self):
        if self.l_bottom <= 0 or self.l_top <= 0:
            raise ValueError("l_bottom and l_top must be positive")
        if self.r_loss < 0:
            raise ValueError("r_loss must be non-negative")
        if self.z0 <= 0:
            raise ValueError("z0 must be positive")
        if not 0 < self.c_min < self.c_max:
            raise ValueError("capacitance range must satisfy 0 < c_min < c_max")


@dataclass(frozen=True)
class Reflection:
    """Reflection coefficient(s) of one or more elements at one frequency."""

    gamma: complex | np.ndarray
    frequency: float
    capacitance: float | np.ndarray


@dataclass(frozen=True)
class CapacitanceSolution:
    """Result of inverting a target reflection phase to a capacitance.

    ``clamped`` marks targets outside the achievable phase interval; those
    get the boundary capacitance whose phase is circularly closest.
    """

    capacitance: float | np.ndarray
    clamped: bool | np.ndarray
    achieved_phase: float | np.ndarray
    target_phase: float | np.ndarray


def _as_scalar_or_array(x):
    x = np.asarray(x)
    return x[()] if x.ndim == 0 else x


def element_impedance(capacitance, frequency, params: CircuitParams):
    """Input impedance of the element; broadcasts over c and f.

    Requires capacitance > 0 and frequency > 0.
    """
    c = np.asarray(capacitance, dtype=float)
    f = np.asarray(frequency, dtype=float)
    if np.any(c <= 0):
        raise ValueError("capacitance must be positive")
    if np.any(f <= 0):
        raise ValueError("frequency must be positive")
    w = 2.0 * np.pi * f
    z_bottom = 1j * w * params.l_bottom
    z_top = 1j * w * params.l_top + 1.0 / (1j * w * c) + params.r_loss
    return _as_scalar_or_array(z_bottom * z_top / (z_bottom + z_top))


def element_reflection(capacitance, frequency, params: CircuitParams) -> Reflection:
    """Reflection coefficient gamma = (Z - z0) / (Z + z0).

    |gamma| <= 1 whenever r_loss >= 0, and |gamma| == 1 in the lossless
    limit r_loss == 0.
    """
    z = np.asarray(element_impedance(capacitance, frequency, params))
    denom = z + params.z0
    if np.any(np.abs(denom) < 1e-12 * params.z0):
        raise SingularityError("element impedance equals -z0; reflection undefined")
    gamma = (z - params.z0) / denom
    return Reflection(
        gamma=_as_scalar_or_array(gamma),
        frequency=frequency,
        capacitance=capacitance,
    )


def wrap_phase(phi):
    """Wrap to (-pi, pi]."""
    out = np.mod(-np.asarray(phi) + np.pi, 2.0 * np.pi)
    return np.pi - out


def _unwrapped_phase(c, f, params, phase_ref):
    """Reflection phase on the decreasing branch anchored at phase_ref.

    phase_ref is the wrapped phase at c_min. The phase decreases with c by
    less than a full turn over any capacitance range, so values wrapped
    above the anchor belong one turn down.
    """
    ph = np.angle(element_reflection(c, f, params).gamma)
    return np.where(ph > phase_ref + 1e-12, ph - 2.0 * np.pi, ph)


def phase_to_capacitance(target_phase, frequency, params: CircuitParams) -> CapacitanceSolution:
    """Invert a reflection phase to the capacitance realizing it.

    Bisects the monotone (decreasing) unwrapped phase-versus-capacitance
    curve. Targets outside the achievable interval are clamped to the
    circularly nearest range boundary and flagged. Accepts scalars or
    arrays of target phases in (-pi, pi].
    """
    target = wrap_phase(np.asarray(target_phase, dtype=float))
    scalar_in = target.ndim == 0
    target = np.atleast_1d(target)

    phase_at_cmin = float(np.angle(element_reflection(params.c_min, frequency, params).gamma))
    phase_at_cmax_raw = float(np.angle(element_reflection(params.c_max, frequency, params).gamma))
    phase_at_cmax = phase_at_cmax_raw
    if phase_at_cmax > phase_at_cmin:
        phase_at_cmax -= 2.0 * np.pi

    # Candidate unwrapped target on the decreasing branch.
    unwrapped = np.where(target > phase_at_cmin + 1e-12, target - 2.0 * np.pi, target)
    reachable = unwrapped >= phase_at_cmax - 1e-12

    # Clamp unreachable targets to the circularly nearest boundary.
    dist_min = np.abs(wrap_phase(target - phase_at_cmin))
    dist_max = np.abs(wrap_phase(target - phase_at_cmax_raw))
    clamp_to_cmin = dist_min <= dist_max

    lo = np.full(target.shape, params.c_min)
    hi = np.full(target.shape, params.c_max)
    goal = np.clip(unwrapped, phase_at_cmax, phase_at_cmin)
    while np.max(hi - lo) > CAPACITANCE_TOL:
        mid = 0.5 * (lo + hi)
        ph = _unwrapped_phase(mid, frequency, params, phase_at_cmin)
        go_right = ph > goal  # phase decreases with c
        lo = np.where(go_right, mid, lo)
        hi = np.where(go_right, hi, mid)
    cap = 0.5 * (lo + hi)
    cap = np.where(reachable, cap, np.where(clamp_to_cmin, params.c_min, params.c_max))

    achieved = np.angle(element_reflection(cap, frequency, params).gamma)
    clamped = ~reachable
    if scalar_in:
        return CapacitanceSolution(
            capacitance=float(cap[0]),
            clamped=bool(clamped[0]),
            achieved_phase=float(achieved[0]),
            target_phase=float(target[0]),
        )
    return CapacitanceSolution(
        capacitance=cap, clamped=clamped, achieved_phase=achieved, target_phase=target
    )


def reflection_phase_interval(frequency, params: CircuitParams):
    """(phase at c_min, phase at c_max) in radians, wrapped to (-pi, pi]."""
    p_min = float(np.angle(element_reflection(params.c_min, frequency, params).gamma))
    p_max = float(np.angle(element_reflection(params.c_max, frequency, params).gamma))
    return p_min, p_max
