"""Two-body orbital mechanics: Kepler solving, element/state conversions, propagation.

All quantities are SI (meters, seconds, radians) in a non-rotating inertial
frame centered on the attracting body. Every function here is pure; there is
no shared state, so they are safe to call from concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi

# Below these thresholds the corresponding angles are undefined and the
# degeneracy conventions apply (arg_periapsis = 0 for near-circular,
# raan = 0 for near-equatorial).
ECC_DEGENERATE = 1e-8
INC_DEGENERATE = 1e-8

KEPLER_TOL = 1e-14
KEPLER_MAX_NEWTON = 50


class OrbitError(Exception):
    """Base class for orbital-dynamics errors."""


class KeplerDomainError(OrbitError):
    """Eccentricity outside [0, 1)."""


class UnsupportedOrbitError(OrbitError):
    """State is not a bound, non-degenerate elliptic orbit."""


class DegenerateFrameError(OrbitError):
    """Angular momentum too small to define the local orbital frame."""


class ImpactError(OrbitError):
    """Trajectory intersected the central body's surface."""

    def __init__(self, message: str, state: "StateVector" = None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class BodyConstants:
    """Central body: gravitational parameter (m^3/s^2) and surface radius (m)."""

    mu: float
    surface_radius: float

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.surface_radius <= 0.0:
            raise ValueError(f"surface_radius must be positive, got {self.surface_radius}")


# Default body: Kerbin-like constants (600 km surface radius).
DEFAULT_BODY = BodyConstants(mu=3.5316e12, surface_radius=600_000.0)


@dataclass(frozen=True)
class OrbitalElements:
    """Classical Keplerian elements of a bound elliptic orbit.

    semimajor_axis in meters (> 0), eccentricity in [0, 1), all angles in
    radians: inclination in [0, pi], raan / arg_periapsis / true_anomaly
    in [0, 2*pi).
    """

    semimajor_axis: float
    eccentricity: float
    inclination: float
    raan: float
    arg_periapsis: float
    true_anomaly: float

    def __post_init__(self):
        if not self.semimajor_axis > 0.0:
            raise ValueError(f"semimajor_axis must be > 0, got {self.semimajor_axis}")
        if not 0.0 <= self.eccentricity < 1.0:
            raise ValueError(f"eccentricity must be in [0, 1), got {self.eccentricity}")
        if not 0.0 <= self.inclination <= math.pi:
            raise ValueError(f"inclination must be in [0, pi], got {self.inclination}")

    @property
    def periapsis_radius(self) -> float:
        return self.semimajor_axis * (1.0 - self.eccentricity)

    def with_true_anomaly(self, nu: float) -> "OrbitalElements":
        return replace(self, true_anomaly=wrap_angle(nu))


@dataclass
class StateVector:
    """Inertial position (m) and velocity (m/s) at an epoch (s since mission start)."""

    position: np.ndarray
    velocity: np.ndarray
    epoch: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


def wrap_angle(angle: float) -> float:
    """Wrap an angle to [0, 2*pi)."""
    wrapped = math.fmod(angle, TWO_PI)
    if wrapped < 0.0:
        wrapped += TWO_PI
    return wrapped


def orbital_period(elements: OrbitalElements, body: BodyConstants) -> float:
    """Period T = 2*pi*sqrt(a^3/mu) in seconds."""
    a = elements.semimajor_axis
    return TWO_PI * math.sqrt(a * a * a / body.mu)


def specific_energy(state: StateVector, body: BodyConstants) -> float:
    """Specific orbital energy v^2/2 - mu/r (J/kg)."""
    r = float(np.linalg.norm(state.position))
    v2 = float(np.dot(state.velocity, state.velocity))
    return 0.5 * v2 - body.mu / r


def angular_momentum(state: StateVector) -> np.ndarray:
    """Specific angular momentum vector r x v (m^2/s)."""
    return np.cross(state.position, state.velocity)


def solve_kepler(mean_anomaly: float, eccentricity: float) -> float:
    """Solve Kepler's equation E - e*sin(E) = M for the eccentric anomaly.

    Newton iteration seeded with E0 = M + e*sin(M); falls back to bisection
    if Newton has not converged after 50 iterations (it always does for the
    small eccentricities used here, but the fallback keeps the contract
    unconditional for any e in [0, 1)).

    Args:
        mean_anomaly: M in radians; wrapped internally to [0, 2*pi).
        eccentricity: e in [0, 1).

    Returns:
        E in [0, 2*pi) with |E - e*sin(E) - M| < 1e-12.
    """
    if not 0.0 <= eccentricity < 1.0:
        raise KeplerDomainError(f"eccentricity must be in [0, 1), got {eccentricity}")
    m = wrap_angle(mean_anomaly)
    e = eccentricity
    if e == 0.0:
        return m

    ecc_anomaly = m + e * math.sin(m)
    for _ in range(KEPLER_MAX_NEWTON):
        f = ecc_anomaly - e * math.sin(ecc_anomaly) - m
        if abs(f) < KEPLER_TOL:
            return wrap_angle(ecc_anomaly)
        ecc_anomaly -= f / (1.0 - e * math.cos(ecc_anomaly))

    # Bisection fallback: f(E) = E - e*sin(E) - m is strictly increasing for
    # e < 1, with f(0) <= 0 <= f(2*pi).
    lo, hi = 0.0, TWO_PI
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - e * math.sin(mid) - m < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < KEPLER_TOL:
            break
    return wrap_angle(0.5 * (lo + hi))


def true_anomaly_from_eccentric(ecc_anomaly: float, eccentricity: float) -> float:
    """Eccentric anomaly E -> true anomaly nu, wrapped to [0, 2*pi)."""
    e = eccentricity
    half = 0.5 * ecc_anomaly
    nu = 2.0 * math.atan2(math.sqrt(1.0 + e) * math.sin(half),
                          math.sqrt(1.0 - e) * math.cos(half))
    return wrap_angle(nu)


def eccentric_from_true_anomaly(true_anomaly: float, eccentricity: float) -> float:
    """True anomaly nu -> eccentric anomaly E, wrapped to [0, 2*pi)."""
    e = eccentricity
    half = 0.5 * true_anomaly
    ecc_anomaly = 2.0 * math.atan2(math.sqrt(1.0 - e) * math.sin(half),
                                   math.sqrt(1.0 + e) * math.cos(half))
    return wrap_angle(ecc_anomaly)


def mean_from_eccentric_anomaly(ecc_anomaly: float, eccentricity: float) -> float:
    """Eccentric anomaly E -> mean anomaly M, wrapped to [0, 2*pi)."""
    return wrap_angle(ecc_anomaly - eccentricity * math.sin(ecc_anomaly))


def elements_to_state(elements: OrbitalElements, body: BodyConstants,
                      epoch: float = 0.0) -> StateVector:
    """Convert Keplerian elements to an inertial state vector.

    Builds the perifocal-frame state and rotates it through
    Rz(raan) * Rx(inclination) * Rz(arg_periapsis).
    """
    a = elements.semimajor_axis
    e = elements.eccentricity
    nu = elements.true_anomaly
    p = a * (1.0 - e * e)
    r_mag = p / (1.0 + e * math.cos(nu))

    cos_nu, sin_nu = math.cos(nu), math.sin(nu)
    r_pf = np.array([r_mag * cos_nu, r_mag * sin_nu, 0.0])
    v_coef = math.sqrt(body.mu / p)
    v_pf = np.array([-v_coef * sin_nu, v_coef * (e + cos_nu), 0.0])

    cr, sr = math.cos(elements.raan), math.sin(elements.raan)
    ci, si = math.cos(elements.inclination), math.sin(elements.inclination)
    cw, sw = math.cos(elements.arg_periapsis), math.sin(elements.arg_periapsis)
    rot = np.array([
        [cr * cw - sr * sw * ci, -cr * sw - sr * cw * ci, sr * si],
        [sr * cw + cr * sw * ci, -sr * sw + cr * cw * ci, -cr * si],
        [sw * si, cw * si, ci],
    ])
    return StateVector(position=rot @ r_pf, velocity=rot @ v_pf, epoch=epoch)


def state_to_elements(state: StateVector, body: BodyConstants) -> OrbitalElements:
    """Convert an inertial state vector to Keplerian elements.

    Degeneracy conventions: for eccentricity below 1e-8 the argument of
    periapsis is reported as 0 and the true anomaly is measured from the
    ascending node; for inclination below 1e-8 the raan is reported as 0.

    Raises:
        UnsupportedOrbitError: state is unbound (energy >= 0) or radial
            (negligible angular momentum).
    """
    r_vec = np.asarray(state.position, dtype=float)
    v_vec = np.asarray(state.velocity, dtype=float)
    r = float(np.linalg.norm(r_vec))
    v2 = float(np.dot(v_vec, v_vec))

    h_vec = np.cross(r_vec, v_vec)
    h = float(np.linalg.norm(h_vec))
    if h < 1e-9 * r * max(math.sqrt(v2), 1.0):
        raise UnsupportedOrbitError("degenerate radial trajectory (zero angular momentum)")

    energy = 0.5 * v2 - body.mu / r
    if energy >= 0.0:
        raise UnsupportedOrbitError(f"orbit is not bound (specific energy {energy:.6g} >= 0)")
    a = -body.mu / (2.0 * energy)

    e_vec = np.cross(v_vec, h_vec) / body.mu - r_vec / r
    e = float(np.linalg.norm(e_vec))

    h_hat = h_vec / h
    inc = math.acos(max(-1.0, min(1.0, h_vec[2] / h)))

    if inc < INC_DEGENERATE:
        raan = 0.0
        node_hat = np.array([1.0, 0.0, 0.0])
    else:
        node_vec = np.array([-h_vec[1], h_vec[0], 0.0])
        node_hat = node_vec / float(np.linalg.norm(node_vec))
        raan = wrap_angle(math.atan2(node_hat[1], node_hat[0]))

    # In-plane transverse direction completing (node_hat, t_hat, h_hat).
    t_hat = np.cross(h_hat, node_hat)

    if e < ECC_DEGENERATE:
        argp = 0.0
        nu = wrap_angle(math.atan2(float(np.dot(r_vec, t_hat)), float(np.dot(r_vec, node_hat))))
    else:
        e_hat = e_vec / e
        argp = wrap_angle(math.atan2(float(np.dot(e_vec, t_hat)), float(np.dot(e_vec, node_hat))))
        q_hat = np.cross(h_hat, e_hat)
        nu = wrap_angle(math.atan2(float(np.dot(r_vec, q_hat)), float(np.dot(r_vec, e_hat))))

    return OrbitalElements(
        semimajor_axis=a,
        eccentricity=e,
        inclination=inc,
        raan=raan,
        arg_periapsis=argp,
        true_anomaly=nu,
    )


def propagate_coast(elements: OrbitalElements, dt: float,
                    body: BodyConstants) -> OrbitalElements:
    """Advance an orbit analytically by dt seconds. Only the anomaly changes."""
    if dt < 0.0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0.0:
        return elements
    e = elements.eccentricity
    a = elements.semimajor_axis
    mean_motion = math.sqrt(body.mu / (a * a * a))
    ecc_anomaly = eccentric_from_true_anomaly(elements.true_anomaly, e)
    mean_anomaly = mean_from_eccentric_anomaly(ecc_anomaly, e)
    new_ecc_anomaly = solve_kepler(mean_anomaly + mean_motion * dt, e)
    return elements.with_true_anomaly(true_anomaly_from_eccentric(new_ecc_anomaly, e))


def rsw_basis(state: StateVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed orthonormal local orbital frame (R, S, W) of a state.

    R is the outward radial unit vector, W the orbit normal (r x v direction),
    S = W x R the along-track direction.

    Raises:
        DegenerateFrameError: position and velocity are collinear (the frame
            is undefined without angular momentum).
    """
    r_vec = np.asarray(state.position, dtype=float)
    v_vec = np.asarray(state.velocity, dtype=float)
    r = float(np.linalg.norm(r_vec))
    v = float(np.linalg.norm(v_vec))
    w_vec = np.cross(r_vec, v_vec)
    w = float(np.linalg.norm(w_vec))
    if r == 0.0 or w < 1e-12 * r * max(v, 1.0):
        raise DegenerateFrameError("zero angular momentum: RSW frame undefined")
    r_hat = r_vec / r
    w_hat = w_vec / w
    s_hat = np.cross(w_hat, r_hat)
    return r_hat, s_hat, w_hat


def _rk4_derivative(rx, ry, rz, vx, vy, vz, mu, a_cmd):
    """State derivative under central gravity plus an RSW-commanded acceleration.

    a_cmd is (radial, along_track, cross_track) in m/s^2 or None for pure
    coast; the RSW triad is re-resolved from the instantaneous state at every
    evaluation. Plain scalars keep this hot path cheap.
    """
    rn2 = rx * rx + ry * ry + rz * rz
    rn = math.sqrt(rn2)
    coef = -mu / (rn2 * rn)
    ax = coef * rx
    ay = coef * ry
    az = coef * rz
    if a_cmd is not None:
        a_r, a_s, a_w = a_cmd
        wx = ry * vz - rz * vy
        wy = rz * vx - rx * vz
        wz = rx * vy - ry * vx
        wn = math.sqrt(wx * wx + wy * wy + wz * wz)
        if wn < 1e-12 * rn:
            raise DegenerateFrameError("zero angular momentum: cannot resolve thrust frame")
        rhx, rhy, rhz = rx / rn, ry / rn, rz / rn
        whx, why, whz = wx / wn, wy / wn, wz / wn
        shx = why * rhz - whz * rhy
        shy = whz * rhx - whx * rhz
        shz = whx * rhy - why * rhx
        ax += a_r * rhx + a_s * shx + a_w * whx
        ay += a_r * rhy + a_s * shy + a_w * why
        az += a_r * rhz + a_s * shz + a_w * whz
    return vx, vy, vz, ax, ay, az


def propagate_thrusted(state: StateVector, accel_rsw, dt: float, substep: float,
                       body: BodyConstants) -> StateVector:
    """Numerically propagate a state under gravity plus commanded acceleration.

    Fixed-step RK4. The commanded acceleration is expressed in the vessel's
    instantaneous RSW frame and re-resolved at every integrator evaluation,
    so a constant command follows the rotating frame.

    Args:
        state: Initial state.
        accel_rsw: (radial, along_track, cross_track) acceleration in m/s^2.
        dt: Total propagation time (> 0).
        substep: Target integration step; dt is split into round(dt/substep)
            equal steps (at least one).
        body: Central body constants.

    Raises:
        ImpactError: the trajectory reached the body's surface; the error
            carries the offending state.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if substep <= 0.0:
        raise ValueError(f"substep must be > 0, got {substep}")

    a_r, a_s, a_w = float(accel_rsw[0]), float(accel_rsw[1]), float(accel_rsw[2])
    a_cmd = None if a_r == 0.0 and a_s == 0.0 and a_w == 0.0 else (a_r, a_s, a_w)
    mu = body.mu
    surface = body.surface_radius

    n_steps = max(1, round(dt / substep))
    h = dt / n_steps

    rx, ry, rz = (float(x) for x in state.position)
    vx, vy, vz = (float(x) for x in state.velocity)

    for _ in range(n_steps):
        k1 = _rk4_derivative(rx, ry, rz, vx, vy, vz, mu, a_cmd)
        k2 = _rk4_derivative(rx + 0.5 * h * k1[0], ry + 0.5 * h * k1[1], rz + 0.5 * h * k1[2],
                             vx + 0.5 * h * k1[3], vy + 0.5 * h * k1[4], vz + 0.5 * h * k1[5],
                             mu, a_cmd)
        k3 = _rk4_derivative(rx + 0.5 * h * k2[0], ry + 0.5 * h * k2[1], rz + 0.5 * h * k2[2],
                             vx + 0.5 * h * k2[3], vy + 0.5 * h * k2[4], vz + 0.5 * h * k2[5],
                             mu, a_cmd)
        k4 = _rk4_derivative(rx + h * k3[0], ry + h * k3[1], rz + h * k3[2],
                             vx + h * k3[3], vy + h * k3[4], vz + h * k3[5],
                             mu, a_cmd)
        sixth = h / 6.0
        rx += sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        ry += sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        rz += sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        vx += sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        vy += sixth * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4])
        vz += sixth * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5])
        if rx * rx + ry * ry + rz * rz <= surface * surface:
            impact_state = StateVector(position=np.array([rx, ry, rz]),
                                       velocity=np.array([vx, vy, vz]),
                                       epoch=state.epoch)
            raise ImpactError("trajectory intersected the central body's surface",
                              state=impact_state)

    result = StateVector(position=np.array([rx, ry, rz]),
                         velocity=np.array([vx, vy, vz]),
                         epoch=state.epoch + dt)
    if not (np.all(np.isfinite(result.position)) and np.all(np.isfinite(result.velocity))):
        raise OrbitError("propagation produced non-finite state")
    return result

