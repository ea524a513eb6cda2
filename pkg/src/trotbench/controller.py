"""In-place trot controller: phase clock, swing lift, attitude correction, IK.

Diagonal leg pairs are commanded as one virtual leg: pair A is (FL, RR),
pair B is (FR, RL), half a cycle apart. Stance legs hold the standing height
with their foot targets rotated by the pitch/roll corrections

    theta_pitch = -kp1 * (pitch - pitch_des) - kv1 * pitch_rate
    theta_roll  = -kp2 * (roll  - roll_des)  - kv2 * roll_rate

computed from the IMU; swing legs follow a half-sine lift whose peak is the
hopping-height parameter. Foot targets are resolved to joint angles with
two-link planar inverse kinematics after an abduction rotation.

Body frame: x forward, y left, z up; angles in radians, right-handed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .bo import ParamVector

LEG_ORDER = ("FL", "FR", "RL", "RR")


class OutOfReach(Exception):
    """Commanded foot target violates the leg's reachable annulus."""


@dataclass(frozen=True)
class ControllerConfig:
    gait_period: float = 0.6  # s
    duty_factor: float = 0.6  # stance fraction per pair
    desired_pitch: float = 0.0  # rad
    desired_roll: float = 0.0  # rad
    nominal_stand_height: float = 0.32  # m, trunk center above foot
    correction_clamp: float = 0.5  # rad, keeps extreme gains inside reach

    def __post_init__(self) -> None:
        if self.gait_period <= 0:
            raise ValueError("gait_period must be positive")
        if not (0.0 < self.duty_factor < 1.0):
            raise ValueError("duty_factor must be in (0, 1)")


@dataclass(frozen=True)
class ImuReading:
    pitch: float = 0.0
    roll: float = 0.0
    pitch_rate: float = 0.0  # body rate about y
    roll_rate: float = 0.0  # body rate about x

    def __post_init__(self) -> None:
        for v in (self.pitch, self.roll, self.pitch_rate, self.roll_rate):
            if not math.isfinite(v):
                raise ValueError("IMU readings must be finite")


@dataclass(frozen=True)
class LegAngles:
    hip_abduction: float
    hip_flexion: float
    knee: float


ABDUCTION_LIMIT = math.pi / 2
FLEXION_LIMIT = math.pi
KNEE_LIMIT = math.pi


@dataclass(frozen=True)
class JointTargets:
    """Joint commands for all four legs; diagonal pairs must match."""

    fl: LegAngles
    fr: LegAngles
    rl: LegAngles
    rr: LegAngles

    def __post_init__(self) -> None:
        for leg in (self.fl, self.fr, self.rl, self.rr):
            if abs(leg.hip_abduction) > ABDUCTION_LIMIT:
                raise ValueError("hip abduction beyond actuator limit")
            if abs(leg.hip_flexion) > FLEXION_LIMIT or abs(leg.knee) > KNEE_LIMIT:
                raise ValueError("hip flexion / knee beyond actuator limit")

    def as_tuple(self) -> tuple[float, ...]:
        """(abduction, flexion, knee) for FL, FR, RL, RR, flattened."""
        out = []
        for leg in (self.fl, self.fr, self.rl, self.rr):
            out.extend((leg.hip_abduction, leg.hip_flexion, leg.knee))
        return tuple(out)


@dataclass(frozen=True)
class LegGeometry:
    thigh_length: float = 0.21  # m
    shank_length: float = 0.21  # m
    # hip positions relative to the trunk center, (x, y, z) per leg
    hip_offsets: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: {
            "FL": (0.2425, 0.21, 0.0),
            "FR": (0.2425, -0.21, 0.0),
            "RL": (-0.2425, 0.21, 0.0),
            "RR": (-0.2425, -0.21, 0.0),
        }
    )

    def __post_init__(self) -> None:
        if self.thigh_length <= 0 or self.shank_length <= 0:
            raise ValueError("link lengths must be positive")
        off = self.hip_offsets
        if set(off) != set(LEG_ORDER):
            raise ValueError("hip_offsets must cover FL, FR, RL, RR")
        if not (
            off["FL"][0] == off["FR"][0] == -off["RL"][0] == -off["RR"][0]
            and off["FL"][1] == -off["FR"][1] == off["RL"][1] == -off["RR"][1]
        ):
            raise ValueError("hip offsets must be fore/aft and left/right symmetric")

    @property
    def max_reach(self) -> float:
        return self.thigh_length + self.shank_length


def gait_phase(t: float, cfg: ControllerConfig) -> tuple[tuple[float, bool], tuple[float, bool]]:
    """Phase in [0,1) and stance flag for pair A (FL,RR) and pair B (FR,RL).

    A pair is in stance while its phase is strictly below the duty factor, so
    a phase exactly at the boundary counts as swing.
    """
    if t < 0:
        raise ValueError("time must be non-negative")
    phase_a = (t / cfg.gait_period) % 1.0
    phase_b = (phase_a + 0.5) % 1.0
    return (phase_a, phase_a < cfg.duty_factor), (phase_b, phase_b < cfg.duty_factor)


def swing_foot_height(phase: float, cfg: ControllerConfig, h_mm: float) -> float:
    """Vertical foot lift in meters: zero in stance, half-sine in swing.

    The lift peaks at h_mm / 1000 at mid-swing and is zero at both
    stance/swing boundaries.
    """
    if phase < cfg.duty_factor:
        return 0.0
    s = (phase - cfg.duty_factor) / (1.0 - cfg.duty_factor)
    return (h_mm / 1000.0) * math.sin(math.pi * s)


def stance_correction(
    imu: ImuReading, p: ParamVector, cfg: ControllerConfig
) -> tuple[float, float]:
    """(theta_pitch, theta_roll) from the two linear feedback laws, clamped."""
    theta_pitch = -p.x1 * (imu.pitch - cfg.desired_pitch) - p.x2 * imu.pitch_rate
    theta_roll = -p.x3 * (imu.roll - cfg.desired_roll) - p.x4 * imu.roll_rate
    c = cfg.correction_clamp
    return (
        min(c, max(-c, theta_pitch)),
        min(c, max(-c, theta_roll)),
    )


def leg_inverse_kinematics(
    foot_target: tuple[float, float, float],
    geom: LegGeometry,
    reach_margin: float = 1e-9,
) -> LegAngles:
    """Two-link IK in the hip frame; knee-backward branch.

    The abduction joint rotates the leg's sagittal plane about the x axis;
    flexion is measured from straight down (positive forward); knee 0 is full
    extension and positive flexes, which places the knee behind the
    hip-to-foot chord.
    """
    x, y, z = foot_target
    l1, l2 = geom.thigh_length, geom.shank_length
    dist = math.sqrt(x * x + y * y + z * z)
    if dist > l1 + l2 - reach_margin or dist < abs(l1 - l2) + reach_margin:
        raise OutOfReach(
            f"target distance {dist:.4f} m outside reachable "
            f"[{abs(l1 - l2):.4f}, {l1 + l2:.4f}]"
        )
    abduction = math.atan2(y, -z)
    r_plane = math.sqrt(y * y + z * z)  # in-plane vertical drop after abduction
    cos_inner = (l1 * l1 + l2 * l2 - dist * dist) / (2.0 * l1 * l2)
    cos_inner = min(1.0, max(-1.0, cos_inner))
    knee = math.pi - math.acos(cos_inner)
    direction = math.atan2(x, r_plane)
    offset = math.atan2(l2 * math.sin(knee), l1 + l2 * math.cos(knee))
    return LegAngles(abduction, direction - offset, knee)


def leg_forward_kinematics(angles: LegAngles, geom: LegGeometry) -> tuple[float, float, float]:
    """Foot position in the hip frame; inverse of leg_inverse_kinematics."""
    l1, l2 = geom.thigh_length, geom.shank_length
    th, tk = angles.hip_flexion, angles.knee
    x = l1 * math.sin(th) + l2 * math.sin(th + tk)
    drop = l1 * math.cos(th) + l2 * math.cos(th + tk)  # distance below hip, in-plane
    sg, cg = math.sin(angles.hip_abduction), math.cos(angles.hip_abduction)
    return (x, sg * drop, -cg * drop)


def _rotated_stance_target(h: float, theta_pitch: float, theta_roll: float):
    """Rotate the straight-down stance target (0,0,-h) by pitch then roll."""
    sp, cp = math.sin(theta_pitch), math.cos(theta_pitch)
    sr, cr = math.sin(theta_roll), math.cos(theta_roll)
    # Rx(theta_roll) @ Ry(theta_pitch) @ (0, 0, -h)
    return (-h * sp, h * cp * sr, -h * cp * cr)


def controller_step(
    t: float,
    imu: ImuReading,
    p: ParamVector,
    cfg: ControllerConfig,
    geom: LegGeometry,
) -> JointTargets:
    """Joint commands for time t: rotated stance targets, lifted swing targets.

    Corrections rotate each stance foot about its own hip (about the trunk's
    lateral axis for pitch, longitudinal for roll), so both legs of a diagonal
    pair always receive identical commands.
    """
    (phase_a, stance_a), (phase_b, stance_b) = gait_phase(t, cfg)
    theta_pitch, theta_roll = stance_correction(imu, p, cfg)
    h = cfg.nominal_stand_height

    def pair_target(phase: float, stance: bool) -> LegAngles:
        if stance:
            target = _rotated_stance_target(h, theta_pitch, theta_roll)
        else:
            target = (0.0, 0.0, -h + swing_foot_height(phase, cfg, p.x0))
        return leg_inverse_kinematics(target, geom)

    pair_a = pair_target(phase_a, stance_a)
    pair_b = pair_target(phase_b, stance_b)
    return JointTargets(fl=pair_a, fr=pair_b, rl=pair_b, rr=pair_a)
