"""Reduced-order trunk physics with rope scaffold and point-foot contacts.

The trunk is a single 6-DOF rigid body; legs are massless and position
controlled, with commanded joint angles tracked through a first-order servo
lag. Feet are points located by forward kinematics; ground interaction is a
unilateral spring-damper normal force plus viscous tangential friction
saturated at mu * normal. The scaffold is one vertical unilateral
spring-damper at the trunk center: it can only pull up, and its tension is
the simulated strain-gauge signal.

Integration is semi-implicit Euler (momenta first, then pose) with the
orientation kept as a quaternion; roll/pitch/yaw are extracted for the IMU
and the trace. The inner loop is deliberately scalar Python: a trial is on
the order of 10^4..10^6 substeps and tiny-array overhead dominates numpy at
this size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bo import ParamVector
from .controller import (
    ControllerConfig,
    ImuReading,
    JointTargets,
    LegAngles,
    LegGeometry,
    OutOfReach,
    controller_step,
    leg_inverse_kinematics,
)

GRAVITY = 9.81
MAX_DT = 5e-3

COMPLETED = "completed"
FELL = "fell"
IK_FAILURE = "ik_failure"

FALL_LIMIT = math.radians(60.0)

# One trace row per physics step; indices below are relied on by TrialTrace.
TRACE_COLUMNS = (
    "t",
    "px", "py", "pz",
    "roll", "pitch", "yaw",
    "vx", "vy", "vz",
    "wx", "wy", "wz",
    "abdFL", "hipFL", "kneeFL",
    "abdFR", "hipFR", "kneeFR",
    "abdRL", "hipRL", "kneeRL",
    "abdRR", "hipRR", "kneeRR",
    "imu_roll", "imu_pitch", "imu_roll_rate", "imu_pitch_rate",
    "rope_N",
    "nFL", "nFR", "nRL", "nRR",
)
_COL = {name: i for i, name in enumerate(TRACE_COLUMNS)}


class NumericalDivergence(Exception):
    """Integration left the sanity envelope (|z| > 10 m or speed > 100 m/s)."""


def _box_inertia(mass: float, length: float, width: float, height: float) -> np.ndarray:
    return (mass / 12.0) * np.array(
        [width**2 + height**2, length**2 + height**2, length**2 + width**2]
    )


@dataclass(frozen=True)
class RobotModel:
    mass: float = 2.1  # kg
    # uniform-box approximation of the trunk (0.485 x 0.42 x 0.10 m)
    inertia: np.ndarray = field(default_factory=lambda: _box_inertia(2.1, 0.485, 0.42, 0.10))
    gravity: float = GRAVITY
    geometry: LegGeometry = field(default_factory=LegGeometry)

    def __post_init__(self) -> None:
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if np.any(self.inertia <= 0):
            raise ValueError("inertia diagonal must be positive")

    @property
    def weight(self) -> float:
        return self.mass * self.gravity


@dataclass(frozen=True)
class ContactParams:
    stiffness: float = 1e4  # N/m
    damping: float = 100.0  # N s/m
    mu: float = 0.8  # Coulomb saturation
    viscous: float = 200.0  # N s/m, tangential regularization


@dataclass(frozen=True)
class SupportConfig:
    """Rope scaffold: rest height of the trunk center, spring-damper, on/off."""

    height: float = 0.39  # m
    stiffness: float = 2000.0  # N/m
    damping: float = 50.0  # N s/m
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.enabled and self.height <= 0:
            raise ValueError("support height must be positive when enabled")
        if self.stiffness < 0 or self.damping < 0:
            raise ValueError("rope stiffness/damping must be non-negative")

    @classmethod
    def disabled(cls) -> "SupportConfig":
        return cls(height=1.0, enabled=False)


@dataclass(frozen=True)
class BodyState:
    """Trunk pose and rates; angular velocity is in the body frame."""

    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.zeros(3))  # roll, pitch, yaw
    linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        for name in ("position", "orientation", "linear_velocity", "angular_velocity"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not np.all(np.isfinite(self.orientation)):
            raise ValueError("orientation must be finite")

    @property
    def z(self) -> float:
        return float(self.position[2])

    @property
    def roll(self) -> float:
        return float(self.orientation[0])

    @property
    def pitch(self) -> float:
        return float(self.orientation[1])


@dataclass(frozen=True)
class SensorReadings:
    imu: ImuReading
    rope_tension: float  # N, >= 0
    contact_normals: np.ndarray  # (4,) N, FL FR RL RR


def rope_force(z: float, z_rate: float, sup: SupportConfig) -> float:
    """Unilateral rope tension at trunk height z; slack above the rest height."""
    if not sup.enabled or z >= sup.height:
        return 0.0
    return max(0.0, sup.stiffness * (sup.height - z) - sup.damping * z_rate)


def contact_force(
    foot_z: float,
    foot_z_rate: float,
    tangential_velocity: tuple[float, float],
    params: ContactParams,
) -> np.ndarray:
    """Ground reaction at one point foot: (Fx, Fy, Fz) in world coordinates."""
    if foot_z >= 0.0:
        return np.zeros(3)
    normal = max(0.0, params.stiffness * (-foot_z) - params.damping * foot_z_rate)
    fx = -params.viscous * tangential_velocity[0]
    fy = -params.viscous * tangential_velocity[1]
    mag = math.hypot(fx, fy)
    cap = params.mu * normal
    if mag > cap:
        scale = cap / mag if mag > 0 else 0.0
        fx *= scale
        fy *= scale
    return np.array([fx, fy, normal])


def _euler_to_quat(roll: float, pitch: float, yaw: float) -> tuple[float, float, float, float]:
    cr, sr = math.cos(roll / 2), math.sin(roll / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    return (
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )


def _substeps(
    state: tuple,
    joints: list,
    foot_prev: list,
    have_prev: bool,
    cmd: tuple,
    records: list,
    k_start: int,
    n_sub: int,
    noise,
    t0: float,
    dt: float,
    a_servo: float,
    mass: float,
    grav: float,
    ix: float,
    iy: float,
    iz: float,
    l1: float,
    l2: float,
    hips: tuple,
    kc: float,
    cc: float,
    mu: float,
    muv: float,
    rope_on: bool,
    rope_h: float,
    kr: float,
    cr_rope: float,
    fall_on: bool,
) -> tuple[tuple, bool, int, int]:
    """Advance up to n_sub physics steps with one fixed joint command.

    Appends one record per completed step and returns
    (state, have_prev, steps_done, status) with status 0 = ran out of
    substeps, 1 = fell, 2 = diverged. All state lives in locals; this is the
    hot path.
    """
    (px, py, pz, qw, qx, qy, qz, vx, vy, vz, wx, wy, wz) = state
    c0, c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11 = cmd
    j = joints
    fp = foot_prev
    inv_mass = 1.0 / mass
    mg = mass * grav
    sin = math.sin
    cos = math.cos
    sqrt = math.sqrt
    atan2 = math.atan2
    asin = math.asin
    status = 0
    done = 0

    for step in range(n_sub):
        # first-order servo lag toward the command
        j[0] += a_servo * (c0 - j[0])
        j[1] += a_servo * (c1 - j[1])
        j[2] += a_servo * (c2 - j[2])
        j[3] += a_servo * (c3 - j[3])
        j[4] += a_servo * (c4 - j[4])
        j[5] += a_servo * (c5 - j[5])
        j[6] += a_servo * (c6 - j[6])
        j[7] += a_servo * (c7 - j[7])
        j[8] += a_servo * (c8 - j[8])
        j[9] += a_servo * (c9 - j[9])
        j[10] += a_servo * (c10 - j[10])
        j[11] += a_servo * (c11 - j[11])

        # rotation matrix world <- body
        xx, yy, zz = qx * qx, qy * qy, qz * qz
        wx_q, wy_q, wz_q = qw * qx, qw * qy, qw * qz
        xy, xz, yz = qx * qy, qx * qz, qy * qz
        r00 = 1.0 - 2.0 * (yy + zz)
        r01 = 2.0 * (xy - wz_q)
        r02 = 2.0 * (xz + wy_q)
        r10 = 2.0 * (xy + wz_q)
        r11 = 1.0 - 2.0 * (xx + zz)
        r12 = 2.0 * (yz - wx_q)
        r20 = 2.0 * (xz - wy_q)
        r21 = 2.0 * (yz + wx_q)
        r22 = 1.0 - 2.0 * (xx + yy)

        fx_sum = 0.0
        fy_sum = 0.0
        fz_sum = -mg
        tx = 0.0
        ty = 0.0
        tz = 0.0
        n_fl = n_fr = n_rl = n_rr = 0.0

        if not have_prev:
            # world-frame angular velocity for the analytic first-step foot speed
            owx = r00 * wx + r01 * wy + r02 * wz
            owy = r10 * wx + r11 * wy + r12 * wz
            owz = r20 * wx + r21 * wy + r22 * wz

        for li in range(4):
            base, hpx, hpy = hips[li]
            sa = sin(j[base])
            ca = cos(j[base])
            th = j[base + 1]
            tk = th + j[base + 2]
            fx_b = hpx + l1 * sin(th) + l2 * sin(tk)
            drop = l1 * cos(th) + l2 * cos(tk)
            fy_b = hpy + sa * drop
            fz_b = -ca * drop
            fwx = px + r00 * fx_b + r01 * fy_b + r02 * fz_b
            fwy = py + r10 * fx_b + r11 * fy_b + r12 * fz_b
            fwz = pz + r20 * fx_b + r21 * fy_b + r22 * fz_b
            fi = 3 * li
            if have_prev:
                vfx = (fwx - fp[fi]) / dt
                vfy = (fwy - fp[fi + 1]) / dt
                vfz = (fwz - fp[fi + 2]) / dt
            else:
                rx_ = fwx - px
                ry_ = fwy - py
                rz_ = fwz - pz
                vfx = vx + owy * rz_ - owz * ry_
                vfy = vy + owz * rx_ - owx * rz_
                vfz = vz + owx * ry_ - owy * rx_
            fp[fi] = fwx
            fp[fi + 1] = fwy
            fp[fi + 2] = fwz

            if fwz < 0.0:
                normal = kc * (-fwz) - cc * vfz
                if normal > 0.0:
                    gx = -muv * vfx
                    gy = -muv * vfy
                    mag = sqrt(gx * gx + gy * gy)
                    cap = mu * normal
                    if mag > cap:
                        scale = cap / mag
                        gx *= scale
                        gy *= scale
                    fx_sum += gx
                    fy_sum += gy
                    fz_sum += normal
                    rx_ = fwx - px
                    ry_ = fwy - py
                    rz_ = fwz - pz
                    tx += ry_ * normal - rz_ * gy
                    ty += rz_ * gx - rx_ * normal
                    tz += rx_ * gy - ry_ * gx
                    if li == 0:
                        n_fl = normal
                    elif li == 1:
                        n_fr = normal
                    elif li == 2:
                        n_rl = normal
                    else:
                        n_rr = normal
        have_prev = True

        rope_t = 0.0
        if rope_on and pz < rope_h:
            rope_t = kr * (rope_h - pz) - cr_rope * vz
            if rope_t < 0.0:
                rope_t = 0.0
            fz_sum += rope_t

        # momenta first (semi-implicit Euler)
        vx += dt * fx_sum * inv_mass
        vy += dt * fy_sum * inv_mass
        vz += dt * fz_sum * inv_mass
        tbx = r00 * tx + r10 * ty + r20 * tz
        tby = r01 * tx + r11 * ty + r21 * tz
        tbz = r02 * tx + r12 * ty + r22 * tz
        wx += dt * (tbx - (iz - iy) * wy * wz) / ix
        wy += dt * (tby - (ix - iz) * wz * wx) / iy
        wz += dt * (tbz - (iy - ix) * wx * wy) / iz

        px += dt * vx
        py += dt * vy
        pz += dt * vz

        ang = sqrt(wx * wx + wy * wy + wz * wz) * dt
        if ang > 1e-12:
            half = 0.5 * ang
            f = dt * sin(half) / ang
            dw = cos(half)
            dx = wx * f
            dy = wy * f
            dz = wz * f
            nqw = qw * dw - qx * dx - qy * dy - qz * dz
            nqx = qw * dx + qx * dw + qy * dz - qz * dy
            nqy = qw * dy - qx * dz + qy * dw + qz * dx
            nqz = qw * dz + qx * dy - qy * dx + qz * dw
            inv_n = 1.0 / sqrt(nqw * nqw + nqx * nqx + nqy * nqy + nqz * nqz)
            qw = nqw * inv_n
            qx = nqx * inv_n
            qy = nqy * inv_n
            qz = nqz * inv_n

        roll = atan2(2.0 * (qw * qx + qy * qz), 1.0 - 2.0 * (qx * qx + qy * qy))
        sinp = 2.0 * (qw * qy - qx * qz)
        if sinp > 1.0:
            sinp = 1.0
        elif sinp < -1.0:
            sinp = -1.0
        pitch = asin(sinp)
        yaw = atan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz))

        done = step + 1
        k = k_start + step
        if noise is None:
            imu_r, imu_p, imu_rr, imu_pr = roll, pitch, wx, wy
        else:
            imu_r = roll + noise[k, 0]
            imu_p = pitch + noise[k, 1]
            imu_rr = wx + noise[k, 2]
            imu_pr = wy + noise[k, 3]

        records.append(
            (
                t0 + k * dt,
                px, py, pz,
                roll, pitch, yaw,
                vx, vy, vz,
                wx, wy, wz,
                c0, c1, c2, c3, c4, c5, c6, c7, c8, c9, c10, c11,
                imu_r, imu_p, imu_rr, imu_pr,
                rope_t,
                n_fl, n_fr, n_rl, n_rr,
            )
        )

        # horizontal drift is legitimate (the rope only pulls vertically);
        # only height and speed signal an exploding integration
        if (
            pz > 10.0 or pz < -10.0
            or vx > 100.0 or vx < -100.0 or vy > 100.0 or vy < -100.0
            or vz > 100.0 or vz < -100.0
        ):
            status = 2
            break
        if fall_on and (roll > FALL_LIMIT or roll < -FALL_LIMIT
                        or pitch > FALL_LIMIT or pitch < -FALL_LIMIT):
            status = 1
            break

    return (px, py, pz, qw, qx, qy, qz, vx, vy, vz, wx, wy, wz), have_prev, done, status


@dataclass
class TrialTrace:
    """Recorded trial: one row per physics step (columns in TRACE_COLUMNS)."""

    dt: float
    duration: float  # intended duration; fewer rows when terminated early
    termination: str
    table: np.ndarray

    @property
    def n_samples(self) -> int:
        return int(self.table.shape[0])

    @property
    def expected_samples(self) -> int:
        return int(round(self.duration / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.table[:, _COL["t"]]

    @property
    def z(self) -> np.ndarray:
        return self.table[:, _COL["pz"]]

    @property
    def roll(self) -> np.ndarray:
        return self.table[:, _COL["roll"]]

    @property
    def pitch(self) -> np.ndarray:
        return self.table[:, _COL["pitch"]]

    @property
    def rope_tension(self) -> np.ndarray:
        return self.table[:, _COL["rope_N"]]

    @property
    def contact_normals(self) -> np.ndarray:
        return self.table[:, _COL["nFL"]:_COL["nRR"] + 1]

    def column(self, name: str) -> np.ndarray:
        return self.table[:, _COL[name]]

    def body_state(self, i: int) -> BodyState:
        row = self.table[i]
        return BodyState(
            position=row[1:4],
            orientation=row[4:7],
            linear_velocity=row[7:10],
            angular_velocity=row[10:13],
        )

    def joint_targets(self, i: int) -> JointTargets:
        row = self.table[i, _COL["abdFL"]:_COL["kneeRR"] + 1]
        legs = [LegAngles(*row[3 * k:3 * k + 3]) for k in range(4)]
        return JointTargets(*legs)

    def sensor_readings(self, i: int) -> SensorReadings:
        row = self.table[i]
        return SensorReadings(
            imu=ImuReading(
                pitch=row[_COL["imu_pitch"]],
                roll=row[_COL["imu_roll"]],
                pitch_rate=row[_COL["imu_pitch_rate"]],
                roll_rate=row[_COL["imu_roll_rate"]],
            ),
            rope_tension=float(row[_COL["rope_N"]]),
            contact_normals=row[_COL["nFL"]:_COL["nRR"] + 1].copy(),
        )


def _hip_tuple(geom: LegGeometry) -> tuple:
    return tuple(
        (3 * i, geom.hip_offsets[leg][0], geom.hip_offsets[leg][1])
        for i, leg in enumerate(("FL", "FR", "RL", "RR"))
    )


class TrunkSimulator:
    """Owns the mutable integration state for stepping outside run_trial."""

    def __init__(
        self,
        model: RobotModel | None = None,
        support: SupportConfig | None = None,
        contact: ContactParams | None = None,
        state: BodyState | None = None,
        joint_angles: JointTargets | None = None,
        servo_tau: float = 0.0,
    ) -> None:
        self.model = model or RobotModel()
        self.support = support if support is not None else SupportConfig.disabled()
        self.contact = contact or ContactParams()
        self.servo_tau = servo_tau
        state = state or BodyState(position=np.array([0.0, 0.0, 0.32]))
        quat = _euler_to_quat(*state.orientation)
        self._state = (
            *[float(v) for v in state.position],
            *quat,
            *[float(v) for v in state.linear_velocity],
            *[float(v) for v in state.angular_velocity],
        )
        self._joints = list(joint_angles.as_tuple()) if joint_angles else [0.0] * 12
        self._foot_prev = [0.0] * 12
        self._have_prev = False
        self._hips = _hip_tuple(self.model.geometry)
        self._step_count = 0

    @property
    def state(self) -> BodyState:
        s = self._state
        qw, qx, qy, qz = s[3:7]
        roll = math.atan2(2.0 * (qw * qx + qy * qz), 1.0 - 2.0 * (qx * qx + qy * qy))
        sinp = max(-1.0, min(1.0, 2.0 * (qw * qy - qx * qz)))
        yaw = math.atan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz))
        return BodyState(
            position=np.array(s[0:3]),
            orientation=np.array([roll, math.asin(sinp), yaw]),
            linear_velocity=np.array(s[7:10]),
            angular_velocity=np.array(s[10:13]),
        )

    def step(self, targets: JointTargets, dt: float) -> tuple[BodyState, SensorReadings]:
        if not (0.0 < dt <= MAX_DT):
            raise ValueError(f"dt must be in (0, {MAX_DT}] s")
        a_servo = 1.0 if self.servo_tau <= 0 else 1.0 - math.exp(-dt / self.servo_tau)
        records: list = []
        geom = self.model.geometry
        self._state, self._have_prev, _, status = _substeps(
            self._state,
            self._joints,
            self._foot_prev,
            self._have_prev,
            targets.as_tuple(),
            records,
            self._step_count,
            1,
            None,
            0.0,
            dt,
            a_servo,
            self.model.mass,
            self.model.gravity,
            float(self.model.inertia[0]),
            float(self.model.inertia[1]),
            float(self.model.inertia[2]),
            geom.thigh_length,
            geom.shank_length,
            self._hips,
            self.contact.stiffness,
            self.contact.damping,
            self.contact.mu,
            self.contact.viscous,
            self.support.enabled,
            self.support.height,
            self.support.stiffness,
            self.support.damping,
            False,
        )
        self._step_count += 1
        if status == 2:
            raise NumericalDivergence("trunk state left the sanity envelope")
        row = records[0]
        sensors = SensorReadings(
            imu=ImuReading(
                pitch=row[_COL["imu_pitch"]],
                roll=row[_COL["imu_roll"]],
                pitch_rate=row[_COL["imu_pitch_rate"]],
                roll_rate=row[_COL["imu_roll_rate"]],
            ),
            rope_tension=row[_COL["rope_N"]],
            contact_normals=np.array(row[_COL["nFL"]:_COL["nRR"] + 1]),
        )
        return self.state, sensors


def step_dynamics(
    state: BodyState,
    targets: JointTargets,
    model: RobotModel | None = None,
    sup: SupportConfig | None = None,
    dt: float = 1e-3,
    contact: ContactParams | None = None,
) -> tuple[BodyState, SensorReadings]:
    """Single stateless step: servo lag is bypassed (joints sit at targets)."""
    sim = TrunkSimulator(
        model=model,
        support=sup,
        contact=contact,
        state=state,
        joint_angles=targets,
        servo_tau=0.0,
    )
    return sim.step(targets, dt)


def stand_targets(geom: LegGeometry, stand_height: float) -> JointTargets:
    """All four feet straight down at the given trunk height."""
    leg = leg_inverse_kinematics((0.0, 0.0, -stand_height), geom)
    return JointTargets(leg, leg, leg, leg)


def tucked_targets(geom: LegGeometry, drop: float = 0.15) -> JointTargets:
    """Legs folded well clear of the ground (hanging posture)."""
    leg = leg_inverse_kinematics((0.0, 0.0, -drop), geom)
    return JointTargets(leg, leg, leg, leg)


def run_trial(
    p: ParamVector,
    sup: SupportConfig,
    duration: float = 15.0,
    dt: float = 1e-3,
    seed: int = 0,
    *,
    model: RobotModel | None = None,
    contact: ContactParams | None = None,
    controller_cfg: ControllerConfig | None = None,
    control_dt: float = 1e-2,
    servo_tau: float = 0.03,
    imu_noise: bool = False,
    imu_angle_sigma: float = math.radians(0.5),
    imu_rate_sigma: float = math.radians(2.0),
) -> TrialTrace:
    """Closed-loop trial: controller at the control rate, physics at dt.

    Starts hanging at the rope height when the support is enabled, otherwise
    standing at the controller's nominal height. Ends early with ``fell`` when
    attitude exceeds 60 degrees with the support disabled, or ``ik_failure``
    when a command leaves the reachable workspace. The trace is always
    returned; the seed only matters when IMU noise is enabled.
    """
    if not (0.0 < dt <= MAX_DT):
        raise ValueError(f"dt must be in (0, {MAX_DT}] s")
    if duration <= 0:
        raise ValueError("duration must be positive")
    model = model or RobotModel()
    contact = contact or ContactParams()
    cfg = controller_cfg or ControllerConfig()
    geom = model.geometry

    n_steps = int(round(duration / dt))
    control_every = max(1, int(round(control_dt / dt)))
    a_servo = 1.0 if servo_tau <= 0 else 1.0 - math.exp(-dt / servo_tau)

    noise = None
    if imu_noise:
        rng = np.random.default_rng(np.random.SeedSequence((seed, 977)))
        noise = rng.normal(size=(n_steps + 1, 4))
        noise[:, 0] *= imu_angle_sigma
        noise[:, 1] *= imu_angle_sigma
        noise[:, 2] *= imu_rate_sigma
        noise[:, 3] *= imu_rate_sigma

    z0 = sup.height if sup.enabled else cfg.nominal_stand_height
    state = (0.0, 0.0, z0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    imu0 = ImuReading(
        pitch=0.0 if noise is None else noise[0, 1],
        roll=0.0 if noise is None else noise[0, 0],
        pitch_rate=0.0 if noise is None else noise[0, 3],
        roll_rate=0.0 if noise is None else noise[0, 2],
    )

    def finish(records: list, termination: str) -> TrialTrace:
        table = np.asarray(records, dtype=float).reshape(len(records), len(TRACE_COLUMNS))
        return TrialTrace(dt=dt, duration=duration, termination=termination, table=table)

    try:
        targets = controller_step(0.0, imu0, p, cfg, geom)
    except OutOfReach:
        row = [0.0] * len(TRACE_COLUMNS)
        row[_COL["pz"]] = z0
        if noise is not None:
            row[_COL["imu_roll"]:_COL["imu_pitch_rate"] + 1] = list(noise[0, [0, 1, 2, 3]])
        return finish([tuple(row)], IK_FAILURE)

    cmd = targets.as_tuple()
    joints = list(cmd)
    hips = _hip_tuple(geom)

    # sample 0: sensors evaluated at the initial rest state
    normals0 = [0.0, 0.0, 0.0, 0.0]
    for li, (base, _, _) in enumerate(hips):
        foot = _leg_foot_body(joints, base, hips[li][1], hips[li][2], geom)
        fz = z0 + foot[2]
        if fz < 0.0:
            normals0[li] = max(0.0, contact.stiffness * (-fz))
    rope0 = rope_force(z0, 0.0, sup)
    records: list = [
        (
            0.0,
            0.0, 0.0, z0,
            0.0, 0.0, 0.0,
            0.0, 0.0, 0.0,
            0.0, 0.0, 0.0,
            *cmd,
            imu0.roll, imu0.pitch, imu0.roll_rate, imu0.pitch_rate,
            rope0,
            *normals0,
        )
    ]

    foot_prev = [0.0] * 12
    have_prev = False
    fall_on = not sup.enabled
    termination = COMPLETED
    k = 1
    while k <= n_steps:
        tick = k - 1
        if tick % control_every == 0 and tick > 0:
            last = records[-1]
            imu = ImuReading(
                pitch=last[_COL["imu_pitch"]],
                roll=last[_COL["imu_roll"]],
                pitch_rate=last[_COL["imu_pitch_rate"]],
                roll_rate=last[_COL["imu_roll_rate"]],
            )
            try:
                targets = controller_step(tick * dt, imu, p, cfg, geom)
            except OutOfReach:
                termination = IK_FAILURE
                break
            cmd = targets.as_tuple()
        n_sub = min(control_every - (tick % control_every), n_steps - k + 1)
        state, have_prev, done, status = _substeps(
            state, joints, foot_prev, have_prev, cmd, records, k, n_sub, noise,
            0.0, dt, a_servo,
            model.mass, model.gravity,
            float(model.inertia[0]), float(model.inertia[1]), float(model.inertia[2]),
            geom.thigh_length, geom.shank_length, hips,
            contact.stiffness, contact.damping, contact.mu, contact.viscous,
            sup.enabled, sup.height, sup.stiffness, sup.damping,
            fall_on,
        )
        k += done
        if status == 2:
            raise NumericalDivergence(f"integration diverged at t={k * dt:.3f} s")
        if status == 1:
            termination = FELL
            break
    return finish(records, termination)


def _leg_foot_body(joints: list, base: int, hpx: float, hpy: float, geom: LegGeometry):
    th = joints[base + 1]
    tk = th + joints[base + 2]
    fx = hpx + geom.thigh_length * math.sin(th) + geom.shank_length * math.sin(tk)
    drop = geom.thigh_length * math.cos(th) + geom.shank_length * math.cos(tk)
    return (
        fx,
        hpy + math.sin(joints[base]) * drop,
        -math.cos(joints[base]) * drop,
    )
