"""Desk-scale workbench: a rope-scaffolded quadruped learns an in-place trot.

A Gaussian-process surrogate with UCB acquisition searches the five
controller parameters (hop height plus pitch/roll feedback gains) of a
simulated 2.1 kg quadruped, while a unilateral rope with a simulated strain
gauge supplies the self-support fitness under fixed or gradually lowered
support heights.
"""

from .bo import (
    BOConfig,
    Bounds,
    OptimizationHistory,
    ParamVector,
    initial_design,
    propose_next,
    random_search,
    run_bo_loop,
    ucb_score,
)
from .controller import (
    ControllerConfig,
    ImuReading,
    JointTargets,
    LegAngles,
    LegGeometry,
    OutOfReach,
    controller_step,
    gait_phase,
    leg_forward_kinematics,
    leg_inverse_kinematics,
    stance_correction,
    swing_foot_height,
)
from .experiment import (
    ExperimentConfig,
    ExperimentResult,
    SupportSchedule,
    compute_fitness,
    run_experiment,
    schedule_height,
)
from .gp import (
    Dataset,
    FactorizationFailure,
    GPModel,
    KernelParams,
    fit,
    kernel_eval,
    log_marginal_likelihood,
    posterior_predict,
)
from .sim import (
    BodyState,
    ContactParams,
    NumericalDivergence,
    RobotModel,
    SensorReadings,
    SupportConfig,
    TrialTrace,
    TrunkSimulator,
    contact_force,
    rope_force,
    run_trial,
    step_dynamics,
)

__version__ = "0.1.0"
