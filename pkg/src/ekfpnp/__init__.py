"""Sequential camera pose estimation with an extended Kalman filter."""

from .camera import Intrinsics, Pose, jacobian_obs_state, observe, project, world_to_camera
from .ekf import (
    FilterState,
    InitialUncertainty,
    MeasurementNoise,
    ProcessNoise,
    correct,
    init_from_two_poses,
    predict,
    state_pose,
)
from .errors import (
    CheiralityViolation,
    ConfigError,
    DegenerateConfiguration,
    InitializationFailure,
    SingularInnovation,
    ZeroEstimate,
)

__version__ = "0.1.0"
