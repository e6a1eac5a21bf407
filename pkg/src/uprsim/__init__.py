"""uprsim: deterministic simulator for adaptive user-perspective rendering
on handheld AR devices.

Subpackages:
  geometry  - rigid transforms, pinhole cameras, off-axis projection.
  viewgen   - the four render modes and on-plane pointing error.
  scheduler - dual thresholding of head-pose recomputation.
  tracksim  - synthetic head traces, flow/face-tracker proxies, cost model.
  harness   - closed-loop experiment runner, summaries, CSV output.
"""

from .geometry import (
    DisplayModel,
    EyeState,
    PinholeCamera,
    Ray,
    RigidTransform,
    ScenePlane,
    back_camera,
    compose,
    front_camera,
    intersect_ray_plane,
    offaxis_frustum,
    project_pinhole,
    unproject_ray,
)
from .harness import ExperimentConfig, RunResult, Summary, benchmark_config, run, sweep
from .scheduler import (
    Decision,
    DecisionKind,
    Policy,
    Reason,
    SchedulerState,
    ThresholdConfig,
    apply_recalculation,
    epsilon_default,
    initial_state,
    step,
)
from .tracksim import (
    CostModel,
    FaceTracker,
    FaceTrackerProxy,
    FlowSimulator,
    HeadTrace,
    TraceSpec,
    generate_trace,
    read_trace_csv,
    write_trace_csv,
)
from .viewgen import (
    FitPolicy,
    FuprCalibration,
    Homography,
    RenderMode,
    dpr_display_to_plane,
    fupr_eye,
    perceived_plane_point,
    pointing_error,
    upr_display_to_plane,
)

__version__ = "0.1.0"
