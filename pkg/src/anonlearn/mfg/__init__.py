from .game import MfgGame
from .model import (
    COUPLINGS,
    AggregationCoupling,
    BestResponseError,
    BestResponseInfo,
    ConfigError,
    Coupling,
    Flow,
    GaussianCoupling,
    MfgConfig,
    MfgError,
    QuadraticCoupling,
    QuadraticLagrangian,
    SolverParams,
    VelocityBoundWarning,
    ZeroCoupling,
    best_response_batch,
    best_response_traj,
    cost_and_grad,
    cost_J,
    euler_lagrange_defects,
    euler_lagrange_residual,
    flow_of,
    grad_J,
    marginal_at,
    mirror_project,
    project_xv,
)
from .trajectory import Trajectory, h1_inner, h1_norm, nodes_from_xv, velocity_norm, xv_from_nodes
