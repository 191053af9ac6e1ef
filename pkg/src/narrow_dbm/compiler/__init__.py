"""Constructive compilation of distributions into narrow deep machines."""

from .construct import (
    build_rbm_support,
    build_sharing_layer,
    centering_bias,
    interface_log_weights,
    interface_marginal,
)
from .pipeline import Certificate, CompileConfig, compile, compile_distribution, smooth
from .plan import (
    Move,
    SharingPlan,
    SharingStep,
    backward_targets,
    initial_support,
    plan_supports,
    sharing_fractions,
    unshare,
)

__all__ = [
    "Certificate",
    "CompileConfig",
    "Move",
    "SharingPlan",
    "SharingStep",
    "backward_targets",
    "build_rbm_support",
    "build_sharing_layer",
    "centering_bias",
    "compile",
    "compile_distribution",
    "initial_support",
    "interface_log_weights",
    "interface_marginal",
    "plan_supports",
    "sharing_fractions",
    "smooth",
    "unshare",
]
