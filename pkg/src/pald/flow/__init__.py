"""Autoregressive rectified flow: training, transport, densities, surprisal."""

from .backend import active_backend, set_backend
from .density import divergence, log_density
from .fields import ConstantField, GaussianMarginalField, LinearField
from .ic import (
    SurprisalSeries,
    flow_log_density,
    ic_at_noise_level,
    sequence_ic,
    sequence_ic_batch,
    write_surprisal_csv,
)
from .model import (
    BoundVelocityField,
    FlowConfig,
    FlowModel,
    FlowTrainer,
    flow_train_step,
    train_flow,
)
from .ode import ode_integrate

__all__ = [
    "active_backend", "set_backend", "divergence", "log_density",
    "ConstantField", "GaussianMarginalField", "LinearField",
    "SurprisalSeries", "flow_log_density", "ic_at_noise_level", "sequence_ic",
    "sequence_ic_batch",
    "write_surprisal_csv", "BoundVelocityField", "FlowConfig", "FlowModel",
    "FlowTrainer", "flow_train_step", "train_flow", "ode_integrate",
]
