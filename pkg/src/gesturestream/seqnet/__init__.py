"""Small differentiable sequence networks: FC, GRU, temporal-shift nodes, batch norm."""

from .checkpoint import load_network, save_network
from .gradcheck import GradCheckReport, grad_check, grad_check_report
from .layers import (
    GRU,
    BatchNorm,
    Dense,
    GruCellParams,
    Network,
    ShiftNode,
    Tensor,
    gru_cell_forward,
    network_forward,
    softmax,
    temporal_shift,
)
from .losses import cross_entropy, focal_loss, focal_loss_grad, frame_loss
from .optim import Adam
from .train import train_step

__all__ = [
    "GRU", "Adam", "BatchNorm", "Dense", "GruCellParams", "Network", "ShiftNode", "Tensor",
    "cross_entropy", "focal_loss", "focal_loss_grad", "frame_loss", "GradCheckReport", "grad_check", "grad_check_report", "gru_cell_forward",
    "load_network", "network_forward", "save_network", "softmax", "temporal_shift", "train_step",
]
