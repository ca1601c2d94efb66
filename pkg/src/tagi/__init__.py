"""Analytical Gaussian inference for Bayesian feedforward networks."""

from .heads import ClassTree, HeadConfig, class_decision, class_encode, class_decode, class_marginals
from .infer import DegenerateInferenceError, ObservationModel, infer_observation, update_output_layer
from .net import GaussianVector, InitSpec, LayerParams, NetworkArch, forward, init_network
from .train import TrainConfig, evaluate, fit, select_sigma_v, train_epoch

__version__ = "0.1.0"
