"""Liquid property estimation from tactile sloshing signals.

Pipeline: simulate (or record) marker displacements, reduce them to one
principal motion signal, fit a two-component damped oscillation, and map
the slow component's decay rate and frequency to liquid height,
concentration and viscosity.
"""

from .errors import NumericalError, ValidationError
from .fitting import FitConfig, FitParams, FitResult, fit, loss_eval, model_eval
from .models import (GprModel, QuadModel, SvmModel, gpr_predict, gpr_train, quad_fit, quad_predict,
                     svm_predict, svm_train, viscosity_to_mu)
from .modelio import load_model, save_model
from .pipeline import PipelineConfig, PrincipalSignal, preprocess
from .sim import MarkerSeries, SimConfig, SimTrace, render_markers, simulate, simulate_linear, simulate_nonlinear
from .transfer import TransferMap, transfer_fit, transfer_predict

__all__ = [
    "NumericalError", "ValidationError",
    "SimConfig", "SimTrace", "MarkerSeries", "simulate", "simulate_linear", "simulate_nonlinear", "render_markers",
    "PipelineConfig", "PrincipalSignal", "preprocess",
    "FitConfig", "FitParams", "FitResult", "fit", "loss_eval", "model_eval",
    "GprModel", "QuadModel", "SvmModel", "gpr_train", "gpr_predict", "quad_fit", "quad_predict",
    "svm_train", "svm_predict", "viscosity_to_mu",
    "TransferMap", "transfer_fit", "transfer_predict", "save_model", "load_model",
]
