"""Desk-scale experiments: membrane approximation, pixel classification,
length extrapolation, plus the shared training machinery."""

from .training import Adam, TrainConfig, Param, cosine_lr
from .datasets import (SignalSpec, gen_dataset_a, gen_dataset_b,
                       gen_shape_images, gen_wave_mixtures)
from .approx import (ApproxResult, ApproxTarget, build_approx_model,
                     run_approx_experiment)
from .extrapolate import run_extrapolation
from .pixel import run_pixel_task

__all__ = [name for name in dir() if not name.startswith("_")]
