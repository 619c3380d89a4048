"""Spherical sound-field upsampling: harmonics fitting and Helmholtz-regularized
networks, with synthetic band-limited ground truth and an experiment harness."""

import os

# The linear algebra here is all small matrices; multithreaded BLAS only adds
# contention (and experiment workers each get a core). Best effort: only takes
# effect when numpy has not been imported yet and the user has not set them.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del os, _var

from . import evaluation, geometry, harmonics, network, synth, training
from .evaluation import (
    ErrorReport,
    NetMethodConfig,
    ReportRow,
    ShMethodConfig,
    SynthConfig,
    emit_report,
    load_report,
    run_experiment,
    run_experiment_detailed,
    upsample_error,
)
from .geometry import (
    Direction,
    GridSplit,
    Point3,
    SphereGeometry,
    build_extrap_grid,
    build_interp_grid,
    head_radius_for_freq,
    sph_to_cart,
)
from .harmonics import ShFitConfig, ShModel, sh_eval, sh_fit, sh_matrix, sh_order_for_freq, sh_predict
from .network import AdamState, MlpParams, MlpSpec, adam_step, count_params, forward, laplacian, xavier_init
from .synth import FieldDataset, SynthSpec, normalize, synth_coeffs, synth_field
from .training import (
    CollocationSet,
    PhysicsParams,
    QuadrantModel,
    TrainConfig,
    assemble,
    pde_loss,
    pinn_width_for_freq,
    predict,
    split_parts,
    train,
)

__version__ = "0.1.0"
