# ______
# PREDIX
#

__version__ = '0.1.0'

from . import system

from .sim import OutcomeSimConfig
from .sim import RCTDataset
from .sim import assign_treatment
from .sim import simulate_outcomes
from .sim import build_rct_dataset

from .data import DatasetManifest
from .data import ColoredDigitSpec
from .data import generate_colored_digits
from .data import load_annotation_table
from .data import split_dataset

from .model import ModelSpec
from .model import TrainConfig
from .model import TrainedEstimator
from .model import train
from .model import predict_outcomes
from .model import estimate_cate
from .model import baseline_candidate

from .stats import RegressionReport
from .stats import PredictiveStrength
from .stats import fit_interaction_ols
from .stats import predictive_strength
from .stats import compute_bounds

from .attribution import AttributionTarget
from .attribution import AttributionMap
from .attribution import expected_gradients
from .attribution import guided_gradcam
from .attribution import render_overlay

from .experiment import GridSpec
from .experiment import RunRecord
from .experiment import BinnedSummary
from .experiment import run_grid
from .experiment import aggregate_bins
from .experiment import emit_report

from .io import load_manifest
from .io import load_images
from .io import load_rct_dataset
from .io import load_attribution_map

from . import pipeline
