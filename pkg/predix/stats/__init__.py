from .regression import coefficient_names
from .regression import RegressionReport
from .regression import PredictiveStrength
from .regression import fit_interaction_ols
from .regression import predictive_strength
from .regression import compute_bounds
from .regression import significant
from .regression import student_t_pvalue
