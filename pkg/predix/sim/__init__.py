from .outcomes import OutcomeSimConfig
from .outcomes import RCTRecord
from .outcomes import RCTDataset
from .outcomes import assign_treatment
from .outcomes import simulate_outcomes
from .outcomes import potential_outcomes
from .outcomes import build_rct_dataset
