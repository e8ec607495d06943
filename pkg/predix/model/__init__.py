from .spec import ModelSpec
from .spec import TrainConfig
from .spec import default_encoder
from .spec import default_head
from .network import OutcomeNetwork
from .network import routed_loss
from .estimator import TrainedEstimator
from .estimator import train
from .estimator import predict_outcomes
from .estimator import estimate_cate
from .estimator import baseline_candidate
from .estimator import save_estimator
from .estimator import load_estimator
