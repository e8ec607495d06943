from .array import as_vector
from .array import check_finite
from .array import zscore
from .array import minmax_scale
from .hashing import record_seed
from .hashing import record_rng
from .hashing import stable_hash
