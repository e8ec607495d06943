from .config import config_sections
from .config import load_config
from .config import apply_override
from .grid import GridSpec
from .grid import RunRecord
from .grid import ResultStore
from .grid import run_key
from .grid import execute_run
from .grid import run_grid
from .summary import BinnedSummary
from .summary import aggregate_bins
from .summary import default_bin_edges
from .summary import box_statistics
from .report import emit_report
from .report import plot_summaries
from .report import write_summary_table
