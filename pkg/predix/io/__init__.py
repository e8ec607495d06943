from .utils import check_file_readability
from .manifest import load_manifest
from .manifest import save_manifest
from .images import load_image
from .images import load_images
from .images import save_image
from .records import load_rct_dataset
from .records import save_rct_dataset
from .attribution import load_attribution_map
from .attribution import save_attribution_map
