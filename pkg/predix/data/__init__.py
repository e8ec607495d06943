from .manifest import DatasetManifest
from .manifest import load_annotation_table
from .manifest import split_dataset
from .manifest import is_binary
from .digits import ColoredDigitSpec
from .digits import generate_colored_digits
from .digits import load_mnist_idx
from .digits import render_glyph_digits
