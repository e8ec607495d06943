from .maps import AttributionTarget
from .maps import AttributionMap
from .maps import expected_gradients
from .maps import guided_gradcam
from .maps import gradcam
from .maps import guided_backprop
from .maps import select_baselines
from .maps import target_output
from .render import overlay
from .render import render_overlay
