import copy
import dataclasses
import numpy as np
import torch

from torch import nn
from torch.nn import functional as F


target_kinds = ('cate', 'control_head', 'treatment_head')
attribution_methods = ('expected_gradients', 'guided_gradcam')


@dataclasses.dataclass(frozen=True)
class AttributionTarget:
    """
    Scalar model output to attribute.

    Attributes
    ----------
    kind : str
        'cate' for the treatment-head output minus the control-head output,
        'control_head' or 'treatment_head' for a single head. For single-head
        models both head targets refer to the single output.
    """
    kind: str = 'cate'

    def __post_init__(self):
        if self.kind not in target_kinds:
            raise ValueError(f"attribution target must be one of {', '.join(target_kinds)}, but got {self.kind}")

    def __str__(self):
        return self.kind

    @classmethod
    def cast(cls, target):
        """
        Convert a target name to an `AttributionTarget`.
        """
        if isinstance(target, cls):
            return target
        return cls(str(target))

    def select(self, outputs):
        """
        Reduce (n, nheads) network outputs to the (n,) target values.
        """
        if outputs.ndim == 1:
            outputs = outputs.unsqueeze(1)
        nheads = outputs.shape[1]
        if self.kind == 'cate':
            if nheads < 2:
                raise ValueError('the cate target requires a two-headed model')
            return outputs[:, 1] - outputs[:, 0]
        if self.kind == 'treatment_head' and nheads > 1:
            return outputs[:, 1]
        return outputs[:, 0]


class AttributionMap:

    def __init__(self, values, target, method, metadata=None):
        """
        Signed per-pixel attribution of a model output, with the channel and
        spatial shape of the explained image.

        Parameters
        ----------
        values : (channels, height, width) array_like
            Attribution values.
        target : AttributionTarget or str
            Attributed output.
        method : str
            'expected_gradients' or 'guided_gradcam'.
        metadata : dict, optional
            Method parameters (sample count, baseline descriptor, seed, layer).
        """
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f'attribution values must be (channels, height, width), but got shape {values.shape}')
        if not np.all(np.isfinite(values)):
            raise ValueError('attribution values must be finite')
        if method not in attribution_methods:
            raise ValueError(f"attribution method must be one of {', '.join(attribution_methods)}, but got {method}")
        self.values = values
        self.target = AttributionTarget.cast(target)
        self.method = method
        self.metadata = dict(metadata) if metadata is not None else {}

    def __repr__(self):
        return f'AttributionMap(method={self.method}, target={self.target}, shape={self.shape})'

    @property
    def shape(self):
        return self.values.shape

    @property
    def nchannels(self):
        return self.values.shape[0]

    def total(self):
        """
        Sum of all attribution values.
        """
        return float(self.values.sum())

    def collapsed(self):
        """
        Channel-summed (height, width) attribution.
        """
        return self.values.sum(axis=0)

    def save(self, filename):
        """
        Write the map in the self-describing binary attribution format.
        """
        from predix.io.attribution import save_attribution_map
        save_attribution_map(self, filename)


def _network(model):
    """
    Float64 evaluation copy of the network behind a model. Accepts a
    `TrainedEstimator` or a torch module.
    """
    network = getattr(model, 'network', model)
    if not isinstance(network, nn.Module):
        raise ValueError(f'cannot compute attributions for object of type {type(model).__name__}')
    network = copy.deepcopy(network).double().eval()
    for param in network.parameters():
        param.requires_grad_(False)
    return network


def _as_image(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 4 and image.shape[0] == 1:
        image = image[0]
    if image.ndim != 3:
        raise ValueError(f'expected a single (channels, height, width) image, but got shape {image.shape}')
    return image


def target_output(model, images, target='cate'):
    """
    Target output values of a model in float64.

    Parameters
    ----------
    model : TrainedEstimator or torch.nn.Module
        Model to evaluate.
    images : (n, channels, height, width) array_like
        Image batch.
    target : AttributionTarget or str
        Output to evaluate.

    Returns
    -------
    (n,) float64 np.ndarray
    """
    target = AttributionTarget.cast(target)
    network = _network(model)
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[np.newaxis]
    with torch.no_grad():
        return target.select(network(torch.from_numpy(images))).numpy()


def select_baselines(images, size=64, seed=0):
    """
    Draw a fixed random subsample of images to serve as the expected-gradients
    baseline distribution.

    Parameters
    ----------
    images : (n, channels, height, width) array_like
        Candidate baseline images, typically the training split.
    size : int
        Number of baselines. All images are used if fewer are available.
    seed : int
        Random seed.

    Returns
    -------
    (m, channels, height, width) float32 np.ndarray
    """
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4 or len(images) == 0:
        raise ValueError(f'expected a non-empty image batch, but got shape {images.shape}')
    if size < 1:
        raise ValueError(f'baseline set size must be positive, but got {size}')
    rng = np.random.default_rng(seed)
    index = np.sort(rng.choice(len(images), size=min(size, len(images)), replace=False))
    return images[index].copy()


def expected_gradients(model, image, baselines, target='cate', k=200, seed=0, batch_size=50,
                       baseline_descriptor='provided'):
    """
    Expected-gradients attribution of a target output

        EG_i = E[(x_i - x'_i) * df(x' + a (x - x')) / dx_i]

    estimated from k draws of a baseline x' (from the baseline set) and a path
    position a in [0, 1). The positions are stratified over [0, 1) and the
    baselines cycle through the set in shuffled order, so each baseline is
    used an equal number of times (within one). Gradients are computed in float64
    and the result is deterministic given the seed.

    Parameters
    ----------
    model : TrainedEstimator or torch.nn.Module
        Differentiable model with (n, nheads) outputs.
    image : (channels, height, width) array_like
        Image to explain.
    baselines : (m, channels, height, width) array_like
        Baseline images. A single (channels, height, width) baseline is accepted.
    target : AttributionTarget or str
        Output to attribute.
    k : int
        Number of interpolation samples.
    seed : int
        Seed for the baseline and path position draws.
    batch_size : int
        Number of interpolation points per gradient evaluation.
    baseline_descriptor : str
        Free-form description of the baseline set, stored in the metadata.

    Returns
    -------
    AttributionMap
    """
    target = AttributionTarget.cast(target)
    image = _as_image(image)
    baselines = np.asarray(baselines, dtype=np.float64)
    if baselines.ndim == 3:
        baselines = baselines[np.newaxis]
    if baselines.ndim != 4 or len(baselines) == 0:
        raise ValueError(f'expected a non-empty baseline batch, but got shape {baselines.shape}')
    if baselines.shape[1:] != image.shape:
        raise ValueError(f'baseline shape {baselines.shape[1:]} does not match image shape {image.shape}')
    if k < 1:
        raise ValueError(f'expected gradients needs at least one sample, but got k={k}')

    rng = np.random.default_rng(seed)
    alphas = (np.arange(k) + rng.random(k)) / k
    rng.shuffle(alphas)
    m = len(baselines)
    picks = np.concatenate([rng.permutation(m) for _ in range(-(-k // m))])[:k]

    network = _network(model)
    x = torch.from_numpy(image)
    total = torch.zeros_like(x)
    for start in range(0, k, batch_size):
        chosen = torch.from_numpy(baselines[picks[start:start + batch_size]])
        alpha = torch.from_numpy(alphas[start:start + batch_size]).view(-1, 1, 1, 1)
        delta = x.unsqueeze(0) - chosen
        points = (chosen + alpha * delta).requires_grad_(True)
        output = target.select(network(points))
        grads, = torch.autograd.grad(output.sum(), points)
        total += (delta * grads).sum(dim=0)

    metadata = {
        'n_samples': int(k),
        'baselines': {'count': int(m), 'descriptor': baseline_descriptor},
        'seed': int(seed),
    }
    return AttributionMap((total / k).numpy(), target, 'expected_gradients', metadata)


def _last_conv(network):
    name, layer = None, None
    for n, module in network.named_modules():
        if isinstance(module, nn.Conv2d):
            name, layer = n, module
    if layer is None:
        raise ValueError('guided Grad-CAM requires a model with at least one convolutional layer')
    return name, layer


def gradcam(model, image, target='cate'):
    """
    Grad-CAM map of the last convolutional layer: channel activations weighted by
    their spatially averaged target gradients, summed, rectified, and bilinearly
    upsampled to the image size.

    Returns
    -------
    (height, width) float64 np.ndarray
        Non-negative class activation map.
    """
    target = AttributionTarget.cast(target)
    image = _as_image(image)
    network = _network(model)
    _, layer = _last_conv(network)

    captured = {}
    handle = layer.register_forward_hook(lambda module, inputs, output: captured.update(activation=output))
    try:
        x = torch.from_numpy(image).unsqueeze(0).requires_grad_(True)
        output = target.select(network(x)).sum()
    finally:
        handle.remove()

    activation = captured['activation']
    grads, = torch.autograd.grad(output, activation)
    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam = F.relu((weights * activation).sum(dim=1, keepdim=True))
    cam = F.interpolate(cam, size=image.shape[-2:], mode='bilinear', align_corners=False)
    return cam[0, 0].detach().numpy()


def guided_backprop(model, image, target='cate'):
    """
    Guided-backpropagation input gradient of a target output. Backward passes
    through ReLU modules only propagate positive gradients through positively
    activated units. Other nonlinearities are left unmodified.

    Returns
    -------
    (channels, height, width) float64 np.ndarray
    """
    target = AttributionTarget.cast(target)
    image = _as_image(image)
    network = _network(model)

    def rectify(module, grad_input, grad_output):
        return tuple(None if g is None else g.clamp(min=0) for g in grad_input)

    handles = [m.register_full_backward_hook(rectify) for m in network.modules() if isinstance(m, nn.ReLU)]
    try:
        x = torch.from_numpy(image).unsqueeze(0).requires_grad_(True)
        output = target.select(network(x)).sum()
        grads, = torch.autograd.grad(output, x)
    finally:
        for handle in handles:
            handle.remove()
    return grads[0].numpy()


def guided_gradcam(model, image, target='cate'):
    """
    Guided Grad-CAM attribution: the guided-backpropagation input gradient
    multiplied elementwise by the (channel-broadcast) Grad-CAM map of the last
    convolutional layer.

    Parameters
    ----------
    model : TrainedEstimator or torch.nn.Module
        Model whose encoder has at least one convolutional layer.
    image : (channels, height, width) array_like
        Image to explain.
    target : AttributionTarget or str
        Output to attribute.

    Returns
    -------
    AttributionMap
    """
    target = AttributionTarget.cast(target)
    layer_name, _ = _last_conv(_network(model))
    cam = gradcam(model, image, target)
    guided = guided_backprop(model, image, target)
    metadata = {'layer': layer_name, 'cam_max': float(cam.max())}
    return AttributionMap(guided * cam[np.newaxis], target, 'guided_gradcam', metadata)
