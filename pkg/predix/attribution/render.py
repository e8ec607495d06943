import os
import numpy as np
import matplotlib

from predix.io.images import save_image


def _grayscale(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        image = image.mean(axis=0)
    if image.ndim != 2:
        raise ValueError(f'expected a (channels, height, width) or (height, width) image, but got shape {image.shape}')
    return np.clip(image, 0, 1)


def overlay(values, image, colormap='RdBu', opacity=0.8):
    """
    Blend a signed 2D attribution over a grayscale image. Values are normalized
    symmetrically about zero, so negative contributions are drawn red and positive
    ones blue, with opacity proportional to magnitude. Zero-valued pixels keep the
    underlying grayscale intensity.

    Parameters
    ----------
    values : (height, width) array_like
        Signed attribution values.
    image : array_like
        Underlying image, (channels, height, width) or (height, width).
    colormap : str
        Diverging matplotlib colormap.
    opacity : float
        Overlay opacity at the largest attribution magnitude.

    Returns
    -------
    (3, height, width) float64 np.ndarray
        RGB overlay in [0, 1].
    """
    values = np.asarray(values, dtype=np.float64)
    gray = _grayscale(image)
    if values.shape != gray.shape:
        raise ValueError(f'attribution shape {values.shape} does not match image shape {gray.shape}')

    scale = np.abs(values).max()
    normed = values / scale if scale > 0 else np.zeros_like(values)
    colors = matplotlib.colormaps[colormap]((normed + 1) / 2)[..., :3]
    alpha = (opacity * np.abs(normed))[..., np.newaxis]
    blended = (1 - alpha) * gray[..., np.newaxis] + alpha * colors
    return np.moveaxis(blended, -1, 0)


def render_overlay(attribution, image, filename, per_channel=False, colormap='RdBu', opacity=0.8):
    """
    Render an attribution map as a PNG overlay on the explained image.

    Parameters
    ----------
    attribution : AttributionMap or array_like
        Attribution with the image's (channels, height, width) shape, or a 2D map.
    image : (channels, height, width) array_like
        Explained image.
    filename : str
        Output PNG path. With `per_channel`, one panel per channel is written to
        `<stem>_c<k>.png` instead.
    per_channel : bool
        Render each channel's attribution separately. Otherwise channels are summed.
    colormap : str
        Diverging matplotlib colormap.
    opacity : float
        Overlay opacity at the largest attribution magnitude.

    Returns
    -------
    list of str
        Written file paths.
    """
    values = np.asarray(getattr(attribution, 'values', attribution), dtype=np.float64)
    image = np.asarray(image, dtype=np.float64)
    if values.ndim == 2:
        values = values[np.newaxis]
    if values.shape[1:] != image.shape[-2:] or (image.ndim == 3 and values.shape[0] not in (1, image.shape[0])):
        raise ValueError(f'attribution shape {values.shape} does not match image shape {image.shape}')

    if not per_channel:
        rendered = overlay(values.sum(axis=0), image, colormap, opacity)
        save_image(rendered, filename)
        return [str(filename)]

    stem = str(filename)
    if stem.lower().endswith('.png'):
        stem = stem[:-4]
    written = []
    for k, channel in enumerate(values):
        path = f'{stem}_c{k}.png'
        save_image(overlay(channel, image, colormap, opacity), path)
        written.append(os.path.normpath(path))
    return written
