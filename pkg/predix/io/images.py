import numpy as np
import nibabel as nib

from PIL import Image

from predix.io import protocol
from predix.io.utils import ensure_parent
from predix.io.utils import check_file_readability


def load_image(filename, fmt=None):
    """
    Load an image as a float32 array of shape (channels, height, width) with
    intensities in [0, 1].

    Parameters
    ----------
    filename : str
        File path to read.
    fmt : str, optional
        Forced file format. If None (default), file format is extrapolated
        from extension.

    Returns
    -------
    np.ndarray
    """
    check_file_readability(filename)
    iop = protocol.select_protocol(image_io_protocols, filename, fmt)
    return iop().load(filename)


def save_image(image, filename, fmt=None):
    """
    Save a (channels, height, width) array with intensities in [0, 1] to file.

    Parameters
    ----------
    image : np.ndarray
        Image array. 2D arrays are treated as single-channel images.
    filename : str
        Destination file path.
    fmt : str, optional
        Forced file format.
    """
    iop = protocol.select_protocol(image_io_protocols, filename, fmt)
    if fmt is not None:
        filename = iop.enforce_extension(filename)
    ensure_parent(filename)
    iop().save(image, filename)


def load_images(manifest, dtype=np.float32):
    """
    Load all images referenced by a manifest into a single (n, channels, height, width) array.

    Parameters
    ----------
    manifest : DatasetManifest
        Dataset manifest.
    dtype : np.dtype
        Output dtype.

    Returns
    -------
    np.ndarray
    """
    images = [load_image(f) for f in manifest.image_files()]
    if not images:
        raise ValueError('cannot load images of an empty manifest')
    shapes = {im.shape for im in images}
    if len(shapes) > 1:
        raise ValueError(f'manifest images have inconsistent shapes: {sorted(shapes)}')
    return np.stack(images).astype(dtype, copy=False)


class PNGImageIO(protocol.IOProtocol):
    """
    Lossless 8-bit PNG images (grayscale or RGB).
    """

    name = 'png'
    extensions = ('.png',)

    def load(self, filename):
        with Image.open(filename) as pil:
            if pil.mode not in ('L', 'RGB'):
                pil = pil.convert('RGB')
            data = np.asarray(pil, dtype=np.float32) / 255.0
        if data.ndim == 2:
            return data[np.newaxis]
        return np.moveaxis(data, -1, 0)

    def save(self, image, filename):
        image = np.asarray(image)
        if image.ndim == 3:
            if image.shape[0] not in (1, 3):
                raise ValueError(f'PNG images must have 1 or 3 channels, but got {image.shape[0]}')
            image = image[0] if image.shape[0] == 1 else np.moveaxis(image, 0, -1)
        elif image.ndim != 2:
            raise ValueError(f'cannot write {image.ndim}D array as a PNG image')
        if image.dtype != np.uint8:
            image = np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)
        Image.fromarray(image).save(filename)


class NiftiImageIO(protocol.IOProtocol):
    """
    NIfTI images. Volumes are reduced to their central slice along the last
    spatial axis and rescaled to [0, 1], since the estimator operates on 2D inputs.
    """

    name = 'nifti'
    extensions = ('.nii.gz', '.nii')

    def load(self, filename):
        data = np.asanyarray(nib.load(filename).dataobj).astype(np.float32)
        data = np.squeeze(data)
        if data.ndim == 3:
            data = data[..., data.shape[-1] // 2]
        elif data.ndim != 2:
            raise ValueError(f'cannot read {data.ndim}D NIfTI data {filename} as an image')
        lower, upper = data.min(), data.max()
        if upper > lower:
            data = (data - lower) / (upper - lower)
        else:
            data = np.zeros_like(data)
        return data[np.newaxis]

    def save(self, image, filename):
        image = np.asarray(image, dtype=np.float32)
        if image.ndim == 3:
            if image.shape[0] != 1:
                raise ValueError('only single-channel images can be written as NIfTI')
            image = image[0]
        nib.save(nib.Nifti1Image(image, np.eye(4)), filename)


# enabled IO protocol classes
image_io_protocols = [
    PNGImageIO,
    NiftiImageIO,
]
