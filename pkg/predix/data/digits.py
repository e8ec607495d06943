import os
import gzip
import dataclasses
import numpy as np
import pandas as pd

from PIL import Image
from PIL import ImageDraw
from PIL import ImageFont
from PIL import ImageFilter

from predix.core.hashing import record_rng
from predix.data.manifest import DatasetManifest
from predix.data.manifest import split_dataset
from predix.io.images import save_image
from predix.io.utils import read_int
from predix.io.utils import read_bytes
from predix.io.utils import check_file_readability
from predix.pipeline import log_message


# digit colors, digits are drawn on a black background
green = (0.0, 1.0, 0.0)
red = (1.0, 0.0, 0.0)


@dataclasses.dataclass(frozen=True)
class ColoredDigitSpec:
    """
    Configuration of the colored-digits corpus.

    Attributes
    ----------
    color_probability : float
        Probability that a digit is rendered green.
    circle_digit_set : frozenset of int
        Digit classes that contain a circle or loop.
    feature_roles : dict
        Maps the 'prog' and 'pred' roles to the 'color' and 'circle' features.
    image_size : int
        Output image width and height in pixels.
    """
    color_probability: float = 0.5
    circle_digit_set: frozenset = frozenset({0, 6, 8, 9})
    feature_roles: dict = dataclasses.field(default_factory=lambda: {'prog': 'color', 'pred': 'circle'})
    image_size: int = 28

    def __post_init__(self):
        if not 0 <= self.color_probability <= 1:
            raise ValueError(f'color probability must be in [0, 1], but got {self.color_probability}')
        object.__setattr__(self, 'circle_digit_set', frozenset(int(d) for d in self.circle_digit_set))
        if not self.circle_digit_set <= set(range(10)):
            raise ValueError(f'circle digit set contains non-digit classes: {sorted(self.circle_digit_set)}')
        roles = dict(self.feature_roles)
        if set(roles) != {'prog', 'pred'} or set(roles.values()) != {'color', 'circle'}:
            raise ValueError("feature roles must assign 'color' and 'circle' to the 'prog' and 'pred' "
                             f'roles exactly once, but got {roles}')
        object.__setattr__(self, 'feature_roles', roles)
        if self.image_size < 4:
            raise ValueError(f'image size must be at least 4 pixels, but got {self.image_size}')

    @classmethod
    def configuration(cls, name, **kwargs):
        """
        Feature set 'a' (color prognostic, circle predictive) or 'b' (vice versa).
        """
        roles = {
            'a': {'prog': 'color', 'pred': 'circle'},
            'b': {'prog': 'circle', 'pred': 'color'},
        }.get(name)
        if roles is None:
            raise ValueError(f"feature set must be 'a' or 'b', but got {name}")
        return cls(feature_roles=roles, **kwargs)

    @classmethod
    def from_dict(cls, params):
        params = {k: v for k, v in params.items() if v is not None}
        if 'circle_digit_set' in params:
            params['circle_digit_set'] = frozenset(params['circle_digit_set'])
        return cls(**params)


def colorize(gray, is_green):
    """
    Render a grayscale digit (height, width) in [0, 1] as a (3, height, width)
    green or red digit on black.
    """
    color = np.asarray(green if is_green else red, dtype=np.float32)
    return color[:, np.newaxis, np.newaxis] * gray[np.newaxis].astype(np.float32)


def _prepare_gray(image, size):
    """
    Convert a source digit to a float (size, size) array in [0, 1].
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f'source digits must be 2D grayscale images, but got shape {image.shape}')
    if image.dtype == np.uint8:
        image = image.astype(np.float32) / 255.0
    else:
        image = np.clip(image.astype(np.float32), 0, 1)
    if image.shape != (size, size):
        pil = Image.fromarray(np.round(image * 255).astype(np.uint8))
        image = np.asarray(pil.resize((size, size), Image.BILINEAR), dtype=np.float32) / 255.0
    return image


def generate_colored_digits(digits, labels, spec=None, seed=0, root=None,
                            fractions=(0.8, 0.1, 0.1), prefix='digit', log=None):
    """
    Build the colored-digits corpus. Each digit is rendered green with probability
    `spec.color_probability` (red otherwise), giving the binary features

        x_color  = 1 if the digit is green
        x_circle = 1 if the digit class contains a circle or loop

    which are assigned to the prognostic and predictive roles by `spec.feature_roles`.

    Parameters
    ----------
    digits : (n, h, w) array_like
        Grayscale source digits (uint8, or float in [0, 1]).
    labels : (n,) array_like of int
        Digit classes.
    spec : ColoredDigitSpec, optional
        Corpus configuration.
    seed : int
        Seed for color draws and split assignment.
    root : str, optional
        If provided, images are written to `<root>/<split>/<sample_id>.png` and the
        manifest to `<root>/manifest.csv`.
    fractions : sequence of float
        Split fractions.
    prefix : str
        Sample identifier prefix.
    log : ExperimentLog, optional
        Progress log.

    Returns
    -------
    manifest : DatasetManifest
        Sample manifest, with additional digit, x_color and x_circle columns.
    images : (n, 3, size, size) float32 np.ndarray
        Rendered images in manifest order.
    """
    spec = ColoredDigitSpec() if spec is None else spec
    labels = np.asarray(labels).astype(np.int64).reshape(-1)
    if len(labels) == 0:
        raise ValueError('cannot generate colored digits from an empty source')
    if len(digits) != len(labels):
        raise ValueError(f'got {len(digits)} source digits but {len(labels)} labels')
    unknown = np.setdiff1d(labels, np.arange(10))
    if unknown.size:
        raise ValueError(f'unknown digit class {unknown[0]}')

    width = max(6, len(str(len(labels) - 1)))
    sample_ids = [f'{prefix}{i:0{width}d}' for i in range(len(labels))]

    x_color = np.array([record_rng(seed, sid, 'color').random() < spec.color_probability
                        for sid in sample_ids], dtype=np.float64)
    x_circle = np.isin(labels, sorted(spec.circle_digit_set)).astype(np.float64)
    features = {'color': x_color, 'circle': x_circle}

    images = np.stack([colorize(_prepare_gray(d, spec.image_size), g) for d, g in zip(digits, x_color)])

    frame = pd.DataFrame({
        'sample_id': sample_ids,
        'image_path': '',
        'x_prog': features[spec.feature_roles['prog']],
        'x_pred': features[spec.feature_roles['pred']],
        'digit': labels,
        'x_color': x_color,
        'x_circle': x_circle,
    })
    roles = {role: f'x_{name}' for role, name in spec.feature_roles.items()}
    manifest = DatasetManifest(frame, root=root, roles=roles)
    manifest = split_dataset(manifest, fractions, seed=seed)
    manifest.frame['image_path'] = [os.path.join(s, f'{sid}.png')
                                    for s, sid in zip(manifest.split, manifest.sample_id)]
    log_message(log, f'rendered {len(labels)} colored digits ({int(x_color.sum())} green)')

    if root is not None:
        for filename, image in zip(manifest.image_files(), images):
            save_image(image, filename)
        manifest.save(os.path.join(root, 'manifest.csv'))
        log_message(log, f'wrote colored-digits corpus to {root}')

    return manifest, images


def load_mnist_idx(images_path, labels_path):
    """
    Read digits from (optionally gzipped) IDX files as distributed with MNIST.

    Parameters
    ----------
    images_path : str
        IDX3 image file.
    labels_path : str
        IDX1 label file.

    Returns
    -------
    images : (n, h, w) uint8 np.ndarray
    labels : (n,) int64 np.ndarray
    """
    images = _read_idx(images_path)
    labels = _read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1:
        raise ValueError('expected an IDX3 image file and an IDX1 label file')
    if len(images) != len(labels):
        raise ValueError(f'IDX files disagree: {len(images)} images but {len(labels)} labels')
    return images, labels.astype(np.int64)


def _read_idx(filename):
    """
    Read an unsigned-byte IDX array.
    """
    check_file_readability(filename)
    opener = gzip.open if str(filename).endswith('.gz') else open
    with opener(filename, 'rb') as file:
        magic = read_int(file, size=4, signed=False)
        dtype_code, ndim = (magic >> 8) & 0xff, magic & 0xff
        if (magic >> 16) != 0 or dtype_code != 0x08:
            raise ValueError(f'{filename} is not an unsigned-byte IDX file')
        shape = [read_int(file, size=4, signed=False) for _ in range(ndim)]
        count = int(np.prod(shape))
        data = read_bytes(file, np.uint8, count)
    return np.asarray(data, dtype=np.uint8).reshape(shape)


def render_glyph_digits(n, size=28, seed=0):
    """
    Render jittered digit glyphs with the default Pillow font, as an offline
    stand-in for handwritten digit corpora.

    Parameters
    ----------
    n : int
        Number of digits.
    size : int
        Output width and height.
    seed : int
        Random seed for classes, offsets, and stroke widths.

    Returns
    -------
    images : (n, size, size) uint8 np.ndarray
    labels : (n,) int64 np.ndarray
    """
    if n < 1:
        raise ValueError('cannot render an empty set of digits')
    rng = np.random.default_rng(seed)
    font = ImageFont.load_default()
    labels = rng.integers(0, 10, size=n)

    # pre-render each glyph once, tightly cropped
    glyphs = {}
    for digit in range(10):
        probe = Image.new('L', (64, 64))
        draw = ImageDraw.Draw(probe)
        draw.text((16, 16), str(digit), fill=255, font=font)
        box = probe.getbbox()
        glyphs[digit] = probe.crop(box) if box is not None else probe

    images = np.zeros((n, size, size), dtype=np.uint8)
    for i, digit in enumerate(labels):
        glyph = glyphs[int(digit)]
        scale = rng.uniform(0.55, 0.75) * size / max(glyph.size)
        glyph = glyph.resize((max(1, round(glyph.width * scale)), max(1, round(glyph.height * scale))),
                             Image.BILINEAR)
        if rng.random() < 0.5:
            glyph = glyph.filter(ImageFilter.MaxFilter(3))
        canvas = Image.new('L', (size, size))
        x = (size - glyph.width) // 2 + int(rng.integers(-2, 3))
        y = (size - glyph.height) // 2 + int(rng.integers(-2, 3))
        canvas.paste(glyph, (x, y))
        images[i] = np.asarray(canvas)
    return images, labels.astype(np.int64)
