import os
import gzip
import pytest
import numpy as np
import pandas as pd

from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st

from predix.data import DatasetManifest
from predix.data import ColoredDigitSpec
from predix.data import generate_colored_digits
from predix.data import load_annotation_table
from predix.data import load_mnist_idx
from predix.data import render_glyph_digits
from predix.data import split_dataset
from predix.io import load_manifest


def simple_manifest(n):
    frame = pd.DataFrame({
        'sample_id': [f's{i}' for i in range(n)],
        'image_path': [f's{i}.png' for i in range(n)],
        'x_prog': np.zeros(n),
        'x_pred': np.ones(n),
    })
    return DatasetManifest(frame)


def write_annotations(tmpdir, rows, image_files=True):
    frame = pd.DataFrame(rows)
    if image_files:
        for path in frame['image_path']:
            open(os.path.join(tmpdir, path), 'wb').close()
    filename = os.path.join(tmpdir, 'annotations.csv')
    frame.to_csv(filename, index=False)
    return filename


def test_manifest_validation():
    """
    Test required columns, unique ids, default split, and numeric features.
    """
    manifest = simple_manifest(3)
    assert manifest.split.tolist() == ['train'] * 3

    with pytest.raises(ValueError, match='x_pred'):
        DatasetManifest(manifest.frame.drop(columns='x_pred'))

    frame = manifest.frame.copy()
    frame.loc[1, 'sample_id'] = 's0'
    with pytest.raises(ValueError, match='unique'):
        DatasetManifest(frame)

    frame = manifest.frame.copy()
    frame['x_prog'] = ['1', 'a', '0']
    with pytest.raises(ValueError, match='non-numeric'):
        DatasetManifest(frame)


def test_colored_digit_spec():
    """
    Test feature-role configurations of the colored-digits corpus.
    """
    spec = ColoredDigitSpec()
    assert spec.feature_roles == {'prog': 'color', 'pred': 'circle'}
    assert ColoredDigitSpec.configuration('b').feature_roles == {'prog': 'circle', 'pred': 'color'}

    with pytest.raises(ValueError):
        ColoredDigitSpec(feature_roles={'prog': 'color', 'pred': 'color'})
    with pytest.raises(ValueError):
        ColoredDigitSpec(color_probability=2)
    with pytest.raises(ValueError):
        ColoredDigitSpec.configuration('c')


def test_generate_colored_digits():
    """
    Test feature definitions and colors of generated digits.
    """
    gray = np.zeros((10, 28, 28), dtype=np.uint8)
    gray[:, 8:20, 10:18] = 255
    labels = np.arange(10)
    manifest, images = generate_colored_digits(gray, labels, seed=1)

    assert images.shape == (10, 3, 28, 28)
    frame = manifest.frame.set_index('digit')
    assert frame.loc[8, 'x_circle'] == 1
    assert frame.loc[7, 'x_circle'] == 0
    assert frame['x_circle'].sum() == 4
    assert np.array_equal(manifest.x_prog, manifest.frame['x_color'].to_numpy())
    assert np.array_equal(manifest.x_pred, manifest.frame['x_circle'].to_numpy())

    # green digits live in the green channel only, the others in the red channel
    for image, green in zip(images, manifest.frame['x_color']):
        channel = 1 if green else 0
        assert image[channel].max() == 1
        assert image[1 - channel].max() == 0
        assert image[2].max() == 0

    with pytest.raises(ValueError, match='unknown digit class'):
        generate_colored_digits(gray[:1], [11])


def test_colored_digit_statistics():
    """
    Test the green fraction and the independence of color and circle features.
    """
    digits, labels = render_glyph_digits(2000, seed=0)
    manifest, _ = generate_colored_digits(digits, labels, seed=0)
    x_color = manifest.frame['x_color'].to_numpy()
    x_circle = manifest.frame['x_circle'].to_numpy()
    assert 0.45 <= x_color[:1000].mean() <= 0.55
    assert abs(np.corrcoef(x_color, x_circle)[0, 1]) < 0.1


def test_generate_colored_digits_files(tmpdir):
    """
    Test the on-disk layout and manifest of a written corpus.
    """
    digits, labels = render_glyph_digits(20, seed=3)
    spec = ColoredDigitSpec.configuration('b')
    manifest, images = generate_colored_digits(digits, labels, spec=spec, seed=3, root=str(tmpdir))

    assert manifest.roles == {'prog': 'x_circle', 'pred': 'x_color'}
    loaded = load_manifest(os.path.join(tmpdir, 'manifest.csv'))
    assert loaded.sample_id.tolist() == manifest.sample_id.tolist()
    for split, path in zip(loaded.split, loaded.frame['image_path']):
        assert path.startswith(split + os.sep)
    for filename in loaded.image_files():
        assert os.path.isfile(filename)


def test_render_glyph_digits():
    """
    Test shapes, labels, and determinism of rendered digit glyphs.
    """
    digits, labels = render_glyph_digits(30, size=28, seed=5)
    assert digits.shape == (30, 28, 28)
    assert digits.dtype == np.uint8
    assert set(labels) <= set(range(10))
    assert all(d.max() > 0 for d in digits)
    again, _ = render_glyph_digits(30, size=28, seed=5)
    assert np.array_equal(digits, again)


def test_load_mnist_idx(tmpdir):
    """
    Test reading gzipped IDX image and label files.
    """
    images = np.arange(2 * 4 * 4, dtype=np.uint8).reshape(2, 4, 4)
    labels = np.array([3, 8], dtype=np.uint8)

    image_file = os.path.join(tmpdir, 'images.idx3-ubyte.gz')
    with gzip.open(image_file, 'wb') as file:
        file.write(bytes([0, 0, 8, 3]))
        for dim in images.shape:
            file.write(int(dim).to_bytes(4, 'big'))
        file.write(images.tobytes())

    label_file = os.path.join(tmpdir, 'labels.idx1-ubyte')
    with open(label_file, 'wb') as file:
        file.write(bytes([0, 0, 8, 1]))
        file.write(int(2).to_bytes(4, 'big'))
        file.write(labels.tobytes())

    read_images, read_labels = load_mnist_idx(image_file, label_file)
    assert np.array_equal(read_images, images)
    assert read_labels.tolist() == [3, 8]


def test_load_annotation_table(tmpdir):
    """
    Test binary passthrough, min-max normalization, and column errors.
    """
    filename = write_annotations(tmpdir, {
        'sample_id': ['a', 'b', 'c'],
        'image_path': ['a.png', 'b.png', 'c.png'],
        'has_crest': [0, 1, 1],
        'volume': [10.0, 20.0, 30.0],
    })
    manifest = load_annotation_table(filename, 'has_crest', 'volume')
    assert manifest.x_prog.tolist() == [0, 1, 1]
    assert manifest.x_pred.tolist() == [0, 0.5, 1]
    assert manifest.roles == {'prog': 'has_crest', 'pred': 'volume'}

    with pytest.raises(ValueError, match='missing_column'):
        load_annotation_table(filename, 'has_crest', 'missing_column')


def test_annotation_errors(tmpdir):
    """
    Test that constant features, continuous or binary, and missing images are rejected.
    """
    filename = write_annotations(tmpdir, {
        'sample_id': ['a', 'b'],
        'image_path': ['a.png', 'b.png'],
        'flag': [0, 1],
        'size': [2.5, 2.5],
    })
    with pytest.raises(ValueError, match='constant'):
        load_annotation_table(filename, 'flag', 'size')

    for flags in ([0, 0], [1, 1]):
        filename = write_annotations(tmpdir, {
            'sample_id': ['a', 'b'],
            'image_path': ['a.png', 'b.png'],
            'flag': flags,
            'size': [1.5, 2.5],
        })
        with pytest.raises(ValueError, match='constant'):
            load_annotation_table(filename, 'flag', 'size')

    filename = write_annotations(tmpdir, {
        'sample_id': ['a'],
        'image_path': ['nothing.png'],
        'flag': [0],
        'size': [1.0],
    }, image_files=False)
    with pytest.raises(FileNotFoundError):
        load_annotation_table(filename, 'flag', 'size', normalize=False)


def test_normalize_train_statistics():
    """
    Test that normalization uses train-split statistics and is idempotent.
    """
    frame = pd.DataFrame({
        'sample_id': ['a', 'b', 'c', 'd'],
        'image_path': ['a', 'b', 'c', 'd'],
        'x_prog': [10.0, 30.0, 20.0, 40.0],
        'x_pred': [0.0, 1.0, 1.0, 0.0],
        'split': ['train', 'train', 'test', 'test'],
    })
    manifest = DatasetManifest(frame).normalize()
    assert manifest.x_prog.tolist() == [0, 1, 0.5, 1.5]
    assert manifest.x_pred.tolist() == [0, 1, 1, 0]

    binary = DatasetManifest(frame.assign(x_prog=[0.0, 1.0, 0.3, 0.7]))
    assert np.array_equal(binary.normalize().x_prog, binary.normalize().normalize().x_prog)


def test_with_roles():
    """
    Test that feature set 'b' swaps the prognostic and predictive biomarkers.
    """
    frame = pd.DataFrame({
        'sample_id': ['a', 'b'],
        'image_path': ['a', 'b'],
        'x_prog': [1.0, 0.0],
        'x_pred': [0.0, 0.0],
    })
    manifest = DatasetManifest(frame, roles={'prog': 'x_color', 'pred': 'x_circle'})
    swapped = manifest.with_roles('b')
    assert swapped.x_prog.tolist() == [0, 0]
    assert swapped.x_pred.tolist() == [1, 0]
    assert swapped.roles == {'prog': 'x_circle', 'pred': 'x_color'}
    assert manifest.with_roles('a').x_prog.tolist() == [1, 0]
    with pytest.raises(ValueError):
        manifest.with_roles('c')


def test_split_dataset():
    """
    Test split counts, single splits, determinism, and fraction validation.
    """
    manifest = simple_manifest(100)
    split = split_dataset(manifest, (0.8, 0.2), seed=4)
    assert (split.split == 'train').sum() == 80
    assert (split.split == 'test').sum() == 20

    assert set(split_dataset(manifest, (1.0,)).split) == {'train'}
    assert np.array_equal(split.split, split_dataset(manifest, (0.8, 0.2), seed=4).split)

    with pytest.raises(ValueError):
        split_dataset(manifest, (0.5, 0.6))
    with pytest.raises(ValueError):
        split_dataset(manifest, (1.2, -0.2))


@settings(deadline=None, max_examples=50)
@given(n=st.integers(1, 300), seed=st.integers(0, 2 ** 32 - 1),
       weights=st.lists(st.integers(1, 10), min_size=1, max_size=3))
def test_split_counts_property(n, seed, weights):
    """
    Test that split counts always sum to the sample count and are within one of
    the exact fraction.
    """
    fractions = np.array(weights, dtype=float) / sum(weights)
    split = split_dataset(simple_manifest(n), fractions, seed=seed)
    names = ('train', 'val', 'test') if len(fractions) == 3 else None
    counts = split.frame['split'].value_counts()
    assert counts.sum() == n
    if names is not None:
        for name, fraction in zip(names, fractions):
            assert abs(counts.get(name, 0) - fraction * n) < 1 + 1e-9
