import os
import pytest
import numpy as np
import pandas as pd
import nibabel as nib

from predix.data import DatasetManifest
from predix.sim import RCTDataset
from predix.attribution import AttributionMap
from predix.io import load_manifest
from predix.io import save_manifest
from predix.io import load_image
from predix.io import save_image
from predix.io import load_images
from predix.io import load_rct_dataset
from predix.io import save_rct_dataset
from predix.io import load_attribution_map
from predix.io import save_attribution_map
from predix.io.records import read_jsonl
from predix.io.records import write_jsonl
from predix.io.protocol import select_protocol
from predix.io.manifest import manifest_io_protocols
from predix.io.utils import check_file_readability


def example_manifest():
    frame = pd.DataFrame({
        'sample_id': ['001', '002', '003'],
        'image_path': ['train/001.png', 'test/002.png', 'test/003.png'],
        'x_prog': [0.0, 1.0, 0.25],
        'x_pred': [1.0, 0.0, 0.1 + 0.2],
        'split': ['train', 'test', 'test'],
        'digit': [8, 1, 6],
    })
    return DatasetManifest(frame, roles={'prog': 'x_color', 'pred': 'x_circle'})


def test_manifest_roundtrip(tmpdir):
    """
    Test that manifests written as CSV and JSON are read back field-identical.
    """
    manifest = example_manifest()
    for ext in ('csv', 'json'):
        filename = os.path.join(tmpdir, f'manifest.{ext}')
        save_manifest(manifest, filename)
        loaded = load_manifest(filename)
        pd.testing.assert_frame_equal(loaded.frame, manifest.frame)
        assert loaded.root == str(tmpdir)

    # only the JSON format keeps the role names
    assert load_manifest(os.path.join(tmpdir, 'manifest.json')).roles == manifest.roles


def test_protocol_selection():
    """
    Test format lookup by extension and name.
    """
    assert select_protocol(manifest_io_protocols, 'a/b.CSV').name == 'csv'
    assert select_protocol(manifest_io_protocols, 'a/b.txt', fmt='json').name == 'json'
    with pytest.raises(ValueError):
        select_protocol(manifest_io_protocols, 'a/b.txt')
    with pytest.raises(ValueError):
        select_protocol(manifest_io_protocols, 'a/b.csv', fmt='parquet')


def test_check_file_readability(tmpdir):
    """
    Test missing files and directories.
    """
    with pytest.raises(FileNotFoundError):
        check_file_readability(os.path.join(tmpdir, 'missing.csv'))
    with pytest.raises(ValueError):
        check_file_readability(str(tmpdir))


def test_png_roundtrip(tmpdir):
    """
    Test that 8-bit RGB and grayscale PNG images survive a save and load.
    """
    rgb = np.random.default_rng(0).integers(0, 256, (3, 8, 6)).astype(np.float32) / 255
    filename = os.path.join(tmpdir, 'rgb.png')
    save_image(rgb, filename)
    loaded = load_image(filename)
    assert loaded.shape == (3, 8, 6)
    assert loaded.dtype == np.float32
    assert np.allclose(loaded, rgb, atol=1e-6)

    gray = rgb[:1]
    filename = os.path.join(tmpdir, 'sub', 'gray.png')
    save_image(gray, filename)
    assert load_image(filename).shape == (1, 8, 6)

    with pytest.raises(ValueError):
        save_image(np.zeros((2, 4, 4)), os.path.join(tmpdir, 'bad.png'))


def test_nifti_central_slice(tmpdir):
    """
    Test that NIfTI volumes are reduced to their rescaled central slice.
    """
    volume = np.zeros((6, 5, 4), dtype=np.float32)
    volume[..., 2] = np.arange(30).reshape(6, 5)
    volume[..., 2] += 10
    filename = os.path.join(tmpdir, 'volume.nii.gz')
    nib.save(nib.Nifti1Image(volume, np.eye(4)), filename)

    image = load_image(filename)
    assert image.shape == (1, 6, 5)
    assert image.min() == 0 and image.max() == 1
    assert np.allclose(image[0], np.arange(30).reshape(6, 5) / 29)

    with pytest.raises(ValueError):
        save_image(np.zeros((3, 4, 4)), os.path.join(tmpdir, 'rgb.nii.gz'))


def test_load_images(tmpdir):
    """
    Test loading the images of a manifest in order, and inconsistent shapes.
    """
    frame = pd.DataFrame({
        'sample_id': ['a', 'b'],
        'image_path': ['a.png', 'b.png'],
        'x_prog': [0.0, 1.0],
        'x_pred': [1.0, 0.0],
    })
    save_image(np.full((3, 4, 4), 1.0), os.path.join(tmpdir, 'a.png'))
    save_image(np.zeros((3, 4, 4)), os.path.join(tmpdir, 'b.png'))
    images = load_images(DatasetManifest(frame, root=str(tmpdir)))
    assert images.shape == (2, 3, 4, 4)
    assert images[0].min() == 1 and images[1].max() == 0

    save_image(np.zeros((3, 5, 4)), os.path.join(tmpdir, 'b.png'))
    with pytest.raises(ValueError, match='inconsistent'):
        load_images(DatasetManifest(frame, root=str(tmpdir)))


def test_records_roundtrip(tmpdir):
    """
    Test the trial records CSV header and CSV and JSONL round-trips.
    """
    frame = pd.DataFrame({
        'sample_id': ['007', '008'],
        'split': ['train', 'test'],
        'x_prog': [1.0, 0.0],
        'x_pred': [0.5, 1.0],
        'T': [1, 0],
        'Y': [1.5, 0.0],
    })
    dataset = RCTDataset(frame)

    filename = os.path.join(tmpdir, 'records.csv')
    save_rct_dataset(dataset, filename)
    with open(filename) as file:
        assert file.readline().strip() == 'sample_id,x_prog,x_pred,T,Y,split'

    for name in ('records.csv', 'records.jsonl'):
        filename = os.path.join(tmpdir, name)
        dataset.save(filename)
        loaded = load_rct_dataset(filename)
        assert loaded.sample_id.tolist() == ['007', '008']
        assert np.array_equal(loaded.Y, dataset.Y)
        assert np.array_equal(loaded.T, dataset.T)


def test_jsonl_truncated_line(tmpdir):
    """
    Test that a truncated final JSON line is skipped while earlier corruption raises.
    """
    filename = os.path.join(tmpdir, 'rows.jsonl')
    write_jsonl([{'a': 1}, {'a': np.float64(2.5)}], filename)
    with open(filename, 'a') as file:
        file.write('{"a": 3')
    assert read_jsonl(filename) == [{'a': 1}, {'a': 2.5}]

    with open(filename, 'a') as file:
        file.write('\n{"a": 4}\n')
    with pytest.raises(ValueError):
        read_jsonl(filename)


def test_attribution_map_roundtrip(tmpdir):
    """
    Test that binary attribution maps keep values, shape, target, and metadata.
    """
    values = np.random.default_rng(1).normal(size=(3, 5, 7))
    attribution = AttributionMap(values, 'control_head', 'expected_gradients',
                                 {'n_samples': 10, 'seed': 3, 'baselines': {'count': 2}})
    filename = os.path.join(tmpdir, 'map.pdxa')
    save_attribution_map(attribution, filename)
    loaded = load_attribution_map(filename)
    assert np.array_equal(loaded.values, values)
    assert loaded.target.kind == 'control_head'
    assert loaded.method == 'expected_gradients'
    assert loaded.metadata == attribution.metadata

    with open(os.path.join(tmpdir, 'bad.pdxa'), 'wb') as file:
        file.write(b'NOPE')
    with pytest.raises(ValueError):
        load_attribution_map(os.path.join(tmpdir, 'bad.pdxa'))
