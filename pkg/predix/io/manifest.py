import os
import json
import pandas as pd

from predix.io import protocol
from predix.io.utils import ensure_parent
from predix.io.utils import check_file_readability


# column types that should never be inferred as numbers
string_columns = {'sample_id': str, 'image_path': str, 'split': str}


def load_manifest(filename, fmt=None):
    """
    Load a `DatasetManifest` from file. Relative image paths are resolved against
    the directory of the manifest file.

    Parameters
    ----------
    filename : str
        File path to read.
    fmt : str, optional
        Forced file format. If None (default), file format is extrapolated
        from extension.

    Returns
    -------
    DatasetManifest
        Loaded manifest.
    """
    check_file_readability(filename)
    iop = protocol.select_protocol(manifest_io_protocols, filename, fmt)
    return iop().load(filename)


def save_manifest(manifest, filename, fmt=None):
    """
    Save a `DatasetManifest` object to file.

    Parameters
    ----------
    manifest : DatasetManifest
        Object to write.
    filename: str
        Destination file path.
    fmt : str
        Forced file format. If None (default), file format is extrapolated
        from extension.
    """
    iop = protocol.select_protocol(manifest_io_protocols, filename, fmt)
    if fmt is not None:
        filename = iop.enforce_extension(filename)
    ensure_parent(filename)
    iop().save(manifest, filename)


class ManifestCSVIO(protocol.IOProtocol):
    """
    Manifest IO protocol for comma-separated tables.
    """

    name = 'csv'
    extensions = ('.csv',)

    def load(self, filename):
        from predix.data.manifest import DatasetManifest
        frame = pd.read_csv(filename, dtype=string_columns, keep_default_na=False, na_values=[''])
        root = os.path.dirname(os.path.abspath(filename))
        return DatasetManifest(frame, root=root)

    def save(self, manifest, filename):
        manifest.frame.to_csv(filename, index=False)


class ManifestJSONIO(protocol.IOProtocol):
    """
    Manifest IO protocol for JSON documents. Unlike CSV, the feature role names
    are preserved.
    """

    name = 'json'
    extensions = ('.json',)

    def load(self, filename):
        from predix.data.manifest import DatasetManifest
        with open(filename, 'r') as file:
            content = json.load(file)
        frame = pd.DataFrame.from_records(content['rows'])
        root = os.path.dirname(os.path.abspath(filename))
        return DatasetManifest(frame, root=root, roles=content.get('roles'))

    def save(self, manifest, filename):
        content = {
            'roles': manifest.roles,
            'rows': manifest.frame.to_dict(orient='records'),
        }
        with open(filename, 'w') as file:
            json.dump(content, file, indent=1, default=_native)


# enabled IO protocol classes
manifest_io_protocols = [
    ManifestCSVIO,
    ManifestJSONIO,
]


def _native(value):
    """
    Convert numpy scalars for JSON encoding.
    """
    if hasattr(value, 'item'):
        return value.item()
    raise TypeError(f'cannot encode object of type {type(value).__name__}')
