import json
import numpy as np

from predix.io import protocol
from predix.io.utils import ensure_parent
from predix.io.utils import check_file_readability
from predix.io.utils import read_int
from predix.io.utils import write_int
from predix.io.utils import read_bytes
from predix.io.utils import write_bytes


def save_attribution_map(attribution, filename, fmt=None):
    """
    Save an attribution map to file.

    Parameters
    ----------
    attribution : AttributionMap
        Map to write.
    filename : str
        Destination file path.
    fmt : str, optional
        Forced file format.
    """
    iop = protocol.select_protocol(attribution_io_protocols, filename, fmt)
    if fmt is not None:
        filename = iop.enforce_extension(filename)
    ensure_parent(filename)
    iop().save(attribution, filename)


def load_attribution_map(filename, fmt=None):
    """
    Load an attribution map from file.

    Parameters
    ----------
    filename : str
        File path to read.
    fmt : str, optional
        Forced file format. If None (default), file format is extrapolated
        from extension.

    Returns
    -------
    AttributionMap
    """
    check_file_readability(filename)
    iop = protocol.select_protocol(attribution_io_protocols, filename, fmt)
    return iop().load(filename)


class AttributionMapIO(protocol.IOProtocol):
    """
    Binary attribution map format. Layout (big-endian):

        magic        4 bytes, 'PDXA'
        version      int32
        ndim         int32
        shape        ndim x int32
        values       prod(shape) x float64
        header size  int32
        header       UTF-8 JSON (target, method, metadata)
    """

    name = 'attribution'
    extensions = ('.pdxa',)
    magic = b'PDXA'
    version = 1

    def load(self, filename):
        from predix.attribution.maps import AttributionMap

        with open(filename, 'rb') as file:
            if file.read(4) != self.magic:
                raise ValueError(f'{filename} is not an attribution map file')
            version = read_int(file)
            if version != self.version:
                raise ValueError(f'unsupported attribution map version {version} in {filename}')
            ndim = read_int(file)
            shape = [read_int(file) for _ in range(ndim)]
            values = read_bytes(file, '>f8', int(np.prod(shape)))
            size = read_int(file)
            header = json.loads(file.read(size).decode('utf-8'))

        values = np.asarray(values, dtype=np.float64).reshape(shape)
        return AttributionMap(values, header['target'], header['method'], header.get('metadata'))

    def save(self, attribution, filename):
        values = np.asarray(attribution.values, dtype=np.float64)
        header = json.dumps({
            'target': str(attribution.target),
            'method': attribution.method,
            'metadata': attribution.metadata,
        }, sort_keys=True).encode('utf-8')

        with open(filename, 'wb') as file:
            file.write(self.magic)
            write_int(file, self.version)
            write_int(file, values.ndim)
            for dim in values.shape:
                write_int(file, dim)
            write_bytes(file, values, '>f8')
            write_int(file, len(header))
            file.write(header)


attribution_io_protocols = [
    AttributionMapIO,
]
