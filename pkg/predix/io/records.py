import json
import numpy as np
import pandas as pd

from predix.io import protocol
from predix.io.utils import ensure_parent
from predix.io.utils import check_file_readability


def load_rct_dataset(filename, fmt=None):
    """
    Load simulated trial records from a CSV or JSONL file.

    Parameters
    ----------
    filename : str
        File path to read.
    fmt : str, optional
        Forced file format. If None (default), file format is extrapolated
        from extension.

    Returns
    -------
    RCTDataset
    """
    from predix.sim.outcomes import RCTDataset
    check_file_readability(filename)
    iop = protocol.select_protocol(records_io_protocols, filename, fmt)
    return RCTDataset(iop().load(filename))


def save_rct_dataset(dataset, filename, fmt=None):
    """
    Save simulated trial records. The leading CSV columns are
    `sample_id,x_prog,x_pred,T,Y`, followed by split and image_path when present.

    Parameters
    ----------
    dataset : RCTDataset
        Records to write.
    filename : str
        Destination file path.
    fmt : str, optional
        Forced file format.
    """
    iop = protocol.select_protocol(records_io_protocols, filename, fmt)
    if fmt is not None:
        filename = iop.enforce_extension(filename)
    ensure_parent(filename)

    frame = dataset.to_frame()
    leading = ['sample_id', 'x_prog', 'x_pred', 'T', 'Y']
    frame = frame[leading + [c for c in frame if c not in leading]]
    iop().save(frame, filename)


def read_jsonl(filename):
    """
    Read a JSON-lines file into a list of dictionaries. A truncated final line
    (for example from an interrupted writer) is skipped.
    """
    rows = []
    with open(filename, 'r') as file:
        lines = file.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError:
            if i == len(lines) - 1:
                break
            raise
    return rows


def write_jsonl(rows, filename, append=False):
    """
    Write dictionaries as JSON lines.
    """
    ensure_parent(filename)
    with open(filename, 'a' if append else 'w') as file:
        for row in rows:
            file.write(json.dumps(row, default=native_value, allow_nan=True) + '\n')


def native_value(value):
    """
    Convert numpy values for JSON encoding.
    """
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'cannot encode object of type {type(value).__name__}')


class RecordsCSVIO(protocol.IOProtocol):
    """
    Trial records as comma-separated tables.
    """

    name = 'csv'
    extensions = ('.csv',)

    def load(self, filename):
        return pd.read_csv(filename, dtype={'sample_id': str, 'image_path': str, 'split': str})

    def save(self, frame, filename):
        frame.to_csv(filename, index=False)


class RecordsJSONLIO(protocol.IOProtocol):
    """
    Trial records as one JSON object per line.
    """

    name = 'jsonl'
    extensions = ('.jsonl',)

    def load(self, filename):
        return pd.DataFrame.from_records(read_jsonl(filename))

    def save(self, frame, filename):
        write_jsonl(frame.to_dict(orient='records'), filename)


# enabled IO protocol classes
records_io_protocols = [
    RecordsCSVIO,
    RecordsJSONLIO,
]
