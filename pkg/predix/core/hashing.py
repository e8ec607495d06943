import json
import numpy as np

from xxhash import xxh3_64_intdigest
from xxhash import xxh3_64_hexdigest


def record_seed(seed, sample_id, stream=''):
    """
    Derive a per-record integer seed from a global seed and a sample identifier.

    Seeding each record independently means subsetting or reordering a dataset
    never changes the random draws of the remaining records.

    Parameters
    ----------
    seed : int
        Global seed.
    sample_id : str
        Unique sample identifier.
    stream : str
        Optional stream name to decorrelate different uses of the same record.

    Returns
    -------
    int
        64-bit seed.
    """
    return xxh3_64_intdigest(f'{int(seed)}:{stream}:{sample_id}')


def record_rng(seed, sample_id, stream=''):
    """
    Numpy random generator dedicated to a single record. See `record_seed()`.
    """
    return np.random.default_rng(record_seed(seed, sample_id, stream))


def stable_hash(obj):
    """
    Hex digest of a JSON-serializable object. Dictionary key order does not matter.

    Parameters
    ----------
    obj : any
        JSON-serializable object.

    Returns
    -------
    str
        16-character hex digest.
    """
    text = json.dumps(obj, sort_keys=True, separators=(',', ':'), default=_jsonify)
    return xxh3_64_hexdigest(text)


def _jsonify(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'cannot hash object of type {type(value).__name__}')
