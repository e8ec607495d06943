import os
import pathlib
import numpy as np


def check_file_readability(filename):
    """
    Raise an exception if a path is not a readable file: ValueError for
    directories, FileNotFoundError for missing files, PermissionError otherwise.
    """
    path = pathlib.Path(filename)
    if path.is_dir():
        raise ValueError(f'{path} is a directory, not a file')
    if not path.is_file():
        raise FileNotFoundError(f'{path} is not a file')
    if not os.access(path, os.R_OK):
        raise PermissionError(f'{path} is not a readable file')


def ensure_parent(filename):
    """
    Create the parent directory of a file path if it does not exist.
    """
    os.makedirs(os.path.dirname(os.path.abspath(filename)), exist_ok=True)


def read_int(file, size=4, signed=True):
    """
    Read a big-endian integer of `size` bytes from an open binary file.
    """
    buffer = file.read(size)
    if len(buffer) != size:
        raise ValueError(f'unexpected end of file, expected a {size}-byte integer')
    return int.from_bytes(buffer, byteorder='big', signed=signed)


def write_int(file, value, size=4, signed=True):
    """
    Write a big-endian integer of `size` bytes to an open binary file.
    """
    file.write(int(value).to_bytes(size, byteorder='big', signed=signed))


def read_bytes(file, dtype, count):
    """
    Read `count` elements of a numpy dtype from an open binary file.

    Parameters
    ----------
    file : BufferedReader
        Open binary file.
    dtype : np.dtype
        Element type, including byte order, e.g. '>f8'.
    count : int
        Number of elements.

    Returns
    -------
    (count,) np.ndarray
    """
    dtype = np.dtype(dtype)
    nbytes = dtype.itemsize * count
    buffer = file.read(nbytes)
    if len(buffer) != nbytes:
        raise ValueError(f'unexpected end of file, expected {count} elements of {dtype}')
    return np.frombuffer(buffer, dtype=dtype)


def write_bytes(file, values, dtype):
    """
    Write an array to an open binary file as the given numpy dtype.
    """
    file.write(np.asarray(values).astype(dtype, copy=False).tobytes())
