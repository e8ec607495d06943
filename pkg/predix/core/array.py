import numpy as np


def as_vector(arr, name=None, dtype=np.float64):
    """
    Convert an input to a 1D vector of a particular dtype.

    Parameters
    ----------
    arr : array_like
        Array to convert. Scalars become length-1 vectors.
    name : str
        Name of the array for error messages.
    dtype : np.dtype
        Target dtype.

    Returns
    -------
    np.ndarray
        1D array.
    """
    name = 'array' if name is None else name
    arr = np.asarray(arr, dtype=dtype)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f'{name} must be 1 dimensional, but got {arr.ndim} ndims')
    return arr


def check_finite(arr, name=None):
    """
    Throw an exception if an array contains NaN or infinite values.

    Parameters
    ----------
    arr : array_like
        Array to check.
    name : str
        Name of checked array for error messages.
    """
    name = 'array' if name is None else name
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        bad = np.count_nonzero(~np.isfinite(arr))
        raise ValueError(f'{name} contains {bad} non-finite values')


def check_equal_length(**vectors):
    """
    Throw an exception if the named vectors do not all have the same length.
    """
    lengths = {k: len(v) for k, v in vectors.items()}
    if len(set(lengths.values())) > 1:
        desc = ', '.join(f'{k}={n}' for k, n in lengths.items())
        raise ValueError(f'input vectors must have equal lengths, but got {desc}')


def zscore(vec):
    """
    Standardize a vector to zero mean and unit (population) standard deviation.

    Parameters
    ----------
    vec : array_like
        Vector to standardize.

    Returns
    -------
    scaled : np.ndarray
        Standardized vector.
    mean : float
        Subtracted mean.
    std : float
        Divisor. Zero for a constant vector, in which case the centered
        (all-zero) vector is returned.
    """
    vec = np.asarray(vec, dtype=np.float64)
    mean = vec.mean()
    centered = vec - mean
    std = np.sqrt(np.mean(centered * centered))
    # catch constant vectors up to rounding
    if std <= np.finfo(np.float64).eps * max(1.0, np.abs(mean)) * 16:
        return np.zeros_like(vec), mean, 0.0
    return centered / std, mean, std


def minmax_scale(vec, lower, upper):
    """
    Linearly rescale values so that `lower` maps to 0 and `upper` maps to 1.

    Parameters
    ----------
    vec : array_like
        Values to rescale.
    lower, upper : float
        Reference range (usually training-split statistics).

    Returns
    -------
    np.ndarray
    """
    if not upper > lower:
        raise ValueError(f'cannot min-max scale with a zero range ({lower} to {upper})')
    return (np.asarray(vec, dtype=np.float64) - lower) / (upper - lower)
