import os
import numpy as np
import pandas as pd

from predix.core.array import minmax_scale
from predix.io.utils import check_file_readability


# default split names keyed by the number of split fractions
default_split_names = {
    1: ('train',),
    2: ('train', 'test'),
    3: ('train', 'val', 'test'),
}


class DatasetManifest:

    columns = ('sample_id', 'image_path', 'x_prog', 'x_pred', 'split')

    def __init__(self, frame, root=None, roles=None):
        """
        Table of dataset samples with their image files, ground-truth biomarker
        values and split labels. Extra columns (for example the raw feature
        values a biomarker was derived from) are carried along untouched.

        Parameters
        ----------
        frame : pd.DataFrame
            Sample table with at least sample_id, image_path, x_prog and x_pred columns.
            If there is no split column, all samples are assigned to 'train'.
        root : str, optional
            Directory that relative image paths are resolved against.
        roles : dict, optional
            Names of the features assigned to the 'prog' and 'pred' roles.
        """
        missing = [c for c in ('sample_id', 'image_path', 'x_prog', 'x_pred') if c not in frame]
        if missing:
            raise ValueError(f'manifest is missing columns: {", ".join(missing)}')

        frame = frame.reset_index(drop=True).copy()
        frame['sample_id'] = frame['sample_id'].astype(str)
        frame['image_path'] = frame['image_path'].astype(str)
        if 'split' not in frame:
            frame['split'] = 'train'
        frame['split'] = frame['split'].astype(str)

        duplicated = frame['sample_id'].duplicated()
        if duplicated.any():
            example = frame['sample_id'][duplicated].iloc[0]
            raise ValueError(f'manifest sample ids must be unique, but {example} is repeated')

        for column in ('x_prog', 'x_pred'):
            frame[column] = _numeric_column(frame[column], column)

        ordered = list(self.columns) + [c for c in frame if c not in self.columns]
        self.frame = frame[ordered]
        self.root = root
        self.roles = dict(roles) if roles is not None else {'prog': 'x_prog', 'pred': 'x_pred'}

    def new(self, frame):
        """
        Return a new manifest with an updated table. Root and roles are preserved.
        """
        return self.__class__(frame, root=self.root, roles=self.roles)

    def __len__(self):
        return len(self.frame)

    def __repr__(self):
        counts = self.frame['split'].value_counts().sort_index()
        splits = ', '.join(f'{k}={v}' for k, v in counts.items())
        return f'DatasetManifest(n={len(self)}, {splits})'

    @property
    def sample_id(self):
        return self.frame['sample_id'].to_numpy()

    @property
    def x_prog(self):
        return self.frame['x_prog'].to_numpy()

    @property
    def x_pred(self):
        return self.frame['x_pred'].to_numpy()

    @property
    def split(self):
        return self.frame['split'].to_numpy()

    def image_files(self):
        """
        Absolute image file paths, resolving relative paths against the manifest root.
        """
        root = self.root if self.root is not None else os.getcwd()
        return [p if os.path.isabs(p) else os.path.normpath(os.path.join(root, p))
                for p in self.frame['image_path']]

    def check_images(self):
        """
        Raise an exception if any referenced image file cannot be read.
        """
        for filename in self.image_files():
            check_file_readability(filename)

    def subset(self, split):
        """
        Extract the samples of a single split.
        """
        return self.new(self.frame[self.frame['split'] == split])

    def with_roles(self, feature_set):
        """
        Configure the biomarker roles. Feature set 'a' keeps the manifest roles,
        while 'b' swaps the prognostic and predictive biomarkers.

        Parameters
        ----------
        feature_set : str
            Either 'a' or 'b'.

        Returns
        -------
        DatasetManifest
        """
        if feature_set == 'a':
            return self.new(self.frame)
        if feature_set != 'b':
            raise ValueError(f"feature set must be 'a' or 'b', but got {feature_set}")
        frame = self.frame.copy()
        frame['x_prog'], frame['x_pred'] = self.frame['x_pred'].to_numpy(), self.frame['x_prog'].to_numpy()
        roles = {'prog': self.roles['pred'], 'pred': self.roles['prog']}
        return self.__class__(frame, root=self.root, roles=roles)

    def normalize(self, columns=('x_prog', 'x_pred'), reference_split='train'):
        """
        Min-max normalize continuous feature columns to [0, 1] using statistics of the
        reference split (all samples if the split is empty). Binary columns with values
        in {0, 1} are passed through. A column that is constant over the reference
        split, binary or not, is an error. Normalizing a normalized manifest is the
        identity.

        Parameters
        ----------
        columns : sequence of str
            Feature columns to normalize.
        reference_split : str
            Split providing the min-max statistics.

        Returns
        -------
        DatasetManifest
        """
        frame = self.frame.copy()
        reference = frame[frame['split'] == reference_split]
        if len(reference) == 0:
            reference = frame
        for column in columns:
            values = frame[column].to_numpy(np.float64)
            lower = reference[column].min()
            upper = reference[column].max()
            if not upper > lower:
                raise ValueError(f'cannot normalize constant feature column {column}')
            if is_binary(values):
                continue
            frame[column] = minmax_scale(values, lower, upper)
        return self.new(frame)

    def save(self, filename, fmt=None):
        """
        Write the manifest to a CSV or JSON file.
        """
        from predix.io.manifest import save_manifest
        save_manifest(self, filename, fmt=fmt)


def is_binary(values):
    """
    Whether all values are exactly 0 or 1.
    """
    values = np.asarray(values)
    return bool(np.all((values == 0) | (values == 1)))


def _numeric_column(series, name):
    """
    Convert a table column to float, raising an exception on non-numeric entries.
    """
    converted = pd.to_numeric(series, errors='coerce')
    bad = converted.isna() & series.notna()
    if bad.any():
        example = series[bad].iloc[0]
        raise ValueError(f'feature column {name} contains non-numeric value {example!r}')
    if converted.isna().any():
        raise ValueError(f'feature column {name} contains missing values')
    return converted.astype(np.float64)


def load_annotation_table(filename, prog_column, pred_column, normalize=True,
                          split_column='split', check_files=True):
    """
    Ingest a table of precomputed image annotations (binary attributes, lesion
    pattern presence, radiomics features, ...) as a dataset manifest.

    The table must contain sample_id and image_path columns in addition to the two
    named feature columns. Relative image paths are resolved against the directory
    of the table.

    Parameters
    ----------
    filename : str
        CSV file to read.
    prog_column : str
        Column holding the prognostic biomarker.
    pred_column : str
        Column holding the predictive biomarker.
    normalize : bool
        Min-max normalize continuous features to [0, 1] with train-split statistics.
    split_column : str
        Column holding split labels. Samples default to 'train' if it is absent.
    check_files : bool
        Verify that all referenced image files exist.

    Returns
    -------
    DatasetManifest
    """
    check_file_readability(filename)
    table = pd.read_csv(filename)

    for column in ('sample_id', 'image_path', prog_column, pred_column):
        if column not in table:
            raise ValueError(f'annotation table {filename} has no column named {column}')

    frame = table.copy()
    frame['x_prog'] = _numeric_column(table[prog_column], prog_column)
    frame['x_pred'] = _numeric_column(table[pred_column], pred_column)
    if split_column in table and split_column != 'split':
        frame['split'] = table[split_column].astype(str)

    root = os.path.dirname(os.path.abspath(filename))
    manifest = DatasetManifest(frame, root=root, roles={'prog': prog_column, 'pred': pred_column})

    if check_files:
        manifest.check_images()
    if normalize:
        manifest = manifest.normalize()
    return manifest


def split_dataset(manifest, fractions, seed=0, names=None):
    """
    Randomly partition samples into splits of the given fractions. Counts are
    rounded with the largest-remainder rule so that they sum to the sample count.

    Parameters
    ----------
    manifest : DatasetManifest
        Samples to split.
    fractions : sequence of float
        Split fractions, each in (0, 1], summing to 1.
    seed : int
        Random seed.
    names : sequence of str, optional
        Split names. Defaults to train/val/test conventions by split count.

    Returns
    -------
    DatasetManifest
        Copy of the manifest with updated split labels.
    """
    fractions = np.asarray(fractions, dtype=np.float64).reshape(-1)
    if fractions.size == 0 or np.any(fractions <= 0) or np.any(fractions > 1):
        raise ValueError(f'split fractions must lie in (0, 1], but got {fractions.tolist()}')
    if not np.isclose(fractions.sum(), 1.0, rtol=0, atol=1e-9):
        raise ValueError(f'split fractions must sum to 1, but got {fractions.sum()}')

    if names is None:
        names = default_split_names.get(len(fractions))
        if names is None:
            names = tuple(f'split{i}' for i in range(len(fractions)))
    if len(names) != len(fractions):
        raise ValueError(f'expected {len(fractions)} split names, but got {len(names)}')

    n = len(manifest)
    exact = fractions * n
    counts = np.floor(exact).astype(int)
    remainder = n - counts.sum()
    order = np.argsort(-(exact - counts), kind='stable')
    counts[order[:remainder]] += 1

    labels = np.repeat(np.asarray(names, dtype=object), counts)
    permutation = np.random.default_rng(seed).permutation(n)
    split = np.empty(n, dtype=object)
    split[permutation] = labels

    frame = manifest.frame.copy()
    frame['split'] = split
    return manifest.new(frame)
