import dataclasses
import numpy as np
import pandas as pd

from predix.core.array import as_vector
from predix.core.array import check_finite
from predix.core.array import check_equal_length
from predix.core.hashing import record_rng


@dataclasses.dataclass(frozen=True)
class OutcomeSimConfig:
    """
    Parameters of the linear outcome model

        Y = b_prog * x_prog + b_pred * x_pred * T + noise

    Attributes
    ----------
    b_prog : float
        Prognostic strength (non-negative).
    b_pred : float
        Predictive strength (non-negative).
    noise_sd : float
        Standard deviation of additive Gaussian noise. Zero disables noise.
    p_treat : float
        Probability of assignment to the treatment arm.
    seed : int
        Seed for treatment assignment and noise.
    """
    b_prog: float = 1.0
    b_pred: float = 1.0
    noise_sd: float = 0.0
    p_treat: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for field in ('b_prog', 'b_pred', 'noise_sd'):
            value = getattr(self, field)
            if not np.isfinite(value) or value < 0:
                raise ValueError(f'{field} must be a finite non-negative number, but got {value}')
        if not 0 <= self.p_treat <= 1:
            raise ValueError(f'p_treat must be a probability in [0, 1], but got {self.p_treat}')

    @classmethod
    def from_dict(cls, params):
        """
        Build a config from a dictionary, ignoring None values.
        """
        return cls(**{k: v for k, v in params.items() if v is not None})

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        """
        Return a copy with updated fields.
        """
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class RCTRecord:
    """
    A single simulated trial subject.
    """
    sample_id: str
    x_prog: float
    x_pred: float
    T: int
    Y: float


def assign_treatment(n, p_treat=0.5, seed=0):
    """
    Randomized treatment assignment with independent Bernoulli draws.

    Parameters
    ----------
    n : int
        Number of subjects.
    p_treat : float
        Treatment probability.
    seed : int
        Random seed.

    Returns
    -------
    T : (n,) int np.ndarray
        Binary treatment indicators.
    """
    n = int(n)
    if n < 1:
        raise ValueError('cannot assign treatments to an empty dataset')
    if not 0 <= p_treat <= 1:
        raise ValueError(f'p_treat must be a probability in [0, 1], but got {p_treat}')
    rng = np.random.default_rng(seed)
    return (rng.random(n) < p_treat).astype(np.int64)


def simulate_outcomes(records, config, sample_ids=None):
    """
    Evaluate the linear outcome model for a set of subjects. There is no intercept
    and no constant treatment effect.

    Parameters
    ----------
    records : (n, 3) array_like
        Rows of (x_prog, x_pred, T).
    config : OutcomeSimConfig
        Simulation parameters.
    sample_ids : list of str, optional
        Sample identifiers. When given, noise is drawn from per-record streams so
        that each record's outcome does not depend on dataset order.

    Returns
    -------
    Y : (n,) float np.ndarray
        Simulated outcomes.
    """
    records = np.asarray(records, dtype=np.float64)
    if records.ndim != 2 or records.shape[1] != 3:
        raise ValueError(f'records must be an (n, 3) array of (x_prog, x_pred, T), '
                         f'but got shape {records.shape}')
    check_finite(records, name='biomarker records')

    x_prog, x_pred, T = records.T
    if not np.all(np.isin(T, (0, 1))):
        raise ValueError('treatment indicators must be 0 or 1')

    Y = config.b_prog * x_prog + config.b_pred * x_pred * T

    if config.noise_sd > 0:
        if sample_ids is None:
            noise = np.random.default_rng(config.seed).standard_normal(len(Y))
        else:
            check_equal_length(records=records, sample_ids=sample_ids)
            noise = np.array([record_rng(config.seed, sid, 'noise').standard_normal()
                              for sid in sample_ids])
        Y = Y + config.noise_sd * noise

    return Y


def potential_outcomes(x_prog, x_pred, config):
    """
    Noiseless potential outcomes under both arms.

    Parameters
    ----------
    x_prog, x_pred : array_like
        Ground-truth biomarker values.
    config : OutcomeSimConfig
        Simulation parameters.

    Returns
    -------
    y0, y1 : np.ndarray
        Outcomes under control and treatment. Their difference is the true
        conditional treatment effect `b_pred * x_pred`.
    """
    x_prog = as_vector(x_prog, name='x_prog')
    x_pred = as_vector(x_pred, name='x_pred')
    y0 = config.b_prog * x_prog
    y1 = y0 + config.b_pred * x_pred
    return y0, y1


class RCTDataset:

    columns = ('sample_id', 'image_path', 'split', 'x_prog', 'x_pred', 'T', 'Y')

    def __init__(self, frame, config=None):
        """
        Columnar collection of simulated trial records.

        Parameters
        ----------
        frame : pd.DataFrame
            Table with at least the columns sample_id, x_prog, x_pred, T, and Y.
            The image_path and split columns are optional.
        config : OutcomeSimConfig, optional
            Simulation parameters the outcomes were generated with.
        """
        missing = [c for c in ('sample_id', 'x_prog', 'x_pred', 'T', 'Y') if c not in frame]
        if missing:
            raise ValueError(f'RCT dataset is missing columns: {", ".join(missing)}')
        frame = frame.reset_index(drop=True).copy()
        frame['sample_id'] = frame['sample_id'].astype(str)
        frame['T'] = frame['T'].astype(np.int64)
        for column in ('x_prog', 'x_pred', 'Y'):
            frame[column] = frame[column].astype(np.float64)
        self.frame = frame
        self.config = config

    def __len__(self):
        return len(self.frame)

    def __repr__(self):
        n0, n1 = self.arm_counts()
        return f'RCTDataset(n={len(self)}, control={n0}, treated={n1})'

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
    def T(self):
        return self.frame['T'].to_numpy()

    @property
    def Y(self):
        return self.frame['Y'].to_numpy()

    @property
    def records(self):
        """
        List of `RCTRecord` objects.
        """
        return [RCTRecord(str(r.sample_id), float(r.x_prog), float(r.x_pred), int(r.T), float(r.Y))
                for r in self.frame.itertuples(index=False)]

    def split_mask(self, split):
        """
        Boolean mask of the rows belonging to a split.
        """
        if 'split' not in self.frame:
            raise ValueError('RCT dataset has no split column')
        return (self.frame['split'] == split).to_numpy()

    def subset(self, split=None, mask=None):
        """
        Extract a subset of records by split name or boolean mask.
        """
        if split is not None:
            mask = self.split_mask(split)
        if mask is None:
            raise ValueError('subset requires a split name or a mask')
        return RCTDataset(self.frame[np.asarray(mask)], config=self.config)

    def arm_counts(self):
        """
        Returns the (control, treated) record counts.
        """
        treated = int(self.frame['T'].sum())
        return len(self) - treated, treated

    def to_frame(self):
        """
        Copy of the underlying table with columns in canonical order.
        """
        ordered = [c for c in self.columns if c in self.frame]
        extra = [c for c in self.frame if c not in ordered]
        return self.frame[ordered + extra].copy()

    def save(self, filename, fmt=None):
        """
        Write records to a CSV or JSONL file.
        """
        from predix.io.records import save_rct_dataset
        save_rct_dataset(self, filename, fmt=fmt)


def build_rct_dataset(manifest, config):
    """
    Randomize subjects of a dataset manifest into treatment arms and simulate
    their outcomes. Treatment draws and noise come from per-record random streams
    derived from (config.seed, sample_id).

    Parameters
    ----------
    manifest : DatasetManifest or pd.DataFrame
        Samples with sample_id, x_prog and x_pred columns.
    config : OutcomeSimConfig
        Simulation parameters.

    Returns
    -------
    RCTDataset
    """
    frame = getattr(manifest, 'frame', manifest)
    if frame is None or len(frame) == 0:
        raise ValueError('cannot build an RCT dataset from an empty manifest')

    missing = [c for c in ('sample_id', 'x_prog', 'x_pred') if c not in frame]
    if missing:
        raise ValueError(f'manifest is missing biomarker columns: {", ".join(missing)}')

    sample_ids = frame['sample_id'].astype(str).tolist()
    T = np.array([record_rng(config.seed, sid, 'treatment').random() < config.p_treat
                  for sid in sample_ids], dtype=np.int64)

    x = np.stack([frame['x_prog'].to_numpy(np.float64), frame['x_pred'].to_numpy(np.float64), T], axis=-1)
    Y = simulate_outcomes(x, config, sample_ids=sample_ids)

    table = pd.DataFrame({'sample_id': sample_ids})
    for column in ('image_path', 'split'):
        if column in frame:
            table[column] = frame[column].to_numpy()
    table['x_prog'] = x[:, 0]
    table['x_pred'] = x[:, 1]
    table['T'] = T
    table['Y'] = Y
    return RCTDataset(table, config=config)
