import os
import json
import time
import dataclasses
import itertools
import multiprocessing
import numpy as np

from predix.core.hashing import stable_hash
from predix.io.records import read_jsonl
from predix.io.records import native_value
from predix.io.utils import ensure_parent
from predix.model import ModelSpec
from predix.model import TrainConfig
from predix.model import train
from predix.sim import OutcomeSimConfig
from predix.sim import build_rct_dataset
from predix.stats import fit_interaction_ols
from predix.stats import predictive_strength
from predix.stats import compute_bounds
from predix.pipeline import log_message


run_statuses = ('done', 'failed')


@dataclasses.dataclass
class GridSpec:
    """
    Grid of simulate, train and evaluate runs over biomarker strengths.

    Attributes
    ----------
    b_values : list of float
        Strengths used for both b_prog and b_pred. The grid covers every pair.
    feature_sets : list of str
        Biomarker role configurations, 'a' and/or 'b'.
    seeds : list of int
        Replication seeds. Each seed drives outcome simulation and training.
    modes : list of str
        Model modes, 'two_head' and/or 'single_head'.
    dataset_id : str
        Identifier of the dataset the grid runs on.
    model : dict
        Architecture options shared by both modes (encoder, head). The input shape
        is taken from the images.
    training : dict
        `TrainConfig` options. The seed is overridden per run.
    noise_sd : float
        Outcome noise standard deviation.
    p_treat : float
        Treatment probability.
    workers : int
        Number of worker processes.
    """
    b_values: list = dataclasses.field(default_factory=lambda: [0.0, 0.2, 0.4, 0.6, 0.8, 1.0])
    feature_sets: list = dataclasses.field(default_factory=lambda: ['a'])
    seeds: list = dataclasses.field(default_factory=lambda: [0])
    modes: list = dataclasses.field(default_factory=lambda: ['two_head', 'single_head'])
    dataset_id: str = 'dataset'
    model: dict = dataclasses.field(default_factory=dict)
    training: dict = dataclasses.field(default_factory=dict)
    noise_sd: float = 0.0
    p_treat: float = 0.5
    workers: int = 1

    def __post_init__(self):
        self.b_values = [float(b) for b in self.b_values]
        self.seeds = [int(s) for s in self.seeds]
        self.feature_sets = list(self.feature_sets)
        self.modes = list(self.modes)
        for name in ('b_values', 'seeds', 'feature_sets', 'modes'):
            values = getattr(self, name)
            if not values:
                raise ValueError(f'grid {name} must not be empty')
            if len(set(values)) != len(values):
                raise ValueError(f'grid {name} contains duplicates: {values}')
        if any(b < 0 or not np.isfinite(b) for b in self.b_values):
            raise ValueError(f'biomarker strengths must be finite and non-negative, but got {self.b_values}')
        if not set(self.feature_sets) <= {'a', 'b'}:
            raise ValueError(f"feature sets must be 'a' or 'b', but got {self.feature_sets}")
        if not set(self.modes) <= {'two_head', 'single_head'}:
            raise ValueError(f"model modes must be 'two_head' or 'single_head', but got {self.modes}")
        if self.workers < 1:
            raise ValueError(f'worker count must be positive, but got {self.workers}')
        # validates the simulation options early
        OutcomeSimConfig(noise_sd=self.noise_sd, p_treat=self.p_treat)
        TrainConfig.from_dict(self.training)

    @classmethod
    def from_dict(cls, params):
        return cls(**{k: v for k, v in params.items() if v is not None})

    def to_dict(self):
        return dataclasses.asdict(self)

    def size(self):
        """
        Total number of runs: |b_values|^2 per seed, mode and feature set.
        """
        return len(self.b_values) ** 2 * len(self.seeds) * len(self.modes) * len(self.feature_sets)

    def model_spec(self, mode, input_shape):
        """
        Model architecture for a mode and image shape.
        """
        options = {k: v for k, v in self.model.items() if k not in ('mode', 'input_shape')}
        return ModelSpec(mode=mode, input_shape=tuple(input_shape), **options)

    def train_config(self, seed):
        """
        Training configuration of a replication seed.
        """
        return TrainConfig.from_dict({**self.training, 'seed': seed})

    def runs(self, input_shape):
        """
        Yield run descriptors in deterministic order.
        """
        for feature_set, mode, seed, b_prog, b_pred in itertools.product(
                self.feature_sets, self.modes, self.seeds, self.b_values, self.b_values):
            model_id = stable_hash({
                'model': self.model_spec(mode, input_shape).to_dict(),
                'training': self.train_config(seed).to_dict(),
                'noise_sd': self.noise_sd,
                'p_treat': self.p_treat,
            })
            yield {
                'run_key': run_key(self.dataset_id, b_prog, b_pred, mode, seed, model_id, feature_set),
                'b_prog': b_prog,
                'b_pred': b_pred,
                'mode': mode,
                'seed': seed,
                'feature_set': feature_set,
            }


def run_key(dataset_id, b_prog, b_pred, mode, seed, model_id, feature_set='a'):
    """
    Identifier of a grid run, stable across processes and restarts.
    """
    return stable_hash({
        'dataset': dataset_id,
        'b_prog': float(b_prog),
        'b_pred': float(b_pred),
        'mode': mode,
        'seed': int(seed),
        'model': model_id,
        'feature_set': feature_set,
    })


@dataclasses.dataclass
class RunRecord:
    """
    Outcome of a single grid run. The relative predictive strength of the model's
    candidate is stored flat (t_pred, t_prog, ratio, degenerate), the ground-truth
    bounds as nested `PredictiveStrength` dictionaries.
    """
    run_key: str
    b_prog: float
    b_pred: float
    mode: str
    seed: int
    feature_set: str
    t_pred: float = float('nan')
    t_prog: float = float('nan')
    ratio: float = float('nan')
    degenerate: bool = False
    bound_lower: dict = None
    bound_upper: dict = None
    status: str = 'done'
    wall_time_s: float = 0.0
    error: str = None

    def __post_init__(self):
        if self.status not in run_statuses:
            raise ValueError(f'run status must be one of {", ".join(run_statuses)}, but got {self.status}')

    @property
    def strength_ratio(self):
        """
        Simulated strength ratio b_pred / b_prog, +inf for b_prog = 0.
        """
        if self.b_prog == 0:
            return np.inf
        return self.b_pred / self.b_prog

    @property
    def done(self):
        return self.status == 'done'

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, content):
        fields = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in content.items() if k in fields})


class ResultStore:

    def __init__(self, filename):
        """
        Append-only JSON-lines store of grid run records. Every record is flushed
        and synced to disk as it is appended, and reading keeps the most recent
        record of each run key, so an interrupted grid resumes where it stopped.

        Parameters
        ----------
        filename : str
            Store file path. Created on first append.
        """
        self.filename = str(filename)
        self._records = {}
        if os.path.isfile(self.filename):
            for content in read_jsonl(self.filename):
                record = RunRecord.from_dict(content)
                self._records[record.run_key] = record

    def __len__(self):
        return len(self._records)

    def __contains__(self, key):
        return key in self._records

    def __repr__(self):
        return f'ResultStore({self.filename}, records={len(self)})'

    def get(self, key):
        return self._records.get(key)

    def completed(self, key):
        """
        Whether a run key has a successful record.
        """
        record = self._records.get(key)
        return record is not None and record.done

    def records(self, keys=None):
        """
        Latest record of each run key, optionally restricted to a set of keys.
        """
        if keys is None:
            return list(self._records.values())
        return [self._records[k] for k in keys if k in self._records]

    def append(self, record):
        """
        Append a record and sync it to disk.
        """
        ensure_parent(self.filename)
        line = json.dumps(record.to_dict(), default=native_value)
        with open(self.filename, 'a') as file:
            file.write(line + '\n')
            file.flush()
            os.fsync(file.fileno())
        self._records[record.run_key] = record


def execute_run(spec, manifest, images, run):
    """
    Execute one grid run: simulate outcomes for the run's biomarker strengths,
    train the model on the train (and val) splits, compute the biomarker
    candidate on the test split, and evaluate it together with the
    ground-truth bounds. Exceptions are captured in a failed record.

    Parameters
    ----------
    spec : GridSpec
        Grid configuration.
    manifest : DatasetManifest
        Dataset manifest in feature set 'a' roles.
    images : (n, channels, height, width) np.ndarray
        Images in manifest order.
    run : dict
        Run descriptor from `GridSpec.runs()`.

    Returns
    -------
    RunRecord
    """
    start = time.perf_counter()
    try:
        roles = manifest.with_roles(run['feature_set'])
        config = OutcomeSimConfig(b_prog=run['b_prog'], b_pred=run['b_pred'],
                                  noise_sd=spec.noise_sd, p_treat=spec.p_treat, seed=run['seed'])
        dataset = build_rct_dataset(roles, config)
        model = train(dataset, images,
                      spec=spec.model_spec(run['mode'], images.shape[1:]),
                      cfg=spec.train_config(run['seed']))

        mask = roles.split == 'test'
        if not mask.any():
            mask = np.ones(len(dataset), dtype=bool)
        test = dataset.subset(mask=mask)
        candidate = model.candidate(images[mask])
        strength = predictive_strength(fit_interaction_ols(candidate, test.T, test.Y))
        lower, upper = compute_bounds(test.x_prog, test.x_pred, test.T, test.Y)
    except Exception as error:
        return RunRecord(**run, status='failed', error=f'{type(error).__name__}: {error}',
                         wall_time_s=time.perf_counter() - start)

    return RunRecord(**run,
                     t_pred=strength.t_pred,
                     t_prog=strength.t_prog,
                     ratio=strength.ratio,
                     degenerate=strength.degenerate,
                     bound_lower=lower.to_dict(),
                     bound_upper=upper.to_dict(),
                     wall_time_s=time.perf_counter() - start)


# grid context shared with pool workers
_context = {}


def _initialize_worker(spec, manifest, images):
    _context.update(spec=spec, manifest=manifest, images=images)
    # one thread per worker process, the pool provides the parallelism
    import torch
    torch.set_num_threads(1)


def _execute_in_worker(run):
    return execute_run(_context['spec'], _context['manifest'], _context['images'], run)


def run_grid(spec, manifest, images, store, workers=None, max_runs=None, log=None):
    """
    Execute all grid runs that do not yet have a successful record in the
    store. Failed runs are recorded with status 'failed' and retried on the next
    invocation.

    Parameters
    ----------
    spec : GridSpec
        Grid configuration.
    manifest : DatasetManifest
        Dataset manifest in feature set 'a' roles.
    images : (n, channels, height, width) array_like
        Images in manifest order.
    store : ResultStore
        Append-only result store.
    workers : int, optional
        Number of worker processes. Defaults to `spec.workers`.
    max_runs : int, optional
        Stop after executing this many runs.
    log : ExperimentLog, optional
        Progress log.

    Returns
    -------
    list of RunRecord
        Latest records of all runs in the grid, in grid order.
    """
    images = np.asarray(images, dtype=np.float32)
    if len(images) != len(manifest):
        raise ValueError(f'got {len(images)} images for {len(manifest)} manifest samples')
    workers = spec.workers if workers is None else int(workers)

    runs = list(spec.runs(images.shape[1:]))
    pending = [run for run in runs if not store.completed(run['run_key'])]
    log_message(log, f'{len(runs)} grid runs, {len(runs) - len(pending)} already completed')
    if max_runs is not None:
        pending = pending[:max_runs]

    def describe(record):
        return (f"feature_set={record.feature_set} mode={record.mode} seed={record.seed} "
                f"b_prog={record.b_prog:g} b_pred={record.b_pred:g}")

    def collect(record):
        store.append(record)
        if record.done:
            log_message(log, f'{describe(record)} ratio={record.ratio:.4g} '
                             f'({record.wall_time_s:.1f}s)', tag='run')
        else:
            log_message(log, f'{describe(record)} failed: {record.error}', tag='warn')

    if workers > 1 and len(pending) > 1:
        with multiprocessing.get_context('spawn').Pool(
                workers, initializer=_initialize_worker, initargs=(spec, manifest, images)) as pool:
            for record in pool.imap(_execute_in_worker, pending):
                collect(record)
    else:
        for run in pending:
            collect(execute_run(spec, manifest, images, run))

    return store.records([run['run_key'] for run in runs])
