import dataclasses
import warnings
import numpy as np
import pandas as pd


def default_bin_edges(ratios, nbins=6):
    """
    Bin edges over strength ratios b_pred / b_prog: a first bin starting at zero,
    followed by logarithmically spaced bins covering the observed positive finite
    ratios. The last edge lies just above the largest ratio so that every ratio
    falls inside a half-open bin.

    Parameters
    ----------
    ratios : array_like
        Observed strength ratios. Infinite values are ignored.
    nbins : int
        Number of logarithmic bins.

    Returns
    -------
    np.ndarray
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    positive = ratios[np.isfinite(ratios) & (ratios > 0)]
    if positive.size == 0:
        return np.array([0.0, np.inf])
    lower, upper = positive.min(), positive.max()
    if lower == upper:
        return np.array([0.0, lower, np.nextafter(upper, np.inf)])
    edges = np.geomspace(lower, upper, nbins + 1)
    edges[0] = lower
    edges[-1] = np.nextafter(upper, np.inf)
    return np.concatenate([[0.0], edges])


def box_statistics(values):
    """
    Boxplot statistics (median, quartiles, extremes) of a sample. An empty sample
    gives NaN statistics.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return {'median': np.nan, 'q1': np.nan, 'q3': np.nan, 'min': np.nan, 'max': np.nan}
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return {'median': median, 'q1': q1, 'q3': q3, 'min': values.min(), 'max': values.max()}


def _bin_entry(lower, upper, records):
    ratios = [r.ratio for r in records]
    entry = {'lower': float(lower), 'upper': float(upper), 'count': len(records), 'empty': len(records) == 0}
    entry['width'] = float(upper - lower)
    entry.update(box_statistics(ratios))
    entry['bound_lower'] = float(np.median([r.bound_lower['ratio'] for r in records])) if records else np.nan
    entry['bound_upper'] = float(np.median([r.bound_upper['ratio'] for r in records])) if records else np.nan
    return entry


@dataclasses.dataclass
class BinnedSummary:
    """
    Relative predictive strength |t_pred / t_prog| of one model mode, binned over
    the simulated strength ratio b_pred / b_prog.

    Attributes
    ----------
    mode : str
        Model mode.
    feature_set : str
        Feature set of the summarized runs, or 'mixed'.
    edges : np.ndarray
        Bin edges. Bin j covers [edges[j], edges[j + 1]).
    bins : list of dict
        Per-bin statistics: lower, upper, width, count, median, q1, q3, min, max,
        median lower and upper bound ratios, and an empty marker.
    infinite : dict
        Statistics of the runs with b_prog = 0.
    degenerate : int
        Runs excluded for degenerate regressions.
    failed : int
        Runs that did not complete.
    unbinned : int
        Completed runs whose ratio lies outside the bin edges.
    total : int
        All runs of the mode.
    """
    mode: str
    feature_set: str
    edges: np.ndarray
    bins: list
    infinite: dict
    degenerate: int
    failed: int
    unbinned: int
    total: int

    @property
    def counts(self):
        return [b['count'] for b in self.bins]

    def to_frame(self):
        """
        Table with one row per finite bin followed by the infinite-ratio row.
        """
        rows = [{'mode': self.mode, 'feature_set': self.feature_set, 'bin': str(i), **b}
                for i, b in enumerate(self.bins)]
        rows.append({'mode': self.mode, 'feature_set': self.feature_set, 'bin': 'inf', **self.infinite})
        return pd.DataFrame(rows)


def aggregate_bins(records, bin_edges=None):
    """
    Bin the relative predictive strength of grid runs over b_pred / b_prog, per
    model mode. Runs with b_prog = 0 go to a dedicated infinite-ratio bin, while
    failed and degenerate runs are excluded from all bins and counted separately.

    Parameters
    ----------
    records : list of RunRecord
        Grid run records.
    bin_edges : array_like, optional
        Increasing bin edges. Defaults to `default_bin_edges()` over the records.

    Returns
    -------
    dict
        `BinnedSummary` per mode.
    """
    records = list(records)
    if not records:
        raise ValueError('cannot aggregate an empty set of run records')

    if bin_edges is None:
        edges = default_bin_edges([r.strength_ratio for r in records])
    else:
        edges = np.asarray(bin_edges, dtype=np.float64)
        if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError(f'bin edges must be strictly increasing with at least two values, but got {edges}')

    feature_sets = sorted({r.feature_set for r in records})
    feature_set = feature_sets[0] if len(feature_sets) == 1 else 'mixed'

    summaries = {}
    for mode in sorted({r.mode for r in records}):
        group = [r for r in records if r.mode == mode]
        failed = [r for r in group if not r.done]
        degenerate = [r for r in group if r.done and r.degenerate]
        valid = [r for r in group if r.done and not r.degenerate]
        infinite = [r for r in valid if r.b_prog == 0]
        finite = [r for r in valid if r.b_prog != 0]

        index = np.searchsorted(edges, [r.strength_ratio for r in finite], side='right') - 1
        members = [[] for _ in range(len(edges) - 1)]
        unbinned = 0
        for record, i in zip(finite, index):
            if 0 <= i < len(members):
                members[i].append(record)
            else:
                unbinned += 1

        bins = [_bin_entry(edges[i], edges[i + 1], m) for i, m in enumerate(members)]
        empty = sum(b['empty'] for b in bins)
        if empty:
            warnings.warn(f'{empty} of {len(bins)} {mode} bins contain no valid runs')

        summaries[mode] = BinnedSummary(
            mode=mode,
            feature_set=feature_set,
            edges=edges,
            bins=bins,
            infinite=_bin_entry(np.inf, np.inf, infinite),
            degenerate=len(degenerate),
            failed=len(failed),
            unbinned=unbinned,
            total=len(group),
        )
    return summaries
