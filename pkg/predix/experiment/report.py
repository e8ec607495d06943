import os
import numpy as np
import pandas as pd
import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from predix.io.records import write_jsonl
from predix.io.utils import ensure_parent


mode_colors = {'two_head': 'tab:blue', 'single_head': 'tab:orange'}

# column order of the binned summary table
summary_columns = ('feature_set', 'mode', 'bin', 'lower', 'upper', 'width', 'count', 'median',
                   'q1', 'q3', 'min', 'max', 'bound_lower', 'bound_upper', 'empty')


def _sort_key(record):
    return (record.feature_set, record.mode, record.b_prog, record.b_pred, record.seed)


def write_summary_table(summaries, filename):
    """
    Write binned summaries as a CSV table with fixed float formatting, one row per
    bin (including the infinite-ratio bin) per mode.
    """
    frames = [s.to_frame() for s in sorted(summaries, key=lambda s: (s.feature_set, s.mode))]
    table = pd.concat(frames, ignore_index=True)[list(summary_columns)]
    ensure_parent(filename)
    table.to_csv(filename, index=False, float_format='%.10g')
    return table


def _display_edges(edges, min_factor=2.0):
    """
    Bin edges usable on a logarithmic axis. A zero lower edge is replaced by one
    logarithmic step below the next edge, an infinite upper edge by one step above
    the previous edge, and every bin is widened to span at least `min_factor`.
    """
    edges = np.asarray(edges, dtype=np.float64).copy()
    finite = edges[np.isfinite(edges) & (edges > 0)]
    if finite.size == 0:
        return None
    if edges[0] <= 0:
        step = finite[1] / finite[0] if finite.size > 1 else 10.0
        edges[0] = finite[0] / max(step, min_factor)
    if not np.isfinite(edges[-1]):
        step = edges[-2] / edges[-3] if len(edges) > 2 else 10.0
        edges[-1] = edges[-2] * max(step, min_factor)
    for i in range(1, len(edges)):
        edges[i] = max(edges[i], edges[i - 1] * min_factor)
    return edges


def _mode_positions(lower, upper, frac):
    """
    Marker positions inside each bin, a fraction `frac` in (-0.5, 0.5) of the bin's
    logarithmic width away from its geometric center.
    """
    return lower * (upper / lower) ** (0.5 + frac)


def plot_summaries(summaries, filename, title=None):
    """
    Log-log boxplots of the relative predictive strength per strength-ratio bin,
    one box series per model mode, with horizontal bars marking the bin widths and
    dashed lines for the median lower and upper bounds.

    Parameters
    ----------
    summaries : list of BinnedSummary
        Summaries sharing the same bin edges, typically one per mode.
    filename : str
        Output image path.
    title : str, optional
        Figure title.
    """
    summaries = sorted(summaries, key=lambda s: s.mode, reverse=True)
    fig, ax = plt.subplots(figsize=(7, 5))

    for frac, summary in zip(np.linspace(-0.2, 0.2, len(summaries)), summaries):
        edges = _display_edges(summary.edges)
        if edges is None:
            continue
        lower, upper = edges[:-1], edges[1:]
        centers = _mode_positions(lower, upper, frac)
        color = mode_colors.get(summary.mode, 'tab:gray')
        filled = [i for i, b in enumerate(summary.bins) if not b['empty'] and b['median'] > 0]
        if not filled:
            continue

        stats = [{
            'med': summary.bins[i]['median'],
            'q1': summary.bins[i]['q1'],
            'q3': summary.bins[i]['q3'],
            'whislo': summary.bins[i]['min'],
            'whishi': summary.bins[i]['max'],
            'label': summary.mode,
        } for i in filled]
        widths = [0.25 * centers[i] for i in filled]
        ax.bxp(stats, positions=centers[filled], widths=widths, showfliers=False, manage_ticks=False,
               boxprops={'color': color}, medianprops={'color': color}, whiskerprops={'color': color},
               capprops={'color': color})

        medians = np.array([summary.bins[i]['median'] for i in filled])
        ax.errorbar(centers[filled], medians, xerr=[np.clip(centers[filled] - lower[filled], 0, None),
                                                       np.clip(upper[filled] - centers[filled], 0, None)],
                    fmt='none', ecolor=color, alpha=0.5, label=f'{summary.mode} (n={sum(summary.counts)})')

    reference = summaries[0] if summaries else None
    if reference is not None and _display_edges(reference.edges) is not None:
        edges = _display_edges(reference.edges)
        centers = np.sqrt(edges[:-1] * edges[1:])
        for key, style in (('bound_upper', '--'), ('bound_lower', ':')):
            values = np.array([b[key] for b in reference.bins], dtype=np.float64)
            valid = np.isfinite(values) & (values > 0)
            if valid.any():
                ax.plot(centers[valid], values[valid], style, color='black', label=key.replace('_', ' '))

    ax.set_xscale('log')
    ax.set_yscale('log')
    ax.set_xlabel('b_pred / b_prog')
    ax.set_ylabel('|t_pred / t_prog|')
    if title is not None:
        ax.set_title(title)
    ax.legend(loc='best', fontsize='small')
    fig.tight_layout()
    ensure_parent(filename)
    fig.savefig(filename, dpi=150)
    plt.close(fig)


def emit_report(summaries, records, out_dir, dataset_id='dataset', figure=True):
    """
    Write the grid report: all run records as JSON lines, the binned summaries as
    CSV, and a boxplot figure per feature set.

    Parameters
    ----------
    summaries : dict or list of BinnedSummary
        Binned summaries, as returned by `aggregate_bins()` (possibly merged over
        feature sets).
    records : list of RunRecord
        Run records.
    out_dir : str
        Output directory.
    dataset_id : str
        Dataset identifier used in figure names.
    figure : bool
        Render the figures.

    Returns
    -------
    dict
        Written file paths by kind ('records', 'summary', 'figures').
    """
    records = list(records)
    if not records:
        raise ValueError('cannot emit a report without run records')
    summaries = list(summaries.values()) if isinstance(summaries, dict) else list(summaries)
    if not summaries:
        raise ValueError('cannot emit a report without binned summaries')

    os.makedirs(out_dir, exist_ok=True)
    paths = {
        'records': os.path.join(out_dir, 'records.jsonl'),
        'summary': os.path.join(out_dir, 'summary.csv'),
        'figures': [],
    }
    write_jsonl([r.to_dict() for r in sorted(records, key=_sort_key)], paths['records'])
    write_summary_table(summaries, paths['summary'])

    if figure:
        for feature_set in sorted({s.feature_set for s in summaries}):
            group = [s for s in summaries if s.feature_set == feature_set]
            filename = os.path.join(out_dir, f'strength_{dataset_id}_{feature_set}.png')
            plot_summaries(group, filename, title=f'{dataset_id}, feature set {feature_set}')
            paths['figures'].append(filename)

    return paths
