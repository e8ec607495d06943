import os
import json
import pytest
import numpy as np

from predix.data import ColoredDigitSpec
from predix.data import generate_colored_digits
from predix.data import render_glyph_digits
from predix.experiment import GridSpec
from predix.experiment import RunRecord
from predix.experiment import ResultStore
from predix.experiment import run_grid
from predix.experiment import run_key
from predix.experiment import aggregate_bins
from predix.experiment import default_bin_edges
from predix.experiment import box_statistics
from predix.experiment import emit_report
from predix.experiment import load_config
from predix.experiment import apply_override
from predix.experiment.report import _display_edges
from predix.experiment.report import _mode_positions


tiny_model = {
    'encoder': [{'type': 'conv', 'channels': 2, 'kernel': 3, 'padding': 1},
                {'type': 'relu'},
                {'type': 'maxpool', 'size': 2}],
    'head': [{'type': 'linear', 'units': 4}, {'type': 'relu'}, {'type': 'linear', 'units': 1}],
}


@pytest.fixture(scope='module')
def corpus():
    digits, labels = render_glyph_digits(80, size=8, seed=0)
    return generate_colored_digits(digits, labels, spec=ColoredDigitSpec(image_size=8),
                                   seed=0, fractions=(0.5, 0.5))


def tiny_grid(**kwargs):
    options = dict(b_values=[0.5, 1.0], seeds=[0], modes=['two_head', 'single_head'],
                   dataset_id='tiny', model=tiny_model, training={'epochs': 1, 'batch_size': 16})
    options.update(kwargs)
    return GridSpec(**options)


def make_record(b_prog, b_pred, mode='two_head', ratio=1.0, status='done', degenerate=False,
                feature_set='a', seed=0):
    bound = {'t_pred': 1.0, 't_prog': 1.0, 'ratio': 1.0, 'degenerate': False}
    return RunRecord(
        run_key=run_key('test', b_prog, b_pred, mode, seed, 'model', feature_set),
        b_prog=b_prog, b_pred=b_pred, mode=mode, seed=seed, feature_set=feature_set,
        t_pred=ratio, t_prog=1.0, ratio=ratio, degenerate=degenerate,
        bound_lower={**bound, 'ratio': 0.01}, bound_upper={**bound, 'ratio': 100.0},
        status=status,
    )


def test_grid_spec():
    """
    Test grid size, run order, key uniqueness, and validation.
    """
    spec = GridSpec(b_values=[0, 0.5, 1], seeds=[0, 1], feature_sets=['a', 'b'])
    assert spec.size() == 9 * 2 * 2 * 2
    runs = list(spec.runs((3, 28, 28)))
    assert len(runs) == spec.size()
    assert len({run['run_key'] for run in runs}) == len(runs)
    first = runs[0]
    assert (first['feature_set'], first['mode'], first['seed'], first['b_prog'], first['b_pred']) == \
        ('a', 'two_head', 0, 0, 0)
    assert runs[-1]['feature_set'] == 'b' and runs[-1]['mode'] == 'single_head'

    # the run key depends on the training configuration
    other = GridSpec(b_values=[0, 0.5, 1], seeds=[0, 1], feature_sets=['a', 'b'], training={'epochs': 3})
    assert next(other.runs((3, 28, 28)))['run_key'] != runs[0]['run_key']
    assert GridSpec.from_dict(spec.to_dict()) == spec

    with pytest.raises(ValueError):
        GridSpec(b_values=[])
    with pytest.raises(ValueError):
        GridSpec(b_values=[0.5, 0.5])
    with pytest.raises(ValueError):
        GridSpec(b_values=[-1])
    with pytest.raises(ValueError):
        GridSpec(feature_sets=['c'])
    with pytest.raises(ValueError):
        GridSpec(modes=['three_head'])
    with pytest.raises(ValueError):
        GridSpec(workers=0)
    with pytest.raises(ValueError):
        GridSpec(noise_sd=-1)


def test_run_record():
    """
    Test strength ratios, status validation, and tolerant deserialization.
    """
    assert make_record(0, 1).strength_ratio == np.inf
    assert make_record(2, 1).strength_ratio == 0.5
    record = make_record(1, 1)
    assert RunRecord.from_dict({**record.to_dict(), 'extra': 1}) == record
    with pytest.raises(ValueError):
        make_record(1, 1, status='running')


def test_result_store(tmpdir):
    """
    Test that the store keeps the latest record per key across reloads.
    """
    filename = os.path.join(tmpdir, 'runs', 'results.jsonl')
    store = ResultStore(filename)
    assert len(store) == 0

    failed = make_record(1, 1, status='failed')
    store.append(failed)
    assert failed.run_key in store and not store.completed(failed.run_key)
    store.append(make_record(1, 1))
    store.append(make_record(1, 0.5))

    reloaded = ResultStore(filename)
    assert len(reloaded) == 2
    assert reloaded.completed(failed.run_key)
    assert reloaded.get(failed.run_key).status == 'done'
    assert len(reloaded.records([failed.run_key, 'unknown'])) == 1


def test_run_grid(tmpdir, corpus):
    """
    Test that a small grid yields one record per run with populated statistics.
    """
    manifest, images = corpus
    spec = tiny_grid()
    store = ResultStore(os.path.join(tmpdir, 'results.jsonl'))
    records = run_grid(spec, manifest, images, store)

    assert len(records) == 8
    assert [r.run_key for r in records] == [run['run_key'] for run in spec.runs(images.shape[1:])]
    assert all(r.done for r in records)
    for record in records:
        assert record.bound_lower is not None and record.bound_upper is not None
        assert record.ratio >= 0


def test_run_grid_resume(tmpdir, corpus):
    """
    Test that an interrupted grid resumes to the same records as an uninterrupted one.
    """
    manifest, images = corpus
    spec = tiny_grid(modes=['two_head'])

    filename = os.path.join(tmpdir, 'partial.jsonl')
    partial = run_grid(spec, manifest, images, ResultStore(filename), max_runs=3)
    assert len(partial) == 3

    resumed = run_grid(spec, manifest, images, ResultStore(filename))
    complete = run_grid(spec, manifest, images, ResultStore(os.path.join(tmpdir, 'complete.jsonl')))
    assert [r.run_key for r in resumed] == [r.run_key for r in complete]
    assert np.allclose([r.ratio for r in resumed], [r.ratio for r in complete], equal_nan=True)

    # completed runs are not executed again
    with open(filename) as file:
        assert len(file.readlines()) == 4


def test_run_grid_failures(tmpdir, corpus):
    """
    Test that failing runs are recorded and counted, not raised.
    """
    manifest, images = corpus
    spec = tiny_grid(b_values=[1.0], modes=['two_head'], p_treat=1.0)
    records = run_grid(spec, manifest, images, ResultStore(os.path.join(tmpdir, 'results.jsonl')))
    assert len(records) == 1
    assert records[0].status == 'failed'
    assert records[0].error.startswith('ValueError')

    summary = aggregate_bins(records, bin_edges=[0, 2])['two_head']
    assert summary.failed == 1 and summary.total == 1

    with pytest.raises(ValueError):
        run_grid(spec, manifest, images[:10], ResultStore(os.path.join(tmpdir, 'other.jsonl')))


def test_default_bin_edges():
    """
    Test that default edges start at zero and cover all positive finite ratios.
    """
    ratios = [np.inf, 0.5, 1.0, 2.0, 0.0]
    edges = default_bin_edges(ratios)
    assert edges[0] == 0 and len(edges) == 8
    assert np.all(np.diff(edges) > 0)
    index = np.searchsorted(edges, [0.0, 0.5, 1.0, 2.0], side='right') - 1
    assert np.all((index >= 0) & (index < len(edges) - 1))
    assert default_bin_edges([np.inf]).tolist() == [0, np.inf]


def test_aggregate_bins():
    """
    Test bin membership on hand examples.
    """
    records = [make_record(1, 0.5, ratio=2.0), make_record(1, 0.6, ratio=4.0)]
    with pytest.warns(UserWarning):
        summary = aggregate_bins(records, bin_edges=[0, 1, np.inf])['two_head']
    assert summary.counts == [2, 0]
    assert summary.bins[0]['median'] == 3.0
    assert summary.bins[0]['bound_upper'] == 100.0
    assert summary.bins[1]['empty'] and np.isnan(summary.bins[1]['median'])
    assert summary.infinite['count'] == 0

    summary = aggregate_bins([make_record(0, 1, ratio=5.0)], bin_edges=[0, 1])['two_head']
    assert summary.infinite['count'] == 1 and summary.counts == [0]

    single = aggregate_bins([make_record(1, 0.5, ratio=7.0)], bin_edges=[0, 1])['two_head']
    entry = single.bins[0]
    assert entry['median'] == entry['min'] == entry['max'] == 7.0


def test_aggregate_bins_conservation():
    """
    Test that every record is binned, infinite, degenerate, failed, or unbinned exactly once.
    """
    records = [make_record(b_prog, b_pred, mode=mode, ratio=b_pred + 0.1)
               for b_prog in (0, 0.5, 1) for b_pred in (0, 0.5, 1) for mode in ('two_head', 'single_head')]
    records.append(make_record(1, 0.25, status='failed'))
    records.append(make_record(1, 0.75, degenerate=True))
    records.append(make_record(0.1, 1.0))
    summaries = aggregate_bins(records, bin_edges=[0, 0.5, 1.5])

    assert set(summaries) == {'two_head', 'single_head'}
    two_head = summaries['two_head']
    assert two_head.failed == 1 and two_head.degenerate == 1 and two_head.unbinned == 2
    for summary in summaries.values():
        binned = sum(summary.counts) + summary.infinite['count']
        assert binned + summary.degenerate + summary.failed + summary.unbinned == summary.total

    with pytest.raises(ValueError):
        aggregate_bins([])
    with pytest.raises(ValueError):
        aggregate_bins(records, bin_edges=[0, 1, 1])


def test_box_statistics():
    stats = box_statistics([1, 2, 3, 4, 5])
    assert stats['median'] == 3 and stats['q1'] == 2 and stats['q3'] == 4
    assert np.isnan(box_statistics([])['median'])


def test_emit_report(tmpdir):
    """
    Test report files, table rows, and byte-identical output for identical inputs.
    """
    records = [make_record(b_prog, b_pred, mode=mode, ratio=0.5 + b_pred, seed=seed)
               for b_prog in (0, 0.5, 1) for b_pred in (0.5, 1) for mode in ('two_head', 'single_head')
               for seed in (0, 1)]
    summaries = aggregate_bins(records)
    nbins = len(summaries['two_head'].bins)

    first = emit_report(summaries, records, os.path.join(tmpdir, 'first'), dataset_id='tiny')
    second = emit_report(summaries, records[::-1], os.path.join(tmpdir, 'second'), dataset_id='tiny',
                         figure=False)

    assert [os.path.basename(f) for f in first['figures']] == ['strength_tiny_a.png']
    assert os.path.getsize(first['figures'][0]) > 0
    assert second['figures'] == []

    with open(first['summary']) as file:
        lines = file.read().splitlines()
    assert lines[0].startswith('feature_set,mode,bin,lower,upper')
    assert len(lines) == 1 + 2 * (nbins + 1)

    for kind in ('records', 'summary'):
        with open(first[kind], 'rb') as a, open(second[kind], 'rb') as b:
            assert a.read() == b.read()

    with open(first['records']) as file:
        assert len(file.readlines()) == len(records)

    with pytest.raises(ValueError):
        emit_report(summaries, [], os.path.join(tmpdir, 'empty'))


def test_emit_report_narrow_bins(tmpdir):
    """
    Test that the figure is drawn when the strength ratios collapse into
    near-zero-width bins, as for a grid over b values {0, 1}.
    """
    records = [make_record(b_prog, b_pred, mode=mode, ratio=1.0 + b_pred)
               for b_prog in (0, 1) for b_pred in (0, 1) for mode in ('two_head', 'single_head')]
    summaries = aggregate_bins(records)
    assert np.allclose(summaries['two_head'].edges, [0, 1, 1])

    written = emit_report(summaries, records, str(tmpdir), dataset_id='narrow')
    assert os.path.getsize(written['figures'][0]) > 0

    edges = _display_edges(summaries['two_head'].edges)
    lower, upper = edges[:-1], edges[1:]
    assert np.all(upper >= 2 * lower)
    for frac in (-0.2, 0.0, 0.2):
        positions = _mode_positions(lower, upper, frac)
        assert np.all((positions > lower) & (positions < upper))


def test_load_config(tmpdir):
    """
    Test configuration sections, overrides, and errors.
    """
    filename = os.path.join(tmpdir, 'config.json')
    with open(filename, 'w') as file:
        json.dump({'simulation': {'b_prog': 1.0}, 'training': {'epochs': 5}}, file)

    config = load_config(filename, overrides=['training.epochs=2', 'grid.dataset_id=digits',
                                              'model.head.units=[4, 1]'])
    assert config['simulation'] == {'b_prog': 1.0}
    assert config['training']['epochs'] == 2
    assert config['grid']['dataset_id'] == 'digits'
    assert config['model']['head']['units'] == [4, 1]
    assert config['attribution'] == {}

    with pytest.raises(ValueError):
        apply_override(config, 'training.epochs')
    with pytest.raises(ValueError):
        apply_override(config, 'optimizer.lr=1')

    with open(filename, 'w') as file:
        json.dump({'unknown': {}}, file)
    with pytest.raises(ValueError, match='unknown'):
        load_config(filename)

    with open(filename, 'w') as file:
        file.write('{not json')
    with pytest.raises(ValueError):
        load_config(filename)
