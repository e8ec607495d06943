import os
import sys
import json
import argparse
import numpy as np

from predix.system import output_root
from predix.pipeline import ExperimentLog


description = '''
Benchmark image-based estimators of predictive biomarkers on simulated trials.

Every subcommand reads a JSON configuration (--config) with the sections dataset,
simulation, model, training, grid, attribution and report. Individual options can
be overridden with --set section.key=value. Outputs are written to --out, which
defaults to $PREDIX_OUTPUT.
'''


def build_parser():
    parser = argparse.ArgumentParser(prog='predix', description=description,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    def command(name, help):
        sub = commands.add_parser(name, help=help)
        sub.add_argument('--config', help='JSON configuration file')
        sub.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                         help='override a configuration option, e.g. training.epochs=5')
        sub.add_argument('--out', help='output directory (default: $PREDIX_OUTPUT)')
        sub.add_argument('--log', help='append messages to a log file')
        sub.add_argument('--quiet', action='store_true', help='do not print messages to the console')
        return sub

    sub = command('digits', 'generate the colored-digits corpus')
    sub.add_argument('--mnist', nargs=2, metavar=('IMAGES', 'LABELS'), help='MNIST IDX image and label files')
    sub.add_argument('--count', type=int, help='number of digits (rendered glyphs or MNIST subset)')

    sub = command('simulate', 'simulate trial outcomes for a dataset manifest')
    sub.add_argument('--manifest', help='dataset manifest or annotation table')

    sub = command('train', 'train an outcome model on simulated trial records')
    sub.add_argument('--manifest', help='dataset manifest or annotation table')
    sub.add_argument('--records', required=True, help='simulated trial records')

    sub = command('evaluate', 'evaluate the biomarker candidate of a trained model')
    sub.add_argument('--manifest', help='dataset manifest or annotation table')
    sub.add_argument('--records', required=True, help='simulated trial records')
    sub.add_argument('--model', required=True, help='trained model checkpoint')

    sub = command('attribute', 'compute attribution maps of a trained model')
    sub.add_argument('--manifest', help='dataset manifest or annotation table')
    sub.add_argument('--model', required=True, help='trained model checkpoint')
    sub.add_argument('--samples', nargs='*', help='sample ids to explain (default: first test samples)')

    sub = command('grid', 'run the biomarker strength grid')
    sub.add_argument('--manifest', help='dataset manifest or annotation table')
    sub.add_argument('--max-runs', type=int, help='stop after this many runs')
    sub.add_argument('--workers', type=int, help='number of worker processes')

    sub = command('report', 'aggregate grid results into tables and figures')
    sub.add_argument('--results', help='grid results file (default: <out>/results.jsonl)')

    return parser


class ConfigurationError(ValueError):
    """
    Invalid or inconsistent experiment configuration.
    """
    pass


def load_manifest_config(config, manifest=None):
    """
    Load the dataset manifest, or ingest an annotation table when the dataset
    section names its biomarker columns.
    """
    from predix.data import load_annotation_table
    from predix.io import load_manifest

    options = config['dataset']
    filename = manifest if manifest is not None else options.get('manifest')
    if filename is None:
        raise ConfigurationError('no dataset manifest given, use --manifest or dataset.manifest')

    annotations = options.get('annotations')
    if annotations is not None:
        manifest = load_annotation_table(filename, annotations['prog_column'], annotations['pred_column'],
                                         normalize=annotations.get('normalize', True),
                                         split_column=annotations.get('split_column', 'split'))
    else:
        manifest = load_manifest(filename)
    return manifest


def load_dataset(config, manifest=None, log=None):
    """
    Load the dataset manifest and all of its images.
    """
    from predix.io import load_images

    manifest = load_manifest_config(config, manifest)
    images = load_images(manifest)
    log.info(f'loaded {manifest} with images of shape {images.shape[1:]}')
    return manifest, images


def run_digits(args, config, out, log):
    from predix.data import ColoredDigitSpec
    from predix.data import generate_colored_digits
    from predix.data import load_mnist_idx
    from predix.data import render_glyph_digits

    options = dict(config['dataset'])
    seed = int(options.pop('seed', 0))
    fractions = options.pop('fractions', (0.8, 0.1, 0.1))
    count = args.count if args.count is not None else options.pop('count', 5000)
    spec = ColoredDigitSpec.from_dict({k: options[k] for k in ('color_probability', 'circle_digit_set',
                                                               'feature_roles', 'image_size') if k in options})

    mnist = args.mnist or options.get('mnist')
    if mnist is not None:
        digits, labels = load_mnist_idx(*mnist)
        digits, labels = digits[:count], labels[:count]
        log.info(f'read {len(labels)} MNIST digits')
    else:
        digits, labels = render_glyph_digits(count, size=spec.image_size, seed=seed)
        log.info(f'rendered {len(labels)} digit glyphs')

    root = os.path.join(out, 'digits')
    generate_colored_digits(digits, labels, spec=spec, seed=seed, root=root, fractions=fractions, log=log)
    return 0


def run_simulate(args, config, out, log):
    from predix.sim import OutcomeSimConfig
    from predix.sim import build_rct_dataset

    manifest = load_manifest_config(config, args.manifest)
    manifest = manifest.with_roles(config['dataset'].get('feature_set', 'a'))
    sim = OutcomeSimConfig.from_dict(config['simulation'])
    dataset = build_rct_dataset(manifest, sim)
    filename = os.path.join(out, 'records.csv')
    dataset.save(filename)
    n0, n1 = dataset.arm_counts()
    log.info(f'simulated {len(dataset)} records ({n0} control, {n1} treated) to {filename}')
    with open(os.path.join(out, 'simulation.json'), 'w') as file:
        json.dump(sim.to_dict(), file, indent=2)
    return 0


def _aligned_images(manifest, images, dataset):
    """
    Images reordered to match the trial records.
    """
    index = {sid: i for i, sid in enumerate(manifest.sample_id)}
    missing = [sid for sid in dataset.sample_id if sid not in index]
    if missing:
        raise ConfigurationError(f'record {missing[0]} has no matching manifest sample')
    return images[[index[sid] for sid in dataset.sample_id]]


def run_train(args, config, out, log):
    from predix.io import load_rct_dataset
    from predix.model import ModelSpec
    from predix.model import TrainConfig
    from predix.model import train

    manifest, images = load_dataset(config, args.manifest, log)
    dataset = load_rct_dataset(args.records)
    images = _aligned_images(manifest, images, dataset)

    spec = ModelSpec.from_dict({**config['model'], 'input_shape': images.shape[1:]})
    cfg = TrainConfig.from_dict(config['training'])
    log.run(f'training {spec.mode} model on {len(dataset)} records')
    model = train(dataset, images, spec=spec, cfg=cfg, log=log)
    model.save(os.path.join(out, 'model.pt'))
    model.save_curve(os.path.join(out, 'curve.csv'))
    log.info(f"best epoch {model.metadata['best_epoch']} of {model.metadata['epochs_run']}")
    return 0


def run_evaluate(args, config, out, log):
    from predix.io import load_rct_dataset
    from predix.model import load_estimator
    from predix.stats import fit_interaction_ols
    from predix.stats import predictive_strength
    from predix.stats import compute_bounds

    manifest, images = load_dataset(config, args.manifest, log)
    dataset = load_rct_dataset(args.records)
    images = _aligned_images(manifest, images, dataset)
    model = load_estimator(args.model)

    split = config['report'].get('split', 'test')
    mask = dataset.split_mask(split) if 'split' in dataset.frame else np.ones(len(dataset), dtype=bool)
    if not mask.any():
        log.warn(f'no {split} records, evaluating on all records')
        mask = np.ones(len(dataset), dtype=bool)
    test = dataset.subset(mask=mask)

    report = fit_interaction_ols(model.candidate(images[mask]), test.T, test.Y)
    strength = predictive_strength(report)
    lower, upper = compute_bounds(test.x_prog, test.x_pred, test.T, test.Y)
    log.info(f'|t_pred/t_prog| = {strength.ratio:.4g} (bounds {lower.ratio:.4g} to {upper.ratio:.4g})')
    if strength.degenerate:
        log.warn('the candidate regression is degenerate')

    report.save(os.path.join(out, 'regression.json'))
    with open(os.path.join(out, 'evaluation.json'), 'w') as file:
        json.dump({
            'mode': model.mode,
            'split': split,
            'n': len(test),
            'strength': strength.to_dict(),
            'bound_lower': lower.to_dict(),
            'bound_upper': upper.to_dict(),
        }, file, indent=2)
    return 0


def run_attribute(args, config, out, log):
    from predix.model import load_estimator
    from predix.attribution import AttributionTarget
    from predix.attribution import expected_gradients
    from predix.attribution import guided_gradcam
    from predix.attribution import select_baselines
    from predix.attribution import render_overlay

    options = config['attribution']
    manifest, images = load_dataset(config, args.manifest, log)
    model = load_estimator(args.model)

    methods = options.get('methods', ['expected_gradients', 'guided_gradcam'])
    targets = options.get('targets', ['cate', 'control_head'] if model.mode == 'two_head' else ['control_head'])
    targets = [AttributionTarget.cast(t) for t in targets]
    seed = int(options.get('seed', 0))

    train_mask = manifest.split == 'train'
    pool = images[train_mask] if train_mask.any() else images
    baselines = select_baselines(pool, size=int(options.get('baselines', 64)), seed=seed)

    if args.samples:
        index = {sid: i for i, sid in enumerate(manifest.sample_id)}
        unknown = [s for s in args.samples if s not in index]
        if unknown:
            raise ConfigurationError(f'unknown sample id {unknown[0]}')
        chosen = [index[s] for s in args.samples]
    else:
        test = np.flatnonzero(manifest.split == 'test')
        chosen = (test if test.size else np.arange(len(manifest)))[:int(options.get('count', 8))]

    for i in chosen:
        sid = manifest.sample_id[i]
        for target in targets:
            for method in methods:
                if method == 'expected_gradients':
                    attribution = expected_gradients(model, images[i], baselines, target=target,
                                                     k=int(options.get('k', 200)), seed=seed,
                                                     baseline_descriptor=f'train subsample (seed {seed})')
                elif method == 'guided_gradcam':
                    attribution = guided_gradcam(model, images[i], target=target)
                else:
                    raise ConfigurationError(f'unknown attribution method {method}')
                stem = os.path.join(out, 'attributions', f'{sid}_{target}_{method}')
                attribution.save(stem + '.pdxa')
                render_overlay(attribution, images[i], stem + '.png',
                               per_channel=bool(options.get('per_channel', False)))
                log.run(f'{sid} {target} {method}: total attribution {attribution.total():.4g}')
    return 0


def run_grid_command(args, config, out, log):
    from predix.experiment import GridSpec
    from predix.experiment import ResultStore
    from predix.experiment import run_grid

    manifest, images = load_dataset(config, args.manifest, log)
    options = dict(config['grid'])
    options.setdefault('model', config['model'])
    options.setdefault('training', config['training'])
    for key in ('noise_sd', 'p_treat'):
        if key in config['simulation']:
            options.setdefault(key, config['simulation'][key])
    spec = GridSpec.from_dict(options)

    store = ResultStore(os.path.join(out, 'results.jsonl'))
    log.info(f'grid of {spec.size()} runs, {len(store)} stored records')
    records = run_grid(spec, manifest, images, store, workers=args.workers, max_runs=args.max_runs, log=log)
    done = sum(r.done for r in records)
    failed = sum(not r.done for r in records)
    log.info(f'{done} of {spec.size()} runs completed, {failed} failed')
    return 2 if failed else 0


def run_report(args, config, out, log):
    from predix.experiment import ResultStore
    from predix.experiment import aggregate_bins
    from predix.experiment import emit_report

    filename = args.results or os.path.join(out, 'results.jsonl')
    if not os.path.isfile(filename):
        raise ConfigurationError(f'grid results {filename} do not exist')
    records = ResultStore(filename).records()
    if not records:
        raise ConfigurationError(f'grid results {filename} contain no records')

    options = config['report']
    edges = options.get('bin_edges')
    summaries = []
    for feature_set in sorted({r.feature_set for r in records}):
        subset = [r for r in records if r.feature_set == feature_set]
        for mode, summary in aggregate_bins(subset, edges).items():
            summaries.append(summary)
            log.info(f'feature set {feature_set} {mode}: {sum(summary.counts)} binned, '
                     f"{summary.infinite['count']} infinite, {summary.degenerate} degenerate, "
                     f'{summary.failed} failed')

    dataset_id = options.get('dataset_id', config['grid'].get('dataset_id', 'dataset'))
    paths = emit_report(summaries, records, os.path.join(out, 'report'), dataset_id=dataset_id)
    log.info(f"wrote {paths['summary']} and {len(paths['figures'])} figures")
    return 0


commands = {
    'digits': run_digits,
    'simulate': run_simulate,
    'train': run_train,
    'evaluate': run_evaluate,
    'attribute': run_attribute,
    'grid': run_grid_command,
    'report': run_report,
}


def main(argv=None):
    """
    Command-line entry point. Exits with 0 on success, 2 if grid runs failed,
    and 1 on configuration errors.
    """
    from predix.experiment import load_config

    args = build_parser().parse_args(argv)
    out = output_root(args.out)
    log = ExperimentLog(f'predix {args.command}', log=args.log, quiet=args.quiet)

    try:
        config = load_config(args.config, args.overrides)
    except (ValueError, FileNotFoundError, PermissionError) as error:
        log.fatal(str(error), code=1)

    os.makedirs(out, exist_ok=True)
    log.info(f'Output directory: {out}')
    try:
        code = commands[args.command](args, config, out, log)
    except (ValueError, TypeError, FileNotFoundError, PermissionError, RuntimeError) as error:
        log.fatal(str(error), code=1)
    log.done(code)


if __name__ == '__main__':
    sys.exit(main())
