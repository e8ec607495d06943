import copy
import numpy as np
import pandas as pd
import torch

from predix.model.spec import ModelSpec
from predix.model.spec import TrainConfig
from predix.model.network import OutcomeNetwork
from predix.model.network import routed_loss
from predix.io.utils import ensure_parent
from predix.io.utils import check_file_readability
from predix.pipeline import log_message


class TrainedEstimator:

    def __init__(self, spec, network=None, metadata=None):
        """
        Image-to-outcome model in two-headed (CATE) or single-headed (baseline) mode,
        along with its training metadata.

        Parameters
        ----------
        spec : ModelSpec
            Model architecture.
        network : OutcomeNetwork, optional
            Network with learned parameters. A freshly initialized network is built
            if not provided.
        metadata : dict, optional
            Training metadata (seed, per-arm losses, training curve).
        """
        self.spec = spec
        self.network = network if network is not None else OutcomeNetwork(spec)
        self.network.eval()
        self.metadata = copy.deepcopy(metadata) if metadata is not None else {}

    def __repr__(self):
        return f'TrainedEstimator(mode={self.mode}, input_shape={self.spec.input_shape})'

    @property
    def mode(self):
        return self.spec.mode

    @property
    def history(self):
        """
        Training curve as a list of per-epoch dictionaries.
        """
        return self.metadata.get('history', [])

    def _as_batch(self, images):
        """
        Validate image shapes and convert to a float32 tensor batch.
        """
        images = np.asarray(images, dtype=np.float32)
        if images.shape == self.spec.input_shape:
            images = images[np.newaxis]
        if images.ndim != 4 or images.shape[1:] != self.spec.input_shape:
            raise ValueError(f'expected images of shape (n, {", ".join(map(str, self.spec.input_shape))}), '
                             f'but got {images.shape}')
        return torch.from_numpy(images)

    def outputs(self, images, batch_size=256):
        """
        Raw head outputs.

        Parameters
        ----------
        images : array_like
            Image batch of shape (n, channels, height, width), or a single image.
        batch_size : int
            Inference batch size.

        Returns
        -------
        (n, nheads) float64 np.ndarray
        """
        batch = self._as_batch(images)
        self.network.eval()
        with torch.no_grad():
            chunks = [self.network(batch[i:i + batch_size]) for i in range(0, len(batch), batch_size)]
        return torch.cat(chunks).double().numpy()

    def predict_outcomes(self, images):
        """
        Predicted potential outcomes from the control and treatment heads.

        Returns
        -------
        y0, y1 : (n,) float64 np.ndarray
        """
        if self.mode != 'two_head':
            raise ValueError('predict_outcomes requires a two_head model')
        outputs = self.outputs(images)
        return outputs[:, 0], outputs[:, 1]

    def estimate_cate(self, images):
        """
        Estimated conditional average treatment effect, the treatment-head output
        minus the control-head output.

        Returns
        -------
        (n,) float64 np.ndarray
        """
        if self.mode != 'two_head':
            raise ValueError('estimate_cate requires a two_head model, use baseline_candidate '
                             'for single_head models')
        y0, y1 = self.predict_outcomes(images)
        return y1 - y0

    def baseline_candidate(self, images):
        """
        Single-head output, the biomarker candidate of the baseline model.

        Returns
        -------
        (n,) float64 np.ndarray
        """
        if self.mode != 'single_head':
            raise ValueError('baseline_candidate requires a single_head model, use estimate_cate '
                             'for two_head models')
        return self.outputs(images)[:, 0]

    def candidate(self, images):
        """
        Biomarker candidate for evaluation: the estimated CATE for two-headed
        models, the outcome prediction for single-headed models.
        """
        if self.mode == 'two_head':
            return self.estimate_cate(images)
        return self.baseline_candidate(images)

    def tie_heads(self):
        """
        Copy the control-head parameters into the treatment head, which makes the
        estimated CATE identically zero.
        """
        if self.mode != 'two_head':
            raise ValueError('tie_heads requires a two_head model')
        self.network.heads[1].load_state_dict(self.network.heads[0].state_dict())
        return self

    def save(self, filename):
        """
        Write a self-describing checkpoint (architecture, parameters, metadata).
        """
        save_estimator(self, filename)

    def save_curve(self, filename):
        """
        Write the training curve as CSV.
        """
        ensure_parent(filename)
        pd.DataFrame(self.history).to_csv(filename, index=False)


def save_estimator(model, filename):
    """
    Write a `TrainedEstimator` checkpoint.

    Parameters
    ----------
    model : TrainedEstimator
        Model to save.
    filename : str
        Destination file path.
    """
    ensure_parent(filename)
    torch.save({
        'format': 'predix-estimator',
        'version': 1,
        'spec': model.spec.to_dict(),
        'state': model.network.state_dict(),
        'metadata': model.metadata,
    }, filename)


def load_estimator(filename):
    """
    Load a `TrainedEstimator` checkpoint.

    Parameters
    ----------
    filename : str
        Checkpoint path.

    Returns
    -------
    TrainedEstimator
    """
    check_file_readability(filename)
    content = torch.load(filename, map_location='cpu', weights_only=True)
    if not isinstance(content, dict) or content.get('format') != 'predix-estimator':
        raise ValueError(f'{filename} is not an estimator checkpoint')
    spec = ModelSpec.from_dict(content['spec'])
    network = OutcomeNetwork(spec)
    network.load_state_dict(content['state'])
    return TrainedEstimator(spec, network, metadata=content.get('metadata'))


def make_optimizer(parameters, cfg):
    """
    Build a torch optimizer from a training config descriptor.
    """
    options = dict(cfg.optimizer)
    name = options.pop('name', 'adam')
    if name == 'adam':
        return torch.optim.Adam(parameters, lr=cfg.learning_rate, **options)
    if name == 'adamw':
        return torch.optim.AdamW(parameters, lr=cfg.learning_rate, **options)
    return torch.optim.SGD(parameters, lr=cfg.learning_rate, **options)


def _arm_losses(network, images, T, Y, batch_size):
    """
    Mean squared error per arm and overall (through the matching heads), without gradients.
    """
    network.eval()
    sqerr = []
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            outputs = network(images[i:i + batch_size])
            t = T[i:i + batch_size]
            if outputs.shape[1] == 1:
                predicted = outputs[:, 0]
            else:
                predicted = outputs.gather(1, t.view(-1, 1)).squeeze(1)
            sqerr.append((predicted - Y[i:i + batch_size]) ** 2)
    sqerr = torch.cat(sqerr).double().numpy()
    arms = T.numpy()
    result = {'loss': float(sqerr.mean())}
    for arm, name in ((0, 'control'), (1, 'treated')):
        mask = arms == arm
        result[name] = float(sqerr[mask].mean()) if mask.any() else float('nan')
    return result


def train(dataset, images, spec=None, cfg=None, log=None):
    """
    Train an outcome model on simulated trial data.

    In two_head mode, each sample's squared error is routed through the head of its
    own arm and the batch loss is the sum of both head terms, so both heads are
    updated whenever both arms appear in a batch. In single_head mode, all samples
    pass through the single head regardless of arm.

    The 'train' split is used for fitting (all samples if the dataset has no train
    split). If a 'val' split exists, it drives early stopping and the best
    validation weights are restored.

    Parameters
    ----------
    dataset : RCTDataset
        Trial records aligned with `images`.
    images : (n, channels, height, width) array_like
        Input images.
    spec : ModelSpec, optional
        Model architecture. Defaults to a two-headed model matching the image shape.
    cfg : TrainConfig, optional
        Optimization settings.
    log : ExperimentLog, optional
        Progress log.

    Returns
    -------
    TrainedEstimator
    """
    images = np.asarray(images, dtype=np.float32)
    if len(images) != len(dataset):
        raise ValueError(f'got {len(images)} images for {len(dataset)} records')
    if spec is None:
        spec = ModelSpec(input_shape=images.shape[1:])
    cfg = TrainConfig() if cfg is None else cfg
    if images.ndim != 4 or images.shape[1:] != spec.input_shape:
        raise ValueError(f'images of shape {images.shape[1:]} do not match the model input shape {spec.input_shape}')

    splits = dataset.frame['split'].to_numpy() if 'split' in dataset.frame else None
    if splits is not None and np.any(splits == 'train'):
        train_mask = splits == 'train'
    else:
        train_mask = np.ones(len(dataset), dtype=bool)
    val_mask = splits == 'val' if splits is not None else np.zeros(len(dataset), dtype=bool)
    if not train_mask.any():
        raise ValueError('cannot train on an empty dataset')

    T = dataset.T
    Y = dataset.Y
    if spec.mode == 'two_head':
        counts = np.bincount(T[train_mask], minlength=2)
        if counts.min() == 0:
            raise ValueError('two_head training requires both treatment arms, '
                             f'but got {counts[0]} control and {counts[1]} treated samples')

    def tensors(mask):
        return (torch.from_numpy(images[mask]),
                torch.from_numpy(T[mask].astype(np.int64)),
                torch.from_numpy(Y[mask].astype(np.float32)))

    x_train, t_train, y_train = tensors(train_mask)
    x_val, t_val, y_val = tensors(val_mask)
    has_val = len(x_val) > 0

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    network = OutcomeNetwork(spec)
    optimizer = make_optimizer(network.parameters(), cfg)

    history = []
    best = {'loss': np.inf, 'epoch': None, 'state': None}
    ntrain = len(x_train)

    for epoch in range(1, cfg.epochs + 1):
        network.train()
        order = torch.from_numpy(rng.permutation(ntrain))
        for start in range(0, ntrain, cfg.batch_size):
            index = order[start:start + cfg.batch_size]
            outputs = network(x_train[index])
            loss, _ = routed_loss(outputs, t_train[index], y_train[index])
            if not torch.isfinite(loss):
                raise RuntimeError(f'non-finite training loss in epoch {epoch}')
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

        train_losses = _arm_losses(network, x_train, t_train, y_train, cfg.batch_size)
        entry = {
            'epoch': epoch,
            'train_loss': train_losses['loss'],
            'train_loss_control': train_losses['control'],
            'train_loss_treated': train_losses['treated'],
        }
        if has_val:
            val_losses = _arm_losses(network, x_val, t_val, y_val, cfg.batch_size)
            entry.update({
                'val_loss': val_losses['loss'],
                'val_loss_control': val_losses['control'],
                'val_loss_treated': val_losses['treated'],
            })
        history.append(entry)
        log_message(log, f'epoch {epoch:3d} | ' + ' '.join(
            f'{k}={v:.5f}' for k, v in entry.items() if k != 'epoch'))

        if not has_val or cfg.patience is None:
            continue
        if entry['val_loss'] < best['loss']:
            best = {'loss': entry['val_loss'], 'epoch': epoch, 'state': copy.deepcopy(network.state_dict())}
        elif epoch - best['epoch'] >= cfg.patience:
            log_message(log, f'early stopping after epoch {epoch}, best epoch {best["epoch"]}')
            break

    if best['state'] is not None:
        network.load_state_dict(best['state'])
        final = history[best['epoch'] - 1]
    else:
        final = history[-1]

    metadata = {
        'seed': cfg.seed,
        'train_config': cfg.to_dict(),
        'epochs_run': len(history),
        'best_epoch': final['epoch'],
        'final_losses': {k: v for k, v in final.items() if k != 'epoch'},
        'history': history,
    }
    return TrainedEstimator(spec, network, metadata=metadata)


def predict_outcomes(model, images):
    """
    Predicted (control, treatment) outcomes of a two-headed model. See
    `TrainedEstimator.predict_outcomes()`.
    """
    return model.predict_outcomes(images)


def estimate_cate(model, images):
    """
    Estimated CATE of a two-headed model. See `TrainedEstimator.estimate_cate()`.
    """
    return model.estimate_cate(images)


def baseline_candidate(model, images):
    """
    Output of a single-headed baseline model. See `TrainedEstimator.baseline_candidate()`.
    """
    return model.baseline_candidate(images)
