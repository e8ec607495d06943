import os
import pytest
import numpy as np
import pandas as pd
import torch

from predix.sim import RCTDataset
from predix.model import ModelSpec
from predix.model import TrainConfig
from predix.model import OutcomeNetwork
from predix.model import TrainedEstimator
from predix.model import routed_loss
from predix.model import train
from predix.model import predict_outcomes
from predix.model import estimate_cate
from predix.model import baseline_candidate
from predix.model import load_estimator
from predix.stats import fit_interaction_ols
from predix.stats import predictive_strength


def tiny_spec(mode='two_head', shape=(3, 8, 8)):
    return ModelSpec(
        mode=mode,
        encoder=[{'type': 'conv', 'channels': 4, 'kernel': 3, 'padding': 1},
                 {'type': 'relu'},
                 {'type': 'maxpool', 'size': 2}],
        head=[{'type': 'linear', 'units': 8}, {'type': 'relu'}, {'type': 'linear', 'units': 1}],
        input_shape=shape,
    )


def tiny_dataset(n=32, seed=0, constant=None, split=None):
    rng = np.random.default_rng(seed)
    T = np.arange(n) % 2
    x_prog = rng.integers(0, 2, n).astype(float)
    x_pred = rng.integers(0, 2, n).astype(float)
    Y = x_prog + x_pred * T if constant is None else np.full(n, constant)
    frame = pd.DataFrame({
        'sample_id': [f's{i}' for i in range(n)],
        'x_prog': x_prog,
        'x_pred': x_pred,
        'T': T,
        'Y': Y,
    })
    if split is not None:
        frame['split'] = split
    images = rng.random((n, 3, 8, 8)).astype(np.float32)
    return RCTDataset(frame), images


def test_model_spec():
    """
    Test architecture validation, head counts, and spec identifiers.
    """
    spec = ModelSpec()
    assert spec.nheads == 2 and spec.has_conv
    assert ModelSpec(mode='single_head').nheads == 1

    with pytest.raises(ValueError):
        ModelSpec(mode='three_head')
    with pytest.raises(ValueError):
        ModelSpec(head=[{'type': 'linear', 'units': 4}])
    with pytest.raises(ValueError):
        ModelSpec(encoder=[{'type': 'lstm'}])
    with pytest.raises(ValueError):
        ModelSpec(input_shape=(28, 28))

    restored = ModelSpec.from_dict(spec.to_dict())
    assert restored == spec
    assert restored.spec_id() == spec.spec_id()
    assert spec.replace(mode='single_head').spec_id() != spec.spec_id()


def test_train_config():
    """
    Test optimization settings validation.
    """
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(loss='huber')
    with pytest.raises(ValueError):
        TrainConfig(optimizer={'name': 'lbfgs'})
    assert TrainConfig.from_dict({'patience': None}).patience is None


def test_network_shapes():
    """
    Test output shapes of both modes and independent head parameters.
    """
    x = torch.rand(5, 3, 8, 8)
    network = OutcomeNetwork(tiny_spec())
    assert network(x).shape == (5, 2)
    assert OutcomeNetwork(tiny_spec('single_head'))(x).shape == (5, 1)
    assert network.heads[0][0].weight is not network.heads[1][0].weight
    assert isinstance(network.last_conv(), torch.nn.Conv2d)


def test_routed_loss_decomposition():
    """
    Test that the routed loss equals a direct per-sample recomputation, and that
    an absent arm contributes nothing.
    """
    outputs = torch.tensor([[1.0, 2.0], [0.5, -1.0], [3.0, 0.0], [0.0, 4.0]])
    T = torch.tensor([0, 1, 1, 0])
    Y = torch.tensor([0.0, 1.0, 1.0, 2.0])
    total, per_head = routed_loss(outputs, T, Y)

    direct = sum((outputs[i, T[i]] - Y[i]) ** 2 for i in range(4)) / 4
    assert torch.isclose(total, direct)
    assert torch.isclose(per_head[0] + per_head[1], total)
    assert torch.isclose(per_head[0], torch.tensor(((1.0 - 0.0) ** 2 + (0.0 - 2.0) ** 2) / 4))

    control = torch.zeros(4, dtype=torch.long)
    _, per_head = routed_loss(outputs, control, Y)
    assert per_head[1].item() == 0

    total, _ = routed_loss(outputs[:, :1], T, Y)
    assert torch.isclose(total, ((outputs[:, 0] - Y) ** 2).mean())


def test_gradient_check():
    """
    Test analytic parameter gradients of the routed loss against central finite
    differences on a small float64 network.
    """
    torch.manual_seed(0)
    spec = ModelSpec(encoder=[{'type': 'tanh'}],
                     head=[{'type': 'linear', 'units': 3}, {'type': 'tanh'}, {'type': 'linear', 'units': 1}],
                     input_shape=(1, 2, 2))
    network = OutcomeNetwork(spec).double()
    x = torch.rand(4, 1, 2, 2, dtype=torch.float64)
    T = torch.tensor([0, 1, 0, 1])
    Y = torch.rand(4, dtype=torch.float64)

    def loss():
        return routed_loss(network(x), T, Y)[0]

    network.zero_grad()
    loss().backward()
    eps = 1e-6
    for param in network.parameters():
        flat = param.data.view(-1)
        grads = param.grad.view(-1)
        for i in range(flat.numel()):
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + eps
                upper = loss().item()
                flat[i] = original - eps
                lower = loss().item()
                flat[i] = original
            numeric = (upper - lower) / (2 * eps)
            assert abs(numeric - grads[i].item()) <= 1e-4 * max(1e-3, abs(numeric))


def test_predictions_and_modes():
    """
    Test prediction shapes and mode-specific candidate functions.
    """
    model = TrainedEstimator(tiny_spec())
    images = np.random.default_rng(0).random((6, 3, 8, 8))

    y0, y1 = predict_outcomes(model, images)
    assert y0.shape == (6,) and y1.shape == (6,)
    assert np.allclose(estimate_cate(model, images), y1 - y0)

    # a single image yields one pair of outputs
    y0, y1 = model.predict_outcomes(images[0])
    assert y0.shape == (1,)

    with pytest.raises(ValueError):
        baseline_candidate(model, images)
    with pytest.raises(ValueError):
        model.outputs(np.zeros((2, 1, 8, 8)))

    baseline = TrainedEstimator(tiny_spec('single_head'))
    assert baseline_candidate(baseline, images).shape == (6,)
    assert np.array_equal(baseline.candidate(images), baseline_candidate(baseline, images))
    with pytest.raises(ValueError):
        estimate_cate(baseline, images)
    with pytest.raises(ValueError):
        baseline.tie_heads()


def test_identical_heads():
    """
    Test that copying the control head into the treatment head zeroes the CATE and
    that the resulting candidate is reported as degenerate.
    """
    model = TrainedEstimator(tiny_spec()).tie_heads()
    images = np.random.default_rng(1).random((10, 3, 8, 8))
    y0, y1 = model.predict_outcomes(images)
    assert np.array_equal(y0, y1)
    assert np.all(model.estimate_cate(images) == 0)

    dataset, images = tiny_dataset(32)
    report = fit_interaction_ols(model.estimate_cate(images), dataset.T, dataset.Y)
    assert report.rank_deficient
    assert predictive_strength(report).degenerate


def test_train_constant_outcome():
    """
    Test that both heads fit a constant outcome.
    """
    dataset, images = tiny_dataset(32, constant=0.5)
    cfg = TrainConfig(epochs=300, batch_size=16, learning_rate=1e-2, seed=0)
    model = train(dataset, images, spec=tiny_spec(), cfg=cfg)
    y0, y1 = model.predict_outcomes(images)
    for y in (y0, y1):
        assert abs(y.mean() - 0.5) < 0.02
        assert np.abs(y - 0.5).mean() < 0.05
        assert np.abs(y - 0.5).max() < 0.15
    assert model.metadata['final_losses']['train_loss'] < 2.5e-3


def test_train_determinism_and_metadata(tmpdir):
    """
    Test deterministic training, the training curve, and checkpoint round-trips.
    """
    split = ['train'] * 24 + ['val'] * 8
    dataset, images = tiny_dataset(32, split=split)
    cfg = TrainConfig(epochs=4, batch_size=8, seed=3)
    first = train(dataset, images, spec=tiny_spec(), cfg=cfg)
    second = train(dataset, images, spec=tiny_spec(), cfg=cfg)
    assert np.array_equal(first.estimate_cate(images), second.estimate_cate(images))

    history = first.history
    assert 1 <= len(history) <= 4
    assert {'train_loss_control', 'train_loss_treated', 'val_loss'} <= set(history[0])
    assert first.metadata['seed'] == 3
    assert first.metadata['best_epoch'] is not None

    curve = os.path.join(tmpdir, 'curve.csv')
    first.save_curve(curve)
    assert list(pd.read_csv(curve)['epoch']) == [h['epoch'] for h in history]

    filename = os.path.join(tmpdir, 'model.pt')
    first.save(filename)
    loaded = load_estimator(filename)
    assert loaded.spec == first.spec
    assert np.array_equal(loaded.estimate_cate(images), first.estimate_cate(images))
    assert loaded.metadata['best_epoch'] == first.metadata['best_epoch']


def test_train_errors():
    """
    Test that missing arms, mismatched shapes, and empty data are rejected.
    """
    dataset, images = tiny_dataset(8)
    treated = RCTDataset(dataset.frame.assign(T=1))
    with pytest.raises(ValueError, match='both treatment arms'):
        train(treated, images, spec=tiny_spec(), cfg=TrainConfig(epochs=1))

    # the baseline does not need both arms
    train(treated, images, spec=tiny_spec('single_head'), cfg=TrainConfig(epochs=1))

    with pytest.raises(ValueError):
        train(dataset, images[:, :1], spec=tiny_spec(), cfg=TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(dataset, images[:4], spec=tiny_spec(), cfg=TrainConfig(epochs=1))


def test_train_divergence():
    """
    Test that a diverging optimization stops with an error.
    """
    dataset, images = tiny_dataset(32)
    cfg = TrainConfig(epochs=3, batch_size=8, learning_rate=1e30, optimizer={'name': 'sgd'})
    with pytest.raises(RuntimeError, match='non-finite'):
        train(dataset, images, spec=tiny_spec(), cfg=cfg)
