import copy
import dataclasses

from predix.core.hashing import stable_hash


model_modes = ('two_head', 'single_head')

# supported layer descriptor types
encoder_layers = ('conv', 'maxpool', 'avgpool', 'relu', 'elu', 'tanh', 'softplus', 'dropout')
head_layers = ('linear', 'relu', 'elu', 'tanh', 'softplus', 'dropout')


def default_encoder():
    """
    Three convolution blocks (conv, relu, max-pool).
    """
    layers = []
    for channels in (16, 32, 32):
        layers += [
            {'type': 'conv', 'channels': channels, 'kernel': 3, 'padding': 1},
            {'type': 'relu'},
            {'type': 'maxpool', 'size': 2},
        ]
    return layers


def default_head():
    """
    Two fully-connected layers ending in a scalar.
    """
    return [
        {'type': 'linear', 'units': 32},
        {'type': 'relu'},
        {'type': 'linear', 'units': 1},
    ]


@dataclasses.dataclass
class ModelSpec:
    """
    Architecture of an image-based outcome model.

    Attributes
    ----------
    mode : str
        'two_head' for the CATE estimator (one outcome head per treatment arm) or
        'single_head' for the baseline.
    encoder : list of dict
        Shared encoder layer descriptors, e.g. `{'type': 'conv', 'channels': 16, 'kernel': 3}`.
    head : list of dict
        Head layer descriptors. The last layer must be a linear layer with one unit.
    input_shape : tuple of int
        Image shape as (channels, height, width).
    """
    mode: str = 'two_head'
    encoder: list = dataclasses.field(default_factory=default_encoder)
    head: list = dataclasses.field(default_factory=default_head)
    input_shape: tuple = (3, 28, 28)

    def __post_init__(self):
        if self.mode not in model_modes:
            raise ValueError(f"model mode must be one of {', '.join(model_modes)}, but got {self.mode}")
        self.input_shape = tuple(int(s) for s in self.input_shape)
        if len(self.input_shape) != 3 or min(self.input_shape) < 1:
            raise ValueError(f'input shape must be (channels, height, width), but got {self.input_shape}')
        self.encoder = copy.deepcopy(list(self.encoder))
        self.head = copy.deepcopy(list(self.head))
        for layer in self.encoder:
            _check_layer(layer, encoder_layers, 'encoder')
        for layer in self.head:
            _check_layer(layer, head_layers, 'head')
        if not self.head or self.head[-1]['type'] != 'linear' or self.head[-1].get('units') != 1:
            raise ValueError('model head must end in a linear layer with a single unit')

    @property
    def nheads(self):
        return 2 if self.mode == 'two_head' else 1

    @property
    def has_conv(self):
        return any(layer['type'] == 'conv' for layer in self.encoder)

    def to_dict(self):
        params = dataclasses.asdict(self)
        params['input_shape'] = list(self.input_shape)
        return params

    @classmethod
    def from_dict(cls, params):
        return cls(**{k: v for k, v in params.items() if v is not None})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def spec_id(self):
        """
        Short content hash identifying the architecture.
        """
        return stable_hash(self.to_dict())


def _check_layer(layer, allowed, where):
    kind = layer.get('type') if isinstance(layer, dict) else None
    if kind not in allowed:
        raise ValueError(f'unsupported {where} layer {layer!r}, expected one of {", ".join(allowed)}')
    if kind == 'conv' and int(layer.get('channels', 0)) < 1:
        raise ValueError(f'conv layer requires a positive channel count: {layer!r}')
    if kind == 'linear' and int(layer.get('units', 0)) < 1:
        raise ValueError(f'linear layer requires a positive unit count: {layer!r}')


@dataclasses.dataclass
class TrainConfig:
    """
    Optimization settings. Training is deterministic given the seed.

    Attributes
    ----------
    epochs : int
        Maximum number of passes over the training split.
    batch_size : int
        Mini-batch size.
    learning_rate : float
        Optimizer step size.
    optimizer : dict
        Optimizer descriptor, e.g. `{'name': 'adam', 'weight_decay': 0.0}`. Supported
        names are adam, adamw, and sgd (with optional momentum).
    seed : int
        Seed for initialization and data order.
    loss : str
        Outcome loss. Only 'squared_error' is supported.
    patience : int or None
        Early-stopping patience in epochs on the validation loss. None disables it.
    """
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    optimizer: dict = dataclasses.field(default_factory=lambda: {'name': 'adam', 'weight_decay': 0.0})
    seed: int = 0
    loss: str = 'squared_error'
    patience: int = 5

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError('epochs and batch size must be positive')
        if not self.learning_rate > 0:
            raise ValueError(f'learning rate must be positive, but got {self.learning_rate}')
        if self.loss != 'squared_error':
            raise ValueError(f"only the 'squared_error' loss is supported, but got {self.loss}")
        if self.optimizer.get('name', 'adam') not in ('adam', 'adamw', 'sgd'):
            raise ValueError(f"unknown optimizer {self.optimizer.get('name')}")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, params):
        return cls(**{k: v for k, v in params.items() if v is not None or k == 'patience'})

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)
