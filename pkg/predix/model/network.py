import torch
from torch import nn


activations = {
    'relu': nn.ReLU,
    'elu': nn.ELU,
    'tanh': nn.Tanh,
    'softplus': nn.Softplus,
}


def build_encoder(descriptors, in_channels):
    """
    Build a convolutional encoder from layer descriptors. The output is flattened.
    """
    layers = []
    channels = in_channels
    for layer in descriptors:
        kind = layer['type']
        if kind == 'conv':
            out = int(layer['channels'])
            layers.append(nn.Conv2d(channels, out,
                                    kernel_size=int(layer.get('kernel', 3)),
                                    stride=int(layer.get('stride', 1)),
                                    padding=int(layer.get('padding', 0))))
            channels = out
        elif kind == 'maxpool':
            layers.append(nn.MaxPool2d(int(layer.get('size', 2))))
        elif kind == 'avgpool':
            layers.append(nn.AvgPool2d(int(layer.get('size', 2))))
        elif kind == 'dropout':
            layers.append(nn.Dropout(float(layer.get('rate', 0.1))))
        else:
            layers.append(activations[kind]())
    layers.append(nn.Flatten())
    return nn.Sequential(*layers)


def build_head(descriptors, in_features):
    """
    Build a fully-connected outcome head from layer descriptors.
    """
    layers = []
    features = in_features
    for layer in descriptors:
        kind = layer['type']
        if kind == 'linear':
            units = int(layer['units'])
            layers.append(nn.Linear(features, units))
            features = units
        elif kind == 'dropout':
            layers.append(nn.Dropout(float(layer.get('rate', 0.1))))
        else:
            layers.append(activations[kind]())
    return nn.Sequential(*layers)


class OutcomeNetwork(nn.Module):

    def __init__(self, spec):
        """
        Shared image encoder followed by one (baseline) or two (control and
        treatment) identically structured, independently parameterized outcome heads.

        Parameters
        ----------
        spec : ModelSpec
            Model architecture.
        """
        super().__init__()
        self.spec = spec
        self.encoder = build_encoder(spec.encoder, spec.input_shape[0])
        with torch.no_grad():
            nfeatures = self.encoder(torch.zeros(1, *spec.input_shape)).shape[-1]
        if nfeatures < 1:
            raise ValueError(f'encoder produces no features for input shape {spec.input_shape}')
        self.heads = nn.ModuleList([build_head(spec.head, nfeatures) for _ in range(spec.nheads)])

    def forward(self, x):
        """
        Returns an (n, nheads) tensor of outcome predictions. Column 0 is the
        control head, column 1 (if present) the treatment head.
        """
        features = self.encoder(x)
        return torch.cat([head(features) for head in self.heads], dim=1)

    def last_conv(self):
        """
        The last convolutional layer of the encoder, or None.
        """
        convs = [m for m in self.encoder if isinstance(m, nn.Conv2d)]
        return convs[-1] if convs else None


def routed_loss(outputs, T, Y):
    """
    Squared-error loss routed through the head matching each sample's arm.

    Every sample contributes only through the head of its own treatment arm, and
    the total is the sum of the control-head and treatment-head terms, normalized
    by the batch size. For single-head outputs all samples use the single head.

    Parameters
    ----------
    outputs : (n, nheads) torch.Tensor
        Network outputs.
    T : (n,) torch.Tensor of int
        Treatment indicators.
    Y : (n,) torch.Tensor
        Observed outcomes.

    Returns
    -------
    total : torch.Tensor
        Scalar batch loss.
    per_head : list of torch.Tensor
        Loss contribution of each head. Their sum is `total`.
    """
    n = outputs.shape[0]
    if outputs.shape[1] == 1:
        sqerr = (outputs[:, 0] - Y) ** 2
        total = sqerr.sum() / n
        return total, [total]

    T = T.long()
    predicted = outputs.gather(1, T.view(-1, 1)).squeeze(1)
    sqerr = (predicted - Y) ** 2
    per_head = [(sqerr * (T == arm)).sum() / n for arm in (0, 1)]
    return per_head[0] + per_head[1], per_head
