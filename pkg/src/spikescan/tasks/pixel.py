"""Sequential-pixel classification on procedurally generated shapes.

Images are fed column by column (timestep = image width) through a
downscaled conv-norm-neuron stack; spike counts over time feed a linear
classifier.  The task is a relative-ordering smoke test across neuron
kinds, not a benchmark reproduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import layers as ly
from .. import numerics as nm
from ..errors import NonFiniteError
from ..neurons import (DsnParams, NeuronConfig, NeuronState, PsnParams,
                       dsn_alpha_sequence, lif_step, psn_forward)
from ..numerics import ArcTangent, Tensor
from ..scan import scan
from .datasets import gen_shape_images
from .training import Adam, Param, TrainConfig, batch_indices, cosine_lr

PIXEL_KINDS = ("lif", "sliding-psn", "dsn")


@dataclass
class PixelResult:
    neuron: str
    accuracy: float
    train_losses: list[float] = field(default_factory=list)
    firing_rates: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"neuron": self.neuron, "accuracy": self.accuracy,
                "train_losses": self.train_losses,
                "firing_rates": self.firing_rates}


class _BatchNorm:
    def __init__(self, name: str, channels: int, shift: float = 0.0):
        self.gamma = Param(f"{name}_gamma", np.ones(channels))
        # a positive shift starts membranes near the firing threshold
        self.beta = Param(f"{name}_beta", np.full(channels, shift))
        self.mean = np.zeros(channels)
        self.var = np.ones(channels)
        self.momentum = 0.9

    def __call__(self, x, w, training: bool):
        g, b = w[self.gamma.name], w[self.beta.name]
        if training:
            y, mean, var = ly.batch_norm_train(x, g, b)
            self.mean = self.momentum * self.mean + (1 - self.momentum) * mean
            self.var = self.momentum * self.var + (1 - self.momentum) * var
            return y
        return ly.batch_norm_eval(x, g, b, self.mean, self.var)


class PixelModel:
    """Two column-conv blocks with spiking neurons and a spike-count head."""

    def __init__(self, neuron_kind: str, size: int = 16, width: int = 8,
                 dsn_k: int = 4, sliding_k: int = 8, seed: int = 0):
        if neuron_kind not in PIXEL_KINDS:
            raise ValueError(f"pixel task covers {PIXEL_KINDS}, got {neuron_kind}")
        self.kind = neuron_kind
        self.size = size
        self.width = width
        # heavy-tailed surrogate keeps sub-threshold units trainable
        self.sg = ArcTangent(2.0)
        self.lif_cfg = NeuronConfig.lif(2.0, "hard")
        rng = np.random.default_rng(seed)
        h1, h2 = size, size // 2
        self.heights = (h1, h2)
        self.neuron_channels = (width * h1, width * h2)
        feat = width * h2
        self.params = [
            Param("conv1", rng.uniform(-1.0, 1.0, (width, 1, 3)) / np.sqrt(3)),
            Param("conv1_b", np.zeros(width)),
            Param("conv2", rng.uniform(-1.0, 1.0, (width, width, 3)) / np.sqrt(3 * width)),
            Param("conv2_b", np.zeros(width)),
            Param("head_w", rng.uniform(-1.0, 1.0, (feat, 4)) / np.sqrt(feat)),
            Param("head_b", np.zeros(4)),
        ]
        shift = 0.0 if neuron_kind == "dsn" else 0.5
        self.bn1 = _BatchNorm("bn1", width * h1, shift)
        self.bn2 = _BatchNorm("bn2", width * h2, shift)
        self.params += [self.bn1.gamma, self.bn1.beta,
                        self.bn2.gamma, self.bn2.beta]
        for i, c in enumerate(self.neuron_channels, start=1):
            if neuron_kind == "dsn":
                bound = 1.0 / np.sqrt(dsn_k)
                self.params += [
                    Param(f"n{i}_kernel", rng.uniform(-bound, bound, (c, dsn_k))),
                    Param(f"n{i}_bias", np.zeros(c)),
                ]
            elif neuron_kind == "sliding-psn":
                init = PsnParams.init_decay("sliding", k=sliding_k).weight.data
                self.params.append(Param(f"n{i}_weight", init))

    def _leaves(self, tape):
        if tape is None:
            return {p.name: Tensor(p.value) for p in self.params}
        return {p.name: p.leaf(tape) for p in self.params}

    def _neuron(self, idx: int, w, x: Tensor) -> Tensor:
        if self.kind == "dsn":
            params = DsnParams(conv_kernel=w[f"n{idx}_kernel"],
                               conv_bias=w[f"n{idx}_bias"], tau=0.25, n_max=4)
            alpha = dsn_alpha_sequence(params, x)
            return nm.clip_round(scan(alpha, x), 4)
        if self.kind == "sliding-psn":
            params = PsnParams(weight=w[f"n{idx}_weight"], variant="sliding",
                               k=w[f"n{idx}_weight"].shape[0])
            return psn_forward(params, x, 1.0, self.sg)
        # taped serial fold of the classical neuron
        b, c, T = x.shape
        state = NeuronState(v=nm.zeros((b, c)))
        spikes = []
        for t in range(T):
            x_t = nm.reshape(nm.time_slice(x, t, t + 1), (b, c))
            s, state = lif_step(self.lif_cfg, state, x_t, self.sg)
            spikes.append(s)
        return nm.stack_time(spikes)

    def forward(self, x: Tensor, tape=None, training: bool = False,
                collect=None) -> Tensor:
        w = self._leaves(tape)
        h1, h2 = self.heights
        y = ly.column_conv(x, w["conv1"], w["conv1_b"], height=h1)
        y = self.bn1(y, w, training)
        s1 = self._neuron(1, w, y)
        y = ly.column_avg_pool(s1, self.width, h1, 2)
        y = ly.column_conv(y, w["conv2"], w["conv2_b"], height=h2)
        y = self.bn2(y, w, training)
        s2 = self._neuron(2, w, y)
        if collect is not None:
            collect["block1"] = s1.data
            collect["block2"] = s2.data
        feats = ly.sum_time(s2)
        return ly.add_bias_rows(nm.matmul(feats, w["head_w"]), w["head_b"])

    def spike_traces(self, x: np.ndarray) -> dict[str, np.ndarray]:
        traces: dict[str, np.ndarray] = {}
        self.forward(Tensor(x), training=False, collect=traces)
        return traces

    def accuracy(self, x: np.ndarray, labels: np.ndarray) -> float:
        logits = self.forward(Tensor(x), training=False)
        return float(np.mean(np.argmax(logits.data, axis=1) == labels))


def run_pixel_task(neuron_kind: str, cfg: TrainConfig | None = None,
                   n_train_per_class: int = 100, n_test_per_class: int = 25,
                   size: int = 16) -> PixelResult:
    """Train the downscaled stack with the chosen neuron; report accuracy."""
    cfg = cfg or TrainConfig(lr=2e-3, epochs=12, batch_size=64)
    imgs, labels = gen_shape_images(n_train_per_class + n_test_per_class,
                                    size=size, seed=cfg.seed)
    n_test = 4 * n_test_per_class
    x_test, y_test = imgs[:n_test], labels[:n_test]
    x_train, y_train = imgs[n_test:], labels[n_test:]

    model = PixelModel(neuron_kind, size=size, seed=cfg.seed)
    opt = Adam(model.params, cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    n = len(y_train)
    total = cfg.epochs * -(-n // cfg.batch_size)

    result = PixelResult(neuron=neuron_kind, accuracy=0.0)
    step = 0
    for epoch in range(cfg.epochs):
        running = 0.0
        for idx in batch_indices(n, cfg.batch_size, rng):
            tape = nm.Tape()
            logits = model.forward(Tensor(x_train[idx]), tape, training=True)
            loss = ly.softmax_cross_entropy(logits, y_train[idx])
            if not np.isfinite(loss.item()):
                raise NonFiniteError(f"training diverged at epoch {epoch}")
            tape.backward(loss)
            lr = (cosine_lr(step, total, cfg.lr)
                  if cfg.schedule == "cosine" else cfg.lr)
            opt.step(tape, lr)
            running += loss.item() * len(idx)
            step += 1
        result.train_losses.append(running / n)

    result.accuracy = model.accuracy(x_test, y_test)
    traces = model.spike_traces(x_test)
    result.firing_rates = {k: float(np.mean(v)) for k, v in traces.items()}
    return result
