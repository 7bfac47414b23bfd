"""Length extrapolation: train short in parallel, infer long serially.

A one-layer autoregressor (linear encoder, spiking neuron, linear decoder)
is trained on stationary wave mixtures to predict the next value.  Neurons
with bounded online state (dynamic decay, sliding PSN) then run serial
inference on sequences far longer than the training length; the
length-locked PSN variants raise LengthMismatch instead, which the result
records verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import numerics as nm
from ..errors import LengthMismatch
from ..neurons import (DsnParams, DsnState, PsnParams, dsn_alpha_sequence,
                       dsn_step, psn_forward, _band_mask)
from ..numerics import Rectangular, Tensor, heaviside
from ..scan import scan
from .datasets import gen_wave_mixtures
from .training import Adam, Param, TrainConfig, batch_indices, cosine_lr

SERIAL_KINDS = ("dsn", "sliding-psn")
LOCKED_KINDS = ("psn", "masked-psn")
EXTRAP_KINDS = SERIAL_KINDS + LOCKED_KINDS


@dataclass
class ExtrapolationResult:
    neuron: str
    train_T: int
    train_losses: list[float]
    eval_losses: dict[int, float] = field(default_factory=dict)
    eval_errors: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"neuron": self.neuron, "train_T": self.train_T,
                "train_losses": self.train_losses,
                "eval_losses": {str(k): v for k, v in self.eval_losses.items()},
                "eval_errors": {str(k): v for k, v in self.eval_errors.items()}}


class _SequenceModel:
    """enc (1 -> C) -> neuron -> dec (C -> 1), next-value prediction."""

    def __init__(self, neuron_kind: str, channels: int, train_T: int,
                 dsn_k: int = 4, sliding_k: int = 32, masked_k: int = 32,
                 n_max: int = 4, tau: float = 0.25, seed: int = 0):
        if neuron_kind not in EXTRAP_KINDS:
            raise ValueError(f"extrapolation covers {EXTRAP_KINDS}, got {neuron_kind}")
        self.kind = neuron_kind
        self.channels = channels
        self.train_T = train_T
        self.n_max = n_max
        self.tau = tau
        self.v_th = 1.0
        self.sg = Rectangular()
        rng = np.random.default_rng(seed)
        c = channels
        self.params = [
            Param("enc_w", rng.uniform(-1.0, 1.0, (c, 1))),
            Param("enc_b", rng.uniform(-0.5, 0.5, c)),
            Param("dec_w", rng.uniform(-1.0 / c, 1.0 / c, (1, c))),
            Param("dec_b", np.zeros(1)),
        ]
        if neuron_kind == "dsn":
            bound = 1.0 / np.sqrt(dsn_k)
            self.params += [
                Param("kernel", rng.uniform(-bound, bound, (c, dsn_k))),
                Param("conv_bias", np.zeros(c)),
            ]
        elif neuron_kind == "sliding-psn":
            init = PsnParams.init_decay("sliding", k=sliding_k).weight.data
            self.params.append(Param("weight", init))
        else:
            variant = "full" if neuron_kind == "psn" else "masked"
            init = PsnParams.init_decay(variant, t_train=train_T,
                                        k=masked_k).weight.data
            self.params.append(Param("weight", init))
            self.masked_k = masked_k
            self._mask = _band_mask(train_T, masked_k).astype(np.float64)

    def _leaves(self, tape):
        if tape is None:
            return {p.name: Tensor(p.value) for p in self.params}
        return {p.name: p.leaf(tape) for p in self.params}

    def _spikes(self, w, h: Tensor) -> Tensor:
        if self.kind == "dsn":
            params = DsnParams(conv_kernel=w["kernel"], conv_bias=w["conv_bias"],
                               tau=self.tau, n_max=self.n_max)
            alpha = dsn_alpha_sequence(params, h)
            return nm.clip_round(scan(alpha, h), self.n_max)
        if self.kind == "sliding-psn":
            params = PsnParams(weight=w["weight"], variant="sliding",
                               k=w["weight"].shape[0])
            return psn_forward(params, h, self.v_th, self.sg)
        weight = w["weight"]
        if self.kind == "masked-psn":
            weight = nm.mul(weight, Tensor(self._mask))
            params = PsnParams(weight=weight, variant="masked",
                               k=self.masked_k, t_train=self.train_T)
        else:
            params = PsnParams(weight=weight, variant="full",
                               t_train=self.train_T)
        return psn_forward(params, h, self.v_th, self.sg)

    def forward(self, x: Tensor, tape=None) -> Tensor:
        """Predicted next values, shape (B, 1, T)."""
        w = self._leaves(tape)
        h = nm.add_channel_bias(nm.channel_mix(w["enc_w"], x), w["enc_b"])
        s = self._spikes(w, h)
        return nm.add_channel_bias(nm.channel_mix(w["dec_w"], s), w["dec_b"])

    def loss(self, x: Tensor, tape=None) -> Tensor:
        pred = self.forward(x, tape)
        diff = nm.sub(nm.time_slice(pred, 0, x.shape[-1] - 1),
                      nm.time_slice(x, 1, x.shape[-1]))
        return nm.mean_all(nm.mul(diff, diff))

    # -- serial inference ---------------------------------------------------

    def eval_serial(self, x: np.ndarray) -> float:
        """Stepwise next-value loss on (B, 1, T) input of any length."""
        if self.kind not in SERIAL_KINDS:
            raise LengthMismatch(f"{self.kind} has no serial mode")
        vals = {p.name: p.value for p in self.params}
        b, _, T = x.shape
        c = self.channels
        preds = np.empty((b, T))
        if self.kind == "dsn":
            params = DsnParams(conv_kernel=Tensor(vals["kernel"]),
                               conv_bias=Tensor(vals["conv_bias"]),
                               tau=self.tau, n_max=self.n_max)
            state = DsnState.zeros(b, c, params.kernel_size)
            for t in range(T):
                h_t = vals["enc_w"][:, 0][None, :] * x[:, 0, t][:, None] \
                    + vals["enc_b"][None, :]
                s, state = dsn_step(params, state, h_t)
                preds[:, t] = s @ vals["dec_w"][0] + vals["dec_b"][0]
        else:
            k = vals["weight"].shape[0]
            w_rev = vals["weight"][::-1]
            window = np.zeros((b, c, k))
            for t in range(T):
                h_t = vals["enc_w"][:, 0][None, :] * x[:, 0, t][:, None] \
                    + vals["enc_b"][None, :]
                window = np.concatenate([window[..., 1:], h_t[..., None]], axis=-1)
                mem = np.einsum("k,bck->bc", w_rev, window)
                s = heaviside(mem - self.v_th)
                preds[:, t] = s @ vals["dec_w"][0] + vals["dec_b"][0]
        return float(np.mean((preds[:, :-1] - x[:, 0, 1:]) ** 2))


def run_extrapolation(neuron_kind: str, train_T: int = 256,
                      eval_Ts: tuple[int, ...] = (256, 512, 1024, 2048, 4096),
                      cfg: TrainConfig | None = None, n_train: int = 192,
                      n_eval: int = 64, channels: int = 16) -> ExtrapolationResult:
    """Train at train_T, then evaluate at each requested length.

    Serial-capable neurons are evaluated stepwise; length-locked neurons are
    evaluated in sequence mode, so any T != train_T lands in eval_errors as
    a LengthMismatch record.
    """
    cfg = cfg or TrainConfig(lr=2e-3, epochs=15, batch_size=32)
    model = _SequenceModel(neuron_kind, channels, train_T, seed=cfg.seed)
    opt = Adam(model.params, cfg)
    rng = np.random.default_rng(cfg.seed + 1)
    x_train = gen_wave_mixtures(n_train, train_T, seed=cfg.seed).data

    steps_per_epoch = -(-n_train // cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    result = ExtrapolationResult(neuron=neuron_kind, train_T=train_T,
                                 train_losses=[])
    step = 0
    for _ in range(cfg.epochs):
        running = 0.0
        for idx in batch_indices(n_train, cfg.batch_size, rng):
            tape = nm.Tape()
            loss = model.loss(Tensor(x_train[idx]), tape)
            tape.backward(loss)
            lr = (cosine_lr(step, total, cfg.lr)
                  if cfg.schedule == "cosine" else cfg.lr)
            opt.step(tape, lr)
            running += loss.item() * len(idx)
            step += 1
        result.train_losses.append(running / n_train)

    for eval_T in eval_Ts:
        x_eval = gen_wave_mixtures(n_eval, eval_T, seed=cfg.seed + 7).data
        try:
            if neuron_kind in SERIAL_KINDS:
                result.eval_losses[eval_T] = model.eval_serial(x_eval)
            else:
                result.eval_losses[eval_T] = model.loss(Tensor(x_eval)).item()
        except LengthMismatch as exc:
            result.eval_errors[eval_T] = f"LengthMismatch: {exc}"
    return result
