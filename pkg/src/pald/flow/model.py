"""Conditional rectified-flow model over latent frames.

A velocity net v(x, time features, context) regresses the straight-line
displacement between a data frame and a unit-Gaussian sample; a single gated
recurrent cell summarizes ground-truth history into the per-frame context
(teacher forcing).  Time runs data -> noise: t = 0 is clean, t = 1 is noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import noise as noise_mod
from ..errors import NumericalError
from ..numerics import AdamW, GRUCell, MLP, Tensor, warmup_cosine_lr
from ..numerics import tensor as T
from ..numerics.layers import time_features
from ..numerics.rng import stream
from . import ode


@dataclass(frozen=True)
class FlowConfig:
    latent_dim: int = 8
    context_hidden: int = 64
    velocity_hidden: int = 64
    temb_pairs: int = 4
    schedule: noise_mod.NoiseSchedule = noise_mod.NoiseSchedule(m=0.0, s=1.0, gamma=1.0)

    @property
    def velocity_input_dim(self) -> int:
        return self.latent_dim + 2 * self.temb_pairs + self.context_hidden


class FlowModel:
    """Velocity net + causal context summarizer."""

    def __init__(self, cfg: FlowConfig, init_seed: int):
        self.cfg = cfg
        self.init_seed = init_seed
        self.context = GRUCell("ctx", cfg.latent_dim, cfg.context_hidden,
                               stream(init_seed, "flow-ctx-init"))
        # two tanh hidden layers, zero-initialized linear head: v = 0 at init
        self.velocity = MLP("vel", [cfg.velocity_input_dim, cfg.velocity_hidden,
                                    cfg.velocity_hidden, cfg.latent_dim],
                            stream(init_seed, "flow-vel-init"), zero_last=True)

    @property
    def params(self) -> dict[str, Tensor]:
        return {**self.context.params, **self.velocity.params}

    # -- inference-side numpy paths -------------------------------------------

    def contexts_np(self, frames: np.ndarray) -> np.ndarray:
        """Teacher-forced contexts for one sequence [L, d] -> [L, H].

        Row i summarizes frames < i; row 0 is the empty-context state (zeros
        through the recurrence start).
        """
        frames = np.atleast_2d(frames)
        length = frames.shape[0]
        out = np.zeros((length, self.cfg.context_hidden))
        h = np.zeros((1, self.cfg.context_hidden))
        for i in range(1, length):
            h = self.context.step_np(frames[i - 1 : i], h)
            out[i] = h[0]
        return out

    def velocity_np(self, x: np.ndarray, t: float, c: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        c = np.atleast_2d(c)
        temb = time_features(np.full(x.shape[0], float(t)), self.cfg.temb_pairs)
        return self.velocity.forward_np(np.concatenate([x, temb, c], axis=1))

    def velocity_field(self, contexts: np.ndarray) -> "BoundVelocityField":
        return BoundVelocityField(self, np.atleast_2d(contexts))

    def kernel_weights(self) -> tuple:
        p = self.velocity.params
        return (p["vel.w0"].data, p["vel.b0"].data, p["vel.w1"].data,
                p["vel.b1"].data, p["vel.w2"].data, p["vel.b2"].data)

    def sample(self, context: np.ndarray, n: int, rng: np.random.Generator,
               ode_steps: int = 100) -> np.ndarray:
        """Generate frames by transporting noise (t=1) to data (t=0)."""
        gamma = self.cfg.schedule.gamma
        x1 = gamma * rng.standard_normal((n, self.cfg.latent_dim))
        c = np.broadcast_to(np.asarray(context), (n, self.cfg.context_hidden))
        field = self.velocity_field(c)
        return ode.ode_integrate(field, x1, 1.0, 0.0, ode_steps)


class BoundVelocityField:
    """Velocity field with per-row contexts bound; closed-form Jacobian.

    The Jacobian w.r.t. the state runs through the two tanh layers only
    (time features and context do not depend on x).
    """

    def __init__(self, model: FlowModel, contexts: np.ndarray):
        self.model = model
        self.contexts = contexts

    def _hidden(self, x, t):
        m = self.model
        x = np.atleast_2d(x)
        temb = time_features(np.full(x.shape[0], float(t)), m.cfg.temb_pairs)
        u = np.concatenate([x, temb, self.contexts], axis=1)
        w0, b0, w1, b1, w2, b2 = m.kernel_weights()
        h0 = np.tanh(u @ w0 + b0)
        h1 = np.tanh(h0 @ w1 + b1)
        return h0, h1, (w0, w1, w2, b2)

    def __call__(self, x, t):
        h0, h1, (w0, w1, w2, b2) = self._hidden(x, t)
        return h1 @ w2 + b2

    def jacobian(self, x, t):
        d = self.model.cfg.latent_dim
        h0, h1, (w0, w1, w2, _) = self._hidden(x, t)
        d0 = 1.0 - h0 * h0
        d1 = 1.0 - h1 * h1
        j1 = w0[:d][None, :, :] * d0[:, None, :]      # [N, d, h]
        j2 = np.einsum("nph,hq->npq", j1, w1) * d1[:, None, :]
        return np.einsum("npq,qj->npj", j2, w2)       # [N, d, d]

    def jvp(self, x, t, v):
        d = self.model.cfg.latent_dim
        h0, h1, (w0, w1, w2, _) = self._hidden(x, t)
        a0 = np.atleast_2d(v) @ w0[:d]
        a0 *= 1.0 - h0 * h0
        a1 = a0 @ w1
        a1 *= 1.0 - h1 * h1
        return a1 @ w2


class FlowTrainer:
    """Training loop state: optimizer, schedule, RNG streams."""

    def __init__(self, model: FlowModel, lr: float = 1e-4, weight_decay: float = 0.0,
                 total_steps: int = 20000, warmup_steps: int = 500, seed: int = 0):
        self.model = model
        self.opt = AdamW(model.params, lr=lr, weight_decay=weight_decay)
        self.base_lr = lr
        self.total_steps = total_steps
        self.warmup_steps = warmup_steps
        self.noise_rng = stream(seed, "flow-noise")
        self.batch_rng = stream(seed, "flow-batch")
        self.step_index = 0
        self.losses: list[float] = []

    def step(self, batch_frames: np.ndarray) -> float:
        loss = flow_train_step(self.model, self.opt, batch_frames, self.noise_rng,
                               lr=warmup_cosine_lr(self.step_index, self.base_lr,
                                                   self.total_steps, self.warmup_steps))
        self.step_index += 1
        self.losses.append(loss)
        return loss

    def next_batch(self, sequences: np.ndarray, batch_size: int) -> np.ndarray:
        idx = self.batch_rng.integers(0, sequences.shape[0], size=batch_size)
        return sequences[idx]


def flow_train_step(model: FlowModel, opt: AdamW, batch_frames: np.ndarray,
                    rng: np.random.Generator, lr: float | None = None) -> float:
    """One velocity-matching step on a batch of sequences [B, L, d].

    Per frame: t ~ logit-normal(schedule), x1 ~ gamma N(0, I), and the net
    regresses x1 - x0 at the mixture point.  Loss is the squared error summed
    over the latent dimension, averaged over frames.
    """
    b, length, d = batch_frames.shape
    cfg = model.cfg
    h = Tensor(np.zeros((b, cfg.context_hidden)))
    ctx_rows = [h]
    for i in range(1, length):
        h = model.context(Tensor(batch_frames[:, i - 1, :]), h)
        ctx_rows.append(h)
    contexts = T.concat_rows(ctx_rows)  # frame-major: [L*B, H]

    x0 = np.ascontiguousarray(batch_frames.transpose(1, 0, 2)).reshape(length * b, d)
    sched = cfg.schedule
    t = noise_mod.sample_t(sched, rng, size=length * b)
    x1 = sched.gamma * rng.standard_normal((length * b, d))
    xt = (1.0 - t)[:, None] * x0 + t[:, None] * x1
    temb = time_features(t, cfg.temb_pairs)

    u = T.concat_cols([Tensor(xt), Tensor(temb), contexts])
    v = model.velocity(u)
    resid = v - Tensor(x1 - x0)
    loss = T.scale(T.tsum(T.mul(resid, resid)), 1.0 / (length * b))
    if not np.isfinite(loss.data):
        raise NumericalError("non-finite flow loss")
    grads = T.autodiff_gradient(loss, model.params)
    opt.step(grads, lr=lr)
    return float(loss.data)


def train_flow(model: FlowModel, sequences: np.ndarray, steps: int,
               batch_size: int = 16, lr: float = 1e-4, weight_decay: float = 0.0,
               warmup_steps: int = 500, seed: int = 0) -> FlowTrainer:
    trainer = FlowTrainer(model, lr=lr, weight_decay=weight_decay,
                          total_steps=steps, warmup_steps=warmup_steps, seed=seed)
    for _ in range(steps):
        trainer.step(trainer.next_batch(sequences, batch_size))
    return trainer
