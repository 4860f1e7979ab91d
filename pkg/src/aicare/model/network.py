"""Risk model: per-feature GRU channels, per-static-feature MLP channels,
multi-head self-attention across channels with a decorrelation penalty,
and a terminal attention whose weights double as per-feature importance.

Channel order everywhere is [dynamic features..., static features...], so
an importance vector has length dynamic_dim + static_dim and sums to one
per visit (it is a softmax over channels).

The GRU uses the reset-before-candidate convention
(r, z gates; candidate n = tanh(Wx + r * Uh); h' = (1-z)*h + z*n).
All computation is causal: outputs at visit t depend only on visits <= t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..data.schema import FeatureSchema


@dataclass
class ModelHyper:
    hidden_dim: int = 32
    n_heads: int = 4
    lambda_dec: float = 1e-3
    lr: float = 0.001
    batch_size: int = 32
    max_epochs: int = 30
    patience: int = 10
    seed: int = 42
    dynamic_dim: int = 0
    static_dim: int = 0

    def __post_init__(self):
        if self.hidden_dim % self.n_heads != 0:
            raise ValueError(
                f"hidden_dim {self.hidden_dim} not divisible by "
                f"n_heads {self.n_heads}")
        for name in ("hidden_dim", "n_heads", "lr", "batch_size",
                     "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelHyper":
        return cls(**d)


# fixed parameter order keeps seeded initialization deterministic
def _param_shapes(hyper: ModelHyper) -> list[tuple[str, tuple[int, ...], int]]:
    D, S, H = hyper.dynamic_dim, hyper.static_dim, hyper.hidden_dim
    shapes = [
        ("gru_wx", (D, 2, 3 * H), 2),
        ("gru_wh", (D, H, 3 * H), H),
        ("gru_b", (D, 3 * H), 0),
        ("attn_wq", (H, H), H),
        ("attn_wk", (H, H), H),
        ("attn_wv", (H, H), H),
        ("attn_wo", (H, H), H),
        ("attn_bo", (H,), 0),
        ("term_wq", (H, H), H),
        ("term_wk", (H, H), H),
        ("term_wv", (H, H), H),
        ("out_w", (H, 1), H),
        ("out_b", (1,), 0),
    ]
    if S > 0:
        shapes[3:3] = [
            ("static_w1", (S, 1, H), 1),
            ("static_b1", (S, H), 0),
            ("static_w2", (S, H, H), H),
            ("static_b2", (S, H), 0),
        ]
    return shapes


def init_params(schema: FeatureSchema, hyper: ModelHyper) -> dict[str, np.ndarray]:
    """Seeded uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weights, zero biases."""
    n_static, n_dynamic = schema.counts
    if hyper.dynamic_dim and hyper.dynamic_dim != n_dynamic:
        raise ValueError("hyper.dynamic_dim disagrees with schema")
    if hyper.static_dim and hyper.static_dim != n_static:
        raise ValueError("hyper.static_dim disagrees with schema")
    hyper.dynamic_dim = n_dynamic
    hyper.static_dim = n_static

    rng = np.random.default_rng(hyper.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape, fan_in in _param_shapes(hyper):
        if fan_in == 0:
            params[name] = np.zeros(shape)
        else:
            bound = 1.0 / math.sqrt(fan_in)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


@dataclass
class Batch:
    """Padded dense inputs for a mini-batch of patients."""

    dynamic: np.ndarray     # (B, T, D)
    log_gaps: np.ndarray    # (B, T)
    static: np.ndarray      # (B, S)
    visit_mask: np.ndarray  # (B, T) 1.0 for real visits
    labels: np.ndarray      # (B, T)
    label_mask: np.ndarray  # (B, T)


def make_batch(patients) -> Batch:
    B = len(patients)
    T = max(len(p.times) for p in patients)
    D = patients[0].dynamic.shape[1]
    S = patients[0].static.shape[0]
    dyn = np.zeros((B, T, D))
    gaps = np.zeros((B, T))
    stat = np.zeros((B, S))
    vmask = np.zeros((B, T))
    labels = np.zeros((B, T))
    lmask = np.zeros((B, T))
    for i, p in enumerate(patients):
        n = len(p.times)
        dyn[i, :n] = p.dynamic
        gaps[i, :n] = p.log_gaps
        stat[i] = p.static
        vmask[i, :n] = 1.0
        labels[i, :n] = p.labels
        lmask[i, :n] = p.label_mask
    return Batch(dyn, gaps, stat, vmask, labels, lmask)


@dataclass
class ForwardOutputs:
    logits: ad.Tensor        # (B, T)
    importances: ad.Tensor   # (B, T, C)
    head_outputs: ad.Tensor  # (B, T, nh, C*dk), kept for the decorrelation loss


def forward(params: dict[str, ad.Tensor], batch: Batch,
            hyper: ModelHyper) -> ForwardOutputs:
    """Run the full architecture over a padded batch.

    Per timestep: the GRU state of every dynamic channel (input = value
    plus log time-gap) and the static channel embeddings go through
    multi-head self-attention across channels; a terminal attention with
    the mean channel embedding as query produces the importance weights
    and the aggregated representation feeding the risk head.
    """
    B, T, D = batch.dynamic.shape
    S = batch.static.shape[1]
    H, nh = hyper.hidden_dim, hyper.n_heads
    dk = H // nh
    C = D + S

    # static channels, constant across time: (B, S, H)
    if S > 0:
        s_in = ad.Tensor(batch.static[:, :, None, None])  # (B,S,1,1)
        e1 = ad.tanh(ad.reshape(ad.matmul(s_in, params["static_w1"]),
                                (B, S, H)) + params["static_b1"])
        e1r = ad.reshape(e1, (B, S, 1, H))
        static_emb = ad.tanh(ad.reshape(ad.matmul(e1r, params["static_w2"]),
                                        (B, S, H)) + params["static_b2"])

    h = ad.Tensor(np.zeros((B, D, H)))
    gru_b = params["gru_b"]
    logits_t, imps_t, heads_t = [], [], []
    inv_sqrt_dk = ad.Tensor(1.0 / math.sqrt(dk))
    inv_sqrt_h = ad.Tensor(1.0 / math.sqrt(H))

    for t in range(T):
        x_t = np.stack([batch.dynamic[:, t, :],
                        np.repeat(batch.log_gaps[:, t:t + 1], D, axis=1)],
                       axis=2)  # (B, D, 2)
        pre_x = ad.reshape(ad.matmul(ad.Tensor(x_t[:, :, None, :]),
                                     params["gru_wx"]), (B, D, 3 * H))
        pre_h = ad.reshape(ad.matmul(ad.reshape(h, (B, D, 1, H)),
                                     params["gru_wh"]), (B, D, 3 * H))
        pre = pre_x + gru_b
        r = ad.sigmoid(pre[:, :, 0:H] + pre_h[:, :, 0:H])
        z = ad.sigmoid(pre[:, :, H:2 * H] + pre_h[:, :, H:2 * H])
        n = ad.tanh(pre[:, :, 2 * H:] + r * pre_h[:, :, 2 * H:])
        one = ad.Tensor(1.0)
        h_new = (one - z) * h + z * n
        m = ad.Tensor(batch.visit_mask[:, t][:, None, None])
        h = m * h_new + (one - m) * h

        channels = ad.concat([h, static_emb], axis=1) if S > 0 else h  # (B,C,H)

        def heads_view(x):
            return ad.transpose(ad.reshape(x, (B, C, nh, dk)), (0, 2, 1, 3))

        q = heads_view(ad.matmul(channels, params["attn_wq"]))
        k = heads_view(ad.matmul(channels, params["attn_wk"]))
        v = heads_view(ad.matmul(channels, params["attn_wv"]))
        scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * inv_sqrt_dk
        attn = ad.softmax(scores, axis=-1)
        head_out = ad.matmul(attn, v)  # (B, nh, C, dk)
        heads_t.append(ad.reshape(head_out, (B, nh, C * dk)))
        merged = ad.reshape(ad.transpose(head_out, (0, 2, 1, 3)), (B, C, H))
        contextual = channels + ad.matmul(merged, params["attn_wo"]) \
            + params["attn_bo"]

        query = ad.matmul(ad.tmean(contextual, axis=1), params["term_wq"])  # (B,H)
        keys = ad.matmul(contextual, params["term_wk"])  # (B,C,H)
        term_scores = ad.tsum(keys * ad.reshape(query, (B, 1, H)),
                              axis=2) * inv_sqrt_h  # (B,C)
        alpha = ad.softmax(term_scores, axis=1)
        imps_t.append(alpha)
        values = ad.matmul(contextual, params["term_wv"])  # (B,C,H)
        agg = ad.tsum(ad.reshape(alpha, (B, C, 1)) * values, axis=1)  # (B,H)
        logit = ad.reshape(ad.matmul(agg, params["out_w"]), (B,)) + params["out_b"]
        logits_t.append(logit)

    return ForwardOutputs(
        logits=ad.stack(logits_t, axis=1),
        importances=ad.stack(imps_t, axis=1),
        head_outputs=ad.stack(heads_t, axis=1),
    )


def loss(outputs: ForwardOutputs, batch: Batch, hyper: ModelHyper) -> ad.Tensor:
    """Masked mean BCE plus lambda_dec times the mean squared cosine
    similarity between distinct attention head outputs."""
    lmask = batch.label_mask
    n_labeled = float(lmask.sum())
    if n_labeled == 0:
        raise ValueError("no labeled visits in batch")
    y = ad.Tensor(batch.labels)
    l = outputs.logits
    bce_all = ad.softplus(l) - y * l
    bce = ad.tsum(ad.Tensor(lmask) * bce_all) * ad.Tensor(1.0 / n_labeled)

    if hyper.lambda_dec == 0.0 or hyper.n_heads < 2:
        return bce

    vmask = batch.visit_mask
    n_visits = float(vmask.sum())
    heads = outputs.head_outputs  # (B, T, nh, K)
    eps = ad.Tensor(1e-8)
    pair_terms = []
    for i in range(hyper.n_heads):
        for j in range(i + 1, hyper.n_heads):
            u = heads[:, :, i, :]
            w = heads[:, :, j, :]
            dot = ad.tsum(u * w, axis=2)
            norm2 = (ad.tsum(ad.square(u), axis=2) + eps) \
                * (ad.tsum(ad.square(w), axis=2) + eps)
            cos2 = ad.square(dot) * ad.exp(-ad.log(norm2))
            pair_terms.append(ad.tsum(ad.Tensor(vmask) * cos2)
                              * ad.Tensor(1.0 / n_visits))
    dec = pair_terms[0]
    for term in pair_terms[1:]:
        dec = dec + term
    dec = dec * ad.Tensor(1.0 / len(pair_terms))
    return bce + ad.Tensor(hyper.lambda_dec) * dec
