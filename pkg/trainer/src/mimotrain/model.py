"""Differentiable modulator + detector, mirroring the inference engine.

Dtype split matches the engine: EP-state arithmetic (observation update,
estimation, moment matching) in float64, network evaluation in float32.
The GRU gate convention must stay in sync with the engine's bundle tag.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

GRU_CONVENTION = "zrn/sigmoid-tanh/newstate=(1-z)*n+z*h/single-bias/v1"
LEAKY_SLOPE = 0.01
VAR_FLOOR = 1e-8
CAVITY_EPS = 1e-10


@dataclass
class NetSizes:
    m: int = 16
    n_t: int = 2
    n_r: int = 8
    feat_size: int = 8      # node feature size
    hidden1: int = 128      # msg MLP layer 1 + GRU hidden
    hidden2: int = 64
    readout1: int = 128
    readout2: int = 64
    mod_width: int = 128
    iterations: int = 10
    gnn_rounds: int = 2
    damping: float = 0.7

    @property
    def k(self) -> int:
        return 2 * self.n_t


class GruCell(nn.Module):
    """GRU with one bias per gate:
    z = sig(Wzx x + Wzh h + bz); r = sig(Wrx x + Wrh h + br);
    n = tanh(Wnx x + r * (Wnh h) + bn); h' = (1 - z) * n + z * h
    """

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size

        def w(out, inp):
            bound = 1.0 / inp**0.5
            return nn.Parameter(torch.empty(out, inp).uniform_(-bound, bound))

        def b(out, fan):
            bound = 1.0 / fan**0.5
            return nn.Parameter(torch.empty(out).uniform_(-bound, bound))

        for gate in ("update", "reset", "cand"):
            setattr(self, f"{gate}_x", w(hidden_size, input_size))
            setattr(self, f"{gate}_h", w(hidden_size, hidden_size))
            setattr(self, f"{gate}_b", b(hidden_size, hidden_size))

    def forward(self, h: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
        z = torch.sigmoid(x @ self.update_x.T + h @ self.update_h.T + self.update_b)
        r = torch.sigmoid(x @ self.reset_x.T + h @ self.reset_h.T + self.reset_b)
        n = torch.tanh(x @ self.cand_x.T + r * (h @ self.cand_h.T) + self.cand_b)
        return (1.0 - z) * n + z * h


class Modulator(nn.Module):
    """Four-layer MLP over one-hot messages + unit-average-power
    normalization; the normalization factor is recomputed from the full
    message table on every forward pass."""

    def __init__(self, m: int, width: int = 128, slope: float = LEAKY_SLOPE):
        super().__init__()
        self.m = m
        self.net = nn.Sequential(
            nn.Linear(m, width),
            nn.LeakyReLU(slope),
            nn.Linear(width, width),
            nn.LeakyReLU(slope),
            nn.Linear(width, width),
            nn.LeakyReLU(slope),
            nn.Linear(width, 2),
        )

    def constellation(self) -> torch.Tensor:
        """Normalized [M, 2] table; row i is the symbol for label i+1."""
        dtype = self.net[0].weight.dtype
        raw = self.net(torch.eye(self.m, dtype=dtype))
        power = (raw**2).sum(dim=1).mean()
        return raw / torch.sqrt(power)

    def forward(self, messages0: torch.Tensor):
        """messages0: [B, N_T] 0-based labels -> (table [M, 2], x [B, K]).

        Symbols are rows of the shared table, so the per-user output is
        identical to the constellation entry (same network, same factor).
        """
        table = self.constellation()
        sym = table[messages0]  # [B, N_T, 2]
        x = torch.cat([sym[..., 0], sym[..., 1]], dim=1)
        return table, x


class GepnetDetector(nn.Module):
    """Batched differentiable counterpart of the engine's detector."""

    def __init__(self, sizes: NetSizes):
        super().__init__()
        self.sizes = sizes
        s_u, h1, h2 = sizes.feat_size, sizes.hidden1, sizes.hidden2
        self.node_init = nn.Linear(3, s_u)
        self.node_update = nn.Linear(h1, s_u)
        self.gru = GruCell(s_u + 2, h1)
        self.msg_mlp = nn.Sequential(
            nn.Linear(2 * s_u + 2, h1), nn.ReLU(),
            nn.Linear(h1, h2), nn.ReLU(),
            nn.Linear(h2, s_u), nn.ReLU(),
        )
        self.readout = nn.Sequential(
            nn.Linear(2 * s_u, sizes.readout1), nn.ReLU(),
            nn.Linear(sizes.readout1, sizes.readout2), nn.ReLU(),
            nn.Linear(sizes.readout2, sizes.m),
        )
        k = sizes.k
        pairs = [(r, s) for r in range(k) for s in range(k) if s != r]
        self.register_buffer("rcv", torch.tensor([p[0] for p in pairs]), persistent=False)
        self.register_buffer("snd", torch.tensor([p[1] for p in pairs]), persistent=False)

    def forward(
        self,
        h_real: torch.Tensor,   # [B, N, K] float64
        y: torch.Tensor,        # [B, N] float64
        sigma2: torch.Tensor,   # [B] float64
        table: torch.Tensor,    # [M, 2] network dtype
    ):
        """-> (log-probabilities [B, N_T, M], stats dict)."""
        sizes = self.sizes
        b, _, k = h_real.shape
        n_t = k // 2
        net_dtype = self.node_init.weight.dtype
        gram = h_real.transpose(1, 2) @ h_real                     # [B, K, K]
        hty = (h_real.transpose(1, 2) @ y.unsqueeze(2)).squeeze(2)  # [B, K]

        prec = torch.ones(b, k, dtype=h_real.dtype)
        prec_mean = torch.zeros(b, k, dtype=h_real.dtype)

        feats = torch.stack(
            [hty, torch.diagonal(gram, dim1=1, dim2=2),
             sigma2.unsqueeze(1).expand(b, k)], dim=2
        ).to(net_dtype)
        u = self.node_init(feats)
        g = torch.zeros(b, k, sizes.hidden1, dtype=net_dtype)
        edge_gain = (-gram[:, self.snd, self.rcv]).to(net_dtype)    # [B, E]
        edge_sig = sigma2.to(net_dtype).unsqueeze(1).expand(b, edge_gain.shape[1])
        edges = torch.stack([edge_gain, edge_sig], dim=2)           # [B, E, 2]

        reverts = 0
        clamps = 0
        logp = None
        for _ in range(sizes.iterations):
            # observation update (float64)
            a = gram / sigma2[:, None, None] + torch.diag_embed(prec)
            sigma = torch.cholesky_inverse(torch.linalg.cholesky(a))
            rhs = hty / sigma2[:, None] + prec_mean
            post_mean = (sigma @ rhs.unsqueeze(2)).squeeze(2)
            post_var = torch.diagonal(sigma, dim1=1, dim2=2)
            denom = 1.0 - post_var * prec
            bad = denom <= CAVITY_EPS
            clamps += int(bad.sum())
            cav_var = torch.where(
                bad, torch.full_like(post_var, VAR_FLOOR),
                post_var / torch.where(bad, torch.ones_like(denom), denom),
            ).clamp(min=VAR_FLOOR)
            cav_mean = cav_var * (post_mean / post_var - prec_mean)

            # GNN rounds (float32 path)
            cav_m32 = cav_mean.to(net_dtype).unsqueeze(2)
            cav_v32 = cav_var.to(net_dtype).unsqueeze(2)
            for _ in range(sizes.gnn_rounds):
                msg_in = torch.cat(
                    [u[:, self.rcv], u[:, self.snd], edges], dim=2
                )
                msgs = self.msg_mlp(msg_in)
                agg = msgs.view(b, k, k - 1, sizes.feat_size).sum(dim=2)
                gru_in = torch.cat([agg, cav_m32, cav_v32], dim=2)
                g = self.gru(
                    g.view(b * k, sizes.hidden1), gru_in.view(b * k, -1)
                ).view(b, k, sizes.hidden1)
                u = self.node_update(g)

            stacked = torch.cat([u[:, :n_t], u[:, n_t:]], dim=2)
            logp = torch.log_softmax(self.readout(stacked), dim=2)

            # estimation (float64)
            probs = logp.exp().to(h_real.dtype)
            re = table[:, 0].to(h_real.dtype)
            im = table[:, 1].to(h_real.dtype)
            mean_r = probs @ re
            mean_i = probs @ im
            var_r = (probs * (re[None, None] - mean_r.unsqueeze(2)) ** 2).sum(dim=2)
            var_i = (probs * (im[None, None] - mean_i.unsqueeze(2)) ** 2).sum(dim=2)
            mean_hat = torch.cat([mean_r, mean_i], dim=1)
            var_hat = torch.cat([var_r, var_i], dim=1).clamp(min=VAR_FLOOR)

            # moment matching + damping; the revert path carries no gradient
            prec_new = 1.0 / var_hat - 1.0 / cav_var
            pm_new = mean_hat / var_hat - cav_mean / cav_var
            neg = prec_new <= 0.0
            reverts += int(neg.sum())
            prec_new = torch.where(neg, prec.detach(), prec_new)
            pm_new = torch.where(neg, prec_mean.detach(), pm_new)
            prec = (1.0 - sizes.damping) * prec_new + sizes.damping * prec
            prec_mean = (1.0 - sizes.damping) * pm_new + sizes.damping * prec_mean

        return logp, {"fallback_reverts": reverts, "cavity_clamps": clamps}


def cross_entropy_loss(logp: torch.Tensor, messages0: torch.Tensor) -> torch.Tensor:
    """Batch-mean of the per-user negative log-likelihood sums."""
    nll = -logp.gather(2, messages0.unsqueeze(2)).squeeze(2)
    return nll.sum(dim=1).mean()
