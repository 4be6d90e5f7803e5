"""GNN-enhanced EP detection: observation module, message-passing GNN over
the fully connected user-symbol graph, learned readout, soft-symbol
estimation, moment matching and damping, iterated T times.

Precision split: EP state arithmetic (observation update, estimation,
moment matching) runs in float64; all network evaluation runs in float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import epcore, nn, weights_io
from .channel import ChannelInstance, Constellation
from .detectors import DetectionResult
from .epcore import VAR_FLOOR
from .errors import ConventionMismatchError, ShapeError
from .nn import Activation, DenseLayer, GruCell
from .weights_io import WeightBundle


@dataclass(frozen=True)
class GepnetConfig:
    iterations: int = 10        # detector iterations (T)
    gnn_rounds: int = 2         # message-passing rounds per iteration (L)
    damping: float = 0.7
    feat_size: int = 8          # node feature size (S_u)
    hidden1: int = 128          # msg MLP layer 1 width; also the GRU hidden size
    hidden2: int = 64
    readout1: int = 128
    readout2: int = 64
    gru_reset_per_iteration: bool = False
    whole_matrix_fallback: bool = False

    def __post_init__(self):
        for name in ("iterations", "gnn_rounds", "feat_size", "hidden1", "hidden2",
                     "readout1", "readout2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must lie in [0, 1)")


@dataclass(frozen=True)
class GepnetWeights:
    """Network parameters assembled into forward-ready layers."""

    node_init: DenseLayer       # [S_u x 3] or [S_u x 5]
    node_update: DenseLayer     # [S_u x hidden1]
    gru: GruCell                # input S_u + 2, hidden hidden1
    msg_mlp: list[DenseLayer]   # widths hidden1, hidden2, S_u; ReLU on all
    readout_mlp: list[DenseLayer]  # widths readout1, readout2, M; ReLU on first two

    @property
    def feat_size(self) -> int:
        return self.node_init.out_dim

    @property
    def node_in_feats(self) -> int:
        return self.node_init.in_dim

    @property
    def order(self) -> int:
        return self.readout_mlp[-1].out_dim


@dataclass
class GnnState:
    """Mutable per-sample GNN state over the K = 2*N_T symbol nodes."""

    node_feats: np.ndarray  # [K, S_u] float32
    hidden: np.ndarray      # [K, hidden1] float32
    edge_attrs: np.ndarray  # [K, K, 2] float32; [j, k] = [-h_j . h_k, sigma2]
    rcv: np.ndarray         # receiver index per directed edge
    snd: np.ndarray         # sender index per directed edge


def config_from_bundle(bundle: WeightBundle) -> GepnetConfig:
    md = bundle.metadata
    return GepnetConfig(
        iterations=int(md[weights_io.META_T]),
        gnn_rounds=int(md[weights_io.META_L]),
        damping=float(md[weights_io.META_ETA]),
        feat_size=int(md[weights_io.META_SU]),
        hidden1=bundle.tensor("gru.update.hidden_weight").shape[0],
        hidden2=bundle.tensor("msg_mlp.1.weight").shape[0],
        readout1=bundle.tensor("readout_mlp.0.weight").shape[0],
        readout2=bundle.tensor("readout_mlp.1.weight").shape[0],
    )


def weights_from_bundle(bundle: WeightBundle) -> GepnetWeights:
    """Assemble validated layers; refuses bundles exported under a different
    GRU convention."""
    weights_io.validate_gepnet_bundle(bundle)
    tag = bundle.metadata[weights_io.META_GRU]
    if tag != nn.GRU_CONVENTION:
        raise ConventionMismatchError(
            f"bundle GRU convention {tag!r} != engine {nn.GRU_CONVENTION!r}"
        )

    def dense(prefix: str, act: Activation) -> DenseLayer:
        return DenseLayer(
            weight=bundle.tensor(f"{prefix}.weight"),
            bias=bundle.tensor(f"{prefix}.bias"),
            activation=act,
        )

    gru = GruCell(
        update_x=bundle.tensor("gru.update.input_weight"),
        update_h=bundle.tensor("gru.update.hidden_weight"),
        update_b=bundle.tensor("gru.update.bias"),
        reset_x=bundle.tensor("gru.reset.input_weight"),
        reset_h=bundle.tensor("gru.reset.hidden_weight"),
        reset_b=bundle.tensor("gru.reset.bias"),
        cand_x=bundle.tensor("gru.cand.input_weight"),
        cand_h=bundle.tensor("gru.cand.hidden_weight"),
        cand_b=bundle.tensor("gru.cand.bias"),
    )
    return GepnetWeights(
        node_init=dense("node_init", Activation.NONE),
        node_update=dense("node_update", Activation.NONE),
        gru=gru,
        msg_mlp=[dense(f"msg_mlp.{i}", Activation.RELU) for i in range(3)],
        readout_mlp=[
            dense("readout_mlp.0", Activation.RELU),
            dense("readout_mlp.1", Activation.RELU),
            dense("readout_mlp.2", Activation.NONE),
        ],
    )


def load_gepnet(bundle: WeightBundle):
    """-> (GepnetWeights, GepnetConfig, Constellation) from one bundle."""
    return (
        weights_from_bundle(bundle),
        config_from_bundle(bundle),
        weights_io.bundle_constellation(bundle),
    )


def gnn_node_init(
    h_real: np.ndarray, y: np.ndarray, sigma2: float, weights: GepnetWeights
) -> GnnState:
    """Node features from the received-signal/channel geometry; zero GRU
    hidden state; fixed edge attributes.

    The node-init layer accepts either 3 input features [y.h_k, h_k.h_k,
    sigma2] or a 5-feature variant padded with the prior mean 0 and prior
    variance 1 (bundles declare which via the tensor shape).
    """
    h = np.asarray(h_real, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    k = h.shape[1]
    gram = h.T @ h
    feats = np.stack(
        [h.T @ y, np.diag(gram), np.full(k, sigma2)], axis=1
    )
    if weights.node_in_feats == 5:
        pad = np.tile(np.array([0.0, 1.0]), (k, 1))
        feats = np.concatenate([feats, pad], axis=1)
    node_feats = nn.dense_forward(weights.node_init, feats.astype(np.float32))

    edge_attrs = np.empty((k, k, 2), dtype=np.float32)
    edge_attrs[:, :, 0] = -gram.astype(np.float32)
    edge_attrs[:, :, 1] = np.float32(sigma2)
    rcv = np.repeat(np.arange(k), k - 1)
    snd = np.concatenate([np.delete(np.arange(k), i) for i in range(k)])
    return GnnState(
        node_feats=node_feats,
        hidden=np.zeros((k, weights.gru.hidden_size), dtype=np.float32),
        edge_attrs=edge_attrs,
        rcv=rcv,
        snd=snd,
    )


def gnn_round(
    state: GnnState,
    cav_mean: np.ndarray,
    cav_var: np.ndarray,
    weights: GepnetWeights,
) -> None:
    """One synchronous propagation + aggregation round, in place.

    Messages from all senders are computed from the previous round's node
    features, summed per receiver, fed through the GRU together with the
    cavity statistics, and mapped back to node features.
    """
    k = state.node_feats.shape[0]
    msg_in = np.concatenate(
        [
            state.node_feats[state.rcv],
            state.node_feats[state.snd],
            state.edge_attrs[state.snd, state.rcv],
        ],
        axis=1,
    )
    msgs = nn.mlp_forward(weights.msg_mlp, msg_in)
    agg = msgs.reshape(k, k - 1, -1).sum(axis=1)

    gru_in = np.concatenate(
        [
            agg,
            cav_mean.astype(np.float32)[:, None],
            cav_var.astype(np.float32)[:, None],
        ],
        axis=1,
    )
    state.hidden = nn.gru_forward(weights.gru, state.hidden, gru_in)
    state.node_feats = nn.dense_forward(weights.node_update, state.hidden)


def gnn_readout(state: GnnState, weights: GepnetWeights) -> np.ndarray:
    """Per-user message probabilities [N_T, M]: stack each user's two
    component node features, run the readout MLP, softmax."""
    k = state.node_feats.shape[0]
    n_t = k // 2
    stacked = np.concatenate([state.node_feats[:n_t], state.node_feats[n_t:]], axis=1)
    logits = nn.mlp_forward(weights.readout_mlp, stacked)
    return nn.softmax(logits)


def estimation_update(probs: np.ndarray, c: Constellation):
    """Soft symbol means and variances (stacked real layout) from per-user
    message probabilities. Variances are floored at VAR_FLOOR."""
    p = np.asarray(probs, dtype=np.float64)
    re, im = c.points.real, c.points.imag
    mean_r = p @ re
    mean_i = p @ im
    var_r = np.einsum("km,km->k", p, (re[None, :] - mean_r[:, None]) ** 2)
    var_i = np.einsum("km,km->k", p, (im[None, :] - mean_i[:, None]) ** 2)
    mean = np.concatenate([mean_r, mean_i])
    var = np.maximum(np.concatenate([var_r, var_i]), VAR_FLOOR)
    return mean, var


def _check_cfg(weights: GepnetWeights, cfg: GepnetConfig, m: int) -> None:
    checks = [
        (weights.feat_size, cfg.feat_size, "feat_size"),
        (weights.gru.hidden_size, cfg.hidden1, "hidden1"),
        (weights.msg_mlp[1].out_dim, cfg.hidden2, "hidden2"),
        (weights.readout_mlp[0].out_dim, cfg.readout1, "readout1"),
        (weights.readout_mlp[1].out_dim, cfg.readout2, "readout2"),
        (weights.order, m, "modulation order"),
    ]
    for got, want, name in checks:
        if got != want:
            raise ShapeError(f"weights {name} = {got} but config expects {want}")


def gepnet_detect(
    y,
    channel: ChannelInstance,
    c: Constellation,
    weights: GepnetWeights,
    cfg: GepnetConfig = GepnetConfig(),
) -> DetectionResult:
    """Full detector: T iterations of observation update, L GNN rounds,
    learned readout, soft-symbol estimation, moment matching + damping.

    Returns hard decisions (argmax of the final iteration's probabilities,
    smallest label on ties) with the probabilities in ``result.probs``.
    """
    y = np.asarray(y, dtype=np.float64)
    h = channel.h_real
    if y.shape != (h.shape[0],):
        raise ShapeError(f"y has shape {y.shape}, channel expects ({h.shape[0]},)")
    _check_cfg(weights, cfg, c.order)

    k = h.shape[1]
    ep = epcore.init_state(k)
    gnn = gnn_node_init(h, y, channel.sigma2, weights)
    init_feats = gnn.node_feats.copy()

    probs = None
    min_prec = np.inf
    for _ in range(cfg.iterations):
        ep = epcore.observation_update(ep, h, y, channel.sigma2)
        if cfg.gru_reset_per_iteration:
            gnn.hidden[:] = 0.0
            gnn.node_feats = init_feats.copy()
        for _ in range(cfg.gnn_rounds):
            gnn_round(gnn, ep.cav_mean, ep.cav_var, weights)
        probs = gnn_readout(gnn, weights)
        mean, var = estimation_update(probs, c)
        ep = epcore.moment_match_and_damp(
            mean, var, ep, cfg.damping, cfg.whole_matrix_fallback
        )
        min_prec = min(min_prec, float(ep.prec.min()))

    messages = np.argmax(probs, axis=1).astype(np.int64) + 1
    return DetectionResult(
        messages=messages,
        probs=probs,
        diagnostics={
            "cavity_clamps": ep.cavity_clamps,
            "fallback_reverts": ep.fallback_reverts,
            "min_prec": min_prec,
        },
    )


def replay_modulator(bundle: WeightBundle) -> np.ndarray:
    """Recompute the learned constellation by running the stored modulator
    MLP over all one-hot messages and renormalizing; cross-checks the
    authoritative constellation tensor."""
    slope = float(bundle.metadata[weights_io.META_SLOPE])
    m = int(bundle.metadata[weights_io.META_M])
    layers = []
    for i in range(weights_io.MODULATOR_LAYERS):
        act = Activation.LEAKY_RELU if i < 3 else Activation.NONE
        layers.append(
            DenseLayer(
                weight=bundle.tensor(f"modulator_mlp.{i}.weight"),
                bias=bundle.tensor(f"modulator_mlp.{i}.bias"),
                activation=act,
                leaky_slope=slope,
            )
        )
    raw = nn.mlp_forward(layers, np.eye(m, dtype=np.float32))
    norm = np.sqrt(np.mean(np.sum(raw.astype(np.float64) ** 2, axis=1)))
    pts = raw / np.float32(norm)
    return pts[:, 0].astype(np.float64) + 1j * pts[:, 1].astype(np.float64)


def random_weights(
    cfg: GepnetConfig,
    constellation: Constellation,
    n_t: int,
    n_r: int,
    seed: int = 0,
    node_in_feats: int = 3,
    include_modulator: bool = False,
    modulator_width: int = 128,
) -> WeightBundle:
    """Fan-in-scaled random bundle (uniform +-1/sqrt(fan_in)); the standard
    fixture for exercising the detector without a trained model."""
    rng = np.random.default_rng(seed)
    m = constellation.order

    def t(out_dim: int, in_dim: int):
        bound = 1.0 / np.sqrt(in_dim)
        return rng.uniform(-bound, bound, size=(out_dim, in_dim)).astype(np.float32)

    def b(out_dim: int, fan_in: int):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=out_dim).astype(np.float32)

    s_u, h1, h2 = cfg.feat_size, cfg.hidden1, cfg.hidden2
    r1, r2 = cfg.readout1, cfg.readout2
    tensors = [
        ("node_init.weight", t(s_u, node_in_feats)),
        ("node_init.bias", b(s_u, node_in_feats)),
        ("node_update.weight", t(s_u, h1)),
        ("node_update.bias", b(s_u, h1)),
        ("msg_mlp.0.weight", t(h1, 2 * s_u + 2)),
        ("msg_mlp.0.bias", b(h1, 2 * s_u + 2)),
        ("msg_mlp.1.weight", t(h2, h1)),
        ("msg_mlp.1.bias", b(h2, h1)),
        ("msg_mlp.2.weight", t(s_u, h2)),
        ("msg_mlp.2.bias", b(s_u, h2)),
        ("readout_mlp.0.weight", t(r1, 2 * s_u)),
        ("readout_mlp.0.bias", b(r1, 2 * s_u)),
        ("readout_mlp.1.weight", t(r2, r1)),
        ("readout_mlp.1.bias", b(r2, r1)),
        ("readout_mlp.2.weight", t(m, r2)),
        ("readout_mlp.2.bias", b(m, r2)),
        ("constellation", np.stack(
            [constellation.points.real, constellation.points.imag], axis=1
        ).astype(np.float32)),
    ]
    for gate in weights_io.GRU_GATES:
        tensors += [
            (f"gru.{gate}.input_weight", t(h1, s_u + 2)),
            (f"gru.{gate}.hidden_weight", t(h1, h1)),
            (f"gru.{gate}.bias", b(h1, h1)),
        ]
    if include_modulator:
        w = modulator_width
        dims_in = [m, w, w, w]
        dims_out = [w, w, w, 2]
        for i in range(weights_io.MODULATOR_LAYERS):
            tensors += [
                (f"modulator_mlp.{i}.weight", t(dims_out[i], dims_in[i])),
                (f"modulator_mlp.{i}.bias",
                 b(dims_out[i], dims_in[i])),
            ]

    metadata = {
        weights_io.META_M: str(m),
        weights_io.META_NT: str(n_t),
        weights_io.META_NR: str(n_r),
        weights_io.META_SU: str(s_u),
        weights_io.META_L: str(cfg.gnn_rounds),
        weights_io.META_T: str(cfg.iterations),
        weights_io.META_ETA: repr(cfg.damping),
        weights_io.META_SLOPE: repr(nn.DEFAULT_LEAKY_SLOPE),
        weights_io.META_GRU: nn.GRU_CONVENTION,
        weights_io.META_SOURCE: constellation.source,
    }
    return WeightBundle(metadata=metadata, tensors=tensors)
