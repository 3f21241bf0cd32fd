"""Learnable physics engine over the exercise skeleton graph.

Per-edge effects come from a relation network fed sender state, receiver
state and edge attributes (distance, angle, direction flag); effects are
summed onto their receivers and an object network maps each node's state
plus incoming effect to its next-step velocity. Positions integrate
predicted velocities during rollout. Variants cover the ablations (zeroed
attributes, zeroed effects, fully-connected and globally-connected graphs)
plus a flattened-input MLP baseline.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import containers
from .model import ConfigError, ExerciseSpec, RepSegment, exercise_preset
from .nn import AdamW, DenseNet, OneCycleSchedule
from .preprocess import estimate_velocity

VARIANTS = ("in", "attr-hidden", "indep", "fc", "gc", "mlp")

NODE_DIM = 4   # x, y, vx, vy
ATTR_DIM = 3   # distance, angle, direction flag
OUT_DIM = 2    # next-step velocity


@dataclass(frozen=True)
class EngineParams:
    """Network architecture knobs; defaults follow the standard regimen."""

    relation_hidden: tuple[int, ...] = (256, 256, 256)
    object_hidden: tuple[int, ...] = (256, 256, 256, 256)
    effect_dim: int = 50
    dropout: float = 0.5
    dtype: str = "float64"

    def np_dtype(self):
        return np.dtype(self.dtype)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 2500
    patience: int = 100
    peak_lr: float = 3e-4
    warmup_fraction: float = 0.3
    weight_decay: float = 1e-4
    batch_size: int = 64
    val_fraction: float = 0.2
    # train-time position jitter (normalized units): inputs are perturbed and
    # velocity targets point back to the clean trajectory, which stabilizes
    # long rollouts against compounding drift
    noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.peak_lr <= 0:
            raise ConfigError("max_epochs, batch_size and peak_lr must be positive")
        if self.patience < 0 or self.weight_decay < 0 or self.noise_std < 0:
            raise ConfigError("patience, weight_decay and noise_std must be non-negative")
        if not 0.0 < self.val_fraction <= 0.5:
            raise ConfigError("val_fraction must be in (0, 0.5]")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise ConfigError("warmup_fraction must be in (0, 1)")


@dataclass
class Topology:
    """Directed edge structure of one exercise graph variant."""

    n_landmarks: int
    n_nodes: int          # landmarks + 2 reference points
    sender_idx: np.ndarray
    receiver_idx: np.ndarray
    flags: np.ndarray

    @property
    def n_edges(self) -> int:
        return len(self.sender_idx)


@dataclass
class GraphBatch:
    """One time step's graph: states, selectors, edge attributes, targets."""

    node_states: np.ndarray      # (N, 4)
    sender_select: np.ndarray    # (N, E), one-hot columns
    receiver_select: np.ndarray  # (N, E), one-hot columns
    edge_attrs: np.ndarray       # (E, 3)
    targets: np.ndarray | None = None  # (N, 2) observed next velocities


@dataclass
class RolloutError:
    """Per-landmark squared prediction error along a free rollout."""

    landmarks: tuple
    per_landmark: np.ndarray  # (n_landmarks, T - 1)
    aggregate: float

    @classmethod
    def from_series(cls, landmarks, per_landmark: np.ndarray) -> "RolloutError":
        return cls(landmarks=tuple(landmarks), per_landmark=per_landmark,
                   aggregate=float(per_landmark.mean()))


def build_topology(spec: ExerciseSpec, variant: str) -> Topology:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown engine variant {variant!r}")
    k = len(spec.landmarks)
    index = {lm: i for i, lm in enumerate(spec.landmarks)}
    senders: list[int] = []
    receivers: list[int] = []
    flags: list[float] = []

    def add_pair(a: int, b: int) -> None:
        senders.extend((a, b))
        receivers.extend((b, a))
        flags.extend((1.0, -1.0))

    if variant == "fc":
        for i in range(k):
            for j in range(i + 1, k):
                add_pair(i, j)
    else:
        for a, b in spec.edges:
            add_pair(index[a], index[b])
    if variant == "gc":
        for i in range(k):
            for r in range(len(spec.reference_points)):
                add_pair(i, k + r)
    return Topology(n_landmarks=k, n_nodes=k + len(spec.reference_points),
                    sender_idx=np.asarray(senders, dtype=np.intp),
                    receiver_idx=np.asarray(receivers, dtype=np.intp),
                    flags=np.asarray(flags, dtype=float))


def _node_positions(positions_k: np.ndarray, spec: ExerciseSpec) -> np.ndarray:
    """Append the fixed reference points to (..., K, 2) landmark positions."""
    refs = np.asarray(spec.reference_points, dtype=positions_k.dtype)
    refs = np.broadcast_to(refs, positions_k.shape[:-2] + refs.shape)
    return np.concatenate([positions_k, refs], axis=-2)


def edge_attributes(node_pos: np.ndarray, topo: Topology) -> np.ndarray:
    """Distance, angle and direction flag per directed edge.

    `node_pos` is (..., N, 2); the relative vector points sender -> receiver.
    """
    delta = node_pos[..., topo.receiver_idx, :] - node_pos[..., topo.sender_idx, :]
    dist = np.linalg.norm(delta, axis=-1)
    angle = np.arctan2(delta[..., 1], delta[..., 0])
    flags = np.broadcast_to(topo.flags, dist.shape)
    return np.stack([dist, angle, flags], axis=-1)


def build_graph(segment: RepSegment, spec: ExerciseSpec, t: int,
                variant: str = "in") -> GraphBatch:
    """Graph at frame t of a rep with next-step velocity targets."""
    traj = np.asarray(segment.trajectories, dtype=float)  # (K, T, 2)
    n_frames = traj.shape[1]
    if not 0 <= t < n_frames - 1:
        raise IndexError(f"frame {t} has no successor in a {n_frames}-frame rep")
    topo = build_topology(spec, variant)
    pos = traj.transpose(1, 0, 2)                    # (T, K, 2)
    vel = estimate_velocity(pos)
    node_pos = _node_positions(pos[t], spec)         # (N, 2)
    node_vel = np.zeros_like(node_pos)
    node_vel[:topo.n_landmarks] = vel[t]
    states = np.concatenate([node_pos, node_vel], axis=1)
    attrs = edge_attributes(node_pos, topo)
    if variant == "attr-hidden":
        attrs = np.zeros_like(attrs)
    targets = np.zeros((topo.n_nodes, OUT_DIM))
    targets[:topo.n_landmarks] = vel[t + 1]
    n, e = topo.n_nodes, topo.n_edges
    sender_select = np.zeros((n, e))
    receiver_select = np.zeros((n, e))
    sender_select[topo.sender_idx, np.arange(e)] = 1.0
    receiver_select[topo.receiver_idx, np.arange(e)] = 1.0
    return GraphBatch(node_states=states, sender_select=sender_select,
                      receiver_select=receiver_select, edge_attrs=attrs,
                      targets=targets)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    rates: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = float("inf")


def _split_reps(n_reps: int, cfg: TrainConfig, rng: np.random.Generator):
    if n_reps < 2:
        raise ValueError("training needs at least 2 reps (one is held out)")
    order = rng.permutation(n_reps)
    n_val = max(1, int(round(cfg.val_fraction * n_reps)))
    n_val = min(n_val, n_reps - 1)
    return order[n_val:], order[:n_val]


def _segment_state_arrays(segment: RepSegment, spec: ExerciseSpec,
                          dtype) -> tuple[np.ndarray, np.ndarray]:
    """Positions and velocities (T, K, 2) for one rep."""
    traj = np.asarray(segment.trajectories, dtype=dtype)
    pos = traj.transpose(1, 0, 2)
    vel = estimate_velocity(pos)
    return pos, vel


class InteractionEngine:
    """Relation- and object-centric networks over the skeleton graph."""

    def __init__(self, spec: ExerciseSpec, variant: str = "in",
                 params: EngineParams = EngineParams()):
        if variant == "mlp":
            raise ConfigError("use MlpBaseline for the flattened-input model")
        self.spec = spec
        self.variant = variant
        self.params = params
        self.topology = build_topology(spec, variant)
        dtype = params.np_dtype()
        self.relation_net = DenseNet(
            (2 * NODE_DIM + ATTR_DIM, *params.relation_hidden, params.effect_dim),
            dropout=params.dropout, dtype=dtype)
        self.object_net = DenseNet(
            (NODE_DIM + params.effect_dim, *params.object_hidden, OUT_DIM),
            dropout=params.dropout, dtype=dtype)
        topo = self.topology
        self._receiver_onehot = np.zeros((topo.n_nodes, topo.n_edges), dtype=dtype)
        self._receiver_onehot[topo.receiver_idx, np.arange(topo.n_edges)] = 1.0
        # per-feature input standardization, fitted on the training pairs;
        # identity until fit() runs
        self._state_norm = (np.zeros(NODE_DIM, dtype=dtype),
                            np.ones(NODE_DIM, dtype=dtype))
        self._attr_norm = (np.zeros(ATTR_DIM, dtype=dtype),
                           np.ones(ATTR_DIM, dtype=dtype))

    # --- single-graph contract ---

    def forward(self, batch: GraphBatch, training: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        """Predicted next velocities (N, 2); reference rows forced to zero."""
        states = np.asarray(batch.node_states, dtype=self.relation_net.dtype)
        preds = self._predict(states[None, ...],
                              np.asarray(batch.edge_attrs)[None, ...],
                              training=training, rng=rng)[0]
        return preds

    def _predict(self, states: np.ndarray, attrs: np.ndarray,
                 training: bool = False, rng=None) -> np.ndarray:
        """Batched forward: states (B, N, 4), attrs (B, E, 3) -> (B, N, 2)."""
        b = states.shape[0]
        topo = self.topology
        dtype = self.relation_net.dtype
        states = states.astype(dtype, copy=False)
        effects = self._effects(states, attrs, training, rng)
        normed = self._norm(states, self._state_norm)
        obj_in = np.concatenate([normed, effects], axis=2).reshape(b * topo.n_nodes, -1)
        masks_o = self.object_net.make_masks(obj_in.shape[0], rng) if training else None
        out = self.object_net.forward(obj_in, masks_o).reshape(b, topo.n_nodes, OUT_DIM)
        out[:, topo.n_landmarks:, :] = 0.0
        return out

    @staticmethod
    def _norm(values: np.ndarray, stats) -> np.ndarray:
        mean, std = stats
        return (values - mean) / std

    def _fit_norms(self, states: np.ndarray, attrs: np.ndarray) -> None:
        dtype = self.params.np_dtype()

        def stats(flat):
            mean = flat.mean(axis=0).astype(dtype)
            std = np.maximum(flat.std(axis=0), 1e-8).astype(dtype)
            return mean, std

        self._state_norm = stats(states.reshape(-1, NODE_DIM))
        self._attr_norm = stats(attrs.reshape(-1, ATTR_DIM))

    def _effects(self, states, attrs, training, rng) -> np.ndarray:
        """Aggregated per-receiver effects (B, N, effect_dim)."""
        b = states.shape[0]
        topo = self.topology
        if self.variant == "indep":
            return np.zeros((b, topo.n_nodes, self.params.effect_dim),
                            dtype=states.dtype)
        rel_in = self._relation_inputs(states, attrs)
        masks = self.relation_net.make_masks(rel_in.shape[0], rng) if training else None
        eff = self.relation_net.forward(rel_in, masks)
        eff = eff.reshape(b, topo.n_edges, self.params.effect_dim)
        return self._aggregate(eff)

    def _relation_inputs(self, states, attrs) -> np.ndarray:
        topo = self.topology
        normed = self._norm(states, self._state_norm)
        senders = normed[:, topo.sender_idx, :]
        receivers = normed[:, topo.receiver_idx, :]
        attrs = self._norm(attrs.astype(states.dtype, copy=False), self._attr_norm)
        rel_in = np.concatenate([senders, receivers, attrs], axis=2)
        return rel_in.reshape(-1, 2 * NODE_DIM + ATTR_DIM)

    def _aggregate(self, edge_effects: np.ndarray) -> np.ndarray:
        """Sum effects onto receivers: (B, E, F) -> (B, N, F)."""
        return np.matmul(self._receiver_onehot, edge_effects)

    # --- training ---

    def fit(self, segments: list[RepSegment], cfg: TrainConfig) -> TrainHistory:
        dtype = self.params.np_dtype()
        data = [_segment_state_arrays(s, self.spec, dtype) for s in segments]
        rng = np.random.default_rng(cfg.seed)
        self.relation_net.init_params(rng)
        self.object_net.init_params(rng)
        train_ids, val_ids = _split_reps(len(segments), cfg, rng)

        def stack(ids):
            ps, vs, ns = [], [], []
            for i in ids:
                pos, vel = data[i]
                node_pos = _node_positions(pos, self.spec)        # (T, N, 2)
                node_vel = np.zeros_like(node_pos)
                node_vel[:, :self.topology.n_landmarks] = vel
                ps.append(node_pos[:-1])
                vs.append(node_vel[:-1])
                ns.append(node_pos[1:])
            return (np.concatenate(ps), np.concatenate(vs), np.concatenate(ns))

        pt, vt, nt = stack(train_ids)
        pv, vv, nv = stack(val_ids)
        self._noise_std = cfg.noise_std
        self._fit_norms(np.concatenate([pt, vt], axis=2), edge_attributes(pt, self.topology))

        def val_loss() -> float:
            states = np.concatenate([pv, vv], axis=2)
            pred = self._predict(states, self._attrs_for(pv))
            target = nv - pv
            target[:, self.topology.n_landmarks:, :] = 0.0
            return float(np.mean((pred - target) ** 2))

        params = self.relation_net.parameters() + self.object_net.parameters()
        flags = self.relation_net.decay_flags() + self.object_net.decay_flags()
        if self.variant == "indep":
            n_rel = len(self.relation_net.parameters())
            params, flags = params[n_rel:], flags[n_rel:]
        opt = AdamW(params, flags, weight_decay=cfg.weight_decay)
        schedule = OneCycleSchedule(cfg.peak_lr, cfg.max_epochs, cfg.warmup_fraction)
        return _run_epochs(self, (pt, vt, nt), val_loss, opt, schedule, cfg, rng)

    def _attrs_for(self, node_pos: np.ndarray) -> np.ndarray:
        attrs = edge_attributes(node_pos, self.topology)
        if self.variant == "attr-hidden":
            attrs = np.zeros_like(attrs)
        return attrs.astype(node_pos.dtype, copy=False)

    def _step(self, batch, lr: float, opt: AdamW, rng) -> float:
        pos, vel, nxt = batch
        b = pos.shape[0]
        topo = self.topology
        dtype = self.relation_net.dtype
        if self._noise_std > 0:
            pos = pos.copy()
            pos[:, :topo.n_landmarks, :] += self._noise_std * rng.standard_normal(
                (b, topo.n_landmarks, 2))
        y = nxt - pos
        y[:, topo.n_landmarks:, :] = 0.0
        x = np.concatenate([pos, vel], axis=2)
        if self.variant == "indep":
            effects = np.zeros((b, topo.n_nodes, self.params.effect_dim), dtype=dtype)
            rel_cache = None
        else:
            rel_in = self._relation_inputs(x, self._attrs_for(pos))
            rel_masks = self.relation_net.make_masks(rel_in.shape[0], rng)
            eff_flat, rel_inputs, rel_gates = self.relation_net.forward_cached(rel_in, rel_masks)
            effects = self._aggregate(
                eff_flat.reshape(b, topo.n_edges, self.params.effect_dim))
            rel_cache = (rel_inputs, rel_gates, rel_masks)
        obj_in = np.concatenate([x, effects], axis=2).reshape(b * topo.n_nodes, -1)
        obj_masks = self.object_net.make_masks(obj_in.shape[0], rng)
        out_flat, obj_inputs, obj_gates = self.object_net.forward_cached(obj_in, obj_masks)
        pred = out_flat.reshape(b, topo.n_nodes, OUT_DIM)
        pred[:, topo.n_landmarks:, :] = 0.0

        diff = pred - y
        loss = float(np.mean(diff * diff))
        grad_pred = (2.0 / diff.size) * diff
        grad_pred[:, topo.n_landmarks:, :] = 0.0

        gw_o, gb_o, grad_obj_in = self.object_net.backward(
            obj_inputs, obj_gates, obj_masks, grad_pred.reshape(b * topo.n_nodes, OUT_DIM))
        grads_obj = []
        for gw, gb in zip(gw_o, gb_o):
            grads_obj += [gw, gb]

        if rel_cache is None:
            opt.step(grads_obj, lr)
            return loss

        grad_effects = grad_obj_in.reshape(b, topo.n_nodes, -1)[:, :, NODE_DIM:]
        grad_eff_edges = grad_effects[:, topo.receiver_idx, :].reshape(
            b * topo.n_edges, self.params.effect_dim)
        rel_inputs, rel_gates, rel_masks = rel_cache
        gw_r, gb_r, _ = self.relation_net.backward(
            rel_inputs, rel_gates, rel_masks, grad_eff_edges)
        grads = []
        for gw, gb in zip(gw_r, gb_r):
            grads += [gw, gb]
        grads += grads_obj
        opt.step(grads, lr)
        return loss

    # --- inference ---

    def rollout(self, segment: RepSegment) -> RolloutError:
        """Free rollout from the rep's initial state; squared position error."""
        dtype = self.params.np_dtype()
        pos, vel = _segment_state_arrays(segment, self.spec, dtype)
        n_frames, k = pos.shape[0], pos.shape[1]
        if n_frames < 2:
            raise ValueError("rollout needs at least 2 frames")
        topo = self.topology
        cur_pos = _node_positions(pos[0], self.spec)
        cur_vel = np.zeros_like(cur_pos)
        cur_vel[:k] = vel[0]
        errors = np.empty((k, n_frames - 1), dtype=dtype)
        for t in range(n_frames - 1):
            attrs = edge_attributes(cur_pos, topo)
            if self.variant == "attr-hidden":
                attrs = np.zeros_like(attrs)
            state = np.concatenate([cur_pos, cur_vel], axis=1)
            # reference rows predict zero velocity, so they stay pinned
            cur_vel = self._predict(state[None, ...], attrs[None, ...])[0]
            cur_pos = cur_pos + cur_vel
            errors[:, t] = ((cur_pos[:k] - pos[t + 1]) ** 2).mean(axis=1)
        return RolloutError.from_series(segment.landmarks, errors)

    # --- persistence ---

    def save(self, path, train_config: TrainConfig | None = None) -> None:
        arrays = {}
        for i, p in enumerate(self.relation_net.parameters()):
            arrays[f"relation/{i}"] = p
        for i, p in enumerate(self.object_net.parameters()):
            arrays[f"object/{i}"] = p
        arrays["norm/state_mean"], arrays["norm/state_std"] = self._state_norm
        arrays["norm/attr_mean"], arrays["norm/attr_std"] = self._attr_norm
        meta = {
            "format": "formsense-engine",
            "version": 1,
            "kind": "interaction",
            "variant": self.variant,
            "exercise": self.spec.exercise.value,
            "params": asdict(self.params),
            "train_config": asdict(train_config) if train_config else None,
        }
        containers.save_arrays(path, meta, arrays)


class MlpBaseline:
    """Flattened-input baseline: all landmark states in, all velocities out."""

    variant = "mlp"

    def __init__(self, spec: ExerciseSpec, params: EngineParams = EngineParams()):
        self.spec = spec
        self.params = params
        k = len(spec.landmarks)
        dtype = params.np_dtype()
        self.net = DenseNet((NODE_DIM * k, *params.relation_hidden, OUT_DIM * k),
                            dropout=params.dropout, dtype=dtype)
        self._feat_norm = (np.zeros(NODE_DIM * k, dtype=dtype),
                           np.ones(NODE_DIM * k, dtype=dtype))

    def fit(self, segments: list[RepSegment], cfg: TrainConfig) -> TrainHistory:
        dtype = self.params.np_dtype()
        data = [_segment_state_arrays(s, self.spec, dtype) for s in segments]
        rng = np.random.default_rng(cfg.seed)
        self.net.init_params(rng)
        train_ids, val_ids = _split_reps(len(segments), cfg, rng)

        def stack(ids):
            ps, vs, ns = [], [], []
            for i in ids:
                pos, vel = data[i]
                ps.append(pos[:-1])
                vs.append(vel[:-1])
                ns.append(pos[1:])
            return (np.concatenate(ps), np.concatenate(vs), np.concatenate(ns))

        pt, vt, nt = stack(train_ids)
        pv, vv, nv = stack(val_ids)
        self._noise_std = cfg.noise_std
        flat = np.concatenate([pt, vt], axis=2).reshape(pt.shape[0], -1)
        self._feat_norm = (flat.mean(axis=0).astype(dtype),
                           np.maximum(flat.std(axis=0), 1e-8).astype(dtype))

        def val_loss() -> float:
            feats = np.concatenate([pv, vv], axis=2).reshape(pv.shape[0], -1)
            pred = self._forward_features(feats)
            target = (nv - pv).reshape(pv.shape[0], -1)
            return float(np.mean((pred - target) ** 2))

        opt = AdamW(self.net.parameters(), self.net.decay_flags(),
                    weight_decay=cfg.weight_decay)
        schedule = OneCycleSchedule(cfg.peak_lr, cfg.max_epochs, cfg.warmup_fraction)
        return _run_epochs(self, (pt, vt, nt), val_loss, opt, schedule, cfg, rng)

    def _forward_features(self, feats: np.ndarray, masks=None) -> np.ndarray:
        mean, std = self._feat_norm
        return self.net.forward((feats - mean) / std, masks)

    def _step(self, batch, lr: float, opt: AdamW, rng) -> float:
        pos, vel, nxt = batch
        b = pos.shape[0]
        if self._noise_std > 0:
            pos = pos + self._noise_std * rng.standard_normal(pos.shape)
        mean, std = self._feat_norm
        x = (np.concatenate([pos, vel], axis=2).reshape(b, -1) - mean) / std
        y = (nxt - pos).reshape(b, -1)
        masks = self.net.make_masks(b, rng)
        out, inputs, gates = self.net.forward_cached(x, masks)
        diff = out - y
        loss = float(np.mean(diff * diff))
        gw, gb, _ = self.net.backward(inputs, gates, masks, (2.0 / diff.size) * diff)
        grads = []
        for w, b_ in zip(gw, gb):
            grads += [w, b_]
        opt.step(grads, lr)
        return loss

    def rollout(self, segment: RepSegment) -> RolloutError:
        dtype = self.params.np_dtype()
        pos, vel = _segment_state_arrays(segment, self.spec, dtype)
        n_frames, k = pos.shape[0], pos.shape[1]
        if n_frames < 2:
            raise ValueError("rollout needs at least 2 frames")
        cur_pos = pos[0].copy()
        cur_vel = np.zeros_like(cur_pos)
        errors = np.empty((k, n_frames - 1), dtype=dtype)
        for t in range(n_frames - 1):
            feat = np.concatenate([cur_pos, cur_vel], axis=1).reshape(1, -1)
            cur_vel = self._forward_features(feat).reshape(k, OUT_DIM)
            cur_pos = cur_pos + cur_vel
            errors[:, t] = ((cur_pos - pos[t + 1]) ** 2).mean(axis=1)
        return RolloutError.from_series(segment.landmarks, errors)

    def save(self, path, train_config: TrainConfig | None = None) -> None:
        arrays = {f"net/{i}": p for i, p in enumerate(self.net.parameters())}
        arrays["norm/feat_mean"], arrays["norm/feat_std"] = self._feat_norm
        meta = {
            "format": "formsense-engine",
            "version": 1,
            "kind": "mlp",
            "variant": "mlp",
            "exercise": self.spec.exercise.value,
            "params": asdict(self.params),
            "train_config": asdict(train_config) if train_config else None,
        }
        containers.save_arrays(path, meta, arrays)


def _run_epochs(model, train_data, val_loss, opt: AdamW,
                schedule: OneCycleSchedule, cfg: TrainConfig,
                rng: np.random.Generator) -> TrainHistory:
    """Shared epoch loop: minibatches, one-cycle rates, early stopping."""
    history = TrainHistory()
    n = train_data[0].shape[0]
    nets = ([model.relation_net, model.object_net]
            if isinstance(model, InteractionEngine) else [model.net])
    best = [
        [p.copy() for p in net.parameters()] for net in nets
    ]
    bad = 0
    for epoch in range(cfg.max_epochs):
        lr = schedule.rate(epoch)
        order = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            loss = model._step(tuple(arr[idx] for arr in train_data), lr, opt, rng)
            total += loss * len(idx)
        vloss = val_loss()
        history.train_loss.append(total / n)
        history.val_loss.append(vloss)
        history.rates.append(lr)
        if vloss < history.best_val:
            history.best_val = vloss
            history.best_epoch = epoch
            best = [[p.copy() for p in net.parameters()] for net in nets]
            bad = 0
        else:
            bad += 1
            if bad > cfg.patience:
                break
    for net, params in zip(nets, best):
        net.set_parameters(params)
    return history


def make_engine(spec: ExerciseSpec, variant: str,
                params: EngineParams = EngineParams()):
    """Engine factory covering the graph variants and the MLP baseline."""
    if variant == "mlp":
        return MlpBaseline(spec, params)
    return InteractionEngine(spec, variant, params)


def load_engine(path):
    """Restore an engine (any variant) from a checkpoint container."""
    meta, arrays = containers.load_arrays(path)
    if meta.get("format") != "formsense-engine":
        raise ValueError(f"{path}: not an engine checkpoint")
    params = EngineParams(
        relation_hidden=tuple(meta["params"]["relation_hidden"]),
        object_hidden=tuple(meta["params"]["object_hidden"]),
        effect_dim=meta["params"]["effect_dim"],
        dropout=meta["params"]["dropout"],
        dtype=meta["params"]["dtype"],
    )
    spec = exercise_preset(meta["exercise"])
    if meta["kind"] == "mlp":
        model = MlpBaseline(spec, params)
        model.net.set_parameters(
            [arrays[f"net/{i}"] for i in range(2 * len(model.net.weights))])
        if "norm/feat_mean" in arrays:
            model._feat_norm = (arrays["norm/feat_mean"], arrays["norm/feat_std"])
        return model
    engine = InteractionEngine(spec, meta["variant"], params)
    engine.relation_net.set_parameters(
        [arrays[f"relation/{i}"] for i in range(2 * len(engine.relation_net.weights))])
    engine.object_net.set_parameters(
        [arrays[f"object/{i}"] for i in range(2 * len(engine.object_net.weights))])
    if "norm/state_mean" in arrays:
        engine._state_norm = (arrays["norm/state_mean"], arrays["norm/state_std"])
        engine._attr_norm = (arrays["norm/attr_mean"], arrays["norm/attr_std"])
    return engine
