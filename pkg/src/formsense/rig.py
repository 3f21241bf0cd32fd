"""Deterministic articulated-rig generator for exercise landmark data.

Driver landmarks follow closed-form periodic templates (exact ground-truth
rep boundaries at the template minima); follower landmarks integrate damped
spring dynamics whose per-step velocity depends on joint-to-joint distance
and direction, so next-step motion is a function of pairwise geometry and
plain state-copying models are handicapped by construction. Fault modes
deform the template; Gaussian measurement noise is added last, from a seed
stream independent of the deformation.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .io import write_series
from .model import (
    ClassLabel,
    ConfigError,
    Exercise,
    ExerciseSpec,
    LandmarkFrame,
    LandmarkId,
    LandmarkSeries,
    exercise_preset,
)

L = LandmarkId

BURN_IN_PERIODS = 3


@dataclass(frozen=True)
class RigConfig:
    exercise: Exercise | str = Exercise.SQUATS
    reps: int = 10
    frames_per_rep: int = 40
    fault_mode: int | None = None   # class id from the exercise preset
    fault_severity: float = 0.0
    noise_std: float = 0.004
    rep_amplitude_jitter: float = 0.12  # per-rep range-of-motion spread
    body_jitter: float = 1.0            # per-session skeleton variation scale
    seed: int = 0
    frame_rate: float = 30.0

    def __post_init__(self):
        if isinstance(self.exercise, str):
            object.__setattr__(self, "exercise", Exercise.from_name(self.exercise))
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.frames_per_rep < 8:
            raise ConfigError("frames_per_rep must be >= 8")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if not 0.0 <= self.rep_amplitude_jitter < 1.0:
            raise ConfigError("rep_amplitude_jitter must be in [0, 1)")
        if self.body_jitter < 0.0:
            raise ConfigError("body_jitter must be >= 0")
        if not 0.0 <= self.fault_severity <= 1.0:
            raise ConfigError("fault_severity must be in [0, 1]")
        if (self.fault_mode is None) != (self.fault_severity == 0.0):
            raise ConfigError("fault_severity must be 0 exactly when fault_mode is absent")


@dataclass
class RigOutput:
    series: LandmarkSeries
    boundaries: list[tuple[int, int]]
    label: ClassLabel
    config: RigConfig


@dataclass
class _Spring:
    """Damped spring follower; optionally one axis is pinned to a template."""

    target: LandmarkId
    anchors: list[tuple[LandmarkId, float]]  # (anchor, stiffness)
    home: tuple[float, float]
    home_pull: float = 0.12
    damping: float = 0.8
    pinned_axis: int | None = None
    pin_template: np.ndarray | None = None   # (T,) values for the pinned axis


def _depth(t: np.ndarray, cfg: RigConfig) -> np.ndarray:
    """Per-rep range of motion: base half-cosine scaled by a seeded per-rep
    amplitude (zero at every rep boundary, so boundaries stay exact)."""
    base = 0.5 * (1.0 - np.cos(2.0 * np.pi * t / cfg.frames_per_rep))
    if cfg.rep_amplitude_jitter <= 0:
        return base
    amp_rng = np.random.default_rng([cfg.seed, 1])
    amps = 1.0 + cfg.rep_amplitude_jitter * (2.0 * amp_rng.random(cfg.reps) - 1.0)
    rep_idx = np.clip(np.floor(t / cfg.frames_per_rep).astype(int), -1, cfg.reps - 1)
    scale = np.where(rep_idx < 0, 1.0, amps[np.clip(rep_idx, 0, cfg.reps - 1)])
    return scale * base


def _sway(t: np.ndarray, frames_per_rep: int) -> np.ndarray:
    return np.sin(np.pi * math.sqrt(2.0) * t / frames_per_rep)


def _simulate(drivers: dict[LandmarkId, np.ndarray], springs: list[_Spring],
              n_frames: int) -> dict[LandmarkId, np.ndarray]:
    """Integrate follower springs against precomputed driver trajectories."""
    pos: dict[LandmarkId, np.ndarray] = {lm: p for lm, p in drivers.items()}
    for s in springs:
        p = np.empty((n_frames, 2))
        p[0] = s.home
        if s.pinned_axis is not None:
            p[0, s.pinned_axis] = s.pin_template[0]
        pos[s.target] = p
    vel = {s.target: np.zeros(2) for s in springs}
    rests = {}
    for s in springs:
        rests[s.target] = [
            (anchor, float(np.linalg.norm(np.asarray(s.home) - pos[anchor][0])), k)
            for anchor, k in s.anchors
        ]
    for t in range(n_frames - 1):
        for s in springs:
            p = pos[s.target][t]
            force = s.home_pull * (np.asarray(s.home) - p)
            for anchor, rest, k in rests[s.target]:
                delta = pos[anchor][t] - p
                d = float(np.linalg.norm(delta))
                if d > 1e-9:
                    force = force + k * (d - rest) * delta / d
            v = s.damping * vel[s.target] + force
            nxt = p + v
            if s.pinned_axis is not None:
                nxt[s.pinned_axis] = s.pin_template[t + 1]
                v = nxt - p
            vel[s.target] = v
            pos[s.target][t + 1] = nxt
    return pos


# --- squats geometry (shared with the closed-form fault oracle) ---

SQUAT_GEOMETRY = {
    "mid_x": 0.5,
    "hip_halfwidth": 0.06,
    "hip_top_y": 0.55,
    "squat_depth": 0.16,
    "sway_amp": 0.02,
    "knee_travel": 0.03,
    "knee_y_home": 0.78,
    "toe_margin": 0.045,
    "knee_travel_gain": 2.0,   # fault 1: travel *= 1 + gain * severity
    "knee_inward_shift": 0.05,  # fault 2
    "stance_gain": 1.2,         # fault 3: halfwidth *= 1 + gain * severity
    "nose_home": (0.53, 0.30),
}


def squat_knee_margin(severity: float) -> float:
    """Closed-form max knee-x overshoot past the toe line for fault 1.

    Exact for body_jitter = 0 and rep_amplitude_jitter = 0 configs (the
    template then reaches depth 1 exactly).
    """
    g = SQUAT_GEOMETRY
    travel = g["knee_travel"] * (1.0 + g["knee_travel_gain"] * severity)
    return travel - g["toe_margin"]


def _body(cfg: RigConfig, n: int) -> np.ndarray:
    """Per-session skeleton variation factors in [-1, 1], seeded."""
    if cfg.body_jitter <= 0:
        return np.zeros(n)
    rng = np.random.default_rng([cfg.seed, 2])
    return cfg.body_jitter * (2.0 * rng.random(n) - 1.0)


def _squats(cfg: RigConfig, t: np.ndarray, fault: int, sev: float):
    g = SQUAT_GEOMETRY
    u = _body(cfg, 8)
    depth = _depth(t, cfg)
    sway = g["sway_amp"] * (1.0 + 0.4 * u[0]) * _sway(t, cfg.frames_per_rep)
    halfwidth = g["hip_halfwidth"] * (1.0 + 0.25 * u[1]) \
        * (1.0 + g["stance_gain"] * sev * (fault == 3))
    travel = g["knee_travel"] * (1.0 + 0.3 * u[2]) \
        * (1.0 + g["knee_travel_gain"] * sev * (fault == 1))
    inward = g["knee_inward_shift"] * sev * (fault == 2)
    hip_top = g["hip_top_y"] + 0.04 * u[3]
    squat_depth = g["squat_depth"] * (1.0 + 0.2 * u[4])
    knee_home_y = g["knee_y_home"] + 0.04 * u[5]
    nose_home = (g["nose_home"][0] + 0.03 * u[6], g["nose_home"][1] + 0.05 * u[7])

    hip_y = hip_top + squat_depth * depth
    lhip_x = g["mid_x"] - halfwidth + sway
    rhip_x = g["mid_x"] + halfwidth + sway
    drivers = {
        L.LEFT_HIP: np.stack([lhip_x, hip_y], axis=1),
        L.RIGHT_HIP: np.stack([rhip_x, hip_y], axis=1),
    }
    lknee_x = (g["mid_x"] - halfwidth) + travel * depth + inward * depth
    rknee_x = (g["mid_x"] + halfwidth) + travel * depth - inward * depth
    springs = [
        _Spring(L.LEFT_KNEE, [(L.LEFT_HIP, 0.5)],
                home=(g["mid_x"] - halfwidth, knee_home_y), home_pull=0.05,
                pinned_axis=0, pin_template=lknee_x),
        _Spring(L.RIGHT_KNEE, [(L.RIGHT_HIP, 0.5)],
                home=(g["mid_x"] + halfwidth, knee_home_y), home_pull=0.05,
                pinned_axis=0, pin_template=rknee_x),
        _Spring(L.NOSE, [(L.LEFT_HIP, 0.3), (L.RIGHT_HIP, 0.3)],
                home=nose_home, home_pull=0.05),
    ]
    return drivers, springs


def _situps(cfg: RigConfig, t: np.ndarray, fault: int, sev: float):
    depth = _depth(t, cfg) * (1.0 - 0.6 * sev * (fault == 1))
    shoulder = np.stack([0.30 + 0.10 * depth, 0.72 - 0.20 * depth], axis=1)
    hip = np.broadcast_to(np.array([0.48, 0.74]), (len(t), 2)).copy()
    knee = np.broadcast_to(np.array([0.64, 0.72]), (len(t), 2)).copy()
    drivers = {L.LEFT_SHOULDER: shoulder, L.LEFT_HIP: hip, L.LEFT_KNEE: knee}
    springs = [
        _Spring(L.NOSE, [(L.LEFT_SHOULDER, 0.5)], home=(0.26, 0.64), home_pull=0.04),
    ]
    return drivers, springs


def _pushups(cfg: RigConfig, t: np.ndarray, fault: int, sev: float):
    amp = 0.12 * (1.0 - 0.6 * sev * (fault == 2)) * (1.0 + 0.55 * sev * (fault == 4))
    depth = _depth(t, cfg)
    shoulder = np.stack([np.full(len(t), 0.35), 0.55 + amp * depth], axis=1)
    hand = np.broadcast_to(np.array([0.33, 0.82]), (len(t), 2)).copy()
    toe = np.broadcast_to(np.array([0.80, 0.84]), (len(t), 2)).copy()
    hip_home_y = 0.66 + 0.10 * sev * (fault == 1) - 0.10 * sev * (fault == 3)
    drivers = {L.LEFT_SHOULDER: shoulder, L.LEFT_HAND: hand, L.LEFT_TOE: toe}
    springs = [
        _Spring(L.LEFT_HIP, [(L.LEFT_SHOULDER, 0.3), (L.LEFT_TOE, 0.3)],
                home=(0.58, hip_home_y), home_pull=0.10),
    ]
    return drivers, springs


def _lunges(cfg: RigConfig, t: np.ndarray, fault: int, sev: float):
    depth = _depth(t, cfg)
    spread = 0.08 * sev * (fault == 2)
    travel = 0.04 * (1.0 + 2.0 * sev * (fault == 1))
    hip = np.stack([np.full(len(t), 0.48), 0.58 + 0.14 * depth], axis=1)
    toe = np.broadcast_to(np.array([0.30 - spread, 0.88]), (len(t), 2)).copy()
    heel = np.broadcast_to(np.array([0.62 + spread, 0.88]), (len(t), 2)).copy()
    drivers = {L.LEFT_HIP: hip, L.RIGHT_TOE: toe, L.LEFT_HEEL: heel}
    front_knee_x = (0.60 + spread) + travel * depth
    springs = [
        _Spring(L.LEFT_SHOULDER, [(L.LEFT_HIP, 0.4)], home=(0.46, 0.32),
                home_pull=0.05),
        _Spring(L.LEFT_KNEE, [(L.LEFT_HIP, 0.35)], home=(0.60 + spread, 0.76),
                pinned_axis=0, pin_template=front_knee_x),
        _Spring(L.RIGHT_KNEE, [(L.LEFT_HIP, 0.35)], home=(0.36 - spread, 0.80)),
    ]
    return drivers, springs


def _arm_raise(cfg: RigConfig, t: np.ndarray, fault: int, sev: float,
               press: bool):
    depth = _depth(t, cfg) * (1.0 - 0.6 * sev * (fault == 1))
    n = len(t)
    if press:
        wrist_y = 0.30 - 0.18 * depth
        lw_x = 0.40 - 0.02 * depth
        rw_x = 0.60 + 0.02 * depth
        shoulder_shift = np.zeros(n)
        elbow_flare = 0.06 * sev * (fault == 2)
    else:
        wrist_y = 0.62 - 0.27 * depth
        lw_x = 0.40 + 0.12 * depth
        rw_x = 0.60 + 0.12 * depth
        shoulder_shift = -0.05 * sev * (fault == 2) * depth  # torso swing
        elbow_flare = 0.0
    drivers = {
        L.LEFT_WRIST: np.stack([lw_x, wrist_y], axis=1),
        L.RIGHT_WRIST: np.stack([rw_x, wrist_y], axis=1),
        L.LEFT_SHOULDER: np.stack([0.42 + shoulder_shift, np.full(n, 0.35)], axis=1),
        L.RIGHT_SHOULDER: np.stack([0.58 + shoulder_shift, np.full(n, 0.35)], axis=1),
    }
    springs = [
        _Spring(L.LEFT_ELBOW, [(L.LEFT_SHOULDER, 0.35), (L.LEFT_WRIST, 0.35)],
                home=(0.37 - elbow_flare, 0.40)),
        _Spring(L.RIGHT_ELBOW, [(L.RIGHT_SHOULDER, 0.35), (L.RIGHT_WRIST, 0.35)],
                home=(0.63 + elbow_flare, 0.40)),
    ]
    return drivers, springs


_TEMPLATES = {
    Exercise.SQUATS: _squats,
    Exercise.SITUPS: _situps,
    Exercise.PUSHUPS: _pushups,
    Exercise.LUNGES: _lunges,
    Exercise.SHOULDER_PRESS: lambda c, t, f, s: _arm_raise(c, t, f, s, True),
    Exercise.FRONT_RAISE: lambda c, t, f, s: _arm_raise(c, t, f, s, False),
}


def generate(cfg: RigConfig, spec: ExerciseSpec | None = None) -> RigOutput:
    """Produce one labeled session with exact ground-truth boundaries."""
    spec = spec or exercise_preset(cfg.exercise)
    if spec.exercise != cfg.exercise:
        raise ConfigError("config exercise does not match the spec")
    fault = cfg.fault_mode if cfg.fault_mode is not None else 0
    label = spec.class_by_id(fault)  # raises for an incompatible fault id
    if fault != 0 and label.kind != "fault":
        raise ConfigError(f"class {fault} is not a fault class")

    burn = BURN_IN_PERIODS * cfg.frames_per_rep
    n_frames = cfg.reps * cfg.frames_per_rep + 1
    t = np.arange(-burn, n_frames, dtype=float)
    drivers, springs = _TEMPLATES[cfg.exercise](cfg, t, fault, cfg.fault_severity)
    for s in springs:
        if s.pin_template is not None and len(s.pin_template) != len(t):
            raise AssertionError("pin template length mismatch")
    pos = _simulate(drivers, springs, len(t))
    pos = {lm: p[burn:] for lm, p in pos.items()}

    emitted = list(spec.landmarks)
    if L.LEFT_HIP in pos and L.RIGHT_HIP not in pos:
        pos[L.RIGHT_HIP] = pos[L.LEFT_HIP] + np.array([0.03, 0.0])
        emitted.append(L.RIGHT_HIP)

    rng = np.random.default_rng([cfg.seed, 0])
    noise = rng.normal(0.0, cfg.noise_std, size=(n_frames, len(emitted), 2)) \
        if cfg.noise_std > 0 else np.zeros((n_frames, len(emitted), 2))

    frames = []
    for i in range(n_frames):
        positions = {}
        visibility = {}
        for j, lm in enumerate(emitted):
            x, y = pos[lm][i] + noise[i, j]
            positions[lm] = (float(x), float(y), 0.0)
            visibility[lm] = 1.0
        frames.append(LandmarkFrame(timestamp=i / cfg.frame_rate,
                                    positions=positions, visibility=visibility))
    series = LandmarkSeries(frames=frames, frame_rate=cfg.frame_rate,
                            landmarks=tuple(emitted),
                            source=f"rig:{cfg.exercise.value}:seed{cfg.seed}",
                            exercise=cfg.exercise)
    boundaries = [(k * cfg.frames_per_rep, (k + 1) * cfg.frames_per_rep)
                  for k in range(cfg.reps)]
    return RigOutput(series=series, boundaries=boundaries, label=label, config=cfg)


def write_truth(out: RigOutput, path: str | Path) -> None:
    cfg = asdict(out.config)
    cfg["exercise"] = out.config.exercise.value
    payload = {
        "exercise": out.config.exercise.value,
        "label_id": out.label.id,
        "boundaries": [list(b) for b in out.boundaries],
        "config": cfg,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n",
                          encoding="utf-8")


def read_truth(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def generate_files(cfg: RigConfig, series_path: str | Path,
                   truth_path: str | Path) -> RigOutput:
    out = generate(cfg)
    write_series(out.series, series_path)
    write_truth(out, truth_path)
    return out


def generate_dataset(exercise: Exercise | str, class_ids: list[int],
                     reps_per_class: int, seed: int = 0,
                     frames_per_rep: int = 40, noise_std: float = 0.004,
                     reps_per_session: int = 10,
                     frame_rate: float = 30.0) -> list[RigOutput]:
    """Multi-session dataset: severities vary across sessions of a class."""
    spec = exercise_preset(exercise)
    outputs = []
    rng = np.random.default_rng(seed)
    for class_id in class_ids:
        done = 0
        session = 0
        while done < reps_per_class:
            reps = min(reps_per_session, reps_per_class - done)
            reps = max(reps, 2)
            severity = 0.0 if class_id == 0 else float(0.5 + 0.3 * rng.random())
            cfg = RigConfig(
                exercise=spec.exercise,
                reps=reps,
                frames_per_rep=frames_per_rep,
                fault_mode=None if class_id == 0 else class_id,
                fault_severity=severity,
                noise_std=noise_std,
                seed=int(rng.integers(0, 2 ** 31)),
                frame_rate=frame_rate,
            )
            outputs.append(generate(cfg, spec))
            done += reps
            session += 1
    return outputs
