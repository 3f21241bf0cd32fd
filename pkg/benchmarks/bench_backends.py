"""Compare the compiled dense-layer core against the numpy fallback.

Times the layer kernels at pipeline-realistic shapes plus a short engine
training loop. Run:  python3 benchmarks/bench_backends.py
"""

import time

import numpy as np

from formsense.engine import EngineParams, TrainConfig, make_engine
from formsense.model import Exercise, exercise_preset
from formsense.nn import DenseNet
from formsense.nn import backend as backend_mod
from formsense.pipeline import prepare_series
from formsense.preprocess import QualityGate, SmoothingConfig
from formsense.rig import RigConfig, generate


def time_call(fn, repeats=20, warmup=3):
    for _ in range(warmup):
        fn()
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_kernels(backend: str):
    backend_mod.set_backend(backend)
    rng = np.random.default_rng(0)
    results = {}
    # relation net at training batch size: 64 pairs x 10 edges
    net = DenseNet((11, 256, 256, 256, 50)).init_params(rng, zero_output=False)
    x = rng.standard_normal((640, 11))
    g = rng.standard_normal((640, 50))
    results["relation fwd (640x11)"] = time_call(lambda: net.forward(x))

    def fwd_bwd():
        out, inputs, gates = net.forward_cached(x)
        net.backward(inputs, gates, None, g)

    results["relation fwd+bwd"] = time_call(fwd_bwd)

    # object net at rollout batch size: one 7-node graph
    onet = DenseNet((54, 256, 256, 256, 256, 2)).init_params(rng, zero_output=False)
    xs = rng.standard_normal((7, 54))
    results["object fwd (7x54)"] = time_call(lambda: onet.forward(xs), repeats=200)
    return results


def bench_training(backend: str):
    backend_mod.set_backend(backend)
    spec = exercise_preset(Exercise.SQUATS)
    out = generate(RigConfig(exercise=Exercise.SQUATS, reps=6, seed=0))
    segs = prepare_series(out.series, spec, SmoothingConfig(0.25, 2),
                          QualityGate()).segments
    engine = make_engine(spec, "in", EngineParams())
    cfg = TrainConfig(max_epochs=15, patience=15, seed=0)
    t0 = time.perf_counter()
    engine.fit(segs, cfg)
    return (time.perf_counter() - t0) / cfg.max_epochs


def main():
    backends = list(backend_mod._BACKENDS)
    print(f"available backends: {backends}")
    rows = {}
    for backend in backends:
        rows[backend] = bench_kernels(backend)
        rows[backend]["engine train epoch"] = bench_training(backend)
    names = list(next(iter(rows.values())))
    width = max(len(n) for n in names) + 2
    header = "kernel".ljust(width) + "".join(b.rjust(14) for b in backends)
    if len(backends) == 2:
        header += "speedup".rjust(10)
    print(header)
    for name in names:
        line = name.ljust(width)
        for b in backends:
            line += f"{rows[b][name] * 1e3:11.3f} ms"
        if len(backends) == 2:
            a, b = backends
            line += f"{rows[a][name] / rows[b][name]:9.2f}x"
        print(line)


if __name__ == "__main__":
    main()
