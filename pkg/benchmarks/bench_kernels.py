"""Compare the jitted kernels with their numpy twins.

    python3 benchmarks/bench_kernels.py            # kernel micro-benchmarks
    python3 benchmarks/bench_kernels.py --update   # also time a full SAC update per backend

The update timing runs in a subprocess per backend because the backend is
fixed when ``hypersac.kernels`` is imported.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hypersac.kernels import _numba as nb
from hypersac.kernels import _numpy as npk

UPDATE_SNIPPET = """
import timeit, numpy as np
from hypersac.agent import SacAgent, SacConfig
from hypersac.replay import TransitionBatch
rng = np.random.default_rng(0)
cfg = SacConfig(smoothing_samples={m})
agent = SacAgent.create(8, 5, cfg, np.random.default_rng(1), np.random.default_rng(2))
batch = TransitionBatch(rng.normal(size=(64, 8)), rng.uniform(-1, 1, (64, 5)),
                        rng.normal(size=(64, 8)), rng.uniform(1, 50, 64))
agent.update(batch)
n = 100
print(timeit.timeit(lambda: agent.update(batch), number=n) / n * 1e3)
"""


def _time(fn, repeat=5, number=200):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number * 1e6


def kernel_cases(rng):
    act = rng.normal(size=(256, 256)).astype(np.float32)
    grad = rng.normal(size=act.shape).astype(np.float32)
    param = rng.normal(size=(256, 256)).astype(np.float32)
    m, v = np.zeros_like(param), np.zeros_like(param)
    target = param.copy()
    base = rng.normal(size=8)
    partners = rng.normal(size=(8, 8))
    z = rng.normal(size=(64, 32))
    cell = rng.normal(size=(64, 8))
    return {
        "sigmoid 256x256": lambda k: k.sigmoid(act),
        "relu 256x256": lambda k: k.relu(act),
        "relu_backward 256x256": lambda k: k.relu_backward(act, grad),
        "adam_update 256x256": lambda k: k.adam_update(param, m, v, grad, 1e-3, 0.9, 0.999,
                                                       1e-8, 10),
        "soft_update 256x256": lambda k: k.soft_update(target, param, 0.005),
        "mix_closed_form n=8": lambda k: k.mix_closed_form(base, partners, 0.1),
        "lstm_pointwise 64x8": lambda k: k.lstm_pointwise(z, cell),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--update", action="store_true", help="time full SAC updates too")
    args = parser.parse_args()

    cases = kernel_cases(np.random.default_rng(0))
    for fn in cases.values():  # compile outside the timed region
        fn(nb)
    print(f"{'kernel':<24}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, fn in cases.items():
        t_np = _time(lambda: fn(npk))
        t_nb = _time(lambda: fn(nb))
        print(f"{name:<24}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>10.2f}")

    if args.update:
        print(f"\n{'SAC update (batch 64)':<24}{'numpy ms':>12}{'numba ms':>12}")
        for m in (1, 4):
            times = []
            for flag in ("0", "1"):
                env = dict(os.environ, HYPERSAC_NUMBA=flag)
                out = subprocess.run([sys.executable, "-c", UPDATE_SNIPPET.format(m=m)], env=env,
                                     capture_output=True, text=True, check=True)
                times.append(float(out.stdout.strip()))
            print(f"{f'M = {m}':<24}{times[0]:>12.2f}{times[1]:>12.2f}")


if __name__ == "__main__":
    main()
