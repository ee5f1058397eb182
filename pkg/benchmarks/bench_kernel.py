"""Compare the compiled and pure-Python frame simulators.

Usage::

    python benchmarks/bench_kernel.py [--frames N] [--repeat K]

Both backends run the same pre-drawn frames; the script checks that they
agree bit for bit and reports the time per frame and the speed-up.
"""

import argparse
import time

import numpy as np

from coopharq import kernel
from coopharq.channel import draw_frames
from coopharq.scenarios import get_scenario

CASES = [
    ("asym-3x3", "ir-mu", 0.0, (2.0, 1.5, 1.0)),
    ("asym-3x3", "ir-su", 0.0, (2.0, 1.5, 1.0)),
    ("asym-3x3", "cc", 0.0, (2.0, 1.5, 1.0)),
    ("asym-5x3", "ir-mu", 5.0, (2.5, 1.5, 1.0, 1.0, 0.5)),
    ("sym-5", "ir-mu", 0.0, (1.5,) * 5),
]


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if kernel.compiled_simulate_batch is None:
        raise SystemExit("compiled kernel not built; run `python setup.py build_ext --inplace`")

    print(f"{'case':<28}{'python us/frame':>16}{'compiled us/frame':>19}{'speed-up':>10}")
    for name, proto, gamma_db, rates in CASES:
        sc = get_scenario(name)
        cfg = sc.config(proto)
        cdi = sc.cdi(gamma_db)
        gains, uniforms = draw_frames(cdi, 0, 0, args.frames, cfg.max_rounds)
        call = (gains, uniforms, np.asarray(rates), cfg.kind.code, cfg.alpha, cfg.max_rounds,
                cdi.n_sources, cdi.n_relays)
        t_py, out_py = best_time(lambda: kernel.python_simulate_batch(*call), args.repeat)
        t_c, out_c = best_time(lambda: kernel.compiled_simulate_batch(*call), args.repeat)
        if not all(np.array_equal(a, b) for a, b in zip(out_py, out_c)):
            raise SystemExit(f"backends disagree on {name} {proto}")
        label = f"{name} {proto} {gamma_db:g}dB"
        print(f"{label:<28}{1e6 * t_py / args.frames:>16.2f}{1e6 * t_c / args.frames:>19.3f}"
              f"{t_py / t_c:>9.0f}x")


if __name__ == "__main__":
    main()
