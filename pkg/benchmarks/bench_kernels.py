"""Compare the numba and numpy deferred-acceptance kernels.

    python3 benchmarks/bench_kernels.py [--repeat N]

Times the bare kernel on the DSO-FN layer of default scenarios, then a full
run_market with each kernel swapped in.
"""

from __future__ import annotations

import argparse
import timeit


from fogmarket import _kernels, matching
from fogmarket.equilibrium import set_prices, subscribe
from fogmarket.harness import GeneratorParams, generate_scenario
from fogmarket.market import run_market


def kernel_inputs(n_dss: int, n_fn: int, seed: int):
    s = generate_scenario(GeneratorParams(n_dss=n_dss, n_fn=n_fn, seed=seed))
    pricing = set_prices(s, subscribe(s))
    props, accs = matching.build_dso_fn_sides(s, pricing)
    return s, matching._encode(props, accs)


def best_ms(fn, repeat: int) -> float:
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()

    kernels = {"numpy": _kernels.deferred_acceptance_numpy}
    if _kernels.HAVE_NUMBA:
        kernels["numba"] = _kernels.deferred_acceptance_jit
        kernels["numba"](*kernel_inputs(10, 3, 0)[1], 1e-9, 1000)  # compile

    print(f"{'case':<28}{'kernel':<8}{'best ms':>10}")
    for n_dss, n_fn in ((120, 20), (500, 80), (2000, 300)):
        s, enc = kernel_inputs(n_dss, n_fn, 1)
        for name, kernel in kernels.items():
            ms = best_ms(lambda: kernel(*enc, 1e-9, matching.MAX_ROUNDS), args.repeat)
            print(f"{f'DSO-FN layer {n_dss}x{n_fn}':<28}{name:<8}{ms:>10.3f}")
        for name, kernel in kernels.items():
            saved = _kernels.deferred_acceptance
            _kernels.deferred_acceptance = kernel
            try:
                ms = best_ms(lambda: run_market(s), max(3, args.repeat // 4))
            finally:
                _kernels.deferred_acceptance = saved
            print(f"{f'run_market {n_dss}x{n_fn}':<28}{name:<8}{ms:>10.3f}")


if __name__ == "__main__":
    main()
