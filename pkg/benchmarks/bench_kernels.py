"""Time each numba kernel against its numpy twin and check they agree.

    python benchmarks/bench_kernels.py [n_beams] [n_rows] [repeat]
"""
import sys

from beampower.bench import format_rows, run_benchmark


def main(argv):
    n_beams, n_rows, repeat = (int(a) for a in (argv + ["8", "200", "20"][len(argv):]))
    print(format_rows(run_benchmark(n_beams=n_beams, n_rows=n_rows, repeat=repeat)))


if __name__ == "__main__":
    main(sys.argv[1:])
