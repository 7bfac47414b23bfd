"""Console entry point.

Thread capping must happen before numpy is imported anywhere in the
process, so this tiny module reads SPIKESCAN_THREADS first and only then
pulls in the CLI (which imports numpy transitively).
"""

import os


def main():
    cap = os.environ.get("SPIKESCAN_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
            os.environ.setdefault(var, cap)
    from .cli import cli
    cli()


if __name__ == "__main__":
    main()
