"""export_ssl: encode a directory of WAVs with one upstream family."""

import argparse
import sys

from .export import export, get_upstream
from .upstream import UPSTREAMS, ModelLoadFailure


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="export_ssl",
        description="export self-supervised speech features to .feat files",
    )
    parser.add_argument("--model", required=True, choices=sorted(UPSTREAMS))
    parser.add_argument("--in", dest="input", required=True, help="WAV directory")
    parser.add_argument("--out", required=True, help="output .feat directory")
    parser.add_argument("--checkpoint", help="upstream weights (state dict); "
                        "omitted = seeded random init for pipeline testing")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    try:
        n = export(get_upstream(args.model), args.input, args.out,
                   checkpoint=args.checkpoint, seed=args.seed)
    except (ModelLoadFailure, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"exported {n} files -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
