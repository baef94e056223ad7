"""`veritopic-export`: dataset CSV -> CEB1 embeddings + metadata sidecar.

Exit codes: 0 success, 1 usage error, 2 data/model failure.
"""

from __future__ import annotations

import argparse
import sys

from .export import ExportConfig, ExportError, export_embeddings


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(prog="veritopic-export", description=__doc__)
    parser.add_argument("--input", required=True, help="dataset CSV (header id,tweet,label)")
    parser.add_argument("--model", default="xlnet-base-cased", help="pretrained encoder id or path")
    parser.add_argument("--pooling", default="mean", choices=["mean", "first"],
                        help="mean of last layer (default) or first-position state")
    parser.add_argument("--max-len", type=int, default=128)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--no-deterministic", action="store_true",
                        help="skip the single-thread deterministic-inference setup")
    parser.add_argument("--out", required=True, help="output CEB1 path (sidecar: <out>.meta.json)")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = ExportConfig(
            model_id=args.model,
            pooling=args.pooling,
            max_length=args.max_len,
            batch_size=args.batch_size,
            deterministic=not args.no_deterministic,
        )
        sidecar = export_embeddings(args.input, config, args.out)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # model download/load/inference failures
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(
        f"export: {sidecar['num_documents']} vectors, dim {sidecar['hidden_size']}, "
        f"pooling {sidecar['pooling']} -> {args.out}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
