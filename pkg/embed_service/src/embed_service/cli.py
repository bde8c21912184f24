import argparse
import sys

from .encoders import build_encoder
from .server import ServiceConfig, serve_stdio, serve_tcp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-service",
        description="Serve text embeddings over newline-delimited JSON.",
    )
    parser.add_argument(
        "--model",
        default="hash:384:0",
        help='"hash[:DIM[:SEED]]" for the built-in encoder, or a sentence-transformers model id',
    )
    parser.add_argument("--batch-size", type=int, default=32, help="max texts per request")
    parser.add_argument(
        "--listen",
        default="stdio",
        help='"stdio" (default) or "tcp://HOST:PORT"; port 0 picks a free port',
    )
    parser.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="L2-normalize vectors before responding",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = ServiceConfig(
            model=args.model,
            batch_size=args.batch_size,
            listen=args.listen,
            normalize=args.normalize,
        )
        encoder = build_encoder(config.model)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if config.listen == "stdio":
        return serve_stdio(encoder, config)
    if config.listen.startswith("tcp://"):
        host, _, port_text = config.listen[len("tcp://") :].partition(":")
        if not host or not port_text.isdigit():
            print(f"error: bad listen address {config.listen!r}", file=sys.stderr)
            return 1
        try:
            return serve_tcp(encoder, config, host, int(port_text))
        except KeyboardInterrupt:
            return 0
    print(f"error: unsupported listen mode {config.listen!r}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
