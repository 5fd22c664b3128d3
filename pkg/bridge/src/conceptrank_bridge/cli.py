"""Command-line entry points: export-embeddings and convert-dataset."""

from __future__ import annotations

import argparse
import sys

from .convert import DATASETS, convert_dataset
from .export import ExportJob, export_embeddings


def export_main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="export-embeddings",
        description="Embed an id<TAB>text file into the engine's matrix format.",
    )
    parser.add_argument("--model", required=True, help="HF checkpoint id, or hash://<dim> for testing")
    parser.add_argument("--input", required=True, help="id<TAB>text file, one row per line")
    parser.add_argument("--out", required=True, help="manifest path (data file written beside it)")
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--pooling", choices=["cls", "mean"], default="cls")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)
    job = ExportJob(
        model=args.model,
        input_path=args.input,
        manifest_path=args.out,
        batch_size=args.batch_size,
        max_length=args.max_length,
        pooling=args.pooling,
        device=args.device,
    )
    summary = export_embeddings(job)
    print(f"exported {summary['count']} rows of dim {summary['dim']} -> {summary['manifest']}")


def convert_main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="convert-dataset",
        description="Convert an official dataset dump into the engine's file formats.",
    )
    parser.add_argument("--name", required=True, choices=list(DATASETS))
    parser.add_argument("--in-dir", required=True)
    parser.add_argument("--out-dir", required=True)
    args = parser.parse_args(argv)
    counts = convert_dataset(args.name, args.in_dir, args.out_dir)
    print(", ".join(f"{k}={v}" for k, v in counts.items()))


if __name__ == "__main__":
    sys.exit(export_main())
