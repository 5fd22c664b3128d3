"""Ingestion bridge: encoder exports and public-dataset conversion.

One-directional: model checkpoints and official dataset dumps go in, the
engine's file formats (vector manifests, JSONL corpora, TSV labels/queries/
qrels) come out. The engine never calls back into this package.
"""

from .export import ExportJob, export_embeddings
from .convert import convert_dataset
from .encoders import load_encoder

__version__ = "0.1.0"
