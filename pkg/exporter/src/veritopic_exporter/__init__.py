"""veritopic-exporter: frozen-transformer document embeddings in CEB1 form."""

__version__ = "0.1.0"
