"""Low-latency binaural speech enhancement with a quantized filter-estimation network."""

__version__ = "0.1.0"
