"""
cimsearch
Joint model, quantization and hardware search for compute-in-memory accelerators
"""

__version__ = "1.0.0"
