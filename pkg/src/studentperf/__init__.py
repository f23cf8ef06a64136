"""Student-performance pipeline: dataset ingestion, descriptive
statistics, correlation-based feature selection, and a from-scratch
multilayer perceptron classifier with a deterministic training harness."""

__version__ = "0.1.0"
