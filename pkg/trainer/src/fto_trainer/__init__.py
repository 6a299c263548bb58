"""Pair-classification trainer and scoring endpoint.

Fine-tunes an uncased encoder for two-label sequence-pair classification on
the pipeline's pair dataset and serves scores over the JSON-lines protocol.
Talks to the pipeline only through its external interfaces: the pairs file
schema and the wire protocol.
"""

__version__ = "0.1.0"
