"""Freedom-to-operate patent analysis pipeline.

Turns a JSON-lines patent corpus into balanced (description-piece, claim)
training pairs, scores candidate independent claims against a query
description, and evaluates retrieval quality by self-retrieval.
"""

__version__ = "0.1.0"
