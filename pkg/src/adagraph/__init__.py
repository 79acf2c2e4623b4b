"""AdaGraph: graph-based predictive and continuous domain adaptation on a
small dense classifier with per-domain batch normalization."""

__version__ = "0.1.0"
