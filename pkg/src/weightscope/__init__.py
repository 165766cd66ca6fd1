"""Weight-trajectory recording and Mapper learning graphs for small MLPs."""
__version__ = "0.1.0"
