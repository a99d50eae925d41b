"""Random-cluster and Potts models on tori, thick tori and slabs."""
__version__ = "0.1.0"
