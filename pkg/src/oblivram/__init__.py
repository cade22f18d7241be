"""Hierarchical oblivious RAM with obliviously built cuckoo tables."""

from .oram_core import ConstantMemory, OramConfig, SublinearMemory, oram_new

__all__ = ["ConstantMemory", "OramConfig", "SublinearMemory", "oram_new"]
