"""Compiled kernels. Built from ``ballsum.pyx`` by ``setup.py`` when Cython is available."""
