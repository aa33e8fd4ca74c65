"""Box norms, PET induction and multilinear solution counting on integer lattices."""

__version__ = "0.1.0"
