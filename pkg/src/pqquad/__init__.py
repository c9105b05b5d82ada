"""Search and nonexistence proofs for {p,q}-Diophantine quadruples."""

__version__ = "0.1.0"
