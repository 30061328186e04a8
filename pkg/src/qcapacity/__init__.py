"""Holevo capacity of qubit channels and bipartite entanglement measures."""
