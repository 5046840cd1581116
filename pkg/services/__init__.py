"""
Fusion statistics, lattice simulation, decoding, theory and resource estimates
"""
