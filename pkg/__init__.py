"""
Weighted metric measure space verifier: numerical checks of weighted
curvature identities, linearizations and boundary integrals
"""
