# ABOUTME: Spectra of scaling quantum graphs
# ABOUTME: Determinant forms, root bootstrap, periodic-orbit expansions, Lagrange inversion and spacing statistics
