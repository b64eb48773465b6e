"""Domain computations: closed-form theory, Monte Carlo, quadrature and random sections."""
