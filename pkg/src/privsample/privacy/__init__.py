"""Privacy accounting, divergence estimation and empirical auditing."""
