"""Summary statistics, kernel density maps and interaction classification."""
