"""Parameter estimation: closed form, pseudolikelihood, profile search, minimum contrast."""
