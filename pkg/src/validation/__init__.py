"""Monte Carlo envelopes and goodness-of-fit tests."""
