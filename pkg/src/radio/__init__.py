"""SINR and coverage probability of base-station patterns."""
