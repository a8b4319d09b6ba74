"""Learning-rate regime laboratory for scale-invariant networks trained on a sphere."""
