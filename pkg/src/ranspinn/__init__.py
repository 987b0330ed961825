"""Physics-informed k-epsilon RANS surrogates."""
