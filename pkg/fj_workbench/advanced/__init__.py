"""Contracting maps, the certification pipeline and flow spaces."""
