"""Test suite for disjunct-bvs."""
