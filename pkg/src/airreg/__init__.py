"""Auxiliary image regularizer with stochastic ADMM."""
