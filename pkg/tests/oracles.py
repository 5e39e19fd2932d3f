"""Brute-force references shared by the unit and acceptance tests."""

import math

import numpy as np


def sphere_grid(n, k=721):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        t = np.linspace(-np.pi, np.pi, 20 * k)
        return np.column_stack([np.cos(t), np.sin(t)])
    th, ph = np.meshgrid(np.linspace(0, np.pi, k), np.linspace(-np.pi, np.pi, 2 * k), indexing="ij")
    return np.column_stack([(np.sin(th) * np.cos(ph)).ravel(), (np.sin(th) * np.sin(ph)).ravel(),
                            np.cos(th).ravel()])


def grid_support(c, s):
    """max <c, x> over the radial boundary of B2 ∩ sqrt(s) B1: dense sphere grid, then local refinement."""
    def value(U):
        U = U / np.linalg.norm(U, axis=1)[:, None]
        rho = np.minimum(1.0, math.sqrt(s) / np.abs(U).sum(axis=1))
        return (U @ c) * rho

    U = sphere_grid(c.size)
    vals = value(U)
    best, h = U[np.argmax(vals)], 0.01
    if c.size > 1:
        offsets = np.random.default_rng(0).normal(size=(4000, c.size))
        for _ in range(60):
            cand = np.vstack([best, best + h * offsets])
            v = value(cand)
            best = cand[np.argmax(v)] / np.linalg.norm(cand[np.argmax(v)])
            h *= 0.7
    return float(value(best[None, :])[0])
