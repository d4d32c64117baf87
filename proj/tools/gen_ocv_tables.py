#!/usr/bin/env python3
"""Regenerates data/ocv_graphite.csv and data/ocv_nmc.csv.

The tables sample widely used empirical open-circuit-potential fits for an
MCMB graphite anode and an NMC cathode. Columns: stoichiometry, volts.
"""
import numpy as np


def graphite(x):
    return (0.7222 + 0.1387 * x + 0.029 * np.sqrt(x) - 0.0172 / x
            + 0.0019 / x**1.5 + 0.2808 * np.exp(0.9 - 15 * x)
            - 0.7984 * np.exp(0.4465 * x - 0.4108))


def nmc(x):
    return (4.3452 - 1.6518 * x + 1.6225 * x**2 - 2.0843 * x**3
            + 3.5146 * x**4 - 2.2166 * x**5
            - 0.5623e-4 * np.exp(109.451 * x - 100.006))


def write(path, xs, fn):
    with open(path, "w") as f:
        f.write("stoichiometry,volts\n")
        for x in xs:
            f.write(f"{x:.6f},{fn(x):.9f}\n")


if __name__ == "__main__":
    xs = np.concatenate([np.linspace(0.01, 0.05, 9), np.linspace(0.06, 0.998, 96)])
    write("data/ocv_graphite.csv", xs, graphite)
    write("data/ocv_nmc.csv", np.linspace(0.10, 0.998, 91), nmc)
