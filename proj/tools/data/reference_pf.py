#!/usr/bin/env python3
"""Freeze reference AC power flow solutions computed with PYPOWER.

Solves the unmodified case (single slack at the MATPOWER reference bus,
generator reactive limits not enforced, flat start) and writes
bus_id,vm,va_rad rows. Used as the independent oracle for the solver tests.

usage: reference_pf.py case.m out.csv
"""
import re
import sys

import numpy as np
from pypower.api import ppoption, runpf


def block(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append([float(v) for v in line.split()])
    return rows


def pad(rows, width):
    return np.array([r + [0.0] * (width - len(r)) for r in rows])


def main():
    text = open(sys.argv[1]).read()
    base = float(re.search(r"mpc\.baseMVA\s*=\s*([0-9.eE+-]+)", text).group(1))
    bus = pad(block(text, "bus"), 13)
    bus[:, 7] = 1.0
    bus[:, 8] = 0.0
    gen = pad(block(text, "gen"), 21)
    branch = pad(block(text, "branch"), 13)
    ppc = {"version": "2", "baseMVA": base, "bus": bus, "gen": gen, "branch": branch}
    opt = ppoption(VERBOSE=0, OUT_ALL=0, PF_TOL=1e-12, PF_MAX_IT=30, ENFORCE_Q_LIMS=0)
    res, ok = runpf(ppc, opt)
    if not ok:
        sys.exit("reference power flow did not converge")
    with open(sys.argv[2], "w") as f:
        f.write("bus_id,vm,va_rad\n")
        for row in res["bus"]:
            f.write("%d,%.12f,%.12f\n" % (int(row[0]), row[7], np.deg2rad(row[8])))


if __name__ == "__main__":
    main()
