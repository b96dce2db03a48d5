#!/usr/bin/env python3
"""Assemble the three-area RTS-96 case from the single-area RTS data.

Areas 1..3 are copies of case24_ieee_rts with buses renumbered 1xx/2xx/3xx.
Bus 325 and the six inter-area ties are taken from case_RTS_GMLC, which keeps
the RTS-96 inter-area topology. Branch order: 38 per area, then the ties
107-203, 113-215, 123-217, 325-121, 318-223, 323-325 (120 branches).

usage: make_rts96.py case24_ieee_rts.m case_RTS_GMLC.m > case_rts96.m
"""
import re
import sys


def block(text, name):
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.S)
    rows = []
    for line in m.group(1).splitlines():
        line = line.split("%")[0].strip().rstrip(";")
        if line:
            rows.append(line.split())
    return rows


def main():
    rts = open(sys.argv[1]).read()
    gmlc = open(sys.argv[2]).read()
    bus, gen, branch = block(rts, "bus"), block(rts, "gen"), block(rts, "branch")
    gbus, gbranch = block(gmlc, "bus"), block(gmlc, "branch")

    out_bus, out_gen, out_branch = [], [], []
    for area in (1, 2, 3):
        off = 100 * area
        for r in bus:
            r = list(r)
            r[0] = str(int(r[0]) + off)
            if r[1] == "3" and area != 1:
                r[1] = "2"
            r[6] = str(area)
            out_bus.append(r)
        for r in gen:
            r = list(r)
            r[0] = str(int(r[0]) + off)
            out_gen.append(r)
        for r in branch:
            r = list(r)
            r[0] = str(int(r[0]) + off)
            r[1] = str(int(r[1]) + off)
            out_branch.append(r)
    b325 = [r for r in gbus if r[0] == "325"][0]
    b325 = list(b325)
    b325[1] = "1"
    b325[6] = "3"
    b325[7], b325[8] = "1", "0"
    out_bus.append(b325)
    ties = [("107", "203"), ("113", "215"), ("123", "217"),
            ("325", "121"), ("318", "223"), ("323", "325")]
    for f, t in ties:
        r = [r for r in gbranch if r[0] == f and r[1] == t][0]
        out_branch.append(list(r))

    w = sys.stdout.write
    w("function mpc = case_rts96\n")
    w("%CASE_RTS96  Three-area IEEE RTS-96 (73 buses, 120 branches).\n")
    w("%   Generated by tools/data/make_rts96.py from case24_ieee_rts and the\n")
    w("%   inter-area ties of case_RTS_GMLC (MATPOWER data directory).\n\n")
    w("mpc.version = '2';\nmpc.baseMVA = 100;\n\n")
    w("%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n")
    w("mpc.bus = [\n")
    for r in out_bus:
        w("\t" + "\t".join(r[:13]) + ";\n")
    w("];\n\n")
    w("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n")
    w("mpc.gen = [\n")
    for r in out_gen:
        w("\t" + "\t".join(r[:10]) + ";\n")
    w("];\n\n")
    w("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n")
    w("mpc.branch = [\n")
    for r in out_branch:
        w("\t" + "\t".join(r[:13]) + ";\n")
    w("];\n")


if __name__ == "__main__":
    main()
