"""Tabulate unit-bump Sobolev seminorms used by the lambda norms.

Covers the threshold norms (p = 1, k <= 4) and the regularity norms
(p = 1 up to k = 10 in 2D, p = 2 up to k = 8 in 3D).  Run once after changing
the quadrature; the table ships with the package.
"""
import json
import sys

from faddeevlab.bumps import SEMINORM_TABLE, compute_unit_seminorm, seminorm_key

FAMILIES = ("bump", "poly12")
# (dim, p, max order)
ORDERS = ((2, 1.0, 10), (3, 1.0, 4), (3, 2.0, 8))


def main():
    table = {}
    for family in FAMILIES:
        for dim, p, kmax in ORDERS:
            for k in range(kmax + 1):
                key = seminorm_key(family, dim, k, p)
                table[key] = compute_unit_seminorm(family, dim, k, p)
                print(key, table[key], flush=True)
    SEMINORM_TABLE.parent.mkdir(exist_ok=True)
    SEMINORM_TABLE.write_text(json.dumps(table, indent=1, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
