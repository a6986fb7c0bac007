"""Enumeration of the exhaustive small-instance family.

A family cell is (m, n, vmax): every bidder independently takes any XOR
declaration with one or two distinct non-empty bundles over m goods and
values in 1..vmax.  Declarations are indexed in a fixed order (all
singles by bundle mask then value, then all pairs by mask pair then value
pair), so an instance is identified by its per-bidder indices and both
kernel backends agree on instance identity.
"""

from __future__ import annotations

from fractions import Fraction

from .model import Declaration, Demand, GoodUniverse, Instance


def declaration_table(m: int, vmax: int = 3) -> dict:
    """Flat arrays describing every declaration of the (m, vmax) family.

    Returns dict with parallel lists: k (1 or 2), mask0, mask1, val0,
    val1 (mask1/val1 zero for singles), and rank0/rank1: demand indices
    in decreasing value order (tie to the lower index).
    """
    k, mask0, mask1, val0, val1, rank0, rank1 = [], [], [], [], [], [], []
    bundles = list(range(1, 1 << m))
    for mask in bundles:
        for v in range(1, vmax + 1):
            k.append(1)
            mask0.append(mask)
            mask1.append(0)
            val0.append(v)
            val1.append(0)
            rank0.append(0)
            rank1.append(-1)
    for ai in range(len(bundles)):
        for bi in range(ai + 1, len(bundles)):
            for va in range(1, vmax + 1):
                for vb in range(1, vmax + 1):
                    k.append(2)
                    mask0.append(bundles[ai])
                    mask1.append(bundles[bi])
                    val0.append(va)
                    val1.append(vb)
                    if vb > va:
                        rank0.append(1)
                        rank1.append(0)
                    else:
                        rank0.append(0)
                        rank1.append(1)
    return {
        "m": m,
        "vmax": vmax,
        "k": k,
        "mask0": mask0,
        "mask1": mask1,
        "val0": val0,
        "val1": val1,
        "rank0": rank0,
        "rank1": rank1,
    }


def table_size(m: int, vmax: int = 3) -> int:
    nb = (1 << m) - 1
    return nb * vmax + nb * (nb - 1) // 2 * vmax * vmax


def cell_size(m: int, n: int, vmax: int = 3) -> int:
    return table_size(m, vmax) ** n


def declaration_from_index(table: dict, idx: int, owner: int = -1) -> Declaration:
    demands = [Demand(table["mask0"][idx], Fraction(table["val0"][idx]))]
    if table["k"][idx] == 2:
        demands.append(Demand(table["mask1"][idx], Fraction(table["val1"][idx])))
    return Declaration(tuple(demands), owner=owner)


def instance_from_indices(table: dict, indices) -> Instance:
    decls = tuple(
        declaration_from_index(table, idx, owner=i) for i, idx in enumerate(indices)
    )
    return Instance(GoodUniverse(table["m"], 1), decls)
