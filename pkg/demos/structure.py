"""
Structure of a compartmental graph
==================================

Deficiency, chordless cycles, strong components and siphons.
"""

from riboflow import (
    assign_crn,
    build_model,
    chordless_cycles,
    connectivity,
    cyclomatic_number,
    deficiency_terms,
    enumerate_siphons,
)

# the three-compartment cycle
tri = build_model(3, [(1, 2), (2, 3), (3, 1)], [5, 25, 50])
crn = assign_crn(tri)


def show(cplx):
    return " + ".join(name for name, k in zip(crn.species, cplx) if k)


for lhs, rhs in crn.reactions:
    print(f"  {show(lhs)} -> {show(rhs)}")
d = deficiency_terms(crn)
print(f"M={d.complexes} l={d.linkage_classes} s={d.rank} deficiency={d.value}")
print("chordless cycles:", chordless_cycles(tri))

# K4: four chordless triangles (every 4-cycle has a chord), yet rank deficiency 3
k4 = build_model(4, [(i, j) for i in range(1, 5) for j in range(1, 5) if i < j], [1] * 4)
print("K4 chordless cycles:", len(chordless_cycles(k4)))
print("K4 rank deficiency:", deficiency_terms(assign_crn(k4)).value, "cyclomatic number:", cyclomatic_number(k4))

# a graph that is not strongly connected
nsc = build_model(3, [(2, 3), (3, 2), (3, 1)], [100, 100, 100])
conn = connectivity(nsc)
print("strongly connected:", conn.strongly_connected)
for comp, label in zip(conn.condensation.components, conn.condensation.labels):
    print("  component", sorted(comp), label)

# minimal siphons: one per compartment for the strongly connected cycle
rep = enumerate_siphons(crn)
print("minimal siphons:", [sorted(s) for s in rep.siphons])
