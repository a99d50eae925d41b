"""Green functions: torus, slab and Z^d.

The thin-slab values approach the Z^4 value as the transverse side grows,
with the gap shrinking roughly fourfold per doubling.
"""
from rclocality.greens import QuadratureSpec, slab_green, torus_green, zd_green

print("2x2 torus G(0) =", torus_green([2, 2]).value((0, 0)))
print("Z^3 G(0)       =", zd_green(3, (0, 0, 0)))

quad = QuadratureSpec(tolerance=1e-9)
z4 = zd_green(4, (0, 0, 0, 0), quad)
print(f"Z^4 G(0)       = {z4:.10f}")
prev = None
for n in (2, 4, 8, 16, 32, 64):
    gap = abs(slab_green(3, [2 * n], (0, 0, 0, 0), quad) - z4)
    ratio = "" if prev is None else f"  ratio {prev / gap:.2f}"
    print(f"slab Z^3 x C_{2 * n:<4d} gap {gap:.3e}{ratio}")
    prev = gap
