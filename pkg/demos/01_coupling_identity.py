"""Spin correlations equal connection probabilities.

Enumerate every colouring of a small graph and every edge subset, then
compare <s_x . s_y> with the probability that x and y share a cluster.
"""
from rclocality.exact import FREE, PottsParams, RcParams, couple_params, potts_table, rc_distribution
from rclocality.io import corpus_graph

g = corpus_graph("petersen")
q, beta = 3, 0.5
p = couple_params(q, beta=beta)
print(f"Petersen graph, q={q}, beta={beta} -> p={p:.6f}")

spins = potts_table(g, PottsParams(beta, q, FREE))
clusters = rc_distribution(g, RcParams(p, q, FREE))

print(" x  y   <s_x.s_y>          phi[x<->y]         |diff|")
for y in range(1, g.num_vertices):
    a, b = spins.two_point(0, y), clusters.connection(0, y)
    print(f" 0 {y:2d}   {a:.15f}  {b:.15f}  {abs(a - b):.1e}")
