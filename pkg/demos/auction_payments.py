"""How the priority auction prices a turn.

Three robots want the same conflict zone. Each bids its private value;
the highest bid goes first. A robot pays for the delay it pushes onto the
robots behind it, which is what makes honest bidding the best strategy.
"""

from bilevel_nav.auction import Bid, allocate, default_alpha, payment, verify_dsic, welfare

zeta = {0: 2.0, 1: 7.5, 2: 4.0}
bids = [Bid(r, z) for r, z in zeta.items()]
order = allocate(bids)
alpha = default_alpha(len(bids))
print("turn order:", order.order, " weights alpha:", alpha)

for q, rid in enumerate(order.order, start=1):
    behind = [zeta[r] for r in order.order[q:]]
    p = payment(q, behind, alpha)
    utility = zeta[rid] * alpha[q - 1] - p
    print(f"robot {rid}: value {zeta[rid]:.1f}, turn {q}, pays {p:.2f}, utility {utility:.2f}")

print("social welfare:", welfare(order, zeta, alpha))

# what if robot 0 overstates its value to jump the queue?
lie = allocate([Bid(0, 9.0), Bid(1, 7.5), Bid(2, 4.0)])
q = lie.turn(0)
p = payment(q, [zeta[r] for r in lie.order[q:]], alpha)
print(f"robot 0 bidding 9.0: turn {q}, pays {p:.2f}, utility {zeta[0] * alpha[q - 1] - p:.2f} (worse)")

print("no profitable lie on a 5-value grid, k=3:", verify_dsic(3, [0.5, 1, 2, 4, 8]))
