"""Diversity-multiplexing tradeoff bounds and where cooperation stops paying.

Four piecewise-linear curves per relay count: the amplify-and-forward bound,
the transmit-diversity bound of the two-product channel, the rate-corrected
coded bound, and their composite lower bound. Beyond the crossover gain the
no-cooperation line wins, and the gap to the transmit-diversity bound
shrinks as relays are added.
"""
from dstc.dmg import crossover, d_code, d_lower, d_naf, d_star, emit_curves


def main():
    for n_relays in (1, 2, 4):
        rc = crossover(n_relays)
        print(f"R={n_relays}: crossover at r = {rc:.4f} "
              f"(no-cooperation better beyond it)")
        for r in (0.0, 0.25, 0.5, 0.75, 1.0):
            print(f"   r={r:.2f}  naf={d_naf(r, n_relays):5.2f}  "
                  f"code={d_code(r, n_relays):5.2f}  "
                  f"lower={d_lower(r, n_relays):5.2f}  "
                  f"star={d_star(r, n_relays):5.2f}")

    print("\ngap to the transmit-diversity bound at r=0.1:")
    for n_relays in (2, 4, 8, 16, 32):
        gap = d_star(0.1, n_relays) - d_lower(0.1, n_relays)
        print(f"   R={n_relays:2d}: {gap:.4f}")

    out = "/tmp/tradeoff_r2.csv"
    with open(out, "w") as fh:
        fh.write(emit_curves(2, 101))
    print(f"\nwrote {out} (plot r vs the d_* columns with any tool)")


if __name__ == "__main__":
    main()
