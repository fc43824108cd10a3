"""Tour of the design families and their relay matrices.

Each design is a T x R matrix of linear forms in K real symbols; column j is
what relay j transmits. Because every column uses only the source symbols or
only their conjugates, a relay needs just one matrix (applied to its received
vector, conjugated or not) to produce its column.
"""
import numpy as np

from dstc import (build_ciod4, build_pciod, build_pciod_rect, build_toeplitz,
                  golden_cda, load_design, relay_matrix_set, save_design)

np.set_printoptions(precision=3, suppress=True, linewidth=120)


def show(design, x):
    print(f"\n== {design.family}: T={design.t} R={design.r} K={design.k}")
    print(f"symbol partition: {[list(g) for g in design.partition]}")
    print("codeword at X =", np.asarray(x), ":")
    print(design.codeword(np.asarray(x, dtype=float)))
    rs = relay_matrix_set(design)
    kinds = ["conj" if c else "plain" for c in rs.conj]
    print(f"relays (canonical order, plain first): columns {rs.columns}, {kinds}")


def main():
    # rate-one block-diagonal family: 2x2 blocks in 4 real symbols each
    show(build_pciod(2), [1, 2, 3, 4])
    show(build_pciod(4), range(1, 9))

    # odd relay counts drop the last column of the next even design
    show(build_pciod_rect(3), range(1, 9))

    # the 4x4 coordinate-interleaved design carries a source-side precoder:
    # user symbols swap imaginary parts across the two diagonal blocks
    d, pre = build_ciod4()
    s_user = np.array([1 + 2j, 3 + 4j, 5 + 6j, 7 + 8j])
    print("\n== ciod4 precode: user symbols", s_user)
    print("transmitted (interleaved) vector:", pre.apply(s_user))

    # banded shift family: full diversity under plain linear receivers
    show(build_toeplitz(2, 2), [1, 2, 3, 4])

    # high-rate cyclic-algebra family (built-in golden instance, R^2 symbols)
    show(golden_cda(), range(1, 9))

    # designs serialize to JSON and round-trip bit-exactly
    d = build_pciod(4)
    save_design(d, "/tmp/pciod4.json")
    back = load_design("/tmp/pciod4.json")
    print("\nserialization round trip bit-exact:",
          np.array_equal(back.weights, d.weights))


if __name__ == "__main__":
    main()
