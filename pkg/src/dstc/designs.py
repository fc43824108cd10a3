"""Linear dispersion design constructors for relay space-time codes.

A design is a T x R matrix-valued function S(X) of K *real* symbols,
S(X) = sum_k X[k] * weights[k]. Columns are what individual relays transmit
during the cooperation phase, so each constructor also records per-column
conjugation metadata: a column that is a linear form in the source symbols
only (not their conjugates) can be produced by a relay holding a single
matrix applied to its received vector; a column in the conjugates only needs
the same with a conjugated reception.

Real symbols pair canonically into complex source symbols
``s[m] = X[2m] + 1j*X[2m+1]``, so the source vector has K/2 complex entries.

Families:

* block-diagonal coordinate-interleaved designs (``pciod``/``ciod4``): rate
  one, with a mod-4 symbol partition used for 4-group decoding and rotated
  lattice precoding;
* banded shift designs (``toeplitz``): full diversity under linear receivers;
* cyclic-algebra designs (``cda``): high rate, built from a numeric parameter
  table (an R x R table of algebra-basis conjugates plus a non-norm element
  ``delta`` and a normalization ``theta``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .precoding import partition_mod4

PLAIN = "plain"
CONJ = "conj"


@dataclass(frozen=True)
class PrecodePair:
    """Source-side pre-transformation s_tilde = p_mat @ s + q_mat @ conj(s).

    Lets a design whose columns mix symbols and conjugates of the *user*
    symbols still be relayed with single relay matrices: the source applies
    the pair, and the design is conjugate-linear in the transformed symbols.
    """

    p_mat: np.ndarray
    q_mat: np.ndarray

    def apply(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.complex128)
        return self.p_mat @ s + self.q_mat @ np.conj(s)

    def real_matrix(self) -> np.ndarray:
        """The induced real-linear map on interleaved real coordinates.

        Returns the 2n x 2n real matrix M with
        interleave(apply(s)) = M @ interleave(s).
        """
        n = self.p_mat.shape[0]
        m = np.zeros((2 * n, 2 * n))
        for j in range(2 * n):
            x = np.zeros(2 * n)
            x[j] = 1.0
            st = self.apply(x[0::2] + 1j * x[1::2])
            m[0::2, j] = st.real
            m[1::2, j] = st.imag
        return m


@dataclass(frozen=True)
class Design:
    """A T x R linear dispersion design in K real symbols."""

    family: str
    t: int
    r: int
    k: int
    weights: np.ndarray                      # (k, t, r) complex
    col_conj: tuple[str, ...] | None = None  # declared per-column flags
    partition: tuple[tuple[int, ...], ...] = ()
    precode: PrecodePair | None = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.complex128)
        if w.shape != (self.k, self.t, self.r):
            raise ValueError(
                f"weights shape {w.shape} != (K,T,R)=({self.k},{self.t},{self.r})")
        object.__setattr__(self, "weights", w)
        if self.partition:
            covered = sorted(i for grp in self.partition for i in grp)
            if covered != list(range(self.k)):
                raise ValueError("partition is not a disjoint cover of symbol indices")

    @property
    def n_complex(self) -> int:
        """Number of complex source symbols (K/2)."""
        return self.k // 2

    def codeword(self, x: np.ndarray) -> np.ndarray:
        """Evaluate S(X) for a real symbol vector (or a batch, last axis K)."""
        x = np.asarray(x, dtype=np.float64)
        return np.einsum("...k,ktr->...tr", x, self.weights)

    def source_vector(self, x: np.ndarray) -> np.ndarray:
        """Canonical complex pairing s[m] = X[2m] + i X[2m+1]."""
        x = np.asarray(x, dtype=np.float64)
        return x[..., 0::2] + 1j * x[..., 1::2]

    def column_forms(self, col: int) -> tuple[np.ndarray, np.ndarray]:
        """Column ``col`` as a pair (P, Q) with column = P @ s + Q @ conj(s).

        Both are T x (K/2). Exact, since the design is real-linear: the
        coefficient of s[m] is (A_{2m} - i A_{2m+1})/2 and of conj(s[m])
        is (A_{2m} + i A_{2m+1})/2.
        """
        a_re = self.weights[0::2, :, col].T   # (t, k/2)
        a_im = self.weights[1::2, :, col].T
        return 0.5 * (a_re - 1j * a_im), 0.5 * (a_re + 1j * a_im)


@dataclass(frozen=True)
class RelayMatrixSet:
    """One matrix per relay, plain relays first.

    Relay ``i`` transmits ``matrices[i] @ s`` if ``conj[i]`` is False and
    ``matrices[i] @ conj(s)`` otherwise; the result is column ``columns[i]``
    of the design. ``columns`` records the design column each relay owns,
    since the canonical plain-first ordering may permute block-interleaved
    constructions.
    """

    matrices: tuple[np.ndarray, ...]
    conj: tuple[bool, ...]
    columns: tuple[int, ...]

    @property
    def q(self) -> int:
        """Number of plain (non-conjugating) relays."""
        return sum(1 for c in self.conj if not c)

    @property
    def n_relays(self) -> int:
        return len(self.matrices)

    @property
    def t2(self) -> int:
        return self.matrices[0].shape[0]

    @property
    def t1(self) -> int:
        return self.matrices[0].shape[1]

    def reassemble(self, s: np.ndarray) -> np.ndarray:
        """Rebuild the T x R codeword from the source vector."""
        s = np.asarray(s, dtype=np.complex128)
        out = np.zeros((self.t2, len(self.matrices)), dtype=np.complex128)
        for i, (m, cj, col) in enumerate(zip(self.matrices, self.conj, self.columns)):
            out[:, col] = m @ (np.conj(s) if cj else s)
        return out

    def scaled(self, factors) -> "RelayMatrixSet":
        factors = np.broadcast_to(np.asarray(factors, dtype=np.float64), (self.n_relays,))
        return RelayMatrixSet(
            tuple(f * m for f, m in zip(factors, self.matrices)),
            self.conj, self.columns)

    def by_column(self) -> "RelayMatrixSet":
        """The same relays renumbered in design-column order (relay i owns
        column i), the layout block-diagonal examples are written in."""
        order = sorted(range(self.n_relays), key=lambda i: self.columns[i])
        return RelayMatrixSet(tuple(self.matrices[i] for i in order),
                              tuple(self.conj[i] for i in order),
                              tuple(self.columns[i] for i in order))


def unit_energy_relays(rs: RelayMatrixSet) -> RelayMatrixSet:
    """Rescale each relay matrix to unit total energy, tr(M M^H) = 1.

    This is the per-relay power normalization under which the 2x2-block
    coordinate-interleaved relay set has Gram (1/2) I on its support.
    """
    return rs.scaled([1.0 / np.linalg.norm(m) for m in rs.matrices])


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------

def build_pciod(r: int) -> Design:
    """Rate-one R x R block-diagonal coordinate-interleaved design, R even.

    Block j (rows/cols 2j, 2j+1) carries real symbols x_{4j}..x_{4j+3}:

        [[ x0 + i x1,  -x2 + i x3 ],
         [ x2 + i x3,   x0 - i x1 ]]

    K = 2R real symbols; even columns are plain, odd columns conjugated;
    the stored partition groups indices by residue mod 4.
    """
    if r < 2 or r % 2:
        raise ValueError(
            f"pciod needs an even relay count >= 2, got {r}; "
            "use build_pciod_rect for odd counts")
    k = 2 * r
    w = np.zeros((k, r, r), dtype=np.complex128)
    for j in range(r // 2):
        r0, r1 = 2 * j, 2 * j + 1
        b = 4 * j
        w[b + 0, r0, r0] = 1.0
        w[b + 0, r1, r1] = 1.0
        w[b + 1, r0, r0] = 1j
        w[b + 1, r1, r1] = -1j
        w[b + 2, r0, r1] = -1.0
        w[b + 2, r1, r0] = 1.0
        w[b + 3, r0, r1] = 1j
        w[b + 3, r1, r0] = 1j
    conj_flags = tuple(PLAIN if c % 2 == 0 else CONJ for c in range(r))
    return Design("pciod", r, r, k, w, conj_flags, partition_mod4(k))


def build_pciod_rect(r: int) -> Design:
    """PCIOD for an odd relay count: build for R+1 and drop the last column."""
    if r < 1 or r % 2 == 0:
        raise ValueError(f"rectangular pciod is for odd relay counts, got {r}")
    full = build_pciod(r + 1)
    return replace(full, family="pciod-rect", r=r,
                   weights=full.weights[:, :, :r],
                   col_conj=full.col_conj[:r])


def build_ciod4() -> tuple[Design, PrecodePair]:
    """The 4x4 coordinate-interleaved orthogonal design with its precoder.

    The design matrix over the interleaved symbols equals the R=4 PCIOD.
    The precode pair maps user symbols (x1..x4) to the transmitted vector
    whose entries swap imaginary parts across the two diagonal blocks:
    first entry Re(x1) + i Im(x3), and so on.
    """
    half = 0.5
    p = half * np.array([[1, 0, 1, 0],
                         [0, 1, 0, 1],
                         [1, 0, 1, 0],
                         [0, 1, 0, 1]], dtype=np.complex128)
    q = half * np.array([[1, 0, -1, 0],
                         [0, 1, 0, -1],
                         [-1, 0, 1, 0],
                         [0, -1, 0, 1]], dtype=np.complex128)
    pre = PrecodePair(p, q)
    base = build_pciod(4)
    d = replace(base, family="ciod4", precode=pre)
    return d, pre


def build_toeplitz(t1: int, r: int) -> Design:
    """Banded shift design: column j is (x_1..x_{T1}) shifted down j rows.

    Shape (T1+R-1) x R, K = 2*T1 real symbols, all columns plain. The
    stored partition is the trivial single group (the family is not
    group decodable; its point is linear-receiver full diversity).
    """
    if t1 < 1 or r < 1:
        raise ValueError("toeplitz needs t1 >= 1 and r >= 1")
    t = t1 + r - 1
    k = 2 * t1
    w = np.zeros((k, t, r), dtype=np.complex128)
    for m in range(t1):
        for j in range(r):
            w[2 * m, m + j, j] = 1.0
            w[2 * m + 1, m + j, j] = 1j
    return Design("toeplitz", t, r, k, w,
                  tuple(PLAIN for _ in range(r)),
                  (tuple(range(k)),))


def build_cda(r: int, delta: complex, theta: float, sigma_table) -> Design:
    """R x R cyclic-algebra design from a numeric parameter table.

    ``sigma_table[i][j]`` is the j-th algebra conjugate of the i-th basis
    element. Entry (row k, column j) of the design is

        (1/sqrt(theta)) * (delta if k < j else 1)
                        * sum_i f[(k-j) mod R, i] * sigma_table[i][j]

    in the R^2 complex symbols f[a, i] (K = 2 R^2 real symbols, complex
    symbol index m = a*R + i). Every column is plain, so the family is
    conjugate-linear row-orthogonal by construction.
    """
    table = np.asarray(sigma_table, dtype=np.complex128)
    if table.shape != (r, r):
        raise ValueError(f"sigma_table must be {r}x{r}, got {table.shape}")
    if not theta > 0:
        raise ValueError("theta must be positive")
    k = 2 * r * r
    w = np.zeros((k, r, r), dtype=np.complex128)
    scale = 1.0 / np.sqrt(float(theta))
    for kk in range(r):
        for j in range(r):
            coef = scale * (delta if kk < j else 1.0)
            a = (kk - j) % r
            for i in range(r):
                m = a * r + i
                c = coef * table[i, j]
                w[2 * m, kk, j] = c
                w[2 * m + 1, kk, j] = 1j * c
    return Design("cda", r, r, k, w,
                  tuple(PLAIN for _ in range(r)),
                  (tuple(range(k)),))


def golden_cda() -> Design:
    """Built-in R=2 cyclic-algebra instance with non-vanishing determinant.

    Standard 2x2 perfect-code parameters: the algebra over the golden-ratio
    field, non-norm element delta = i, normalization theta = 5, and the
    ideal basis (alpha, alpha*g) with g = (1+sqrt5)/2 and alpha = 1+i(1-g).
    The minimum |det(dS^H dS)| over integer QAM differences is 16/5 at
    every constellation size.
    """
    s5 = np.sqrt(5.0)
    g = (1.0 + s5) / 2.0
    gbar = (1.0 - s5) / 2.0
    alpha = 1.0 + 1j * (1.0 - g)
    salpha = 1.0 + 1j * (1.0 - gbar)
    table = [[alpha, salpha],
             [alpha * g, salpha * gbar]]
    return build_cda(2, 1j, 5.0, table)


# ---------------------------------------------------------------------------
# relay matrix extraction
# ---------------------------------------------------------------------------

def relay_matrix_set(d: Design, tol: float = 1e-12) -> RelayMatrixSet:
    """Extract one matrix per relay from a design with conjugate-linear columns.

    Plain columns give the matrix applied to the source vector s, conjugated
    columns the matrix applied to conj(s). Relays are emitted plain-first;
    ``columns`` maps each relay back to its design column. Raises ValueError
    (with the offending column) if some column mixes symbols and conjugates.
    """
    scale = float(np.max(np.abs(d.weights))) if d.weights.size else 0.0
    thr = tol * (1.0 + scale)
    plain_relays, conj_relays = [], []
    for c in range(d.r):
        p, q = d.column_forms(c)
        p_zero = float(np.max(np.abs(p))) <= thr if p.size else True
        q_zero = float(np.max(np.abs(q))) <= thr if q.size else True
        if q_zero:
            plain_relays.append((p, False, c))
        elif p_zero:
            conj_relays.append((q, True, c))
        else:
            raise ValueError(
                f"column {c} mixes symbols and conjugates; "
                "no single relay matrix exists for it")
    ordered = plain_relays + conj_relays
    return RelayMatrixSet(tuple(m for m, _, _ in ordered),
                          tuple(cj for _, cj, _ in ordered),
                          tuple(col for _, _, col in ordered))


def compose_precode(d: Design) -> Design:
    """Re-express a precoded design in its pre-transformation symbols.

    The returned design has the same matrix entries as functions of the
    *user* real symbols (precode folded into the weights); its conjugation
    metadata is dropped since the folded columns generally mix symbols and
    conjugates, which is the point of checking at this level.
    """
    if d.precode is None:
        raise ValueError("design has no precode pair")
    m = d.precode.real_matrix()
    w = np.einsum("kj,ktr->jtr", m, d.weights)
    return Design(d.family + "-raw", d.t, d.r, d.k, w, None, d.partition, None)


# ---------------------------------------------------------------------------
# serialization (JSON, bit-exact round trip)
# ---------------------------------------------------------------------------

def _c2pair(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _pair2c(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    return (a[..., 0] + 1j * a[..., 1]).astype(np.complex128)


def design_to_dict(d: Design) -> dict:
    out = {
        "family": d.family,
        "t": d.t,
        "r": d.r,
        "k": d.k,
        "weights": _c2pair(d.weights),
        "col_conj": list(d.col_conj) if d.col_conj is not None else None,
        "partition": [list(g) for g in d.partition],
    }
    if d.precode is not None:
        out["precode"] = {"p": _c2pair(d.precode.p_mat),
                          "q": _c2pair(d.precode.q_mat)}
    return out


def design_from_dict(obj: dict) -> Design:
    pre = None
    if obj.get("precode") is not None:
        pre = PrecodePair(_pair2c(obj["precode"]["p"]), _pair2c(obj["precode"]["q"]))
    col_conj = obj.get("col_conj")
    return Design(
        family=obj["family"], t=obj["t"], r=obj["r"], k=obj["k"],
        weights=_pair2c(obj["weights"]),
        col_conj=tuple(col_conj) if col_conj is not None else None,
        partition=tuple(tuple(g) for g in obj["partition"]),
        precode=pre)


def save_design(d: Design, path) -> None:
    with open(path, "w") as fh:
        json.dump(design_to_dict(d), fh, indent=1)


def load_design(path) -> Design:
    with open(path) as fh:
        return design_from_dict(json.load(fh))


_FAMILY_BUILDERS = {
    "pciod": lambda r, t1: build_pciod(r),
    "pciod-rect": lambda r, t1: build_pciod_rect(r),
    "ciod4": lambda r, t1: build_ciod4()[0],
    "toeplitz": lambda r, t1: build_toeplitz(t1, r),
    "cda": lambda r, t1: golden_cda(),
}


def build_family(family: str, r: int = 0, t1: int = 0) -> Design:
    """Build a design by family name (used by the command-line surface)."""
    if family == "pciod" and r % 2:
        raise ValueError(
            f"pciod needs an even relay count, got {r}; use family 'pciod-rect'")
    try:
        builder = _FAMILY_BUILDERS[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}; "
                         f"known: {sorted(_FAMILY_BUILDERS)}") from None
    return builder(r, t1)
