"""S3 x S3 group machinery: variable sets, characters, identity sweeps.

The 36 variable sets, the 9 product characters chi and the 11 composite
characters eta-bar are embedded as static integer tables.  Two independent
cross-checks guard against transcription slips: chi is re-derived entrywise
from the outer product of the S3 character table with itself, and eta-bar is
re-derived in :mod:`shapedecomp.decompose` from the extraction matrix.
"""

from __future__ import annotations

from fractions import Fraction

from .ringcore import (
    COMPOSE36,
    GROUP36,
    INVERSE36,
    PermPair,
    Poly9,
    S3_NAMES,
    S3_PERMS,
    S3_SIGNS,
    linear_combination,
    s3_compose,
)


class TableMismatch(AssertionError):
    """A static table disagrees with its independent re-derivation."""


def group_elements() -> tuple[PermPair, ...]:
    """The 36 elements ordered as the variable-set table (v0 the identity)."""
    return GROUP36


# Character table of S3; columns ordered e, (23), (12), (13), (123), (132).
S3_CHARS = {
    "S": (1, 1, 1, 1, 1, 1),
    "A": (1, -1, -1, -1, 1, 1),
    "E": (2, 0, 0, 0, -1, -1),
}

# Row k of chi is the product character R_y x R_z with the pairs below:
# the y-representation is evaluated on sigma_y and the z-representation on
# sigma_z.  Row 0 is trivial, rows 4..8 involve the two-dimensional E.
CHI_FACTORS = (
    ("S", "S"), ("A", "A"), ("S", "A"), ("A", "S"),
    ("E", "A"), ("E", "S"), ("A", "E"), ("S", "E"), ("E", "E"),
)

CHI_TABLE = (
    (1,) * 36,
    (1, -1, -1, -1, 1, 1, -1, -1, -1, 1, 1, 1, 1, 1, 1, 1, 1, 1,
     -1, -1, -1, -1, -1, -1, 1, 1, -1, -1, -1, -1, -1, -1, 1, 1, 1, 1),
    (1, -1, -1, -1, 1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1,
     1, 1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, 1, 1, 1, 1),
    (1, 1, 1, 1, 1, 1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1,
     -1, -1, -1, -1, -1, -1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1),
    (2, -2, -2, -2, 2, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     0, 0, 0, 0, 0, 0, -1, -1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1),
    (2, 2, 2, 2, 2, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     0, 0, 0, 0, 0, 0, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1),
    (2, 0, 0, 0, -1, -1, -2, -2, -2, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     1, 1, 1, 1, 1, 1, 2, 2, 0, 0, 0, 0, 0, 0, -1, -1, -1, -1),
    (2, 0, 0, 0, -1, -1, 2, 2, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     -1, -1, -1, -1, -1, -1, 2, 2, 0, 0, 0, 0, 0, 0, -1, -1, -1, -1),
    (4, 0, 0, 0, -2, -2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     0, 0, 0, 0, 0, 0, -2, -2, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1),
)

ETA_BAR_TABLE = (
    (1,) * 36,
    CHI_TABLE[1],
    CHI_TABLE[2],
    CHI_TABLE[3],
    (4, -4, -4, -4, 4, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     0, 0, 0, 0, 0, 0, -2, -2, 2, 2, 2, 2, 2, 2, -2, -2, -2, -2),
    (4, 4, 4, 4, 4, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     0, 0, 0, 0, 0, 0, -2, -2, -2, -2, -2, -2, -2, -2, -2, -2, -2, -2),
    (4, 0, 0, 0, -2, -2, -4, -4, -4, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     2, 2, 2, 2, 2, 2, 4, 4, 0, 0, 0, 0, 0, 0, -2, -2, -2, -2),
    (4, 0, 0, 0, -2, -2, 4, 4, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     -2, -2, -2, -2, -2, -2, 4, 4, 0, 0, 0, 0, 0, 0, -2, -2, -2, -2),
    (4, 0, 0, 0, -2, -2, 0, 0, 0, 4, -2, -2, -2, -2, 4, -2, -2, 4,
     0, 0, 0, 0, 0, 0, -2, -2, 0, 0, 0, 0, 0, 0, 4, -2, -2, 4),
    (4, 0, 0, 0, -2, -2, 0, 0, 0, -4, 2, 2, 2, 2, -4, 2, 2, -4,
     0, 0, 0, 0, 0, 0, -2, -2, 0, 0, 0, 0, 0, 0, 4, -2, -2, 4),
    (8, 0, 0, 0, -4, -4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0,
     0, 0, 0, 0, 0, 0, -4, -4, 0, 0, 0, 0, 0, 0, -4, 8, 8, -4),
)

# Sizes of the shape blocks I_0..I_10 (see shapedecomp.shapes.BLOCKS).
BLOCK_SIZES = (1, 1, 1, 1, 4, 4, 4, 4, 4, 4, 8)


def chi(k: int, j: int) -> int:
    return CHI_TABLE[k][j]


def eta_bar(k: int, j: int) -> int:
    return ETA_BAR_TABLE[k][j]


def chi_from_outer_product() -> tuple:
    """Rebuild chi entrywise from the S3 character table (checksum source)."""
    rows = []
    for ry, rz in CHI_FACTORS:
        cy, cz = S3_CHARS[ry], S3_CHARS[rz]
        rows.append(tuple(
            cy[S3_PERMS.index(g.py)] * cz[S3_PERMS.index(g.pz)] for g in GROUP36
        ))
    return tuple(rows)


def verify_character_identities() -> dict:
    """Exact integer sweeps of the column-delta, row-square-sum and
    multiplication-rule identities, plus the chi outer-product checksum.

    Raises TableMismatch with the offending indices on any violation.
    """
    report = {}
    if chi_from_outer_product() != CHI_TABLE:
        raise TableMismatch("chi table does not match the S3 outer product")
    report["chi_outer_product"] = "pass"

    for j in range(36):
        total = sum(ETA_BAR_TABLE[k][j] for k in range(11))
        if total != (36 if j == 0 else 0):
            raise TableMismatch(f"column sum failed at j={j}: {total}")
    report["column_delta"] = "36 columns pass"

    for k in range(11):
        sq = sum(v * v for v in ETA_BAR_TABLE[k])
        if sq != 36 * BLOCK_SIZES[k]:
            raise TableMismatch(f"row square sum failed at k={k}: {sq}")
    report["row_square_sum"] = "11 rows pass"

    for k in range(11):
        for kp in range(11):
            for big_j in range(36):
                s = sum(
                    ETA_BAR_TABLE[k][j] * ETA_BAR_TABLE[kp][COMPOSE36[j][big_j]]
                    for j in range(36)
                )
                want = 36 * ETA_BAR_TABLE[k][big_j] if k == kp else 0
                if s != want:
                    raise TableMismatch(
                        f"multiplication rule failed at k={k}, k'={kp}, J={big_j}"
                    )
    report["multiplication_rule"] = "11*11*36 triples pass"

    # first orthogonality relation: sum over the group of chi_k chi_k' = |G| delta
    for k in range(9):
        for kp in range(9):
            s = sum(CHI_TABLE[k][j] * CHI_TABLE[kp][j] for j in range(36))
            if s != (36 if k == kp else 0):
                raise TableMismatch(f"chi orthogonality failed at ({k},{kp})")
    report["chi_orthogonality"] = "pass"
    return report


def s3_transform(f: Poly9, rep: str, axis: str = "x") -> Poly9:
    """g_R = sum over S3 of chi_R(sigma) * f(sigma-permuted axis triplet).

    The one-dimensional analysis primitive; f should depend on a single
    axis triplet (other axes ride along unchanged).
    """
    chars = S3_CHARS[rep]
    return linear_combination(
        (chars[i], f.axis_permute(axis, p)) for i, p in enumerate(S3_PERMS)
    )


# ---------------------------------------------------------------------------
# The two-dimensional representation matrices (E and its left-handed twin)
# ---------------------------------------------------------------------------

def _mat(rows):
    return tuple(tuple(Fraction(v) for v in row) for row in rows)


H = Fraction(1, 2)

E_MATRICES = (
    _mat([[1, 0], [0, 1]]),
    _mat([[H, H], [3 * H, -H]]),
    _mat([[-1, 0], [0, 1]]),
    _mat([[H, -H], [-3 * H, -H]]),
    _mat([[-H, H], [-3 * H, -H]]),
    _mat([[-H, -H], [3 * H, -H]]),
)

EBAR_MATRICES = (
    _mat([[1, 0], [0, 1]]),
    _mat([[H, 3 * H], [H, -H]]),
    _mat([[-1, 0], [0, 1]]),
    _mat([[H, -3 * H], [-H, -H]]),
    _mat([[-H, 3 * H], [-H, -H]]),
    _mat([[-H, -3 * H], [H, -H]]),
)


def _mat_mul(a, b):
    return tuple(
        tuple(sum(a[i][k] * b[k][j] for k in range(2)) for j in range(2))
        for i in range(2)
    )


def verify_rep_matrices() -> dict:
    """Both matrix lists must reproduce the S3 multiplication table.

    The lists act on column vectors of function components, so composition
    runs opposite to the variable-relabelling product: M(a)M(b) = M(b o a).
    Equivalently, each list is a plain homomorphism once the two 3-cycles
    are read backwards (exchanged), which is the stated convention for the
    left-handed copy.
    """
    report = {}
    swap = (0, 1, 2, 3, 5, 4)  # exchange (123) and (132)
    for name, mats in (("E", E_MATRICES), ("Ebar", EBAR_MATRICES)):
        for i, a in enumerate(S3_PERMS):
            for j, b in enumerate(S3_PERMS):
                k = S3_PERMS.index(s3_compose(b, a))
                ks = swap[S3_PERMS.index(s3_compose(S3_PERMS[swap[i]], S3_PERMS[swap[j]]))]
                if _mat_mul(mats[i], mats[j]) != mats[k]:
                    raise TableMismatch(f"{name} matrices fail at {S3_NAMES[i]}*{S3_NAMES[j]}")
                if _mat_mul(mats[i], mats[j]) != mats[ks]:
                    raise TableMismatch(f"{name} swapped-cycle check fails at {i},{j}")
        report[name] = "pass"

    # row-orthogonality convention of the defining (x+y+z, x-y, x+y-2z) frame
    frame = ((1, 1, 1), (1, -1, 0), (1, 1, -2))
    for r in range(3):
        for s in range(r + 1, 3):
            if sum(a * b for a, b in zip(frame[r], frame[s])) != 0:
                raise TableMismatch("defining frame is not row-orthogonal")
    report["frame"] = "pass"
    return report


__all__ = [
    "group_elements", "chi", "eta_bar", "CHI_TABLE", "ETA_BAR_TABLE",
    "S3_CHARS", "CHI_FACTORS", "BLOCK_SIZES", "chi_from_outer_product",
    "verify_character_identities", "s3_transform", "TableMismatch",
    "E_MATRICES", "EBAR_MATRICES", "verify_rep_matrices",
    "COMPOSE36", "INVERSE36", "GROUP36",
]
