"""Exact linear programming over rationals: two-phase simplex with Bland's rule.

Small and self-contained; every pivot is exact Fraction arithmetic, so the
optima feed directly into the library's exact bound certificates.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Optional, Sequence

F0 = Fraction(0)
F1 = Fraction(1)


class LPError(Exception):
    pass


def _pivot(tab, basis, row, col):
    piv = tab[row][col]
    inv = F1 / piv
    tab[row] = [x * inv for x in tab[row]]
    prow = tab[row]
    for r, line in enumerate(tab):
        if r == row:
            continue
        factor = line[col]
        if factor == 0:
            continue
        tab[r] = [a - factor * b for a, b in zip(line, prow)]
    basis[row] = col


def _simplex(tab, basis, ncols):
    """Minimize the objective stored in the last tableau row (Bland's rule)."""
    obj = len(tab) - 1
    while True:
        col = -1
        for j in range(ncols):
            if tab[obj][j] < 0:
                col = j
                break
        if col < 0:
            return
        row = -1
        best = None
        for r in range(obj):
            a = tab[r][col]
            if a > 0:
                ratio = tab[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[row]):
                    best = ratio
                    row = r
        if row < 0:
            raise LPError("unbounded")
        _pivot(tab, basis, row, col)


def solve_lp(
    c: Sequence[Fraction],
    a_ub: Sequence[Sequence[Fraction]] = (),
    b_ub: Sequence[Fraction] = (),
    a_eq: Sequence[Sequence[Fraction]] = (),
    b_eq: Sequence[Fraction] = (),
):
    """min c.x subject to a_ub.x <= b_ub, a_eq.x = b_eq, x >= 0.

    Returns (x, value) or None when infeasible.  Raises LPError on unbounded
    problems.
    """
    nvar = len(c)
    rows = []
    # slack variables for the inequalities
    nslack = len(a_ub)
    for idx, (arow, b) in enumerate(zip(a_ub, b_ub)):
        line = list(arow) + [F0] * nslack
        line[nvar + idx] = F1
        rows.append((line, Fraction(b)))
    for arow, b in zip(a_eq, b_eq):
        rows.append((list(arow) + [F0] * nslack, Fraction(b)))
    total = nvar + nslack
    # make every rhs nonnegative, then add artificials where no basic slack fits
    tab = []
    basis = []
    art_cols = []
    for line, b in rows:
        if b < 0:
            line = [-x for x in line]
            b = -b
        tab.append((line, b))
    ncols = total
    final = []
    for line, b in tab:
        basic = -1
        # a slack column with coefficient 1 and zero elsewhere can seed the basis
        for j in range(nvar, total):
            if line[j] == 1 and all(
                other[0][j] == 0 for other in tab if other[0] is not line
            ):
                basic = j
                break
        final.append((line, b, basic))
        if basic < 0:
            art_cols.append(ncols)
            ncols += 1
    # build phase-1 tableau
    mat = []
    basis = []
    art_iter = iter(art_cols)
    for line, b, basic in final:
        row = list(line) + [F0] * (ncols - total) + [b]
        if basic >= 0:
            basis.append(basic)
        else:
            col = next(art_iter)
            row[col] = F1
            basis.append(col)
        mat.append(row)
    if art_cols:
        obj = [F0] * (ncols + 1)
        for col in art_cols:
            obj[col] = F1
        mat.append(obj)
        # price out the artificial basis
        objrow = len(mat) - 1
        for r, col in enumerate(basis):
            if col in art_cols:
                mat[objrow] = [a - b for a, b in zip(mat[objrow], mat[r])]
        _simplex(mat, basis, ncols)
        if mat[-1][-1] != 0:
            return None
        mat.pop()
        # drive any artificial still in the basis out of it
        art_set = set(art_cols)
        for r, col in enumerate(basis):
            if col in art_set:
                for j in range(total):
                    if mat[r][j] != 0:
                        _pivot(mat, basis, r, j)
                        break
        # redundant rows keep a zero-valued artificial basic: drop them
        alive = [r for r, col in enumerate(basis) if col not in art_set]
        mat = [mat[r] for r in alive]
        basis = [basis[r] for r in alive]
        # drop artificial columns
        keep = list(range(total)) + [ncols]
        mat = [[row[j] for j in keep] for row in mat]
        ncols = total
    # phase 2
    obj = [Fraction(x) for x in c] + [F0] * (ncols - nvar) + [F0]
    mat.append(obj)
    objrow = len(mat) - 1
    for r, col in enumerate(basis):
        factor = mat[objrow][col]
        if factor != 0:
            mat[objrow] = [a - factor * b for a, b in zip(mat[objrow], mat[r])]
    _simplex(mat, basis, ncols)
    x = [F0] * nvar
    for r, col in enumerate(basis):
        if col < nvar:
            x[col] = mat[r][-1]
    value = -mat[-1][-1]
    # the tableau stores -objective after pricing; recompute directly instead
    value = sum((Fraction(ci) * xi for ci, xi in zip(c, x)), F0)
    return x, value


def solve_linear_system(a, b):
    """Exact Gaussian elimination; returns x with a.x = b or None if singular."""
    n = len(a)
    m = [list(row) + [rhs] for row, rhs in zip(a, b)]
    cols = len(a[0]) if a else 0
    if n != cols:
        raise LPError("system must be square")
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        inv = F1 / m[col][col]
        m[col] = [x * inv for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                factor = m[r][col]
                m[r] = [x - factor * y for x, y in zip(m[r], m[col])]
    return [m[r][-1] for r in range(n)]
