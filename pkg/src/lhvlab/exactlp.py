"""Exact rational LP feasibility for small systems.

Phase-1 simplex over ``fractions.Fraction`` with Bland's rule, sized for
problems with a handful of constraints and a few dozen variables. No
floating point enters the pivoting, so feasible/infeasible verdicts are
exact and free of tolerance disputes.
"""

from __future__ import annotations

from fractions import Fraction


def _as_fraction_matrix(rows):
    return [[Fraction(x) for x in row] for row in rows]


def feasible_point(A_eq, b_eq, A_ub=(), b_ub=()):
    """Find x >= 0 with A_eq x = b_eq and A_ub x <= b_ub, exactly.

    Returns a list of Fractions, or None when the system is infeasible.
    Inequalities are handled through nonnegative slack variables; the
    returned point contains only the original variables.
    """
    A_eq = _as_fraction_matrix(A_eq)
    b_eq = [Fraction(x) for x in b_eq]
    A_ub = _as_fraction_matrix(A_ub)
    b_ub = [Fraction(x) for x in b_ub]
    if not A_eq and not A_ub:
        return []
    n = len(A_eq[0]) if A_eq else len(A_ub[0])
    k = len(A_ub)

    rows = []
    rhs = []
    for i, row in enumerate(A_eq):
        rows.append(row + [Fraction(0)] * k)
        rhs.append(b_eq[i])
    for i, row in enumerate(A_ub):
        slack = [Fraction(1) if j == i else Fraction(0) for j in range(k)]
        rows.append(row + slack)
        rhs.append(b_ub[i])

    # Phase 1 needs b >= 0.
    for i in range(len(rows)):
        if rhs[i] < 0:
            rows[i] = [-x for x in rows[i]]
            rhs[i] = -rhs[i]

    m = len(rows)
    total = n + k + m  # original + slack + artificial
    tableau = []
    for i in range(m):
        art = [Fraction(1) if j == i else Fraction(0) for j in range(m)]
        tableau.append(rows[i] + art + [rhs[i]])
    basis = [n + k + i for i in range(m)]

    # Reduced costs z_j - c_j for minimizing the sum of artificials:
    # with an all-artificial basis, z_j is the column sum.
    obj = [sum(tableau[i][j] for i in range(m)) for j in range(total + 1)]
    for j in range(n + k, total):
        obj[j] -= 1

    # Artificials never re-enter once they leave, so their columns are dead.
    dead = [False] * total

    while True:
        enter = next((j for j in range(total) if not dead[j] and obj[j] > 0), None)
        if enter is None:
            break
        ratio = None
        leave = None
        for i in range(m):
            coef = tableau[i][enter]
            if coef > 0:
                r = tableau[i][-1] / coef
                if ratio is None or r < ratio or (r == ratio and basis[i] < basis[leave]):
                    ratio = r
                    leave = i
        if leave is None:
            raise RuntimeError("phase-1 objective unbounded; malformed input")
        piv_row = tableau[leave]
        piv = piv_row[enter]
        if piv != 1:
            piv_row = [x / piv for x in piv_row]
            tableau[leave] = piv_row
        for i in range(m):
            f = tableau[i][enter]
            if i != leave and f != 0:
                row = tableau[i]
                tableau[i] = [x if not y else x - f * y
                              for x, y in zip(row, piv_row)]
        f = obj[enter]
        if f != 0:
            obj = [x if not y else x - f * y for x, y in zip(obj, piv_row)]
        if basis[leave] >= n + k:
            dead[basis[leave]] = True
        basis[leave] = enter

    infeasibility = sum(tableau[i][-1] for i in range(m) if basis[i] >= n + k)
    if infeasibility != 0:
        return None
    x = [Fraction(0)] * n
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = tableau[i][-1]
    return x
