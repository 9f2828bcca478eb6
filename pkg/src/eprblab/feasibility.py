"""Exact decision of whether pairwise outcome tables admit a joint
probability distribution over outcome domains.

Everything here is rational arithmetic (`fractions.Fraction`); no floats,
no tolerances.  The question posed by ``joint_feasibility`` is: given 2x2
probability tables for a set of measured setting pairs, does there exist a
probability weight on the full domain space (one hidden outcome per setting
per side) whose marginals reproduce every table exactly?  Feasibility comes
with a witness distribution that is re-marginalized and compared exactly;
infeasibility comes with a separating functional y such that y . b > 0 while
y . A_d <= 0 for every domain column d, verified before it is returned.

Domains live on the "equal" convention: a domain assigns sigma outcomes to
the T island and tau outcomes to the L island, and an L detector reports
tau under the equal convention and -tau under the anti convention.
Identification (``identify_equal_settings=True``) restricts the domain
space to tau = sigma.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import EmptyCellError, InternalInvariantError, SupportViolationError
from .model import (
    CELLS,
    CELL_NAMES,
    SETTING_LABELS,
    DomainKey,
    TallyTable,
    WignerDomainDistribution,
    all_domain_keys,
    domain_key_to_string,
)
from .stats import _q_cell

CONVENTIONS = ("equal", "anti")


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"not a probability: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    raise ValueError(f"cannot interpret {value!r} as an exact probability")


@dataclass(frozen=True)
class PairwiseTables:
    """Exact 2x2 outcome tables keyed by ordered measured setting pair.

    The key (x, y) means the T station measured x and the L station
    measured y; the cell (s, s') holds the probability of T reporting s
    and L reporting s'.  Every table must sum to exactly 1.
    """

    tables: Mapping[tuple[str, str], Mapping[tuple[int, int], Fraction]]

    def __post_init__(self) -> None:
        if not self.tables:
            raise ValueError("tables must not be empty")
        norm: dict[tuple[str, str], dict[tuple[int, int], Fraction]] = {}
        for key, cells in self.tables.items():
            if (
                not isinstance(key, tuple)
                or len(key) != 2
                or key[0] not in SETTING_LABELS
                or key[1] not in SETTING_LABELS
            ):
                raise ValueError(f"table key must be an ordered pair of setting labels, got {key!r}")
            if set(cells) != set(CELLS):
                raise ValueError(f"table {key} must carry exactly the four cells {list(CELL_NAMES.values())}")
            exact = {c: _as_fraction(cells[c]) for c in CELLS}
            for c, p in exact.items():
                if p < 0:
                    raise ValueError(f"table {key} cell {CELL_NAMES[c]} is negative: {p}")
            total = sum(exact.values())
            if total != 1:
                raise ValueError(f"table {key} sums to {total}, expected exactly 1")
            norm[key] = exact
        object.__setattr__(self, "tables", norm)

    @classmethod
    def from_tally(cls, tally: TallyTable, pairs: Sequence[tuple[str, str]] | None = None) -> "PairwiseTables":
        """Normalize tally counts into exact per-pair probability tables.

        By default every nonempty pair in the tally is included; passing
        ``pairs`` selects (and requires) specific ones.
        """
        wanted = list(pairs) if pairs is not None else sorted(k for k in tally.counts if tally.total(*k) > 0)
        out = {}
        for key in wanted:
            n = tally.total(*key)
            if n == 0:
                raise EmptyCellError(f"no counts for measured pair {key[0]};{key[1]}")
            out[key] = {c: Fraction(tally.counts[key][c], n) for c in CELLS}
        return cls(out)

    @property
    def setting_labels(self) -> tuple[str, ...]:
        used = {lab for key in self.tables for lab in key}
        last = max(SETTING_LABELS.index(lab) for lab in used)
        return SETTING_LABELS[: last + 1]

    def measured_pairs(self) -> list[tuple[str, str]]:
        return sorted(self.tables)


def marginalize(
    dist: WignerDomainDistribution,
    measured_pairs: Sequence[tuple[str, str]],
    identify_equal_settings: bool = False,
    convention: str = "equal",
) -> PairwiseTables:
    """Exact per-pair outcome tables induced by a domain distribution.

    For measured pair (x, y) the T station reports sigma_x and the L
    station reports tau_y (equal convention) or -tau_y (anti).  With
    ``identify_equal_settings`` the distribution must already be supported
    on identified domains (tau = sigma); any weight elsewhere raises
    SupportViolationError rather than being silently projected.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    if not measured_pairs:
        raise ValueError("measured_pairs must not be empty")
    if identify_equal_settings:
        bad = [k for k, w in dist.weights.items() if w > 0 and not dist.is_identified(k)]
        if bad:
            shown = domain_key_to_string(sorted(bad)[0])
            raise SupportViolationError(
                f"{len(bad)} domain(s) with positive weight are not identified, e.g. {shown!r}"
            )
    flip = -1 if convention == "anti" else 1
    labels = dist.settings
    n = dist.n_settings
    out: dict[tuple[str, str], dict[tuple[int, int], Fraction]] = {}
    for x, y in measured_pairs:
        if x not in labels or y not in labels:
            raise ValueError(f"measured pair ({x}, {y}) uses settings outside the distribution's {labels}")
        ix, iy = labels.index(x), labels.index(y)
        cells = {c: Fraction(0) for c in CELLS}
        for key, w in dist.weights.items():
            if w == 0:
                continue
            cells[(key[ix], flip * key[n + iy])] += w
        out[(x, y)] = cells
    return PairwiseTables(out)


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    identify_equal_settings: bool
    convention: str
    setting_labels: tuple[str, ...]
    witness: WignerDomainDistribution | None
    certificate: dict[str, Fraction] | None
    row_labels: tuple[str, ...]

    @property
    def status(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def _row_label(key: tuple[str, str], cell: tuple[int, int]) -> str:
    return f"{key[0]};{key[1]}:{CELL_NAMES[cell]}"


def _simplex_phase1(
    rows: list[list[Fraction]], rhs: list[Fraction]
) -> tuple[list[Fraction] | None, list[Fraction] | None]:
    """Exact phase-1 simplex for {A x = b, x >= 0} with b >= 0.

    Returns (x, None) on feasibility or (None, y) with y a separating
    functional (y . b > 0, y . A_j <= 0 for every column j).  Bland's rule
    on both the entering and leaving choices guarantees termination.
    """
    m, n = len(rows), len(rows[0])
    zero, one = Fraction(0), Fraction(1)
    if any(b < 0 for b in rhs):
        raise InternalInvariantError("phase-1 requires a nonnegative right-hand side")
    tab = [list(rows[i]) + [one if k == i else zero for k in range(m)] + [rhs[i]] for i in range(m)]
    basis = list(range(n, n + m))
    width = n + m + 1
    rc = [zero] * width
    for j in range(width):
        col_sum = sum(tab[i][j] for i in range(m))
        cost = one if n <= j < n + m else zero
        rc[j] = cost - col_sum

    while True:
        enter = next((j for j in range(n + m) if rc[j] < 0), None)
        if enter is None:
            break
        leave = None
        best = None
        for i in range(m):
            if tab[i][enter] > 0:
                ratio = tab[i][width - 1] / tab[i][enter]
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave is None:
            raise InternalInvariantError("phase-1 objective is bounded below by 0 and cannot be unbounded")
        piv = tab[leave][enter]
        tab[leave] = [v / piv for v in tab[leave]]
        for i in range(m):
            if i != leave and tab[i][enter] != 0:
                f = tab[i][enter]
                row = tab[leave]
                tab[i] = [vi - f * vr for vi, vr in zip(tab[i], row)]
        if rc[enter] != 0:
            f = rc[enter]
            row = tab[leave]
            rc = [vi - f * vr for vi, vr in zip(rc, row)]
        basis[leave] = enter

    residual = -rc[width - 1]
    if residual == 0:
        x = [zero] * n
        for i, bv in enumerate(basis):
            if bv < n:
                x[bv] = tab[i][width - 1]
        return x, None
    y = [one - rc[n + i] for i in range(m)]
    return None, y


def _domain_columns(setting_labels: tuple[str, ...], identify_equal_settings: bool) -> list[DomainKey]:
    n = len(setting_labels)
    keys = all_domain_keys(n)
    if identify_equal_settings:
        keys = [k for k in keys if k[:n] == k[n:]]
    return keys


def _column_coefficient(
    key: DomainKey,
    labels: tuple[str, ...],
    pair: tuple[str, str],
    cell: tuple[int, int],
    flip: int,
) -> Fraction:
    n = len(labels)
    ix, iy = labels.index(pair[0]), labels.index(pair[1])
    return Fraction(1) if (key[ix], flip * key[n + iy]) == cell else Fraction(0)


def joint_feasibility(
    tables: PairwiseTables | TallyTable,
    identify_equal_settings: bool = False,
    convention: str = "equal",
) -> FeasibilityResult:
    """Decide exactly whether a domain distribution reproduces the tables.

    Feasible outcomes carry a witness distribution (verified here by exact
    re-marginalization); infeasible ones carry a separating functional
    keyed by constraint row, verified against every domain column before
    being returned.  Verification failure of either artifact raises
    InternalInvariantError, since it would mean the solver lied.
    """
    if isinstance(tables, TallyTable):
        tables = PairwiseTables.from_tally(tables)
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    labels = tables.setting_labels
    pairs = tables.measured_pairs()
    columns = _domain_columns(labels, identify_equal_settings)
    flip = -1 if convention == "anti" else 1

    row_labels: list[str] = []
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    for key in pairs:
        for cell in CELLS:
            row_labels.append(_row_label(key, cell))
            rows.append([_column_coefficient(col, labels, key, cell, flip) for col in columns])
            rhs.append(tables.tables[key][cell])
    row_labels.append("normalization")
    rows.append([Fraction(1)] * len(columns))
    rhs.append(Fraction(1))

    x, y = _simplex_phase1(rows, rhs)
    if x is not None:
        witness = WignerDomainDistribution.from_partial(
            {col: w for col, w in zip(columns, x) if w != 0}, settings=labels
        )
        check = marginalize(witness, pairs, identify_equal_settings, convention)
        if check.tables != tables.tables:
            raise InternalInvariantError("witness distribution does not reproduce the tables")
        return FeasibilityResult(
            True, identify_equal_settings, convention, labels, witness, None, tuple(row_labels)
        )

    assert y is not None
    gain = sum(yi * bi for yi, bi in zip(y, rhs))
    if gain <= 0:
        raise InternalInvariantError("separating functional does not separate the right-hand side")
    row_keys = [(k, c) for k in pairs for c in CELLS]
    for col in columns:
        against = sum(
            yi * _column_coefficient(col, labels, key, cell, flip)
            for yi, (key, cell) in zip(y, row_keys)
        )
        against += y[-1]
        if against > 0:
            raise InternalInvariantError(f"separating functional fails on domain column {col!r}")
    certificate = dict(zip(row_labels, y))
    return FeasibilityResult(
        False, identify_equal_settings, convention, labels, None, certificate, tuple(row_labels)
    )


def _q_exact(tables: PairwiseTables, x: str, y: str, convention: str) -> Fraction:
    """P(hidden x-outcome +, hidden y-outcome -) read off the measured
    table for (x, y), falling back to the transposed table (valid under
    identification) when only (y, x) was measured."""
    if (x, y) in tables.tables:
        cells, transposed = tables.tables[(x, y)], False
    elif (y, x) in tables.tables:
        cells, transposed = tables.tables[(y, x)], True
    else:
        raise EmptyCellError(f"no table for measured pair {x};{y} in either orientation")
    return cells[_q_cell(convention, transposed)]


def wigner_residual(
    tables: PairwiseTables | TallyTable,
    ordering: Sequence[str] = ("a", "b", "c"),
    convention: str = "equal",
) -> Fraction:
    """Exact q(x1,x2) - q(x1,x3) - q(x3,x2) for ordering (x1, x2, x3).

    Positive residual certifies that no identified domain distribution
    reproduces the tables; nonpositive residual is necessary (and, for
    three settings, the single-probability form of the criterion) for one
    to exist.
    """
    if isinstance(tables, TallyTable):
        tables = PairwiseTables.from_tally(tables)
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    ordering = tuple(ordering)
    if len(ordering) != 3 or len(set(ordering)) != 3 or any(o not in SETTING_LABELS for o in ordering):
        raise ValueError(f"ordering must be three distinct setting labels, got {ordering!r}")
    x1, x2, x3 = ordering
    return (
        _q_exact(tables, x1, x2, convention)
        - _q_exact(tables, x1, x3, convention)
        - _q_exact(tables, x3, x2, convention)
    )
