import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import pair, stream
from eprblab.counting import augment_triple
from eprblab.errors import EmptyCellError
from eprblab.model import Setting, TallyTable, WignerDomainDistribution
from eprblab.pairing import PairingConfig, match_pairs, match_pairs_indexed
from eprblab.sources import SourceConfig, generate
from eprblab.stats import (
    bell_wigner,
    chsh,
    correlation,
    equal_fraction,
    repair_across_trials,
    sweep_window,
    tally,
    tally_indexed,
)


def table(**pairs_cells):
    """table(ab={'pp': 3, ...}, cb=...) -> TallyTable"""
    name = {"pp": (1, 1), "pm": (1, -1), "mp": (-1, 1), "mm": (-1, -1)}
    return TallyTable(
        {(k[0], k[1]): {name[c]: v for c, v in cells.items()} for k, cells in pairs_cells.items()}
    )


def test_tally_counts_cells():
    pairs = [
        pair(0, 0, "a", "b", 1, 1),
        pair(10, 10, "a", "b", 1, -1),
        pair(20, 20, "a", "b", 1, 1),
        pair(30, 30, "c", "b", -1, -1),
    ]
    t = tally(pairs, unmatched_left=2, unmatched_right=0)
    assert t.count("a", "b", 1, 1) == 2
    assert t.count("a", "b", 1, -1) == 1
    assert t.total("c", "b") == 1
    assert t.unmatched_left == 2


def test_tally_refuses_counterfactual_records():
    p = pair(0, 0, "a", "b", 1, 1)
    fake = augment_triple(p, "c")
    with pytest.raises(TypeError, match="counterfactually augmented"):
        tally([p, fake])


def test_tally_indexed_agrees_with_tally(rng):
    cfg = SourceConfig(
        kind="singlet",
        settings=(Setting("a", 0.0), Setting("b", 120.0), Setting("c", 60.0)),
        seed=17,
        emission_period_ns=1000,
        jitter_ns=100,
        total_pairs=3000,
    )
    left, right = generate(cfg)
    mi, mj, ul, ur = match_pairs_indexed(left, right, PairingConfig(150))
    fast = tally_indexed(left, right, mi, mj, ul, ur)
    pairs, ul2, ur2 = match_pairs(left, right, PairingConfig(150))
    slow = tally(pairs, ul2, ur2)
    assert fast.counts == slow.counts
    assert (fast.unmatched_left, fast.unmatched_right) == (ul2, ur2)


def test_correlation_and_equal_fraction():
    t = table(ab={"pp": 4})
    assert correlation(t, "a", "b") == 1.0
    assert equal_fraction(t, "a", "b") == 1.0
    t = table(ab={"pm": 2, "mp": 2})
    assert correlation(t, "a", "b") == -1.0
    assert equal_fraction(t, "a", "b") == 0.0
    t = table(ab={"pp": 1, "pm": 1, "mp": 1, "mm": 1})
    assert correlation(t, "a", "b") == 0.0
    with pytest.raises(EmptyCellError):
        correlation(t, "a", "c")


def test_correlation_uses_transposed_table_when_needed():
    t = table(ba={"pm": 3, "pp": 1})
    assert correlation(t, "a", "b") == correlation(t, "b", "a") == (1 - 3) / 4


@given(
    st.tuples(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50)).filter(
        lambda c: sum(c) > 0
    )
)
def test_equal_fraction_identity(cells):
    pp, pm, mp, mm = cells
    t = table(ab={"pp": pp, "pm": pm, "mp": mp, "mm": mm})
    assert equal_fraction(t, "a", "b") == pytest.approx((1 + correlation(t, "a", "b")) / 2)


# ---------------------------------------------------------------------------
# bell-wigner


def test_bell_wigner_exact_singlet_counts():
    t = table(
        ab={"pp": 3, "pm": 1, "mp": 1, "mm": 3},
        ac={"pp": 1, "pm": 3, "mp": 3, "mm": 1},
        cb={"pp": 1, "pm": 3, "mp": 3, "mm": 1},
    )
    rep = bell_wigner(t, ("a", "b", "c"), convention="anti")
    assert rep.lhs == pytest.approx(3 / 8)
    assert rep.rhs == pytest.approx(2 / 8)
    assert rep.violated
    assert rep.statistic == pytest.approx(1 / 8)
    # each of the three terms contributes q(1-q)/n to the variance
    q = [3 / 8, 1 / 8, 1 / 8]
    want = math.sqrt(sum(v * (1 - v) / 8 for v in q))
    assert rep.standard_error == pytest.approx(want)


def test_bell_wigner_reads_the_convention_cell():
    """The same hidden-level distribution reported under the two conventions
    must give the same q values once the right cell is read."""
    anti = table(
        ab={"pp": 3, "mm": 5},
        ac={"pp": 1, "mm": 7},
        cb={"pp": 2, "mm": 6},
    )
    equal = table(
        ab={"pm": 3, "mp": 5},
        ac={"pm": 1, "mp": 7},
        cb={"pm": 2, "mp": 6},
    )
    rep_a = bell_wigner(anti, ("a", "b", "c"), convention="anti")
    rep_e = bell_wigner(equal, ("a", "b", "c"), convention="equal")
    assert rep_a.lhs == rep_e.lhs == pytest.approx(3 / 8)
    assert rep_a.rhs == rep_e.rhs


def test_bell_wigner_transposed_orientation():
    # only (b,a) measured; under identification its mm cell is the (a,b) q-event
    t = table(
        ba={"mm": 3, "pp": 1, "pm": 2, "mp": 2},
        ac={"pp": 1, "pm": 3, "mp": 3, "mm": 1},
        cb={"pp": 1, "pm": 3, "mp": 3, "mm": 1},
    )
    rep = bell_wigner(t, ("a", "b", "c"), convention="anti")
    assert rep.lhs == pytest.approx(3 / 8)
    assert ("b", "a") in rep.pair_counts


def test_bell_wigner_identified_source_not_violated():
    cfg = SourceConfig(
        kind="wigner-domain",
        settings=(Setting("a", 0.0), Setting("b", 120.0), Setting("c", 60.0)),
        seed=23,
        emission_period_ns=100,
        jitter_ns=0,
        total_pairs=60_000,
        convention="equal",
        domain_weights=WignerDomainDistribution.uniform_identified(),
    )
    left, right = generate(cfg)
    mi, mj, ul, ur = match_pairs_indexed(left, right, PairingConfig(0))
    rep = bell_wigner(tally_indexed(left, right, mi, mj, ul, ur), ("a", "b", "c"), "equal")
    assert rep.lhs <= rep.rhs + 4 * rep.standard_error


def test_bell_wigner_missing_pair_is_empty_cell():
    t = table(ab={"pp": 1, "pm": 1, "mp": 1, "mm": 1})
    with pytest.raises(EmptyCellError):
        bell_wigner(t, ("a", "b", "c"))


# ---------------------------------------------------------------------------
# chsh


def test_chsh_exact_counts():
    t = table(
        ab={"pm": 2, "mp": 2},
        ad={"pp": 2, "mm": 2},
        cb={"pm": 2, "mp": 2},
        cd={"pm": 2, "mp": 2},
    )
    rep = chsh(t, ("a", "b", "c", "d"))
    assert rep.s_value == pytest.approx(-4.0)
    assert rep.violated
    assert rep.standard_error == 0.0
    assert rep.statistic == rep.s_value


def test_chsh_no_correlation_is_not_violated():
    flat = {"pp": 5, "pm": 5, "mp": 5, "mm": 5}
    t = table(ab=dict(flat), ad=dict(flat), cb=dict(flat), cd=dict(flat))
    rep = chsh(t)
    assert rep.s_value == 0.0
    assert not rep.violated


def test_chsh_transposed_tables():
    t = table(
        ba={"pm": 2, "mp": 2},
        ad={"pp": 2, "mm": 2},
        bc={"pm": 2, "mp": 2},
        dc={"pm": 2, "mp": 2},
    )
    rep = chsh(t, ("a", "b", "c", "d"))
    assert rep.s_value == pytest.approx(-4.0)
    assert set(rep.pair_counts) == {("b", "a"), ("a", "d"), ("b", "c"), ("d", "c")}


# ---------------------------------------------------------------------------
# sweeps


def _singlet_streams(jitter=0, n=400, seed=19):
    cfg = SourceConfig(
        kind="singlet",
        settings=(Setting("a", 0.0), Setting("b", 120.0), Setting("c", 60.0)),
        seed=seed,
        emission_period_ns=1000,
        jitter_ns=jitter,
        total_pairs=n,
    )
    return generate(cfg)


def test_sweep_zero_jitter_statistic_is_window_independent():
    left, right = _singlet_streams(jitter=0, n=2000)
    rows = sweep_window(left, right, [0, 10, 400], kind="bell-wigner")
    assert rows[0].pairs == rows[1].pairs == rows[2].pairs == 2000
    assert rows[0].statistic == rows[1].statistic == rows[2].statistic
    assert all(r.violated is not None for r in rows)


def test_sweep_reports_empty_cells_as_none():
    left, right = stream("T", [(5, "a", 1)]), stream("L", [(6, "b", 1)])
    rows = sweep_window(left, right, [0, 10], kind="bell-wigner")
    assert rows[0].pairs == 0
    assert rows[0].statistic is None and rows[0].stderr is None and rows[0].violated is None
    assert rows[1].pairs == 1
    assert rows[1].statistic is None  # still missing the other setting pairs


def test_sweep_validates_inputs():
    left, right = _singlet_streams(n=10)
    with pytest.raises(ValueError):
        sweep_window(left, right, [10, 5], kind="chsh")
    with pytest.raises(ValueError):
        sweep_window(left, right, [], kind="chsh")
    with pytest.raises(ValueError):
        sweep_window(left, right, [5], kind="steering")


# ---------------------------------------------------------------------------
# cross-trial re-pairing


def test_repair_across_trials_halves_perfect_correlation(rng):
    n = 40_000
    outcomes = rng.choice([-1, 1], n)
    pairs = [pair(10 * i, 10 * i, "a", "a", int(o), int(o), window=0) for i, o in enumerate(outcomes)]
    t = tally(pairs)
    assert equal_fraction(t, "a", "a") == 1.0
    scrambled = repair_across_trials(pairs, seed=99)
    ef = equal_fraction(scrambled, "a", "a")
    assert abs(ef - 0.5) <= 4 * math.sqrt(0.25 / n)


def test_repair_is_deterministic_and_preserves_marginals():
    pairs = [pair(10 * i, 10 * i, "a", "b", 1 if i % 3 else -1, -1 if i % 2 else 1) for i in range(60)]
    t1 = repair_across_trials(pairs, seed=4)
    t2 = repair_across_trials(pairs, seed=4)
    assert t1.counts == t2.counts
    orig = tally(pairs)
    # scrambling permutes right outcomes within the class: totals and the
    # one-sided marginals cannot move
    key = ("a", "b")
    assert t1.total(*key) == orig.total(*key)
    left_plus = t1.count(*key, 1, 1) + t1.count(*key, 1, -1)
    assert left_plus == orig.count(*key, 1, 1) + orig.count(*key, 1, -1)
    right_plus = t1.count(*key, 1, 1) + t1.count(*key, -1, 1)
    assert right_plus == orig.count(*key, 1, 1) + orig.count(*key, -1, 1)


def test_repair_single_pair_is_unchanged():
    p = [pair(0, 0, "a", "b", 1, -1)]
    t = repair_across_trials(p, seed=1)
    assert t.count("a", "b", 1, -1) == 1


def test_repair_rejects_bad_input():
    with pytest.raises(ValueError):
        repair_across_trials([], seed=1)
    with pytest.raises(TypeError):
        repair_across_trials([augment_triple(pair(0, 0, "a", "b", 1, 1), "c")], seed=1)
