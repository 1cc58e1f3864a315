import random

import pytest

from geobench.core import HomeSpan, PlacementIndex, classify
from geobench.errors import ConfigError
from geobench.workload.tpcc import (
    GEO_PCT_CEILING,
    TpccConfig,
    TpccGenerator,
    gen_tpcc_txn,
    sweep_geo_pct,
    tpcc_placement,
)


def run_composition(cfg, n, regions=8, seed=1):
    pl = tpcc_placement(cfg, regions)
    gen = TpccGenerator(cfg, PlacementIndex(pl))
    type_rng = random.Random(seed)
    flag_rng = random.Random(seed + 1)
    choice_rng = random.Random(seed + 2)
    origin_rng = random.Random(seed + 3)
    class_counts = {"LSH": 0, "FSH": 0, "MH": 0}
    type_counts = {}
    fsh_new_order = 0
    for i in range(1, n + 1):
        origin = origin_rng.randrange(regions)
        txn = gen.generate(origin, type_rng, flag_rng, choice_rng, i, 0)
        cls = classify(txn, pl)
        assert cls == txn.txn_class  # generator's own label must agree
        class_counts[cls.home_span.value] += 1
        type_counts[txn.logic_tag] = type_counts.get(txn.logic_tag, 0) + 1
        if cls.home_span is HomeSpan.FSH and txn.logic_tag == "new_order":
            fsh_new_order += 1
    return class_counts, type_counts, fsh_new_order


def test_default_composition_close_to_reference_breakdown():
    # full 2M-sample check lives in the acceptance suite; this is a fast gate
    n = 200_000
    classes, types, fsh_new_order = run_composition(TpccConfig(), n)
    assert abs(classes["LSH"] / n * 100 - 95.36) < 0.4
    assert abs(classes["FSH"] / n * 100 - 0.44) < 0.1
    assert abs(classes["MH"] / n * 100 - 4.21) < 0.3
    assert fsh_new_order == 0


def test_type_mix_matches_totals():
    n = 200_000
    _, types, _ = run_composition(TpccConfig(), n)
    expected = {
        "new_order": 44.00,
        "payment": 44.02,
        "delivery": 3.99,
        "order_status": 4.00,
        "stock_level": 4.00,
    }
    for tag, pct in expected.items():
        assert abs(types.get(tag, 0) / n * 100 - pct) < 0.5


def test_remote_prob_zero_is_all_lsh():
    n = 50_000
    classes, _, _ = run_composition(TpccConfig(remote_prob=0.0), n)
    assert classes["LSH"] == n


def test_all_remote_new_order_is_mh_not_fsh():
    # the home warehouse rows are always touched, so a fully remote order
    # still involves the origin's home region
    cfg = TpccConfig(remote_prob=1.0, txn_mix=(1.0, 0.0, 0.0, 0.0, 0.0))
    pl = tpcc_placement(cfg, 8)
    gen = TpccGenerator(cfg, PlacementIndex(pl))
    for i in range(1, 500):
        txn = gen.generate(0, random.Random(i), random.Random(i), random.Random(i), i, 0)
        assert classify(txn, pl).home_span is HomeSpan.MH


class TestGeoSweep:
    def test_zero_is_all_local(self):
        n = 100_000
        classes, _, _ = run_composition(sweep_geo_pct(TpccConfig(), 0.0), n)
        assert classes["LSH"] / n * 100 > 99.8

    def test_ceiling_splits_evenly(self):
        n = 100_000
        classes, _, _ = run_composition(sweep_geo_pct(TpccConfig(), 0.88), n)
        assert abs(classes["LSH"] / n * 100 - 12.0) < 0.5
        assert abs(classes["FSH"] / n * 100 - 44.0) < 0.5
        assert abs(classes["MH"] / n * 100 - 44.0) < 0.5

    def test_midpoint_interpolates_linearly(self):
        n = 100_000
        classes, _, _ = run_composition(sweep_geo_pct(TpccConfig(), 0.44), n)
        assert abs(classes["FSH"] / n * 100 - 22.0) < 0.5
        assert abs(classes["MH"] / n * 100 - 22.0) < 0.5

    def test_above_ceiling_rejected(self):
        with pytest.raises(ConfigError, match="ceiling"):
            sweep_geo_pct(TpccConfig(), GEO_PCT_CEILING + 0.01)


class TestValidation:
    def test_mix_must_sum_to_one(self):
        with pytest.raises(ConfigError, match="sum"):
            TpccConfig(txn_mix=(0.5, 0.5, 0.1, 0.0, 0.0))

    def test_remote_prob_range(self):
        with pytest.raises(ConfigError, match="remote_prob"):
            TpccConfig(remote_prob=1.5)

    def test_pool_bounds(self):
        with pytest.raises(ConfigError, match="item_pool"):
            TpccConfig(item_pool=0)
        with pytest.raises(ConfigError, match="customer_pool"):
            TpccConfig(customer_pool=100_000)

    def test_warehouses_divisible_by_regions(self):
        with pytest.raises(ConfigError, match="divisible"):
            tpcc_placement(TpccConfig(warehouses=10), 3)

    def test_remote_needs_two_regions(self):
        cfg = TpccConfig(warehouses=4)
        pl = tpcc_placement(cfg, 4)
        # collapse every warehouse into one region
        from conftest import placement_of

        lonely = placement_of([0, 0, 0, 0], n_regions=1)
        with pytest.raises(ConfigError, match="two regions"):
            TpccGenerator(cfg, PlacementIndex(lonely))


def test_determinism():
    cfg = TpccConfig(warehouses=64)
    pl = tpcc_placement(cfg, 4)
    def gen_ids(seed):
        g = TpccGenerator(cfg, PlacementIndex(pl))
        t, f, c = random.Random(seed), random.Random(seed + 1), random.Random(seed + 2)
        return [
            (txn.logic_tag, txn.read_set, txn.write_set)
            for txn in (g.generate(i % 4, t, f, c, i, 0) for i in range(1, 500))
        ]
    assert gen_ids(7) == gen_ids(7)
    assert gen_ids(7) != gen_ids(8)


def test_pool_limits_shrink_key_space():
    cfg = TpccConfig(warehouses=8, item_pool=5, customer_pool=7)
    pl = tpcc_placement(cfg, 4)
    gen = TpccGenerator(cfg, PlacementIndex(pl))
    t, f, c = random.Random(1), random.Random(2), random.Random(3)
    stock_records = set()
    for i in range(1, 3000):
        txn = gen.generate(i % 4, t, f, c, i, 0)
        if txn.logic_tag != "new_order":
            continue
        for p, key in txn.write_set:
            table = key // (10**5 * 10**8)
            if table == 4:  # stock rows
                stock_records.add(key % 10**8)
    assert stock_records and stock_records <= set(range(5))


def test_one_shot_wrapper():
    cfg = TpccConfig(warehouses=8)
    pl = tpcc_placement(cfg, 4)
    txn = gen_tpcc_txn(
        cfg, PlacementIndex(pl), origin=2,
        type_rng=random.Random(1), flag_rng=random.Random(2),
        choice_rng=random.Random(3),
    )
    assert classify(txn, pl) == txn.txn_class
