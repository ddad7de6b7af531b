import json

import numpy as np
import pytest

from citylayout.errors import EmptyDataset, IngestIOError
from citylayout.geometry import Polygon
from citylayout.ingest import (
    BlockRecord,
    RawBuilding,
    assemble_records,
    assign_landuse,
    build_dataset,
    dataset_stats,
    load_blocks,
    load_buildings,
    load_landuse,
    load_corpus,
    save_corpus,
    spatial_join,
    write_exclusion_log,
)
from citylayout.synth import DEFAULT_PROFILES, synth_corpus


def feature(coords, **props):
    return {
        "type": "Feature",
        "geometry": {"type": "Polygon", "coordinates": [coords]},
        "properties": props,
    }


def fc(features):
    return {"type": "FeatureCollection", "features": features}


def sq(x, y, s=10.0):
    return [[x, y], [x + s, y], [x + s, y + s], [x, y + s], [x, y]]


class TestLoaders:
    def test_three_valid_blocks(self, tmp_path):
        doc = fc([feature(sq(0, 0, 50), id="a"), feature(sq(100, 0, 50), id="b"),
                  feature(sq(200, 0, 50), id="c")])
        p = tmp_path / "blocks.geojson"
        p.write_text(json.dumps(doc))
        blocks, skipped = load_blocks(p)
        assert len(blocks) == 3 and skipped == 0

    def test_self_intersecting_feature_skipped(self, tmp_path):
        bad = [[0, 0], [10, 10], [10, 0], [0, 10], [0, 0]]
        doc = fc([feature(sq(0, 0, 50), id="ok"), feature(bad, id="bad")])
        p = tmp_path / "blocks.geojson"
        p.write_text(json.dumps(doc))
        blocks, skipped = load_blocks(p)
        assert len(blocks) == 1 and skipped == 1

    def test_missing_id_skipped(self, tmp_path):
        doc = fc([feature(sq(0, 0, 50))])
        p = tmp_path / "b.geojson"
        p.write_text(json.dumps(doc))
        with pytest.raises(EmptyDataset):
            load_blocks(p)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(IngestIOError):
            load_blocks(tmp_path / "missing.geojson")
        bad = tmp_path / "bad.geojson"
        bad.write_text("{not json")
        with pytest.raises(IngestIOError):
            load_blocks(bad)

    def test_building_height_required(self, tmp_path):
        doc = fc([feature(sq(0, 0), id="x"), feature(sq(20, 0), id="y", height=12.5)])
        p = tmp_path / "b.geojson"
        p.write_text(json.dumps(doc))
        buildings, skipped = load_buildings(p)
        assert len(buildings) == 1 and skipped == 1
        assert buildings[0].height == 12.5

    def test_landuse_name_and_index(self, tmp_path):
        doc = fc([
            feature(sq(0, 0, 100), **{"class": "Commercial"}),
            feature(sq(200, 0, 100), **{"class": 3}),
            feature(sq(400, 0, 100), **{"class": "unknown_type"}),
        ])
        p = tmp_path / "lu.geojson"
        p.write_text(json.dumps(doc))
        lu, skipped = load_landuse(p)
        assert [c for _p, c in lu] == [1, 3] and skipped == 1

    def test_lonlat_warning(self, tmp_path):
        doc = fc([feature([[-73.9, 40.7], [-73.8, 40.7], [-73.8, 40.8], [-73.9, 40.8],
                           [-73.9, 40.7]], id="nyc")])
        p = tmp_path / "b.geojson"
        p.write_text(json.dumps(doc))
        with pytest.warns(UserWarning, match="lon/lat"):
            load_blocks(p)

    def test_round_trip_coordinates(self, tmp_path):
        records = synth_corpus(seed=5, n_blocks=4)
        save_corpus(records, tmp_path / "corpus")
        loaded = load_corpus(tmp_path / "corpus")
        assert [r.id for r in loaded] == [r.id for r in records]
        for a, b in zip(records, loaded):
            assert np.allclose(a.boundary.array, b.boundary.array, atol=1e-9)
            assert len(a.buildings) == len(b.buildings)
            assert a.land_use == b.land_use


class TestSpatialJoin:
    def test_centered_building(self):
        blocks = [("A", Polygon([(0, 0), (50, 0), (50, 50), (0, 50)]))]
        b = RawBuilding(Polygon([(20, 20), (30, 20), (30, 30), (20, 30)]), 10.0, "b0")
        joined, dropped = spatial_join(blocks, [b])
        assert joined == {0: "A"} and dropped == 0

    def test_outside_dropped(self):
        blocks = [("A", Polygon([(0, 0), (50, 0), (50, 50), (0, 50)]))]
        b = RawBuilding(Polygon([(100, 100), (110, 100), (110, 110), (100, 110)]), 10.0, "b0")
        joined, dropped = spatial_join(blocks, [b])
        assert joined == {} and dropped == 1

    def test_matches_brute_force(self, rng):
        blocks = []
        for i in range(5):
            for j in range(4):
                x, y = i * 60.0, j * 60.0
                blocks.append((f"b{i}{j}", Polygon([(x, y), (x + 50, y), (x + 50, y + 50), (x, y + 50)])))
        buildings = []
        for _ in range(1000):
            cx, cy = rng.uniform(-20, 320), rng.uniform(-20, 260)
            buildings.append(
                RawBuilding(Polygon([(cx, cy), (cx + 4, cy), (cx + 4, cy + 4), (cx, cy + 4)]), 8.0, "x")
            )
        joined, dropped = spatial_join(blocks, buildings)
        expect = {}
        for k, b in enumerate(buildings):
            c = b.footprint.centroid
            import shapely.geometry as sgeom

            for bid, poly in blocks:
                if poly.shapely.covers(sgeom.Point(c)):
                    expect[k] = bid
                    break
        assert joined == expect
        assert dropped == 1000 - len(expect)


class TestAssignLanduse:
    def test_full_containment(self):
        blocks = [("A", Polygon([(10, 10), (40, 10), (40, 40), (10, 40)]))]
        lu = [(Polygon([(0, 0), (100, 0), (100, 100), (0, 100)]), 2)]
        assert assign_landuse(blocks, lu) == [2]

    def test_sixty_forty_split(self):
        blocks = [("A", Polygon([(0, 0), (100, 0), (100, 10), (0, 10)]))]
        lu = [
            (Polygon([(0, -5), (60, -5), (60, 15), (0, 15)]), 1),
            (Polygon([(60, -5), (100, -5), (100, 15), (60, 15)]), 4),
        ]
        assert assign_landuse(blocks, lu) == [1]

    def test_no_overlap_defaults_zero(self):
        blocks = [("A", Polygon([(0, 0), (10, 0), (10, 10), (0, 10)]))]
        lu = [(Polygon([(500, 500), (510, 500), (510, 510), (500, 510)]), 3)]
        with pytest.warns(UserWarning, match="no land-use overlap"):
            assert assign_landuse(blocks, lu) == [0]

    def test_matches_exhaustive_oracle(self, rng):
        blocks = []
        for i in range(12):
            x, y = rng.uniform(0, 200, 2)
            blocks.append((f"b{i}", Polygon([(x, y), (x + 30, y), (x + 30, y + 20), (x, y + 20)])))
        lu = []
        for _ in range(15):
            x, y = rng.uniform(-20, 220, 2)
            w, h = rng.uniform(20, 80, 2)
            lu.append((Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)]), int(rng.integers(0, 5))))
        got = assign_landuse(blocks, lu)
        for (bid, poly), cls in zip(blocks, got):
            areas = {}
            for lp, c in lu:
                areas[c] = areas.get(c, 0.0) + poly.shapely.intersection(lp.shapely).area
            if max(areas.values()) <= 0:
                assert cls == 0
            else:
                best = max(areas.values())
                assert cls == min(c for c, a in areas.items() if a == best)


class TestBuildDataset:
    def test_zero_building_block_excluded(self):
        rec = BlockRecord("empty", Polygon([(0, 0), (50, 0), (50, 30), (0, 30)]))
        rec2 = synth_corpus(seed=1, n_blocks=1)[0]
        items, exclusions = build_dataset([rec, rec2])
        assert len(items) == 1
        assert ("empty", "no_buildings") in exclusions

    def test_dense_block_excluded(self):
        blk = Polygon([(0, 0), (400, 0), (400, 20), (0, 20)])
        buildings = [
            RawBuilding(
                Polygon([(1 + 3 * i, 8), (3 + 3 * i, 8), (3 + 3 * i, 12), (1 + 3 * i, 12)]), 5.0, str(i)
            )
            for i in range(130)
        ]
        rec = BlockRecord("dense", blk, buildings=buildings)
        ok = synth_corpus(seed=2, n_blocks=1)[0]
        items, exclusions = build_dataset([rec, ok])
        assert ("dense", "too_dense") in exclusions
        assert len(items) == 1

    def test_synthetic_corpus_zero_exclusions(self):
        records = synth_corpus(seed=3, n_blocks=30)
        items, exclusions = build_dataset(records)
        assert len(items) == 30 and exclusions == []

    def test_exclusion_log_format(self, tmp_path):
        write_exclusion_log([("a", "no_buildings"), ("b", "too_dense")], tmp_path / "x.log")
        assert (tmp_path / "x.log").read_text() == "a\tno_buildings\nb\ttoo_dense\n"

    def test_all_excluded_raises(self):
        rec = BlockRecord("empty", Polygon([(0, 0), (50, 0), (50, 30), (0, 30)]))
        with pytest.raises(EmptyDataset):
            build_dataset([rec])


class TestAssembleRecords:
    def test_join_and_landuse(self):
        blocks = [
            ("A", Polygon([(0, 0), (50, 0), (50, 50), (0, 50)])),
            ("B", Polygon([(100, 0), (150, 0), (150, 50), (100, 50)])),
        ]
        buildings = [
            RawBuilding(Polygon([(10, 10), (20, 10), (20, 20), (10, 20)]), 10, "b0"),
            RawBuilding(Polygon([(120, 10), (130, 10), (130, 20), (120, 20)]), 12, "b1"),
        ]
        lu = [(Polygon([(-10, -10), (60, -10), (60, 60), (-10, 60)]), 2)]
        with pytest.warns(UserWarning):
            records = assemble_records(blocks, buildings, lu)
        assert [r.id for r in records] == ["A", "B"]
        assert records[0].land_use == 2
        assert len(records[0].buildings) == 1
        assert len(records[1].buildings) == 1


class TestDatasetStats:
    def test_exact_arithmetic(self):
        blk = Polygon([(0, 0), (50, 0), (50, 30), (0, 30)])
        b = RawBuilding(Polygon([(5, 5), (10, 5), (10, 10), (5, 10)]), 5.0, "x")
        records = [
            BlockRecord("a", blk, 0, [b], source="城"),
            BlockRecord("b", blk, 1, [b, b], source="城"),
            BlockRecord("c", blk, 0, [b, b, b], source="城"),
        ]
        stats = dataset_stats(records)
        s = stats.sources["城"]
        assert (s.max, s.min, s.avg) == (3, 1, 2.0)
        assert s.std == pytest.approx(np.std([1, 2, 3]))
        assert s.total_blocks == 3
        assert stats.landuse_counts == {0: 2, 1: 1}

    def test_per_class_totals_sum(self):
        records = synth_corpus(seed=9, n_blocks=23)
        stats = dataset_stats(records)
        assert sum(stats.landuse_counts.values()) == stats.total_blocks == 23


class TestSynthCorpus:
    def test_deterministic(self):
        a = synth_corpus(seed=7, n_blocks=10)
        b = synth_corpus(seed=7, n_blocks=10)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.boundary.array, rb.boundary.array)
            assert len(ra.buildings) == len(rb.buildings)
            for ba, bb in zip(ra.buildings, rb.buildings):
                assert np.array_equal(ba.footprint.array, bb.footprint.array)
                assert ba.height == bb.height

    def test_class_height_profiles(self):
        from citylayout.synth import ClassProfile

        profiles = {
            0: ClassProfile(rows=(2, 3), cols=(3, 5), height_mean=60.0, height_std=6.0, fill_ratio=0.4),
            1: ClassProfile(rows=(2, 3), cols=(3, 5), height_mean=12.0, height_std=2.0, fill_ratio=0.4),
        }
        records = synth_corpus(seed=4, n_blocks=100, profiles=profiles)
        h0 = [b.height for r in records if r.land_use == 0 for b in r.buildings]
        h1 = [b.height for r in records if r.land_use == 1 for b in r.buildings]
        assert abs(np.mean(h0) - 60.0) / 60.0 < 0.1
        assert abs(np.mean(h1) - 12.0) / 12.0 < 0.1

    def test_fill_ratio(self):
        from citylayout.synth import ClassProfile

        profiles = {0: ClassProfile(rows=(2, 4), cols=(3, 6), height_mean=20, height_std=3, fill_ratio=0.4)}
        records = synth_corpus(seed=8, n_blocks=50, profiles=profiles)
        ratios = [
            sum(b.footprint.area for b in r.buildings) / r.boundary.area for r in records
        ]
        assert abs(np.mean(ratios) - 0.4) < 0.05
