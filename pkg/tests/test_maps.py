import numpy as np
import pytest

from memschema.errors import DegenerateMapError, EmptyVmsError, MemschemaError
from memschema.maps import (
    MapGrid,
    SelectionIndex,
    VmsKind,
    build_vms,
    rasterize_selections,
    resize_map,
    to_png16,
)

from conftest import FULL_RECT, make_log, rect, trial


# --- rasterization ------------------------------------------------------

def test_full_rect_covers_everything():
    mask = rasterize_selections([FULL_RECT], (10, 10))
    assert np.array_equal(mask.values, np.ones((10, 10)))


def test_half_rect_covers_left_columns():
    mask = rasterize_selections([rect(0.0, 0.0, 0.5, 1.0)], (10, 10))
    expected = np.zeros((10, 10))
    expected[:, :5] = 1.0
    assert np.array_equal(mask.values, expected)


def point_in_rect_oracle(rects, grid):
    width, height = grid
    out = np.zeros((height, width))
    for row in range(height):
        for col in range(width):
            cx = (col + 0.5) / width
            cy = (row + 0.5) / height
            if any(r.x0 <= cx <= r.x1 and r.y0 <= cy <= r.y1 for r in rects):
                out[row, col] = 1.0
    return out


def test_overlapping_union_matches_per_cell_oracle():
    rng = np.random.default_rng(5)
    for _ in range(25):
        rects = []
        for _ in range(int(rng.integers(1, 4))):
            x = np.sort(rng.uniform(0, 1, 2))
            y = np.sort(rng.uniform(0, 1, 2))
            if x[1] - x[0] < 0.15 or y[1] - y[0] < 0.15:
                continue
            rects.append(rect(x[0], y[0], x[1], y[1]))
        if not rects:
            continue
        mask = rasterize_selections(rects, (17, 13))
        assert set(np.unique(mask.values)) <= {0.0, 1.0}
        assert np.array_equal(mask.values, point_in_rect_oracle(rects, (17, 13)))


def test_degenerate_selection_rejected():
    # Sits strictly between the centers of adjacent cells on a 4x4 grid.
    with pytest.raises(DegenerateMapError, match="degenerate selection"):
        rasterize_selections([rect(0.3, 0.3, 0.35, 0.35)], (4, 4))


# --- accumulation -------------------------------------------------------

def test_single_participant_full_rect():
    logs = [make_log("p1", [trial("img", "repeat", 80, [FULL_RECT])])]
    vms = build_vms(logs, "img", VmsKind.TRUE, grid=(10, 10))
    assert np.array_equal(vms.values, np.ones((10, 10)))


def test_two_participants_disjoint_halves():
    logs = [
        make_log("p1", [trial("img", "repeat", 80, [rect(0.0, 0.0, 0.5, 1.0)])]),
        make_log("p2", [trial("img", "repeat", 80, [rect(0.5, 0.0, 1.0, 1.0)])]),
    ]
    vms = build_vms(logs, "img", VmsKind.TRUE, grid=(10, 10))
    assert np.allclose(vms.values, 0.5)


def test_hand_accumulation_oracle():
    logs = [
        make_log("p1", [trial("img", "repeat", 80, [rect(0.0, 0.0, 0.5, 1.0)])]),
        make_log("p2", [trial("img", "repeat", 60, [rect(0.0, 0.0, 0.5, 1.0), rect(0.0, 0.0, 1.0, 0.5)])]),
        make_log("p3", [trial("img", "repeat", 45, [FULL_RECT])]),
    ]
    vms = build_vms(logs, "img", VmsKind.TRUE, grid=(4, 4))
    # left half selected by all 3; top-right quarter by p2+p3; bottom-right by p3 only
    expected = np.array(
        [
            [1, 1, 2 / 3, 2 / 3],
            [1, 1, 2 / 3, 2 / 3],
            [1, 1, 1 / 3, 1 / 3],
            [1, 1, 1 / 3, 1 / 3],
        ]
    )
    assert np.allclose(vms.values, expected)


def test_below_threshold_and_empty_trials_do_not_contribute():
    logs = [
        make_log("p1", [trial("img", "repeat", 80, [FULL_RECT])]),
        make_log("p2", [trial("img", "repeat", 35, [rect(0.0, 0.0, 0.2, 0.2)])]),  # below 40
        make_log("p3", [trial("img", "repeat", 10)]),  # no selections
    ]
    vms = build_vms(logs, "img", VmsKind.TRUE, threshold=40, grid=(5, 5))
    assert np.array_equal(vms.values, np.ones((5, 5)))


def test_empty_vms_error_for_false_kind():
    logs = [make_log("p1", [trial("img", "repeat", 80, [FULL_RECT])])]
    with pytest.raises(EmptyVmsError, match="empty VMS"):
        build_vms(logs, "img", VmsKind.FALSE, grid=(5, 5))


def test_order_invariance():
    logs = [
        make_log("p1", [trial("img", "repeat", 80, [rect(0.0, 0.0, 0.5, 0.5)])]),
        make_log("p2", [trial("img", "repeat", 70, [rect(0.25, 0.25, 1.0, 1.0)])]),
        make_log("p3", [trial("img", "repeat", 90, [FULL_RECT])]),
    ]
    a = build_vms(logs, "img", VmsKind.TRUE, grid=(9, 9))
    b = build_vms(logs[::-1], "img", VmsKind.TRUE, grid=(9, 9))
    assert a == b


def test_combined_numerator_is_sum_of_true_and_false():
    logs = [
        make_log("p1", [trial("img", "repeat", 80, [rect(0.0, 0.0, 0.5, 1.0)])]),
        make_log("p2", [trial("img", "filler", 70, [rect(0.5, 0.0, 1.0, 1.0)])]),
        make_log("p3", [trial("img", "filler", 90, [FULL_RECT])]),
    ]
    t = build_vms(logs, "img", VmsKind.TRUE, grid=(8, 8))
    f = build_vms(logs, "img", VmsKind.FALSE, grid=(8, 8))
    c = build_vms(logs, "img", VmsKind.COMBINED, grid=(8, 8))
    assert np.allclose(c.values * 3, t.values * 1 + f.values * 2)


def test_values_stay_in_unit_interval():
    rng = np.random.default_rng(3)
    logs = []
    for p in range(11):
        x = np.sort(rng.uniform(0, 1, 2))
        y = np.sort(rng.uniform(0, 1, 2))
        x[1] = max(x[1], x[0] + 0.3)
        y[1] = max(y[1], y[0] + 0.3)
        role = "repeat" if p % 2 else "filler"
        logs.append(
            make_log(f"p{p}", [trial("img", role, 40 + p, [rect(x[0], y[0], min(x[1], 1), min(y[1], 1))])])
        )
    for kind in VmsKind:
        vms = build_vms(logs, "img", kind, grid=(20, 20))
        assert vms.values.min() >= 0.0
        assert vms.values.max() <= 1.0


def test_single_participant_equals_union_mask():
    sels = [rect(0.1, 0.1, 0.4, 0.9), rect(0.3, 0.2, 0.8, 0.6)]
    logs = [make_log("solo", [trial("img", "repeat", 55, sels)])]
    vms = build_vms(logs, "img", VmsKind.TRUE, grid=(30, 30))
    assert vms == rasterize_selections(sels, (30, 30))


def test_selection_index_participant_filter():
    logs = [
        make_log("p1", [trial("img", "repeat", 80, [rect(0.0, 0.0, 0.5, 1.0)])]),
        make_log("p2", [trial("img", "repeat", 80, [FULL_RECT])]),
    ]
    index = SelectionIndex(logs)
    only_p1 = index.build("img", VmsKind.TRUE, grid=(4, 4), participants={"p1"})
    assert np.array_equal(only_p1.values, rasterize_selections([rect(0, 0, 0.5, 1)], (4, 4)).values)


# --- resizing -----------------------------------------------------------

def test_resize_constant_map():
    vms = MapGrid(np.full((700, 700), 0.5))
    out = resize_map(vms, (20, 20))
    assert out.dims == (20, 20)
    assert np.allclose(out.values, 0.5)


def test_resize_exact_block_average():
    quadrants = np.block(
        [[np.full((2, 2), 0.1), np.full((2, 2), 0.3)], [np.full((2, 2), 0.7), np.full((2, 2), 0.9)]]
    )
    out = resize_map(MapGrid(quadrants), (2, 2))
    assert np.allclose(out.values, [[0.1, 0.3], [0.7, 0.9]])


def test_resize_preserves_mean_integer_downsample():
    rng = np.random.default_rng(1)
    v = rng.uniform(0, 1, (100, 100))
    out = resize_map(MapGrid(v), (50, 50))
    assert abs(out.values.mean() - v.mean()) < 1e-6


def test_resize_upsample_within_range():
    rng = np.random.default_rng(2)
    v = rng.uniform(0.2, 0.8, (7, 9))
    out = resize_map(MapGrid(v), (30, 21))
    assert out.dims == (30, 21)
    assert out.values.min() >= v.min() - 1e-12
    assert out.values.max() <= v.max() + 1e-12


def test_resize_non_integer_downsample_within_range_and_mean():
    rng = np.random.default_rng(4)
    v = rng.uniform(0, 1, (31, 17))
    out = resize_map(MapGrid(v), (9, 11))
    assert abs(out.values.mean() - v.mean()) < 1e-9
    assert out.values.min() >= v.min() - 1e-12


def test_png_export(tmp_path):
    from PIL import Image

    vms = MapGrid(np.linspace(0, 1, 64).reshape(8, 8))
    path = tmp_path / "m.png"
    to_png16(vms, path)
    with Image.open(path) as im:
        back = np.asarray(im)
    assert back.dtype == np.uint16 or back.dtype == np.int32
    assert back.max() == 65535


def test_map_grid_rejects_negative():
    with pytest.raises(MemschemaError, match="negative"):
        MapGrid(np.array([[-0.1, 0.2]]))


def test_overlap_sum_counts_multiplicity():
    sels = [rect(0.0, 0.0, 0.5, 1.0), rect(0.25, 0.0, 1.0, 1.0)]
    logs = [make_log("solo", [trial("img", "repeat", 60, sels)])]
    union = build_vms(logs, "img", VmsKind.TRUE, grid=(4, 4), overlap="union")
    summed = build_vms(logs, "img", VmsKind.TRUE, grid=(4, 4), overlap="sum")
    assert union.values.max() == 1.0
    # middle column centers fall inside both rectangles
    assert summed.values[:, 1].max() == 2.0
    oracle = (
        rasterize_selections([sels[0]], (4, 4)).values
        + rasterize_selections([sels[1]], (4, 4)).values
    )
    assert np.array_equal(summed.values, oracle)


def test_overlap_mode_validated():
    logs = [make_log("solo", [trial("img", "repeat", 60, [FULL_RECT])])]
    with pytest.raises(MemschemaError, match="overlap"):
        build_vms(logs, "img", VmsKind.TRUE, grid=(4, 4), overlap="max")
