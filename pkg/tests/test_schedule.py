import pytest

from memschema.errors import ScheduleError
from memschema.manifest import DatasetManifest
from memschema.rng import SplitMix64Stream
from memschema.schedule import ScheduleConfig, generate_schedule

from conftest import tiny_manifest


def full_manifest(per_leaf=100):
    return tiny_manifest(images_per_leaf=per_leaf)


def test_default_protocol_counts():
    schedule = generate_schedule(full_manifest(), seed=7)
    study, test, repeats = schedule.counts()
    assert (study, test, repeats) == (400, 400, 200)


def test_per_leaf_uniformity():
    manifest = full_manifest()
    leaf_of = {rec.id: rec.category for rec in manifest.images}
    schedule = generate_schedule(manifest, seed=3)
    per_leaf_study = {}
    per_leaf_test = {}
    per_leaf_repeat = {}
    for i in schedule.study:
        per_leaf_study[leaf_of[i]] = per_leaf_study.get(leaf_of[i], 0) + 1
    for t in schedule.test:
        per_leaf_test[leaf_of[t.image_id]] = per_leaf_test.get(leaf_of[t.image_id], 0) + 1
        if t.role == "repeat":
            per_leaf_repeat[leaf_of[t.image_id]] = per_leaf_repeat.get(leaf_of[t.image_id], 0) + 1
    assert set(per_leaf_study.values()) == {50}
    assert set(per_leaf_test.values()) == {50}
    assert set(per_leaf_repeat.values()) == {25}


def test_repeats_come_from_study_fillers_do_not():
    schedule = generate_schedule(full_manifest(), seed=11)
    studied = set(schedule.study)
    for t in schedule.test:
        if t.role == "repeat":
            assert t.image_id in studied
        else:
            assert t.image_id not in studied


def test_no_duplicates_within_phase():
    schedule = generate_schedule(full_manifest(), seed=5)
    assert len(set(schedule.study)) == len(schedule.study)
    test_ids = [t.image_id for t in schedule.test]
    assert len(set(test_ids)) == len(test_ids)


def test_same_seed_identical_schedule():
    manifest = full_manifest()
    a = generate_schedule(manifest, seed=42)
    b = generate_schedule(manifest, seed=42)
    assert a == b


def test_different_seed_differs():
    manifest = full_manifest()
    assert generate_schedule(manifest, seed=1) != generate_schedule(manifest, seed=2)


def test_insufficient_leaf_errors():
    manifest = full_manifest()
    # Drop one image from one leaf: 99 < required 100.
    records = [r for r in manifest.images if r.id != manifest.images[0].id]
    short = DatasetManifest(images=records, categories=manifest.categories)
    with pytest.raises(ScheduleError, match="at least 100"):
        generate_schedule(short, seed=0)


def test_desk_scale_config():
    manifest = tiny_manifest(images_per_leaf=3)
    config = ScheduleConfig(
        study_per_leaf=1, repeats_per_leaf=1, fillers_per_leaf=1, min_images_per_leaf=2
    )
    schedule = generate_schedule(manifest, seed=0, config=config)
    assert schedule.counts() == (8, 16, 8)


def test_bad_config_rejected():
    with pytest.raises(ScheduleError):
        ScheduleConfig(study_per_leaf=10, repeats_per_leaf=11, fillers_per_leaf=1).validate()
    with pytest.raises(ScheduleError):
        ScheduleConfig(min_images_per_leaf=10).validate()


def test_splitmix_stream_unbiased_bounds():
    stream = SplitMix64Stream(123)
    draws = [stream.next_below(7) for _ in range(2000)]
    assert set(draws) == set(range(7))


def test_splitmix_counter_is_stateless_per_index():
    a = SplitMix64Stream(99)
    first = [a.next_u64() for _ in range(5)]
    b = SplitMix64Stream(99)
    assert [b.next_u64() for _ in range(5)] == first
