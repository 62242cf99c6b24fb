"""Two-stage experiment schedule generation.

The full-scale protocol shows 400 study images (50 per leaf category),
then 400 test images per participant: 200 repeats from the study phase
(25 per leaf) and 200 unseen fillers (25 per leaf), both phases in
randomized order.

Determinism contract: given the same manifest and 64-bit seed the
schedule is identical, byte for byte.  Draw order is fixed: leaves are
visited in category-tree order; within each leaf the image ids are
sorted, shuffled once, and split as [0:study] study images,
[0:repeats] of those as repeats, [study:study+fillers] as fillers;
finally the study list and the test list are each shuffled once more.
All shuffles consume a single SplitMix64 stream (see rng module).
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ScheduleError
from .manifest import DatasetManifest
from .rng import SplitMix64Stream
from .session import ROLE_FILLER, ROLE_REPEAT


@dataclass(frozen=True)
class ScheduleConfig:
    study_per_leaf: int = 50
    repeats_per_leaf: int = 25
    fillers_per_leaf: int = 25
    # Full-scale stimulus sets carry 100 images per leaf; scheduling
    # requires the whole pool so every image has an equal chance of use.
    min_images_per_leaf: int = 100

    def validate(self) -> None:
        if min(self.study_per_leaf, self.repeats_per_leaf, self.fillers_per_leaf) <= 0:
            raise ScheduleError("schedule counts must be positive")
        if self.repeats_per_leaf > self.study_per_leaf:
            raise ScheduleError("repeats_per_leaf cannot exceed study_per_leaf")
        if self.min_images_per_leaf < self.study_per_leaf + self.fillers_per_leaf:
            raise ScheduleError(
                "min_images_per_leaf must cover study_per_leaf + fillers_per_leaf"
            )


@dataclass(frozen=True)
class ScheduledTest:
    image_id: str
    role: str


@dataclass(frozen=True)
class Schedule:
    seed: int
    study: tuple[str, ...]
    test: tuple[ScheduledTest, ...]

    def counts(self) -> tuple[int, int, int]:
        repeats = sum(1 for t in self.test if t.role == ROLE_REPEAT)
        return len(self.study), len(self.test), repeats

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "study": list(self.study),
            "test": [{"image_id": t.image_id, "role": t.role} for t in self.test],
        }


def generate_schedule(
    manifest: DatasetManifest, seed: int, config: ScheduleConfig | None = None
) -> Schedule:
    config = config or ScheduleConfig()
    config.validate()
    stream = SplitMix64Stream(seed)
    groups = manifest.by_leaf()
    study: list[str] = []
    test: list[ScheduledTest] = []
    for leaf in manifest.categories.leaves():
        ids = sorted(rec.id for rec in groups.get(leaf, []))
        if len(ids) < config.min_images_per_leaf:
            raise ScheduleError(
                f"leaf {leaf!r} has {len(ids)} images, "
                f"schedule requires at least {config.min_images_per_leaf}"
            )
        stream.shuffle(ids)
        leaf_study = ids[: config.study_per_leaf]
        repeats = leaf_study[: config.repeats_per_leaf]
        fillers = ids[config.study_per_leaf : config.study_per_leaf + config.fillers_per_leaf]
        study.extend(leaf_study)
        test.extend(ScheduledTest(i, ROLE_REPEAT) for i in repeats)
        test.extend(ScheduledTest(i, ROLE_FILLER) for i in fillers)
    stream.shuffle(study)
    stream.shuffle(test)
    return Schedule(seed=seed, study=tuple(study), test=tuple(test))
