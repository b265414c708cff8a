import numpy as np
import pytest

from scalestream import LabelMap, PointStream, default_room, place_cameras


def make_random_stream(rng: np.random.Generator, n: int, class_count: int = 11,
                       with_label_map: bool = False, t_max: int = 100000) -> PointStream:
    positions = rng.uniform(-10, 10, size=(n, 3)).astype(np.float32)
    labels = rng.integers(0, class_count, size=n)
    timestamps = np.sort(rng.integers(0, t_max, size=n))
    label_map = None
    if with_label_map:
        label_map = LabelMap(tuple(f"c{i}" for i in range(class_count)))
    meta = {"origin": "test", "n": str(n)} if rng.random() < 0.5 else None
    return PointStream(positions, labels, timestamps, class_count, label_map, meta)


@pytest.fixture(scope="session")
def room():
    return default_room()


@pytest.fixture(scope="session")
def default_pose(room):
    return place_cameras(room, seed=0)[0]
