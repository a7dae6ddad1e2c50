import numpy as np
import pytest

from smnet.feature_store import ClipRecord, Dataset, SynthSpec, generate_synthetic

_acceptance_lines: list[str] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "acceptance" in report.keywords:
        doc = report.nodeid.split("::")[-1]
        _acceptance_lines.append(f"{'PASS' if report.passed else 'FAIL'}  {doc}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_dataset():
    """Two classes, four clips, d=4."""
    rng = np.random.default_rng(3)
    clips = []
    for i, (cls, split) in enumerate([(0, "train"), (0, "test"), (1, "train"), (1, "test")]):
        seg = rng.standard_normal((1 + i % 2, 4)).astype(np.float32)
        clips.append(ClipRecord(f"clip{i}", f"vid{i}", cls, split, seg, 16 * seg.shape[0]))
    return Dataset(clips=clips, class_names=["walk", "run"], raw_dim=4, rng_seed=3)


@pytest.fixture(scope="session")
def small_synth():
    spec = SynthSpec(num_groups=3, classes_per_group=4, clips_per_class=10, dim=12,
                     group_separation=12.0, within_group_spread=3.0, segments_per_clip=(1, 3),
                     seed=5)
    return spec, generate_synthetic(spec)
