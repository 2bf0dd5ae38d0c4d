import pytest

from streamsim.config import ExperimentConfig, default_repository
from streamsim.domain import FunctionSpec, SizeClass


@pytest.fixture
def repo():
    return default_repository()


@pytest.fixture
def cfg():
    return ExperimentConfig()


def make_spec(
    fid="fx",
    memory_mb=256.0,
    exec_time_s=4.0,
    start_time_s=1.0,
    init_time_s=1.5,
    transfer_time_s=0.02,
    size_class=SizeClass.MEDIUM,
):
    return FunctionSpec(
        function_id=fid,
        memory_mb=memory_mb,
        exec_time_s=exec_time_s,
        start_time_s=start_time_s,
        init_time_s=init_time_s,
        transfer_time_s=transfer_time_s,
        size_class=size_class,
    )
