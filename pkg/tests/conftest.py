import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from teyolof.config import BackboneConfig, TEYOLOFConfig  # noqa: E402


def tiny_config(**overrides) -> TEYOLOFConfig:
    """A narrow, shallow model for fast training tests."""
    cfg = TEYOLOFConfig(
        backbone=BackboneConfig(stage_base_depths=(1, 1, 1, 1, 1), stage_base_widths=(8, 8, 16, 16, 16),
                                stem_width=8, head_width=16),
        encoder_channels=16, encoder_dilations=(2, 4), cls_head_depth=1, reg_head_depth=1,
        input_resolution=64,
    )
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


@pytest.fixture
def tiny_cfg():
    return tiny_config()
