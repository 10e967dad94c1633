import math

import pytest

from waymark.geometry import CameraSpec


@pytest.fixture
def cam50():
    """Camera used throughout the field trials: 2 m range, 50 degree view."""
    return CameraSpec(range_r=2.0, view_angle=math.radians(50.0), clearance=0.0)
