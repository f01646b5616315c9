import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stepnav.rom import PipmParams
from stepnav.safety import SafetyParams

OMEGA = 3.15


@pytest.fixture
def pipm() -> PipmParams:
    return PipmParams.from_omega(OMEGA)


@pytest.fixture
def safety() -> SafetyParams:
    return SafetyParams(v_apex_min=0.2, v_apex_max=0.7, v_max=1.5, omega=OMEGA)
