import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cases import TABLE_SPECS  # noqa: E402


@pytest.fixture(params=sorted(TABLE_SPECS), ids=str)
def table_case(request):
    return request.param, TABLE_SPECS[request.param]
