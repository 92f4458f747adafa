import pytest

from helpers.backend_helpers import compile_program
from helpers.ir_text_helpers import parse_program

RETURN_PROGRAM = """\
ir 1
main 1 0
component 1
  export 0
  proc 0
    const 0x9 r3
    return
  end
end
"""

# Component 1 stores, then calls component 2 with r3 = 42.
CALL_PROGRAM = """\
ir 1
main 1 0
component 1
  export 0
  import 2 0
  block 0 size 2
  proc 0
    const ptr 0 1 r20
    const 0x2a r3
    store r20 r3
    call 2 0
    return
  end
end
component 2
  export 0
  proc 0
    return
  end
end
"""

NESTED_PROGRAM = """\
ir 1
main 1 0
component 1
  export 0
  import 2 0
  proc 0
    const 0x7 r3
    call 2 0
    return
  end
end
component 2
  export 0
  import 3 0
  proc 0
    call 3 0
    return
  end
end
component 3
  export 0
  proc 0
    const 0x9 r3
    return
  end
end
"""

# Component 2 jumps straight to its own return, skipping its nested call.
EARLY_RETURN_PROGRAM = """\
ir 1
main 1 0
component 1
  export 0
  import 2 0
  proc 0
    const 0x1 r3
    call 2 0
    return
  end
end
component 2
  export 0
  import 3 0
  proc 0
    const label out r22
    jump r22
    call 3 0
    label out
    return
  end
end
component 3
  export 0
  proc 0
    return
  end
end
"""


@pytest.fixture
def return_program():
    return parse_program(RETURN_PROGRAM)


@pytest.fixture
def call_program():
    return parse_program(CALL_PROGRAM)


@pytest.fixture
def nested_program():
    return parse_program(NESTED_PROGRAM)


@pytest.fixture
def early_return_program():
    return parse_program(EARLY_RETURN_PROGRAM)


@pytest.fixture
def call_object(call_program):
    return compile_program(call_program)


@pytest.fixture
def build():
    """Parse and compile IR text in one go."""
    def _build(text: str, **kwargs):
        return compile_program(parse_program(text), **kwargs)
    return _build
