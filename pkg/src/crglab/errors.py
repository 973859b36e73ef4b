class CapExceeded(RuntimeError):
    """An exact enumeration or search would exceed the configured size cap."""

    def __init__(self, what: str, size: int, cap: int):
        super().__init__(f"{what}: estimated size {size} exceeds cap {cap}")
        self.size = size
        self.cap = cap


class ProtocolError(RuntimeError):
    """A protocol run violated its declared structure."""


class BudgetExceeded(ProtocolError):
    def __init__(self, round_index: int, message: str):
        super().__init__(f"round {round_index}: {message}")
        self.round_index = round_index
