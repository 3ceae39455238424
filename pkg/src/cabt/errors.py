"""Exception hierarchy.

``InputError`` subclasses describe bad inputs (CLI exit code 2),
``RunError`` subclasses describe failures while executing (exit code 3).
"""


class CabtError(Exception):
    pass


class InputError(CabtError):
    pass


class RunError(CabtError):
    pass


class SchemaError(InputError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class SemanticError(InputError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class OverlapError(InputError):
    pass


class AlignmentError(InputError):
    pass


class IllegalInstruction(InputError):
    def __init__(self, word, addr=None, reason="no matching opcode"):
        self.word = word
        self.addr = addr
        where = "" if addr is None else f" at {addr:#010x}"
        super().__init__(f"illegal instruction {word:#010x}{where}: {reason}")


class TargetOutOfRange(InputError):
    def __init__(self, src_addr, target):
        self.src_addr = src_addr
        self.target = target
        super().__init__(
            f"control transfer at {src_addr:#010x} targets {target:#010x}, "
            "outside executable sections"
        )


class MissingCacheSpec(InputError):
    def __init__(self):
        super().__init__("detail level 3 requires an icache in the processor description")


class AddressOutOfRange(InputError):
    def __init__(self, addr):
        self.addr = addr
        super().__init__(f"address {addr:#010x} out of range")


class SyncProtocolViolation(RunError):
    pass


class UnknownDevice(RunError):
    pass


class DuplicateDevice(CabtError):
    pass


class OpLimitExceeded(RunError):
    def __init__(self, limit):
        self.limit = limit
        super().__init__(f"operation limit of {limit} exceeded")


class MemoryFault(RunError):
    pass


class AnalysisUnsound(RunError):
    """A statically resolved address disagreed with the runtime address."""


class AlreadyHalted(RunError):
    pass
