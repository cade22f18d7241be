class ParameterError(ValueError):
    pass


class StashOverflow(RuntimeError):
    """The stash had no free slot for a key the eviction walk could not place."""


class DuplicateKey(KeyError):
    pass


class CapacityExceeded(RuntimeError):
    pass


class NotFound(KeyError):
    pass


class TallCacheViolation(ValueError):
    pass


class ReducerStateViolation(RuntimeError):
    pass


class CeilingViolation(RuntimeError):
    pass


class InfeasibleStash(RuntimeError):
    def __init__(self, needed: int, capacity: int):
        super().__init__(f"stash needs {needed} slots, capacity {capacity}")
        self.needed = needed
        self.capacity = capacity


class BuildFailure(RuntimeError):
    pass


class KeyOutOfRange(IndexError):
    pass


class InternalNotFound(RuntimeError):
    pass


class OutOfRange(IndexError):
    pass
