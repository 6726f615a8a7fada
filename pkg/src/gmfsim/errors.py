class GmfError(Exception):
    """Base class for all simulator errors."""


class DimensionError(GmfError, ValueError):
    pass


class PreconditionError(GmfError, ValueError):
    pass


class CodecError(GmfError, ValueError):
    pass


class DatasetError(GmfError, ValueError):
    pass


class PartitionError(GmfError, ValueError):
    pass


class ConfigError(GmfError, ValueError):
    pass


class RunError(GmfError, RuntimeError):
    """A federated run aborted; carries the round and client where it failed."""

    def __init__(self, message, round_index=None, client_id=None):
        where = []
        if round_index is not None:
            where.append(f"round {round_index}")
        if client_id is not None:
            where.append(f"client {client_id}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.round_index = round_index
        self.client_id = client_id
