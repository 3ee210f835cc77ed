"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the command-line interface uses for it (1 usage, 2 data, 3 numeric).
"""


class MCPError(Exception):
    code = "MCP_ERROR"
    exit_code = 2

    def __init__(self, message, code=None, **details):
        super().__init__(message)
        if code is not None:
            self.code = code
        self.details = details

    def to_dict(self):
        payload = {"error": self.code, "message": str(self)}
        payload.update(self.details)
        return payload


class UsageError(MCPError):
    code = "USAGE"
    exit_code = 1


class InputError(MCPError, ValueError):
    code = "BAD_INPUT"
    exit_code = 2


class ConfigurationError(MCPError, ValueError):
    code = "BAD_CONFIG"
    exit_code = 2


class FitError(MCPError, RuntimeError):
    code = "FIT_FAILED"
    exit_code = 3
