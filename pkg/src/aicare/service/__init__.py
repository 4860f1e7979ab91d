from .app import (DEFAULT_TASK_DEFINITION, SchemaMismatchError,
                  ServiceRuntime, create_app, load_runtime, serve)
from .store import ServingStore

__all__ = ["DEFAULT_TASK_DEFINITION", "SchemaMismatchError", "ServiceRuntime",
           "create_app", "load_runtime", "serve", "ServingStore"]
