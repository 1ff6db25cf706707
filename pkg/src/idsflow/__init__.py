__all__ = ["backend", "frontend"]
