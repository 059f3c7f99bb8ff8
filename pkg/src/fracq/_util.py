"""Small shared helpers."""
import os


def workers() -> int:
    """Worker count for FFTs and batched evaluation, capped by FRACQ_THREADS (0 = auto)."""
    raw = os.environ.get("FRACQ_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        n = 0
    cpu = os.cpu_count() or 1
    return cpu if n <= 0 else max(1, min(n, cpu))
