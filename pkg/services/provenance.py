"""
Build identifier stamped on every result row
"""
import subprocess


def build_id() -> str:
    """`git describe` of the working tree, or "unknown" outside a checkout"""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, timeout=5, check=True,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"
