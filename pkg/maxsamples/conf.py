"""Configuration for maxsamples."""

from django.conf import settings


class MaxSamplesSettings:
    """Configuration holder for maxsamples.

    Values come from the ``MAXSAMPLES`` Django setting. Outside a configured
    Django project every property falls back to its default.
    """

    def _settings(self) -> dict:
        if not settings.configured:
            return {}
        return getattr(settings, "MAXSAMPLES", {})

    @property
    def hyperparams(self) -> dict:
        """Project-wide HyperParams overrides."""
        return dict(self._settings().get("HYPERPARAMS", {}))

    @property
    def knapsack_exact_limit(self) -> int:
        """Largest candidate set solved by exact branch-and-bound."""
        return int(self._settings().get("KNAPSACK_EXACT_LIMIT", 40))

    @property
    def probability_floor(self) -> float:
        """Floor applied to predicted probabilities inside logarithms."""
        return float(self._settings().get("PROBABILITY_FLOOR", 1e-12))

    @property
    def unlimited_budget(self) -> float:
        """Finite stand-in for an unlimited per-feature budget."""
        return float(self._settings().get("UNLIMITED_BUDGET", 1e9))

    @property
    def trace_log(self) -> bool:
        """Log one structured record per solver outer iteration."""
        return bool(self._settings().get("TRACE_LOG", False))

    @property
    def output_dir(self) -> str:
        """Default directory for experiment outputs."""
        return self._settings().get("OUTPUT_DIR", "runs")

    @property
    def verify_on_write(self) -> bool:
        """Replay repair feasibility after every sweep row is written."""
        return bool(self._settings().get("VERIFY_ON_WRITE", True))


# Global config instance
maxsamples_config = MaxSamplesSettings()
