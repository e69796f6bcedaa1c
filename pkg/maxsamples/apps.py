from django.apps import AppConfig


class MaxSamplesConfig(AppConfig):
    name = "maxsamples"
    verbose_name = "Max samples inverse classification"

    def ready(self):
        """Connect the logging receivers for solver events."""
        from maxsamples import signals

        signals.outer_iteration_completed.connect(
            signals.log_outer_iteration, dispatch_uid="maxsamples_log_outer"
        )
        signals.run_completed.connect(
            signals.log_run_completed, dispatch_uid="maxsamples_log_run"
        )
