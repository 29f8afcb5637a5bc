from hypothesis import HealthCheck, settings

# property tests share the box with training runs; wall-clock deadlines
# would make them flaky under load
settings.register_profile(
    "geoinr", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("geoinr")
