"""
Text reports for the Heavy Ball lab.
This module holds the Jinja2 templates for CSV comment headers and the selftest report.
"""
from typing import Any, Dict, List

from jinja2 import Template


def get_peak_template() -> Template:
    """
    Return the Jinja2 template for the peak command's comment header.

    Expects rec, roots, stable, peak, k_peak and an optional report (PeakReport).
    """
    return Template("""recurrence a1={{ fmt(rec.a1) }} a2={{ fmt(rec.a2) }} x0={{ fmt(rec.x0) }} x1={{ fmt(rec.x1) }}
roots {{ roots }}
stable={{ stable|lower }}
peak={{ fmt(peak) }} k_peak={{ k_peak }}
{% if report %}k_continuous={{ fmt(report.k_continuous) }} k_star={{ report.k_star }} envelope_peak={{ fmt(report.peak) }} eta_asymptotic={{ fmt(report.eta_asymptotic) }} k_ceiling={{ report.k_ceiling }}
{% endif %}""")


def get_run_template() -> Template:
    """Return the Jinja2 template for the header of run and adaptive trajectories."""
    return Template("""experiment={{ name }} command={{ command }} status={{ status }}
problem={{ problem }} dim={{ dim }}
{% for change in params_history %}params k={{ change.k }} alpha={{ fmt(change.params.alpha) }} beta={{ fmt(change.params.beta) }}{% if change.L_estimate is not none %} L_estimate={{ fmt(change.L_estimate) }}{% endif %}
{% endfor %}{% if doublings is not none %}doublings={{ doublings }} iterations={{ iterations }}
{% endif %}""")


def get_selftest_template() -> Template:
    """Return the Jinja2 template for the selftest report."""
    return Template("""SELFTEST: {{ passed }}/{{ total }} checks passed
{% for check in checks %}[{{ 'PASS' if check.passed else 'FAIL' }}] {{ check.name }} ({{ '%.2f'|format(check.seconds) }} s){% if check.detail %}
       {{ check.detail }}{% endif %}
{% endfor %}""")


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def render_lines(template: Template, **context: Any) -> List[str]:
    """Render a template and split it into non-empty lines."""
    text = template.render(fmt=_fmt, **context)
    return [line for line in text.splitlines() if line.strip()]


def render_selftest_report(checks: List[Any]) -> str:
    passed = sum(1 for c in checks if c.passed)
    return get_selftest_template().render(checks=checks, passed=passed, total=len(checks))


def summary_context(trajectory, **extra: Any) -> Dict[str, Any]:
    context = {"status": trajectory.status.value, "params_history": trajectory.params_history,
               "doublings": None, "iterations": len(trajectory) - 1}
    context.update(extra)
    return context
