from django.conf import settings
from django.core.checks import Error, register

from .exceptions import LoopError
from .loops import LoopSpec


@register()
def check_hslag_defaults(app_configs, **kwargs):
    """Configured loop defaults must form a valid LoopSpec."""
    config = getattr(settings, 'HSLAG', None)
    if config is None:
        return [Error(
            'HSLAG settings block is missing.',
            hint='Define HSLAG in hslag_backend/settings.py.',
            id='lagrangian.E001',
        )]
    try:
        LoopSpec.from_settings(config)
    except (LoopError, KeyError, TypeError) as exc:
        return [Error(
            f'Invalid HSLAG loop defaults: {exc}',
            hint='Check the HSLAG_* environment variables.',
            id='lagrangian.E001',
        )]
    return []
