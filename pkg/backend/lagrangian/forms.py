# backend/lagrangian/forms.py
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from django import forms
from django.conf import settings

from .algebra import CASE_CHOICES
from .exceptions import LoopError
from .grids import Grid
from .loops import LoopSpec, lambda_grid
from .suites import SUITE_CHOICES
from .surfaces import EXAMPLE_CHOICES, EXAMPLE_DOMAINS, VacuumParams

COMMAND_CHOICES = (
    ('build', 'Build a surface from a potential file'),
    ('verify', 'Run a verification suite'),
    ('example', 'Write a closed-form example'),
    ('cone', 'Export the cone over a surface'),
)

DEFAULT_DOMAIN = (-1.0, -1.0, 1.0, 1.0)


@dataclass(frozen=True)
class RunConfig:
    command: str
    grid: Grid
    spec: LoopSpec
    lam0: complex
    out: Path
    report: Path
    seed: int
    case: str = 'CP2'
    potential_path: Path = None
    archive: Path = None
    suite: str = None
    example: str = None
    params: VacuumParams = None
    degree: int = 6


def _numbers(value, count, label):
    parts = [part.strip() for part in str(value).split(',')]
    if len(parts) != count:
        raise forms.ValidationError(f"{label} needs {count} comma separated numbers.")
    try:
        return [float(part) for part in parts]
    except ValueError:
        raise forms.ValidationError(f"{label} must be numeric.")


def _complex(value, label):
    re, im = _numbers(value, 2, label)
    return complex(re, im)


class RunConfigForm(forms.Form):
    """
    Validates hslag flags. Precedence is flag > potential file > settings.

    ``file_defaults`` carries the [grid] and [loop] sections of the
    potential file, when there is one.
    """

    command = forms.ChoiceField(choices=COMMAND_CHOICES)
    potential = forms.CharField(required=False)
    archive = forms.CharField(required=False)
    suite = forms.ChoiceField(choices=SUITE_CHOICES, required=False)
    example = forms.ChoiceField(choices=EXAMPLE_CHOICES, required=False)
    case = forms.ChoiceField(choices=CASE_CHOICES, required=False)
    nx = forms.IntegerField(required=False, min_value=3)
    ny = forms.IntegerField(required=False, min_value=3)
    domain = forms.CharField(required=False, help_text="x0,y0,x1,y1")
    lambda_samples = forms.IntegerField(required=False, min_value=4)
    fourier_cap = forms.IntegerField(required=False, min_value=1)
    lambda0 = forms.CharField(required=False, help_text="re,im")
    b = forms.CharField(required=False, help_text="re,im")
    c = forms.CharField(required=False, help_text="re,im")
    out = forms.CharField(required=False)
    report = forms.CharField(required=False)
    seed = forms.IntegerField(required=False, min_value=0)

    def __init__(self, *args, file_defaults=None, **kwargs):
        super().__init__(*args, **kwargs)
        self.file_defaults = file_defaults or {}

    def clean_domain(self):
        value = self.cleaned_data.get('domain')
        if not value:
            return None
        return tuple(_numbers(value, 4, 'Domain'))

    def clean_lambda0(self):
        value = self.cleaned_data.get('lambda0')
        if not value:
            return 1 + 0j
        lam0 = _complex(value, 'lambda0')
        if abs(abs(lam0) - 1) > 1e-9:
            raise forms.ValidationError("lambda0 must lie on the unit circle.")
        return lam0

    def clean_b(self):
        value = self.cleaned_data.get('b')
        return _complex(value, 'b') if value else None

    def clean_c(self):
        value = self.cleaned_data.get('c')
        return _complex(value, 'c') if value else None

    def _pick(self, cleaned, key, file_key, setting):
        if cleaned.get(key) is not None:
            return cleaned[key]
        if file_key in self.file_defaults:
            return self.file_defaults[file_key]
        return settings.HSLAG[setting]

    def clean(self):
        cleaned = super().clean()
        command = cleaned.get('command')
        if command == 'build' and not cleaned.get('potential'):
            self.add_error('potential', "build needs --potential.")
        if command == 'verify' and not cleaned.get('suite'):
            self.add_error('suite', "verify needs a suite name.")
        if cleaned.get('suite') == 'archive' and not cleaned.get('archive'):
            self.add_error('archive', "verify archive needs --archive.")
        if command == 'example' and not cleaned.get('example'):
            self.add_error('example', "example needs a name.")
        if command == 'cone' and not (cleaned.get('potential') or cleaned.get('example')):
            self.add_error('potential', "cone needs --potential or --example.")
        if self.errors:
            return cleaned

        try:
            cleaned['spec'] = LoopSpec.from_settings(
                settings.HSLAG,
                N=self._pick(cleaned, 'lambda_samples', 'lambda_samples', 'LAMBDA_SAMPLES'),
                K=self._pick(cleaned, 'fourier_cap', 'fourier_cap', 'FOURIER_CAP'),
            )
        except LoopError as exc:
            raise forms.ValidationError(str(exc))

        domain = cleaned.get('domain') or self.file_defaults.get('domain')
        if domain is None:
            domain = EXAMPLE_DOMAINS.get(cleaned.get('example'), DEFAULT_DOMAIN)
        try:
            cleaned['grid'] = Grid.from_domain(
                self._pick(cleaned, 'nx', 'nx', 'GRID_NX'),
                self._pick(cleaned, 'ny', 'ny', 'GRID_NY'),
                domain,
            )
        except ValueError as exc:
            raise forms.ValidationError(str(exc))

        lam0 = cleaned['lambda0']
        if np.min(np.abs(lambda_grid(cleaned['spec'].N) - lam0)) > 1e-9:
            self.add_error('lambda0', f"lambda0 must be one of the {cleaned['spec'].N} lambda samples.")

        b, c = cleaned.get('b'), cleaned.get('c')
        cleaned['params'] = None
        if b is not None:
            try:
                cleaned['params'] = VacuumParams(b, c) if c is not None else VacuumParams.minimal(b)
            except ValueError as exc:
                self.add_error('c', str(exc))
        elif c is not None:
            self.add_error('b', "--c needs --b.")
        return cleaned

    def config(self):
        data = self.cleaned_data
        output_dir = Path(settings.HSLAG['OUTPUT_DIR'])
        name = data.get('example') or data.get('suite') or (
            Path(data['potential']).stem if data.get('potential') else data['command']
        )
        out = Path(data['out']) if data.get('out') else output_dir / name
        report = Path(data['report']) if data.get('report') else out.with_suffix('.report.txt')
        return RunConfig(
            command=data['command'],
            grid=data['grid'],
            spec=data['spec'],
            lam0=data['lambda0'],
            out=out,
            report=report,
            seed=data.get('seed') or 0,
            case=data.get('case') or 'CP2',
            potential_path=Path(data['potential']) if data.get('potential') else None,
            archive=Path(data['archive']) if data.get('archive') else None,
            suite=data.get('suite') or None,
            example=data.get('example') or None,
            params=data.get('params'),
            degree=int(settings.HSLAG['POLY_DEGREE']),
        )
