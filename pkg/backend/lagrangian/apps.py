from django.apps import AppConfig


class LagrangianConfig(AppConfig):
    name = 'lagrangian'
    verbose_name = 'Hamiltonian stationary Lagrangian surfaces'

    def ready(self):
        # register system checks for the HSLAG settings block
        import lagrangian.checks  # noqa
