from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Integrate dV/dt = F / zeta up to t-end or the first arrival at zeta = 0'
    command = 'singular_integrate'
    kinds = ('singular',)

    def add_command_arguments(self, parser):
        parser.add_argument('--v0', help='initial state, comma separated')
        parser.add_argument('--t-end', type=float, help='final time (default 1)')
        parser.add_argument('--guard-tol', type=float, help='|zeta| guard band relative to 1 + |V|')
        parser.add_argument('--step-tol', type=float, help='relative tolerance of the tau integration')
        parser.add_argument('--bisect-tol', type=float, help='tolerance of the hit-time bisection')
