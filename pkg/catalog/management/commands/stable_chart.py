from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Stable manifold chart of a linear field or of dV/dtau = F'
    command = 'stable_chart'
    kinds = ('linear', 'singular')

    def add_command_arguments(self, parser):
        parser.add_argument('--delta', type=float, help='chart radius (default 0.1)')
        parser.add_argument('--grid-n', type=int, help='points of the trajectory grid')
        parser.add_argument('--base-n', type=int, help='tabulated points per base axis (0: none)')
        parser.add_argument('--fp-tol', type=float, help='fixed-point tolerance')
        parser.add_argument('--max-iter', type=int, help='fixed-point iteration cap')
