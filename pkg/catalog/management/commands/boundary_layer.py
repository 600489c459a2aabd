from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = "Boundary layer U' = f(U) - f(u0) on x >= 0 from U(0) = ub to u0"
    command = 'boundary_layer'
    kinds = ('flux',)

    def add_command_arguments(self, parser):
        parser.add_argument('--u0', help='far-field state, comma separated')
        parser.add_argument('--ub', help='boundary state, comma separated')
        parser.add_argument('--horizon', type=float, help='initial integration horizon')
        parser.add_argument('--tol', type=float, help='arrival tolerance at u0')
        parser.add_argument('--delta', type=float, help='radius of the stable chart at u0')
