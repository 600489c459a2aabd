from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Stable, unstable and center parts of a linearization (linear A, singular DF(0) or flux Df(u))'
    command = 'spectrum'
    kinds = ('linear', 'singular', 'flux')

    def add_command_arguments(self, parser):
        parser.add_argument('--u', help='state u for a flux, comma separated')
        parser.add_argument('--tol-zero', type=float, help='real parts below this count as zero')
        parser.add_argument('--x0', help='initial state of a linear trajectory x(t) = exp(A t) x0, comma separated')
        parser.add_argument('--t-end', type=float, help='end time of the linear trajectory (default 1)')
        parser.add_argument('--n', type=int, help='samples of the linear trajectory (default 101)')
