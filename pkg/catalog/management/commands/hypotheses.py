from catalog.management.commands._base import AnalysisCommand


class Command(AnalysisCommand):
    help = 'Probe the six structural hypotheses of a singular system; exit 2 when any fails'
    command = 'hypotheses'
    kinds = ('singular',)

    def add_command_arguments(self, parser):
        parser.add_argument('--radius', type=float, help='radius of the sample ball')
        parser.add_argument('--n-samples', type=int, help='points in the sample cloud')
        parser.add_argument('--tol', type=float, help='hypothesis tolerance')
        parser.add_argument('--angle-tol', type=float, help='transversality angle tolerance')
        parser.add_argument('--chart-delta', type=float, help='radius of the center chart used by H3')
        parser.add_argument('--grid-n', type=int, help='points of the chart trajectory grid')
